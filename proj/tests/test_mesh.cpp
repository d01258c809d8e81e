#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "pmgn/ingest.hpp"
#include "pmgn/mesh.hpp"
#include "pmgn/rng.hpp"
#include "pmgn/synth.hpp"
#include "pmgn/trajectory_io.hpp"

using namespace pmgn;
namespace fs = std::filesystem;

namespace {

std::string temp_path(const char* name) {
  return (fs::temp_directory_path() / name).string();
}

Trajectory random_trajectory(Rng& rng) {
  SynthParams p;
  p.n_nodes = 10 + rng.next_below(30);
  p.n_frames = 2 + rng.next_below(4);
  p.flow_scale = rng.uniform(0.5, 1.5);
  Trajectory t = synth_trajectory(rng.next_u64(), p);
  t.sim_id = static_cast<int64_t>(rng.next_below(1000));
  return t;
}

bool frames_equal(const Trajectory& a, const Trajectory& b) {
  if (a.mesh.positions != b.mesh.positions) return false;
  if (a.mesh.boundary_index != b.mesh.boundary_index) return false;
  if (!(a.mesh.arcs == b.mesh.arcs)) return false;
  if (a.h != b.h || a.sim_id != b.sim_id ||
      a.inlet_velocity != b.inlet_velocity)
    return false;
  if (a.frames.size() != b.frames.size()) return false;
  for (size_t f = 0; f < a.frames.size(); ++f) {
    if (a.frames[f].momentum != b.frames[f].momentum) return false;
    if (a.frames[f].volume_fraction != b.frames[f].volume_fraction) return false;
    if (a.frames[f].pressure != b.frames[f].pressure) return false;
  }
  return true;
}

}  // namespace

TEST_SUITE("mesh_core") {

TEST_CASE("boundary-index table covers all 14 entries exactly") {
  struct Row {
    double b;
    int dim;
    NodeType type;
    double angle;
  };
  const Row rows[] = {
      {kFluidSentinel, 2, NodeType::kFluid, kNoContactAngle},
      {34, 2, NodeType::kLiquidInlet, kNoContactAngle},
      {31, 2, NodeType::kOutlet, kNoContactAngle},
      {30, 2, NodeType::kGasInlet, kNoContactAngle},
      {29, 2, NodeType::kInletToOutletWall, 180.0},
      {28, 2, NodeType::kSideWall, 33.5},
      {27, 2, NodeType::kPacking, 33.5},
      {kFluidSentinel, 3, NodeType::kFluid, kNoContactAngle},
      {47, 3, NodeType::kLiquidInlet, kNoContactAngle},
      {46, 3, NodeType::kOutlet, kNoContactAngle},
      {45, 3, NodeType::kGasInlet, kNoContactAngle},
      {44, 3, NodeType::kInletToOutletWall, 180.0},
      {43, 3, NodeType::kSideWall, 33.5},
      {42, 3, NodeType::kPacking, 33.5},
  };
  for (const Row& r : rows) {
    NodeTypeInfo info = node_type_from_boundary(r.b, r.dim);
    CHECK(info.type == r.type);
    CHECK(info.contact_angle == r.angle);
  }
  // the sentinel as printed with fewer digits still maps to fluid
  CHECK(node_type_from_boundary(1.79769313486232e+308, 2).type ==
        NodeType::kFluid);
  CHECK(node_type_from_boundary(43, 3).contact_angle == 33.5);
}

TEST_CASE("unmapped boundary indices are rejected with their value") {
  CHECK_THROWS_WITH_AS(node_type_from_boundary(99, 2),
                       doctest::Contains("99"), DataError);
  CHECK_THROWS_AS(node_type_from_boundary(34, 3), DataError);  // 2D code in 3D
  CHECK_THROWS_AS(node_type_from_boundary(47, 2), DataError);
  CHECK_THROWS_AS(node_type_from_boundary(27.5, 2), DataError);
  CHECK_THROWS_AS(node_type_from_boundary(0, 2), DataError);
}

TEST_CASE("momentum formula is exact at the pure phases") {
  auto m1 = momentum_from_velocity<2>({2, 0}, 1.0);
  CHECK(m1[0] == 2020.0);
  CHECK(m1[1] == 0.0);
  auto m0 = momentum_from_velocity<2>({1, 1}, 0.0);
  CHECK(m0[0] == 1.18415);
  CHECK(m0[1] == 1.18415);
  auto mh = momentum_from_velocity<2>({1, 0}, 0.5);
  CHECK(mh[0] == doctest::Approx(505.592075).epsilon(1e-12));
  CHECK_THROWS_AS(momentum_from_velocity<2>({1, 0}, 1.5), DataError);
}

TEST_CASE("momentum is linear in velocity and affine in alpha") {
  Rng rng(17);
  for (int i = 0; i < 50; ++i) {
    const double a = rng.next_double();
    const std::array<double, 3> u = {rng.uniform(-2, 2), rng.uniform(-2, 2),
                                     rng.uniform(-2, 2)};
    const double s = rng.uniform(-3, 3);
    auto scaled = momentum_from_velocity<3>({s * u[0], s * u[1], s * u[2]}, a);
    auto base = momentum_from_velocity<3>(u, a);
    for (int d = 0; d < 3; ++d)
      CHECK(scaled[d] == doctest::Approx(s * base[d]).epsilon(1e-12));
    // affine in alpha: m(a) = m(0) + a*(m(1)-m(0))
    auto at0 = momentum_from_velocity<3>(u, 0.0);
    auto at1 = momentum_from_velocity<3>(u, 1.0);
    for (int d = 0; d < 3; ++d)
      CHECK(base[d] ==
            doctest::Approx(at0[d] + a * (at1[d] - at0[d])).epsilon(1e-12));
  }
}

TEST_CASE("edge features carry displacement and positive norm") {
  Mesh mesh = make_random_mesh(23, 50, 2);
  std::vector<double> feats;
  size_t rows = 0;
  build_edge_features(mesh, feats, &rows);
  REQUIRE(rows == 3);
  const size_t e = mesh.num_arcs();
  for (size_t a = 0; a < e; ++a) {
    const double dx = feats[0 * e + a], dy = feats[1 * e + a];
    const double norm = feats[2 * e + a];
    CHECK(norm > 0.0);
    CHECK(norm == doctest::Approx(std::sqrt(dx * dx + dy * dy)).epsilon(1e-15));
  }
}

TEST_CASE("trajectory round-trip is bit-exact over randomized instances") {
  Rng rng(99);
  const std::string path = temp_path("pmgn_roundtrip.mgtraj");
  for (int i = 0; i < 25; ++i) {
    Trajectory t = random_trajectory(rng);
    write_trajectory(t, path);
    Trajectory r = read_trajectory(path);
    CHECK(frames_equal(t, r));
    // a second write of the read-back value is byte-identical
    const std::string path2 = temp_path("pmgn_roundtrip2.mgtraj");
    write_trajectory(r, path2);
    std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
    std::string b1((std::istreambuf_iterator<char>(f1)), {});
    std::string b2((std::istreambuf_iterator<char>(f2)), {});
    CHECK(b1 == b2);
  }
  fs::remove(path);
  fs::remove(temp_path("pmgn_roundtrip2.mgtraj"));
}

TEST_CASE("file errors are distinct: magic, version, truncation") {
  const std::string path = temp_path("pmgn_badfile.mgtraj");
  Trajectory t = synth_trajectory(3, 12, 2);
  write_trajectory(t, path);

  auto clobber = [&](size_t offset, char value) {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(offset);
    f.put(value);
  };
  clobber(0, 'X');
  CHECK_THROWS_AS(read_trajectory(path), FormatError);
  write_trajectory(t, path);
  clobber(7, '9');  // magic intact, version digit changed
  CHECK_THROWS_AS(read_trajectory(path), VersionError);
  write_trajectory(t, path);
  fs::resize_file(path, fs::file_size(path) / 2);
  CHECK_THROWS_AS(read_trajectory(path), TruncationError);
  fs::remove(path);
}

TEST_CASE("synth is deterministic per seed") {
  const std::string p1 = temp_path("pmgn_synth_a.mgtraj");
  const std::string p2 = temp_path("pmgn_synth_b.mgtraj");
  write_trajectory(synth_trajectory(7, 500, 50), p1);
  write_trajectory(synth_trajectory(7, 500, 50), p2);
  std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
  std::string b1((std::istreambuf_iterator<char>(f1)), {});
  std::string b2((std::istreambuf_iterator<char>(f2)), {});
  CHECK(b1.size() > 0);
  CHECK(b1 == b2);
  fs::remove(p1);
  fs::remove(p2);
}

TEST_CASE("synth fields respect the maximum principle") {
  Trajectory t = synth_trajectory(7, 500, 50);
  for (const FieldFrame& f : t.frames)
    for (float a : f.volume_fraction) {
      CHECK(a >= 0.0f);
      CHECK(a <= 1.0f);
    }
}

TEST_CASE("synth mass change equals tracked boundary terms") {
  SynthParams p;
  p.n_nodes = 500;
  p.n_frames = 50;
  SynthContext ctx = make_synth_context(7, p);
  Trajectory t = synth_trajectory(7, p);
  const size_t n = ctx.mesh.num_nodes();
  for (size_t f = 0; f + 1 < t.frames.size(); f += 7) {
    std::vector<double> alpha(n);
    for (size_t v = 0; v < n; ++v)
      alpha[v] = static_cast<double>(t.frames[f].volume_fraction[v]);
    const double mass_before = [&] {
      double m = 0.0;
      for (double a : alpha) m += a;
      return m;
    }();
    StepBudget budget;
    const double t0 = static_cast<double>(f) * ctx.h;
    for (int s = 0; s < p.substeps; ++s)
      synth_substep(ctx, alpha, t0 + s * ctx.dt, &budget);
    double mass_after = 0.0;
    for (double a : alpha) mass_after += a;
    const double delta = mass_after - mass_before;
    const double tracked = budget.inlet_added - budget.drained;
    CHECK(std::fabs(delta - tracked) < 1e-10);
    // the stored next frame is the f32 rounding of the replayed state
    for (size_t v = 0; v < n; ++v)
      CHECK(t.frames[f + 1].volume_fraction[v] == static_cast<float>(alpha[v]));
  }
}

TEST_CASE("synth rejects CFL-violating explicit steps") {
  SynthParams p;
  p.n_nodes = 200;
  p.n_frames = 3;
  p.h = 1e9;  // far above any stable step
  CHECK_THROWS_AS(synth_trajectory(1, p), DataError);
}

TEST_CASE("csv ingestion builds a valid trajectory") {
  const std::string nodes = temp_path("pmgn_nodes.csv");
  const std::string fields = temp_path("pmgn_fields.csv");
  {
    std::ofstream out(nodes);
    out << "node_id,x,y,boundary_index\n";
    out << "0,0.0,0.0,34\n1,1.0,0.0,31\n2,0.0,1.0,28\n3,1.0,1.0,27\n"
        << "4,0.4,0.5,1.79769313486232e+308\n";
  }
  {
    std::ofstream out(fields);
    out << "frame,node_id,u_x,u_y,volume_fraction\n";
    for (int f = 0; f < 2; ++f)
      for (int v = 0; v < 5; ++v)
        out << f << "," << v << "," << 0.1 * (v + f) << ",0.0,"
            << 0.2 * v + 0.01 * f << "\n";
  }
  IngestOptions opts;
  opts.dim = 2;
  opts.h = 0.01;
  opts.sim_id = 9;
  opts.inlet_velocity = 1.25;
  Trajectory t = ingest_csv(nodes, fields, opts);
  CHECK(t.mesh.num_nodes() == 5);
  CHECK(t.frames.size() == 2);
  CHECK(t.sim_id == 9);
  CHECK(t.mesh.node_type[0] == NodeType::kLiquidInlet);
  CHECK(t.mesh.node_type[4] == NodeType::kFluid);
  CHECK(t.mesh.contact_angle[3] == 33.5);
  // momentum derived with the density weighting: alpha=0.2 at node 1 frame 0
  const double rho = 0.2 * kLiquidDensity + 0.8 * kGasDensity;
  CHECK(t.frames[0].momentum[1 * 2 + 0] ==
        doctest::Approx(static_cast<float>(rho * 0.1)));
  // unknown boundary index is a data error
  {
    std::ofstream out(nodes);
    out << "node_id,x,y,boundary_index\n0,0,0,5\n1,1,0,34\n2,0,1,31\n";
  }
  CHECK_THROWS_AS(ingest_csv(nodes, fields, opts), DataError);
  fs::remove(nodes);
  fs::remove(fields);
}

}  // TEST_SUITE

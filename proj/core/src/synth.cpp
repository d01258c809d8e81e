#include "pmgn/synth.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>

#include "pmgn/delaunay.hpp"
#include "pmgn/rng.hpp"

namespace pmgn {
namespace {

constexpr double kInletBand = 0.05;
constexpr double kOutletBand = 0.05;
constexpr double kWallBand = 0.04;
constexpr double kPackingRadius = 0.12;
constexpr double kSwirl = 0.35;

bool in_packing(double x, double y) {
  const double dx = x - 0.5, dy = y - 0.5;
  return dx * dx + dy * dy < kPackingRadius * kPackingRadius;
}

// Stream function: left-to-right channel profile plus an interior swirl,
// both with vanishing normal flow at the top/bottom walls.
double stream(double x, double y, double flow_scale) {
  const double sy = y * y * (3.0 - 2.0 * y);
  const double sw = std::sin(std::numbers::pi * x) * std::sin(std::numbers::pi * y);
  return flow_scale * (sy + kSwirl * sw * sw);
}

// velocity = (d psi / dy, -d psi / dx)
void stream_velocity(double x, double y, double flow_scale, double* u) {
  const double pi = std::numbers::pi;
  const double sx = std::sin(pi * x), cx = std::cos(pi * x);
  const double sy = std::sin(pi * y), cy = std::cos(pi * y);
  u[0] = flow_scale * (6.0 * y * (1.0 - y) + kSwirl * 2.0 * sx * sx * sy * cy * pi);
  u[1] = -flow_scale * kSwirl * 2.0 * sx * cx * pi * sy * sy;
}

}  // namespace

Mesh make_random_mesh(uint64_t seed, size_t n_nodes, int dim) {
  if (n_nodes < 8) throw DataError("make_random_mesh: need at least 8 nodes");
  Rng rng(seed);
  Mesh mesh;
  mesh.dim = dim;
  mesh.positions.resize(n_nodes * dim);
  for (size_t v = 0; v < n_nodes; ++v)
    for (int a = 0; a < dim; ++a)
      mesh.positions[v * dim + a] = static_cast<float>(rng.next_double());
  mesh.boundary_index.resize(n_nodes);
  for (size_t v = 0; v < n_nodes; ++v) {
    const double x = mesh.positions[v * dim + 0];
    const double y = mesh.positions[v * dim + 1];
    double b = kFluidSentinel;
    if (dim == 2) {
      if (x < kInletBand)
        b = 34;  // liquid_inlet
      else if (x > 1.0 - kOutletBand)
        b = 31;  // outlet
      else if (y < kWallBand || y > 1.0 - kWallBand)
        b = 28;  // side_wall
      else if (in_packing(x, y))
        b = 27;  // packing
    } else {
      if (x < kInletBand)
        b = 47;
      else if (x > 1.0 - kOutletBand)
        b = 46;
    }
    mesh.boundary_index[v] = b;
  }
  mesh.arcs = build_edges_delaunay(mesh.positions, dim);
  mesh.derive_node_types();
  return mesh;
}

SynthContext make_synth_context(uint64_t seed, const SynthParams& params) {
  if (params.n_nodes < 8) throw DataError("synth_trajectory: n_nodes must be >= 8");
  if (params.n_frames < 2) throw DataError("synth_trajectory: n_frames must be >= 2");
  if (params.substeps < 1) throw DataError("synth_trajectory: substeps must be >= 1");
  SynthContext ctx;
  ctx.params = params;

  Rng rng(seed);
  Mesh& mesh = ctx.mesh;
  mesh.dim = 2;
  mesh.positions.resize(params.n_nodes * 2);
  for (size_t v = 0; v < params.n_nodes; ++v) {
    mesh.positions[v * 2 + 0] = static_cast<float>(rng.next_double());
    mesh.positions[v * 2 + 1] = static_cast<float>(rng.next_double());
  }
  mesh.boundary_index.resize(params.n_nodes);
  for (size_t v = 0; v < params.n_nodes; ++v) {
    const double x = mesh.positions[v * 2 + 0];
    const double y = mesh.positions[v * 2 + 1];
    double b = kFluidSentinel;
    if (x < kInletBand)
      b = 34;
    else if (x > 1.0 - kOutletBand)
      b = 31;
    else if (y < kWallBand || y > 1.0 - kWallBand)
      b = 28;
    else if (in_packing(x, y))
      b = 27;
    mesh.boundary_index[v] = b;
  }
  std::vector<double> pts(mesh.positions.begin(), mesh.positions.end());
  DelaunayCells cells = build_delaunay_cells(pts.data(), params.n_nodes, 2);
  mesh.arcs = std::move(cells.arcs);
  mesh.derive_node_types();

  const size_t n = mesh.num_nodes();
  ctx.velocity.resize(n * 2);
  ctx.is_inlet.assign(n, 0);
  ctx.is_outlet.assign(n, 0);
  for (size_t v = 0; v < n; ++v) {
    stream_velocity(mesh.positions[v * 2], mesh.positions[v * 2 + 1],
                    params.flow_scale, &ctx.velocity[v * 2]);
    ctx.is_inlet[v] = mesh.node_type[v] == NodeType::kLiquidInlet;
    ctx.is_outlet[v] = mesh.node_type[v] == NodeType::kOutlet;
  }

  // Edge flows from stream-function differences of the adjacent triangles.
  // left_face[(i,j)] = triangle in whose CCW boundary j follows i.
  std::map<std::pair<uint32_t, uint32_t>, uint32_t> left_face;
  for (uint32_t t = 0; t < cells.triangles.size(); ++t) {
    const auto& tri = cells.triangles[t];
    for (int e = 0; e < 3; ++e)
      left_face[{tri[e], tri[(e + 1) % 3]}] = t;
  }
  auto psi_face = [&](uint32_t t) {
    const auto& tri = cells.triangles[t];
    double cx = 0.0, cy = 0.0;
    for (uint32_t v : tri) {
      cx += mesh.positions[v * 2 + 0];
      cy += mesh.positions[v * 2 + 1];
    }
    return stream(cx / 3.0, cy / 3.0, params.flow_scale);
  };
  for (const Arc& a : mesh.arcs) {
    if (a.sender > a.receiver) continue;
    ctx.edges.push_back({a.sender, a.receiver});
  }
  ctx.edge_flow.resize(ctx.edges.size());
  for (size_t e = 0; e < ctx.edges.size(); ++e) {
    const uint32_t i = ctx.edges[e][0], j = ctx.edges[e][1];
    const double mx = 0.5 * (mesh.positions[i * 2] + mesh.positions[j * 2]);
    const double my = 0.5 * (mesh.positions[i * 2 + 1] + mesh.positions[j * 2 + 1]);
    const double psi_open = stream(mx, my, params.flow_scale);
    auto l = left_face.find({i, j});
    auto r = left_face.find({j, i});
    const double psi_l = l != left_face.end() ? psi_face(l->second) : psi_open;
    const double psi_r = r != left_face.end() ? psi_face(r->second) : psi_open;
    ctx.edge_flow[e] = psi_l - psi_r;
  }

  // Net divergence per node; net inflow is balanced by an accounted drain so
  // the update stays a convex combination (maximum principle).
  std::vector<double> divergence(n, 0.0);
  for (size_t e = 0; e < ctx.edges.size(); ++e) {
    divergence[ctx.edges[e][0]] += ctx.edge_flow[e];
    divergence[ctx.edges[e][1]] -= ctx.edge_flow[e];
  }
  ctx.drain_rate.assign(n, 0.0);
  for (size_t v = 0; v < n; ++v) {
    ctx.drain_rate[v] = std::max(-divergence[v], 0.0);
    if (ctx.is_outlet[v]) ctx.drain_rate[v] += params.outlet_rate;
  }

  std::vector<double> rate(n, 0.0);
  for (size_t e = 0; e < ctx.edges.size(); ++e) {
    const uint32_t i = ctx.edges[e][0], j = ctx.edges[e][1];
    const double s = ctx.edge_flow[e];
    rate[i] += params.diffusion + std::max(s, 0.0);
    rate[j] += params.diffusion + std::max(-s, 0.0);
  }
  for (size_t v = 0; v < n; ++v) rate[v] += ctx.drain_rate[v];
  const double max_rate = *std::max_element(rate.begin(), rate.end());
  const double dt_stable = params.cfl_safety / max_rate;
  if (params.h > 0.0) {
    ctx.h = params.h;
    ctx.dt = params.h / params.substeps;
    if (ctx.dt > dt_stable)
      throw DataError("synth_trajectory: CFL violation, h/substeps = " +
                      std::to_string(ctx.dt) + " exceeds stable step " +
                      std::to_string(dt_stable));
  } else {
    ctx.dt = dt_stable;
    ctx.h = ctx.dt * params.substeps;
  }
  return ctx;
}

double synth_inlet_value(const SynthContext& ctx, double t_abs) {
  const double cycles = ctx.params.inlet_cycles_per_frame * (t_abs / ctx.h);
  return 0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * cycles +
                              ctx.params.inlet_phase);
}

void synth_substep(const SynthContext& ctx, std::vector<double>& alpha,
                   double t_abs, StepBudget* budget) {
  const size_t n = alpha.size();
  std::vector<double> delta(n, 0.0);
  for (size_t e = 0; e < ctx.edges.size(); ++e) {
    const uint32_t i = ctx.edges[e][0], j = ctx.edges[e][1];
    const double s = ctx.edge_flow[e];
    // flux into j from i: diffusion plus upwind advection
    const double f = ctx.params.diffusion * (alpha[i] - alpha[j]) +
                     (s > 0.0 ? s * alpha[i] : s * alpha[j]);
    delta[j] += f;
    delta[i] -= f;
  }
  for (size_t v = 0; v < n; ++v) alpha[v] += ctx.dt * delta[v];
  double drained = 0.0;
  for (size_t v = 0; v < n; ++v) {
    if (ctx.drain_rate[v] == 0.0) continue;
    const double d = ctx.dt * ctx.drain_rate[v] * alpha[v];
    alpha[v] -= d;
    drained += d;
  }
  const double inlet = synth_inlet_value(ctx, t_abs + ctx.dt);
  double added = 0.0;
  for (size_t v = 0; v < n; ++v) {
    if (!ctx.is_inlet[v]) continue;
    added += inlet - alpha[v];
    alpha[v] = inlet;
  }
  if (budget) {
    budget->inlet_added += added;
    budget->drained += drained;
  }
}

Trajectory synth_trajectory(uint64_t seed, const SynthParams& params) {
  SynthContext ctx = make_synth_context(seed, params);
  const size_t n = ctx.mesh.num_nodes();
  Rng rng(seed ^ 0xA5F0A5F0A5F0A5F0ULL);
  // Smooth random initial field in [0,1].
  const double ax = 1.0 + rng.next_double() * 2.0;
  const double ay = 1.0 + rng.next_double() * 2.0;
  const double p1 = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double p2 = rng.uniform(0.0, 2.0 * std::numbers::pi);
  std::vector<double> alpha(n);
  for (size_t v = 0; v < n; ++v) {
    const double x = ctx.mesh.positions[v * 2 + 0];
    const double y = ctx.mesh.positions[v * 2 + 1];
    double val = 0.5 + 0.3 * std::sin(2.0 * std::numbers::pi * ax * x + p1) *
                           std::sin(2.0 * std::numbers::pi * ay * y + p2);
    alpha[v] = std::clamp(val, 0.0, 1.0);
  }
  const double inlet0 = synth_inlet_value(ctx, 0.0);
  for (size_t v = 0; v < n; ++v)
    if (ctx.is_inlet[v]) alpha[v] = inlet0;

  Trajectory t;
  t.mesh = ctx.mesh;
  t.h = ctx.h;
  t.inlet_velocity = params.flow_scale;
  auto snapshot = [&](const std::vector<double>& a) {
    FieldFrame fr;
    fr.volume_fraction.resize(n);
    fr.momentum.resize(n * 2);
    for (size_t v = 0; v < n; ++v) {
      fr.volume_fraction[v] = static_cast<float>(a[v]);
      const double rho = a[v] * kLiquidDensity + (1.0 - a[v]) * kGasDensity;
      fr.momentum[v * 2 + 0] = static_cast<float>(rho * ctx.velocity[v * 2 + 0]);
      fr.momentum[v * 2 + 1] = static_cast<float>(rho * ctx.velocity[v * 2 + 1]);
    }
    return fr;
  };
  t.frames.reserve(params.n_frames);
  t.frames.push_back(snapshot(alpha));
  for (size_t f = 1; f < params.n_frames; ++f) {
    // Frame-to-frame evolution restarts from the stored f32 frame so that a
    // reader can replay any step from the file alone.
    for (size_t v = 0; v < n; ++v)
      alpha[v] = static_cast<double>(t.frames.back().volume_fraction[v]);
    const double t0 = static_cast<double>(f - 1) * ctx.h;
    for (int s = 0; s < params.substeps; ++s)
      synth_substep(ctx, alpha, t0 + s * ctx.dt, nullptr);
    t.frames.push_back(snapshot(alpha));
  }
  return t;
}

Trajectory synth_trajectory(uint64_t seed, size_t n_nodes, size_t n_frames) {
  SynthParams p;
  p.n_nodes = n_nodes;
  p.n_frames = n_frames;
  return synth_trajectory(seed, p);
}

std::vector<Trajectory> make_synth_dataset(uint64_t seed, size_t n_sims,
                                           size_t n_nodes, size_t n_frames) {
  std::vector<Trajectory> out;
  out.reserve(n_sims);
  Rng meta(seed);
  for (size_t i = 0; i < n_sims; ++i) {
    SynthParams p;
    p.n_nodes = n_nodes;
    p.n_frames = n_frames;
    p.flow_scale = n_sims > 1 ? 0.6 + 0.8 * (double(i) / double(n_sims - 1)) : 1.0;
    p.inlet_cycles_per_frame = 0.03 + 0.03 * meta.next_double();
    p.inlet_phase = meta.uniform(0.0, 2.0 * std::numbers::pi);
    Trajectory t = synth_trajectory(seed * 1000003ULL + 17ULL * i + 1ULL, p);
    t.sim_id = static_cast<int64_t>(i);
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<size_t> validation_split(const std::vector<Trajectory>& dataset,
                                     size_t per_group) {
  std::vector<size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    if (dataset[a].inlet_velocity != dataset[b].inlet_velocity)
      return dataset[a].inlet_velocity < dataset[b].inlet_velocity;
    return a < b;
  });
  std::vector<size_t> val;
  const size_t n = order.size();
  const size_t g = std::min(per_group, n / 3);
  for (size_t i = 0; i < g; ++i) val.push_back(order[i]);                // slowest
  for (size_t i = 0; i < g; ++i) val.push_back(order[n - 1 - i]);        // fastest
  const size_t mid = n / 2;
  for (size_t i = 0; i < g; ++i) val.push_back(order[mid - g / 2 + i]);  // middle
  std::sort(val.begin(), val.end());
  val.erase(std::unique(val.begin(), val.end()), val.end());
  return val;
}

}  // namespace pmgn

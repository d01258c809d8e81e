#include <doctest.h>

#include <cmath>

#include "pmgn/equivalence.hpp"
#include "pmgn/rollout.hpp"
#include "pmgn/synth.hpp"

using namespace pmgn;

namespace {

template <class T>
Surrogate<T> fitted_model(uint64_t seed, const Trajectory& traj, int m,
                          int latent) {
  SurrogateConfig cfg;
  cfg.dim = traj.mesh.dim;
  cfg.mp_steps = m;
  cfg.latent_dim = latent;
  cfg.precision =
      std::is_same_v<T, double> ? Precision::kF64 : Precision::kF32;
  Surrogate<T> model = init_surrogate<T>(seed, cfg);
  GraphCtx<T> ctx = build_graph_ctx<T>(traj.mesh);
  FeatureMatrix<T> y = frame_state<T>(traj, 0, false);
  FeatureMatrix<T> y1 = frame_state<T>(traj, 1, false);
  FeatureMatrix<T> node_x(cfg.node_in(), y.cols());
  for (size_t r = 0; r < y.rows(); ++r)
    std::copy(y.row(r), y.row(r) + y.cols(), node_x.row(r));
  for (size_t r = 0; r < ctx.static_node.rows(); ++r)
    std::copy(ctx.static_node.row(r), ctx.static_node.row(r) + y.cols(),
              node_x.row(y.rows() + r));
  model.norm.node_in.accumulate(node_x.data().data(), cfg.node_in(), y.cols());
  model.norm.edge_in.accumulate(ctx.edge_features.data().data(), cfg.edge_in(),
                                ctx.edge_features.cols());
  FeatureMatrix<T> delta(cfg.out_channels(), y.cols());
  for (size_t i = 0; i < delta.data().size(); ++i)
    delta.data()[i] = y1.data()[i] - y.data()[i];
  model.norm.target.accumulate(delta.data().data(), cfg.out_channels(), y.cols());
  model.norm.freeze_all();
  return model;
}

}  // namespace

TEST_SUITE("rollout") {

TEST_CASE("one step equals a single integrator step") {
  Trajectory traj = synth_trajectory(31, 300, 5);
  Surrogate<double> model = fitted_model<double>(32, traj, 2, 8);
  RolloutOptions opts;
  opts.bc_overwrite.clear();
  RolloutResult<double> r =
      rollout_full(model, IntegratorKind::kFE, traj, 1, opts);
  REQUIRE(r.states.size() == 1);
  GraphCtx<double> ctx = build_graph_ctx<double>(traj.mesh);
  SurrogateEvaluator<double> net(model, ctx);
  FeatureMatrix<double> y = frame_state<double>(traj, 0, false);
  auto step = integrator_step(IntegratorKind::kFE, net, y);
  CHECK(r.states[0].data() == step.next.data());
}

TEST_CASE("a zero network holds every frame at the initial state") {
  Trajectory traj = synth_trajectory(33, 250, 6);
  Surrogate<double> model = fitted_model<double>(34, traj, 1, 8);
  // zero the decoder's last layer and the target statistics' means
  const LinearSpec& last = model.layout.decoder.layers.back();
  for (int i = 0; i < last.out * last.in; ++i) model.params[last.w + i] = 0.0;
  for (int i = 0; i < last.out; ++i) model.params[last.b + i] = 0.0;
  std::vector<double> zero_mean(model.config.out_channels(), 0.0);
  std::vector<double> unit_m2(model.config.out_channels(), 1.0);
  model.norm.target.restore(zero_mean, unit_m2, 1.0, true);
  RolloutOptions opts;
  opts.bc_overwrite.clear();
  RolloutResult<double> r =
      rollout_full(model, IntegratorKind::kFE, traj, 4, opts);
  FeatureMatrix<double> y0 = frame_state<double>(traj, 0, false);
  for (const auto& state : r.states) CHECK(state.data() == y0.data());
}

TEST_CASE("patched rollout with k >= stages*m matches full bit-exactly") {
  Trajectory traj = synth_trajectory(35, 500, 25);
  Surrogate<double> model = fitted_model<double>(36, traj, 2, 8);
  PartitionPlan plan = PartitionPlan::from_mesh(traj.mesh, {2, 2, 1});
  for (IntegratorKind kind : {IntegratorKind::kFE, IntegratorKind::kH2}) {
    const int k = integrator_stages(kind) * 2;
    RolloutResult<double> full = rollout_full(model, kind, traj, 20);
    RolloutResult<double> patched =
        rollout_patched(model, kind, traj, plan, k, 20);
    REQUIRE(full.states.size() == 20);
    REQUIRE(patched.states.size() == 20);
    for (size_t t = 0; t < 20; ++t)
      CHECK(full.states[t].data() == patched.states[t].data());
  }
}

TEST_CASE("k below stages*m diverges first near patch boundaries") {
  Trajectory traj = synth_trajectory(37, 500, 10);
  Surrogate<double> model = fitted_model<double>(38, traj, 3, 8);
  PartitionPlan plan = PartitionPlan::from_mesh(traj.mesh, {2, 1, 1});
  RolloutResult<double> full = rollout_full(model, IntegratorKind::kFE, traj, 1);
  RolloutResult<double> patched =
      rollout_patched(model, IntegratorKind::kFE, traj, plan, 2, 1);
  // nodes whose m-hop neighborhood is fully inside their patch must agree
  const auto assignment = assign_subdomains(traj.mesh, plan);
  const AdjacencyCsr adj =
      AdjacencyCsr::from_arcs(traj.mesh.num_nodes(), traj.mesh.arcs);
  auto patches = build_patches(traj.mesh, adj, assignment, plan, 2);
  size_t diffs = 0, interior_diffs = 0;
  for (const Patch& p : patches) {
    std::vector<uint32_t> outside;
    std::vector<bool> in_patch(traj.mesh.num_nodes(), false);
    for (uint32_t v : p.local_to_global) in_patch[v] = true;
    for (uint32_t v = 0; v < traj.mesh.num_nodes(); ++v)
      if (!in_patch[v]) outside.push_back(v);
    auto dist_out = bfs_distances(adj, outside);
    for (size_t i = 0; i < p.num_subdomain(); ++i) {
      const uint32_t g = p.subdomain_nodes[i];
      bool same = true;
      for (size_t c = 0; c < full.states[0].rows(); ++c)
        if (full.states[0].at(c, g) != patched.states[0].at(c, g)) same = false;
      if (!same) {
        ++diffs;
        if (dist_out[g] > 3) ++interior_diffs;  // deeper than m hops: must match
      }
    }
  }
  CHECK(diffs > 0);
  CHECK(interior_diffs == 0);
}

TEST_CASE("ghost refresh is idempotent") {
  Trajectory traj = synth_trajectory(39, 300, 4);
  const AdjacencyCsr adj =
      AdjacencyCsr::from_arcs(traj.mesh.num_nodes(), traj.mesh.arcs);
  PartitionPlan plan = PartitionPlan::from_mesh(traj.mesh, {2, 2, 1});
  const auto assignment = assign_subdomains(traj.mesh, plan);
  auto patches = build_patches(traj.mesh, adj, assignment, plan, 2);
  FeatureMatrix<double> global = frame_state<double>(traj, 2, false);
  FeatureMatrix<double> local = gather_state(global, patches[1]);
  // scramble ghosts, then refresh twice
  for (size_t g = 0; g < patches[1].ghost_nodes.size(); ++g)
    local.at(0, patches[1].num_subdomain() + g) = -7.0;
  refresh_ghosts(patches[1], global, local);
  FeatureMatrix<double> once = local;
  refresh_ghosts(patches[1], global, local);
  CHECK(once.data() == local.data());
}

TEST_CASE("boundary-condition nodes equal ground truth bit-exactly") {
  Trajectory traj = synth_trajectory(41, 400, 12);
  Surrogate<double> model = fitted_model<double>(42, traj, 1, 8);
  RolloutResult<double> r = rollout_full(model, IntegratorKind::kFE, traj, 8);
  for (size_t t = 0; t < r.states.size(); ++t) {
    FeatureMatrix<double> truth = frame_state<double>(traj, t + 1, false);
    for (size_t v = 0; v < traj.mesh.num_nodes(); ++v) {
      const NodeType ty = traj.mesh.node_type[v];
      if (ty != NodeType::kLiquidInlet && ty != NodeType::kGasInlet) continue;
      for (size_t c = 0; c < truth.rows(); ++c)
        CHECK(r.states[t].at(c, v) == truth.at(c, v));
    }
  }
}

TEST_CASE("non-finite states truncate with a recorded divergence step") {
  Trajectory traj = synth_trajectory(43, 200, 8);
  Surrogate<double> model = fitted_model<double>(44, traj, 1, 8);
  for (auto& p : model.params) p *= 1e60;  // provoke overflow in stage outputs
  RolloutResult<double> r = rollout_full(model, IntegratorKind::kFE, traj, 5);
  CHECK(r.truncated);
  CHECK(r.divergence_step >= 0);
  CHECK(r.states.size() < 5);
}

TEST_CASE("scoring reports per-step per-channel raw rmse") {
  Trajectory traj = synth_trajectory(45, 300, 8);
  Surrogate<double> model = fitted_model<double>(46, traj, 1, 8);
  RolloutResult<double> r = rollout_full(model, IntegratorKind::kFE, traj, 5);
  REQUIRE(r.states.size() == 5);
  RolloutScore s = score_rollout(r.states, traj, false);
  REQUIRE(s.rmse.size() == 5);
  for (const auto& row : s.rmse) {
    REQUIRE(row.size() == 3);
    for (double v : row) CHECK(std::isfinite(v));
  }
  CHECK(s.aggregate_mse > 0.0);
  // matches the rollout's own scoring
  for (size_t t = 0; t < 5; ++t)
    for (size_t c = 0; c < 3; ++c)
      CHECK(s.rmse[t][c] == doctest::Approx(r.rmse[t][c]).epsilon(1e-12));
}

}  // TEST_SUITE

#include "pmgn/rollout.hpp"

#include <algorithm>
#include <cmath>

namespace pmgn {
namespace {

template <class T>
bool all_finite(const FeatureMatrix<T>& m) {
  for (const T& v : m.data())
    if (!std::isfinite(static_cast<double>(v))) return false;
  return true;
}

template <class T>
void overwrite_bc(const Mesh& mesh, const std::vector<NodeType>& types,
                  const FeatureMatrix<T>& truth, FeatureMatrix<T>& state) {
  if (types.empty()) return;
  std::array<bool, kNumNodeTypes> pick{};
  for (NodeType t : types) pick[static_cast<size_t>(t)] = true;
  for (size_t v = 0; v < mesh.num_nodes(); ++v) {
    if (!pick[static_cast<size_t>(mesh.node_type[v])]) continue;
    for (size_t r = 0; r < state.rows(); ++r) state.at(r, v) = truth.at(r, v);
  }
}

// per-channel std of frame 0, raw units (divergence reference)
template <class T>
std::vector<double> frame0_std(const FeatureMatrix<T>& f0) {
  std::vector<double> out(f0.rows(), 0.0);
  for (size_t r = 0; r < f0.rows(); ++r) {
    double mean = 0.0;
    const T* row = f0.row(r);
    for (size_t v = 0; v < f0.cols(); ++v) mean += static_cast<double>(row[v]);
    mean /= f0.cols();
    double var = 0.0;
    for (size_t v = 0; v < f0.cols(); ++v) {
      const double d = static_cast<double>(row[v]) - mean;
      var += d * d;
    }
    out[r] = std::sqrt(var / f0.cols());
  }
  return out;
}

template <class T>
std::vector<double> step_rmse(const FeatureMatrix<T>& pred,
                              const FeatureMatrix<T>& truth) {
  std::vector<double> out(pred.rows(), 0.0);
  for (size_t r = 0; r < pred.rows(); ++r) {
    double acc = 0.0;
    for (size_t v = 0; v < pred.cols(); ++v) {
      const double d = static_cast<double>(pred.at(r, v)) -
                       static_cast<double>(truth.at(r, v));
      acc += d * d;
    }
    out[r] = std::sqrt(acc / pred.cols());
  }
  return out;
}

}  // namespace

template <class T>
void refresh_ghosts(const Patch& patch, const FeatureMatrix<T>& global_state,
                    FeatureMatrix<T>& local_state) {
  const size_t ns = patch.num_subdomain();
  for (size_t r = 0; r < local_state.rows(); ++r) {
    const T* src = global_state.row(r);
    T* dst = local_state.row(r);
    for (size_t g = 0; g < patch.ghost_nodes.size(); ++g)
      dst[ns + g] = src[patch.ghost_nodes[g]];
  }
}

template void refresh_ghosts<float>(const Patch&, const FeatureMatrix<float>&,
                                    FeatureMatrix<float>&);
template void refresh_ghosts<double>(const Patch&, const FeatureMatrix<double>&,
                                     FeatureMatrix<double>&);

template <class T>
RolloutResult<T> rollout_full(const Surrogate<T>& model, IntegratorKind kind,
                              const Trajectory& traj, size_t steps,
                              const RolloutOptions& options) {
  const bool score = options.score_against_truth;
  const bool needs_truth = score || !options.bc_overwrite.empty();
  if (needs_truth && steps + 1 > traj.frames.size())
    throw DataError("rollout_full: steps exceed available ground-truth frames");
  GraphCtx<T> ctx = build_graph_ctx<T>(traj.mesh);
  FeatureMatrix<T> state =
      frame_state<T>(traj, 0, model.config.include_pressure);
  const std::vector<double> ref_std = frame0_std(state);

  RolloutResult<T> out;
  for (size_t t = 0; t < steps; ++t) {
    SurrogateEvaluator<T> net(model, ctx);
    FeatureMatrix<T> next;
    try {
      StepResult<T> step = integrator_step(kind, net, state);
      next = std::move(step.next);
    } catch (const DataError&) {
      out.divergence_step = static_cast<int>(t);
      out.truncated = true;
      break;
    }
    FeatureMatrix<T> truth;
    if (needs_truth)
      truth = frame_state<T>(traj, t + 1, model.config.include_pressure);
    if (!options.bc_overwrite.empty())
      overwrite_bc(traj.mesh, options.bc_overwrite, truth, next);
    if (!all_finite(next)) {
      out.divergence_step = static_cast<int>(t);
      out.truncated = true;
      break;
    }
    if (score) {
      out.rmse.push_back(step_rmse(next, truth));
      if (out.divergence_step < 0) {
        for (size_t r = 0; r < ref_std.size(); ++r)
          if (out.rmse.back()[r] >
              options.divergence_multiplier * std::max(ref_std[r], 1e-300))
            out.divergence_step = static_cast<int>(t);
      }
    }
    out.states.push_back(next);
    state = std::move(next);
  }
  return out;
}

template <class T>
RolloutResult<T> rollout_patched(const Surrogate<T>& model, IntegratorKind kind,
                                 const Trajectory& traj,
                                 const PartitionPlan& plan, int k, size_t steps,
                                 const RolloutOptions& options) {
  const bool score = options.score_against_truth;
  const bool needs_truth = score || !options.bc_overwrite.empty();
  if (needs_truth && steps + 1 > traj.frames.size())
    throw DataError("rollout_patched: steps exceed available ground-truth frames");
  const Mesh& mesh = traj.mesh;
  const AdjacencyCsr adj = AdjacencyCsr::from_arcs(mesh.num_nodes(), mesh.arcs);
  const std::vector<uint32_t> assignment = assign_subdomains(mesh, plan);
  const std::vector<Patch> patches = build_patches(mesh, adj, assignment, plan, k);
  // Every node must have an owner (partition of unity) and every ghost's
  // owner patch must exist.
  {
    std::vector<bool> covered(mesh.num_nodes(), false);
    std::vector<bool> have_patch(plan.num_subdomains(), false);
    for (const Patch& p : patches) {
      have_patch[p.subdomain_id] = true;
      for (uint32_t v : p.subdomain_nodes) covered[v] = true;
    }
    for (size_t v = 0; v < covered.size(); ++v)
      if (!covered[v])
        throw DataError("rollout_patched: node without owning patch");
    for (const Patch& p : patches)
      for (uint32_t o : p.ghost_owner)
        if (!have_patch[o])
          throw DataError("rollout_patched: ghost owned by a missing patch");
  }

  std::vector<GraphCtx<T>> ctx;
  ctx.reserve(patches.size());
  for (const Patch& p : patches) ctx.push_back(build_graph_ctx<T>(mesh, p));

  FeatureMatrix<T> global = frame_state<T>(traj, 0, model.config.include_pressure);
  const std::vector<double> ref_std = frame0_std(global);
  std::vector<FeatureMatrix<T>> local;
  local.reserve(patches.size());
  for (const Patch& p : patches) local.push_back(gather_state(global, p));

  RolloutResult<T> out;
  for (size_t t = 0; t < steps; ++t) {
    FeatureMatrix<T> next_global(global.rows(), global.cols());
    bool failed = false;
    for (size_t pi = 0; pi < patches.size() && !failed; ++pi) {
      SurrogateEvaluator<T> net(model, ctx[pi]);
      try {
        StepResult<T> step = integrator_step(kind, net, local[pi]);
        local[pi] = std::move(step.next);
      } catch (const DataError&) {
        failed = true;
        break;
      }
      for (size_t r = 0; r < next_global.rows(); ++r) {
        T* dst = next_global.row(r);
        const T* src = local[pi].row(r);
        for (size_t i = 0; i < patches[pi].num_subdomain(); ++i)
          dst[patches[pi].subdomain_nodes[i]] = src[i];
      }
    }
    if (failed) {
      out.divergence_step = static_cast<int>(t);
      out.truncated = true;
      break;
    }
    FeatureMatrix<T> truth;
    if (needs_truth)
      truth = frame_state<T>(traj, t + 1, model.config.include_pressure);
    if (!options.bc_overwrite.empty())
      overwrite_bc(mesh, options.bc_overwrite, truth, next_global);
    if (!all_finite(next_global)) {
      out.divergence_step = static_cast<int>(t);
      out.truncated = true;
      break;
    }
    // Communication phase: subdomain values land in each patch, ghosts are
    // refreshed from their owners (one exchange per outer step).
    for (size_t pi = 0; pi < patches.size(); ++pi) {
      const Patch& p = patches[pi];
      for (size_t r = 0; r < next_global.rows(); ++r) {
        const T* src = next_global.row(r);
        T* dst = local[pi].row(r);
        for (size_t i = 0; i < p.num_subdomain(); ++i)
          dst[i] = src[p.subdomain_nodes[i]];
      }
      refresh_ghosts(p, next_global, local[pi]);
    }
    if (score) {
      out.rmse.push_back(step_rmse(next_global, truth));
      if (out.divergence_step < 0) {
        for (size_t r = 0; r < ref_std.size(); ++r)
          if (out.rmse.back()[r] >
              options.divergence_multiplier * std::max(ref_std[r], 1e-300))
            out.divergence_step = static_cast<int>(t);
      }
    }
    out.states.push_back(next_global);
    global = std::move(next_global);
  }
  return out;
}

template <class T>
RolloutScore score_rollout(const std::vector<FeatureMatrix<T>>& predicted,
                           const Trajectory& truth, bool include_pressure) {
  RolloutScore score;
  double acc = 0.0;
  size_t count = 0;
  for (size_t t = 0; t < predicted.size(); ++t) {
    FeatureMatrix<T> tr = frame_state<T>(truth, t + 1, include_pressure);
    score.rmse.push_back(step_rmse(predicted[t], tr));
    for (size_t r = 0; r < predicted[t].rows(); ++r) {
      acc += score.rmse.back()[r] * score.rmse.back()[r];
      ++count;
    }
  }
  score.aggregate_mse = count ? acc / count : 0.0;
  return score;
}

#define PMGN_INSTANTIATE(T)                                                    \
  template RolloutResult<T> rollout_full<T>(const Surrogate<T>&, IntegratorKind, \
                                            const Trajectory&, size_t,         \
                                            const RolloutOptions&);            \
  template RolloutResult<T> rollout_patched<T>(                                \
      const Surrogate<T>&, IntegratorKind, const Trajectory&,                  \
      const PartitionPlan&, int, size_t, const RolloutOptions&);               \
  template RolloutScore score_rollout<T>(const std::vector<FeatureMatrix<T>>&, \
                                         const Trajectory&, bool);
PMGN_INSTANTIATE(float)
PMGN_INSTANTIATE(double)
#undef PMGN_INSTANTIATE

}  // namespace pmgn

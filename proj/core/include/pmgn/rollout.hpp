#pragma once

#include <cstdint>
#include <vector>

#include "pmgn/integrators.hpp"
#include "pmgn/partition.hpp"
#include "pmgn/surrogate.hpp"

namespace pmgn {

struct RolloutOptions {
  // node types whose states are overwritten from ground truth each step
  std::vector<NodeType> bc_overwrite = {NodeType::kLiquidInlet,
                                        NodeType::kGasInlet};
  double divergence_multiplier = 10.0;  // RMSE > mult * frame-0 std
  bool score_against_truth = true;
};

template <class T>
struct RolloutResult {
  std::vector<FeatureMatrix<T>> states;    // predicted state after each step
  std::vector<std::vector<double>> rmse;   // per step, per channel (raw)
  int divergence_step = -1;                // -1 = none
  bool truncated = false;                  // non-finite state appeared
};

// Autoregressive rollout on the full domain: T steps, feeding each output
// back, overwriting boundary-condition nodes from the ground-truth frames.
template <class T>
RolloutResult<T> rollout_full(const Surrogate<T>& model, IntegratorKind kind,
                              const Trajectory& traj, size_t steps,
                              const RolloutOptions& options = {});

// Patched rollout with per-step ghost refresh: every patch advances one step
// on its local state, subdomain outputs are written back to the global
// state, and ghost columns are re-gathered from their owners before the next
// step. With k >= stages * mp_steps this matches rollout_full bit-exactly.
template <class T>
RolloutResult<T> rollout_patched(const Surrogate<T>& model, IntegratorKind kind,
                                 const Trajectory& traj,
                                 const PartitionPlan& plan, int k, size_t steps,
                                 const RolloutOptions& options = {});

// Overwrites local ghost columns from the global state; idempotent.
template <class T>
void refresh_ghosts(const Patch& patch, const FeatureMatrix<T>& global_state,
                    FeatureMatrix<T>& local_state);

// Per-step, per-channel raw RMSE against ground truth frames 1..steps.
struct RolloutScore {
  std::vector<std::vector<double>> rmse;  // [step][channel]
  double aggregate_mse = 0.0;
};
template <class T>
RolloutScore score_rollout(const std::vector<FeatureMatrix<T>>& predicted,
                           const Trajectory& truth, bool include_pressure);

}  // namespace pmgn

#pragma once

#include <cstdint>
#include <vector>

#include "pmgn/integrators.hpp"
#include "pmgn/partition.hpp"
#include "pmgn/surrogate.hpp"
#include "pmgn/trainer.hpp"

namespace pmgn {

// Patch-vs-full equivalence check: runs one integrator step and one
// backward pass both on the full domain and per patch (subdomain-masked
// loss, all patches visited, gradients accumulated), then compares.
//
// forward: per-node next-state on subdomain nodes, bit compare.
// gradient: relative L2 of accumulated patch gradients vs the full-domain
//           gradient of the same global loss.
// pass: forward bit-exact (or <= 1e-12 max abs) and gradient <= 1e-12.
struct EquivalenceReport {
  size_t patches = 0;
  size_t nodes = 0;
  double forward_max_abs_diff = 0.0;
  bool forward_bitexact = true;
  std::vector<uint32_t> failing_nodes;  // global ids with any forward diff
  double grad_rel_l2 = 0.0;
  bool forward_pass = false;
  bool grad_pass = false;
  bool pass = false;
};

// Runs with frozen normalizer statistics and no input noise. The model is
// copied; callers keep their state.
template <class T>
EquivalenceReport verify_full_equivalence(const Surrogate<T>& model,
                                          const Trajectory& traj, size_t frame,
                                          const PartitionPlan& plan, int k,
                                          IntegratorKind kind);

// Convenience: synthesize a mesh-scale model with seeded weights and
// reasonable statistics, then verify. Used by the CLI and acceptance suite.
struct VerifySetup {
  uint64_t seed = 7;
  size_t n_nodes = 2000;
  int mp_steps = 3;
  int latent_dim = 32;
  int k = 3;
  std::array<int, 3> plan_counts = {2, 2, 1};
  IntegratorKind kind = IntegratorKind::kFE;
};
EquivalenceReport run_verify(const VerifySetup& setup);

}  // namespace pmgn

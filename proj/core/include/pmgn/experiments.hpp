#pragma once

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

#include "pmgn/integrators.hpp"
#include "pmgn/partition.hpp"
#include "pmgn/trainer.hpp"

namespace pmgn {

// Seed of the bundled synthetic advection-diffusion dataset (40 sims, ~2k
// nodes, 50 frames) used by the experiment presets and the acceptance runs.
inline constexpr uint64_t kBundledDatasetSeed = 7000003ULL;
inline constexpr size_t kBundledSims = 40;
inline constexpr size_t kBundledNodes = 2000;
inline constexpr size_t kBundledFrames = 50;

struct CurveSeries {
  std::string label;
  uint64_t seed = 0;
  std::vector<TrainCurveRow> rows;
  double final_val_mse = 0.0;
};

// FE vs H2 at equal message-passing depth, plus FE at the deeper setting.
struct IntegratorCompareOptions {
  uint64_t dataset_seed = kBundledDatasetSeed;
  size_t n_sims = kBundledSims;
  size_t n_nodes = kBundledNodes;
  size_t n_frames = kBundledFrames;
  int m_small = 3;
  int m_large = 6;
  int latent_dim = 16;
  uint64_t steps = 20'000;
  std::vector<uint64_t> seeds = {1, 2, 3, 4, 5};
  int batch_patches = 1;
  uint64_t normalizer_freeze_step = 1'000;
  size_t eval_samples = 200;
};

struct IntegratorCompareResult {
  // per seed: {FE m_small, H2 m_small, FE m_large} final validation MSE
  std::vector<std::array<double, 3>> per_seed;
  std::vector<CurveSeries> series;
};

IntegratorCompareResult run_integrator_compare(
    const IntegratorCompareOptions& options, std::ostream* log);

// Training on the left third of the domain vs patch training over the full
// domain, scored on full-domain validation frames.
struct SubdomainGapOptions {
  uint64_t dataset_seed = kBundledDatasetSeed;
  size_t n_sims = kBundledSims;
  size_t n_nodes = kBundledNodes;
  size_t n_frames = kBundledFrames;
  int mp_steps = 3;
  int latent_dim = 16;
  int ghost_k = 3;
  uint64_t steps = 10'000;
  std::vector<uint64_t> seeds = {1, 2, 3, 4, 5};
  uint64_t normalizer_freeze_step = 1'000;
  size_t eval_samples = 200;
};

struct SubdomainGapResult {
  // per seed: {left-third-only, full-domain patches} validation RMSE
  std::vector<std::array<double, 2>> per_seed;
  std::vector<CurveSeries> series;
};

SubdomainGapResult run_subdomain_gap(const SubdomainGapOptions& options,
                                     std::ostream* log);

// Patch training vs full-domain training parity.
struct PatchParityOptions {
  uint64_t dataset_seed = kBundledDatasetSeed;
  size_t n_sims = 12;
  size_t n_nodes = 1200;
  size_t n_frames = 30;
  int mp_steps = 3;
  int latent_dim = 16;
  int ghost_k = 3;
  uint64_t steps = 4'000;
  std::vector<uint64_t> seeds = {1, 2, 3};
  uint64_t normalizer_freeze_step = 500;
  size_t eval_samples = 150;
};

struct PatchParityResult {
  // per seed: {patch training (2x2 plan), full-domain training}
  std::vector<std::array<double, 2>> per_seed;
  std::vector<CurveSeries> series;
};

PatchParityResult run_patch_parity(const PatchParityOptions& options,
                                   std::ostream* log);

// CSV emission (17 significant digits).
void write_curve_csv(const std::string& path,
                     const std::vector<CurveSeries>& series);
void write_patch_growth_csv(const std::string& path,
                            const std::vector<PatchGrowthRow>& rows);
void write_order_csv(const std::string& path, const std::string& kind,
                     const std::vector<std::pair<double, double>>& points);
void write_rollout_csv(const std::string& path,
                       const std::vector<std::vector<double>>& rmse);

}  // namespace pmgn

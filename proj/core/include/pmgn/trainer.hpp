#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "pmgn/adam.hpp"
#include "pmgn/integrators.hpp"
#include "pmgn/partition.hpp"
#include "pmgn/surrogate.hpp"
#include "pmgn/synth.hpp"

namespace pmgn {

struct TrainConfig {
  // Adam + exponentially decaying learning rate
  double lr_start = 1e-3;
  double lr_end = 1e-7;
  uint64_t decay_horizon = 4'000'000;
  uint64_t max_steps = 400'000;
  AdamConfig adam;

  // per-field input noise (raw units)
  double noise_momentum_horizontal = 0.02;
  double noise_momentum_vertical = 0.03;
  double noise_volume_fraction = 0.05;

  // batching and decomposition
  int batch_patches = 1;  // patches per optimizer step
  int workers = 1;        // simulated data-parallel workers
  bool parallel_workers = false;
  IntegratorKind integrator = IntegratorKind::kFE;
  int ghost_k = 3;
  std::array<int, 3> plan_counts = {1, 1, 1};
  bool strict_equivalence = false;
  bool fluid_only_loss = false;
  uint64_t normalizer_freeze_step = 10'000;

  // plateau stopping: stop when the best validation loss fails to improve by
  // plateau_rel_improvement over the last plateau_window steps
  bool plateau_stop = false;
  double plateau_rel_improvement = 0.005;
  uint64_t plateau_window = 10'000;

  // evaluation cadence
  uint64_t eval_interval = 2'000;
  size_t eval_samples = 200;
  uint64_t eval_seed = 0x9E3779B97F4A7C15ULL;

  // training-time sampling restriction (subdomain ids; empty = all)
  std::vector<uint32_t> train_subdomains;

  uint64_t seed = 0;
  SurrogateConfig surrogate;

  // Throws on inconsistent settings. In strict mode k >= stages*m is
  // enforced; otherwise a violation only warns (boundary-node supervision is
  // then slightly off, which the relaxed mode accepts).
  void validate() const;
};

TrainConfig train_config_from_json(const std::string& json_text);
std::string train_config_to_json(const TrainConfig& config);
TrainConfig load_train_config(const std::string& path);

// Per-trajectory precompute.
template <class T>
struct SimData {
  Trajectory traj;
  GraphCtx<T> full_ctx;
  std::vector<uint32_t> assignment;
  std::vector<Patch> patches;  // non-empty, ascending subdomain id
  std::vector<GraphCtx<T>> patch_ctx;
  std::vector<FeatureMatrix<T>> frames;   // raw state per frame
  std::vector<uint32_t> allowed_patches;  // indices into patches
};

template <class T>
struct TrainData {
  std::vector<SimData<T>> sims;
  std::vector<size_t> train_sims, val_sims;
};

template <class T>
TrainData<T> prepare_train_data(std::vector<Trajectory> dataset,
                                const TrainConfig& config);

template <class T>
struct TrainState {
  Surrogate<T> model;
  AdamState<T> adam;
  uint64_t step = 0;
  Rng sample_rng;
  std::vector<Rng> worker_rngs;
  std::vector<std::pair<uint64_t, double>> val_history;  // (step, val mse)
  double last_train_loss = 0.0;
};

template <class T>
TrainState<T> init_train_state(const TrainConfig& config);

// One optimizer step: sample batch_patches patches, inject per-field noise,
// run the integrator forward, take the subdomain-masked MSE on normalized
// deltas, backpropagate, accumulate worker gradients in worker-id order, and
// apply one Adam update at the scheduled learning rate. Returns the batch
// loss. A non-finite loss aborts the step (state unchanged, incident logged
// to stderr) and returns NaN.
template <class T>
double train_step(TrainState<T>& state, const TrainData<T>& data,
                  const TrainConfig& config);

struct EvalMetrics {
  double mse_normalized = 0.0;
  std::vector<double> mse_normalized_per_channel;
  std::vector<double> rmse_raw;  // per channel, raw units
  size_t samples = 0;
};

// Next-step metrics on full-domain frames sampled from the given sims,
// noise-free, deterministic per seed.
template <class T>
EvalMetrics evaluate(const Surrogate<T>& model, const TrainData<T>& data,
                     IntegratorKind kind, const std::vector<size_t>& sims,
                     size_t n_samples, uint64_t seed);

struct TrainCurveRow {
  uint64_t step = 0;
  double lr = 0.0;
  double train_mse = 0.0;
  double val_mse = 0.0;
  std::vector<double> val_rmse_raw;
};

template <class T>
struct TrainRunResult {
  TrainState<T> state;
  std::vector<TrainCurveRow> curve;
  uint64_t stopped_at = 0;
};

// Full loop: train_step until max_steps (or plateau), evaluating every
// eval_interval steps.
template <class T>
TrainRunResult<T> run_training(const TrainConfig& config,
                               const TrainData<T>& data);

}  // namespace pmgn

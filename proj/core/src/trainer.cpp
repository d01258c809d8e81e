#include "pmgn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>
#include <thread>

#include <json.hpp>

namespace pmgn {

void TrainConfig::validate() const {
  surrogate.validate();
  if (!(lr_end > 0.0 && lr_end < lr_start))
    throw DataError("TrainConfig: need 0 < lr_end < lr_start");
  if (noise_momentum_horizontal < 0 || noise_momentum_vertical < 0 ||
      noise_volume_fraction < 0)
    throw DataError("TrainConfig: noise stds must be >= 0");
  if (batch_patches < 1) throw DataError("TrainConfig: batch_patches must be >= 1");
  if (workers < 1) throw DataError("TrainConfig: workers must be >= 1");
  if (ghost_k < 0) throw DataError("TrainConfig: ghost_k must be >= 0");
  const int need = integrator_stages(integrator) * surrogate.mp_steps;
  if (ghost_k < need) {
    if (strict_equivalence)
      throw DataError("TrainConfig: strict equivalence requires k >= stages*m (" +
                      std::to_string(need) + "), got k = " +
                      std::to_string(ghost_k));
    std::cerr << "[pmgn] warning: ghost width k=" << ghost_k
              << " is below stages*m=" << need
              << "; boundary-node receptive fields are truncated\n";
  }
}

namespace {

using nlohmann::json;

Precision parse_precision(const std::string& s) {
  if (s == "f32") return Precision::kF32;
  if (s == "f64") return Precision::kF64;
  throw UsageError("unknown precision '" + s + "' (expected f32|f64)");
}

}  // namespace

TrainConfig train_config_from_json(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("config parse error: ") + e.what());
  }
  TrainConfig c;
  auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).template get<std::decay_t<decltype(field)>>();
  };
  get("lr_start", c.lr_start);
  get("lr_end", c.lr_end);
  get("decay_horizon", c.decay_horizon);
  get("max_steps", c.max_steps);
  get("adam_beta1", c.adam.beta1);
  get("adam_beta2", c.adam.beta2);
  get("adam_eps", c.adam.eps);
  get("noise_momentum_horizontal", c.noise_momentum_horizontal);
  get("noise_momentum_vertical", c.noise_momentum_vertical);
  get("noise_volume_fraction", c.noise_volume_fraction);
  get("batch_patches", c.batch_patches);
  get("workers", c.workers);
  get("parallel_workers", c.parallel_workers);
  get("ghost_k", c.ghost_k);
  get("strict_equivalence", c.strict_equivalence);
  get("fluid_only_loss", c.fluid_only_loss);
  get("normalizer_freeze_step", c.normalizer_freeze_step);
  get("plateau_stop", c.plateau_stop);
  get("plateau_rel_improvement", c.plateau_rel_improvement);
  get("plateau_window", c.plateau_window);
  get("eval_interval", c.eval_interval);
  get("eval_samples", c.eval_samples);
  get("eval_seed", c.eval_seed);
  get("seed", c.seed);
  get("train_subdomains", c.train_subdomains);
  if (j.contains("integrator"))
    c.integrator = parse_integrator(j.at("integrator").get<std::string>());
  if (j.contains("plan_counts")) {
    auto v = j.at("plan_counts").get<std::vector<int>>();
    if (v.empty() || v.size() > 3)
      throw DataError("config: plan_counts needs 1..3 entries");
    c.plan_counts = {1, 1, 1};
    for (size_t i = 0; i < v.size(); ++i) c.plan_counts[i] = v[i];
  }
  get("mp_steps", c.surrogate.mp_steps);
  get("latent_dim", c.surrogate.latent_dim);
  get("mlp_hidden_layers", c.surrogate.mlp_hidden_layers);
  get("dim", c.surrogate.dim);
  get("include_pressure", c.surrogate.include_pressure);
  if (j.contains("precision"))
    c.surrogate.precision = parse_precision(j.at("precision").get<std::string>());
  c.validate();
  return c;
}

std::string train_config_to_json(const TrainConfig& c) {
  json j;
  j["lr_start"] = c.lr_start;
  j["lr_end"] = c.lr_end;
  j["decay_horizon"] = c.decay_horizon;
  j["max_steps"] = c.max_steps;
  j["adam_beta1"] = c.adam.beta1;
  j["adam_beta2"] = c.adam.beta2;
  j["adam_eps"] = c.adam.eps;
  j["noise_momentum_horizontal"] = c.noise_momentum_horizontal;
  j["noise_momentum_vertical"] = c.noise_momentum_vertical;
  j["noise_volume_fraction"] = c.noise_volume_fraction;
  j["batch_patches"] = c.batch_patches;
  j["workers"] = c.workers;
  j["parallel_workers"] = c.parallel_workers;
  j["integrator"] = integrator_name(c.integrator);
  j["ghost_k"] = c.ghost_k;
  j["plan_counts"] = std::vector<int>{c.plan_counts[0], c.plan_counts[1],
                                      c.plan_counts[2]};
  j["strict_equivalence"] = c.strict_equivalence;
  j["fluid_only_loss"] = c.fluid_only_loss;
  j["normalizer_freeze_step"] = c.normalizer_freeze_step;
  j["plateau_stop"] = c.plateau_stop;
  j["plateau_rel_improvement"] = c.plateau_rel_improvement;
  j["plateau_window"] = c.plateau_window;
  j["eval_interval"] = c.eval_interval;
  j["eval_samples"] = c.eval_samples;
  j["eval_seed"] = c.eval_seed;
  j["seed"] = c.seed;
  j["train_subdomains"] = c.train_subdomains;
  j["mp_steps"] = c.surrogate.mp_steps;
  j["latent_dim"] = c.surrogate.latent_dim;
  j["mlp_hidden_layers"] = c.surrogate.mlp_hidden_layers;
  j["dim"] = c.surrogate.dim;
  j["include_pressure"] = c.surrogate.include_pressure;
  j["precision"] = precision_name(c.surrogate.precision);
  return j.dump(2);
}

TrainConfig load_train_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return train_config_from_json(ss.str());
}

template <class T>
TrainData<T> prepare_train_data(std::vector<Trajectory> dataset,
                                const TrainConfig& config) {
  if (dataset.empty()) throw DataError("prepare_train_data: empty dataset");
  TrainData<T> data;
  data.sims.resize(dataset.size());
  for (size_t s = 0; s < dataset.size(); ++s) {
    SimData<T>& sim = data.sims[s];
    sim.traj = std::move(dataset[s]);
    const Mesh& mesh = sim.traj.mesh;
    sim.full_ctx = build_graph_ctx<T>(mesh);
    const AdjacencyCsr adj = AdjacencyCsr::from_arcs(mesh.num_nodes(), mesh.arcs);
    PartitionPlan plan = PartitionPlan::from_mesh(mesh, config.plan_counts);
    sim.assignment = assign_subdomains(mesh, plan);
    sim.patches = build_patches(mesh, adj, sim.assignment, plan, config.ghost_k);
    sim.patch_ctx.reserve(sim.patches.size());
    for (const Patch& p : sim.patches)
      sim.patch_ctx.push_back(build_graph_ctx<T>(mesh, p));
    sim.frames.reserve(sim.traj.frames.size());
    for (size_t f = 0; f < sim.traj.frames.size(); ++f)
      sim.frames.push_back(
          frame_state<T>(sim.traj, f, config.surrogate.include_pressure));
    for (uint32_t i = 0; i < sim.patches.size(); ++i) {
      if (config.train_subdomains.empty() ||
          std::find(config.train_subdomains.begin(), config.train_subdomains.end(),
                    sim.patches[i].subdomain_id) != config.train_subdomains.end())
        sim.allowed_patches.push_back(i);
    }
  }
  const std::vector<size_t> val = [&] {
    std::vector<Trajectory> shallow;  // validation_split reads metadata only
    shallow.reserve(data.sims.size());
    for (const auto& s : data.sims) {
      Trajectory t;
      t.inlet_velocity = s.traj.inlet_velocity;
      shallow.push_back(std::move(t));
    }
    return validation_split(shallow);
  }();
  std::vector<bool> is_val(data.sims.size(), false);
  for (size_t v : val) is_val[v] = true;
  for (size_t s = 0; s < data.sims.size(); ++s)
    (is_val[s] ? data.val_sims : data.train_sims).push_back(s);
  if (data.train_sims.empty()) {
    data.train_sims = data.val_sims;  // tiny datasets train and score alike
  }
  return data;
}

template TrainData<float> prepare_train_data<float>(std::vector<Trajectory>,
                                                    const TrainConfig&);
template TrainData<double> prepare_train_data<double>(std::vector<Trajectory>,
                                                      const TrainConfig&);

template <class T>
TrainState<T> init_train_state(const TrainConfig& config) {
  config.validate();
  TrainState<T> st;
  st.model = init_surrogate<T>(config.seed, config.surrogate);
  st.adam = AdamState<T>(st.model.layout.total);
  st.sample_rng = Rng::stream(config.seed, 0x5A4D504CULL);  // sampling stream
  return st;
}

namespace {

// Per-worker scratch for one optimizer step.
template <class T>
struct WorkerScratch {
  std::vector<T> grads;
  double loss_sum = 0.0;
};

template <class T>
void apply_noise(FeatureMatrix<T>& state, int dim, const TrainConfig& c,
                 Rng& rng) {
  const size_t n = state.cols();
  for (int r = 0; r < dim; ++r) {
    const double sigma =
        r + 1 == dim ? c.noise_momentum_vertical : c.noise_momentum_horizontal;
    T* row = state.row(r);
    for (size_t i = 0; i < n; ++i)
      row[i] += static_cast<T>(sigma * rng.next_gaussian());
  }
  T* vf = state.row(dim);
  for (size_t i = 0; i < n; ++i)
    vf[i] += static_cast<T>(c.noise_volume_fraction * rng.next_gaussian());
}

}  // namespace

template <class T>
double train_step(TrainState<T>& state, const TrainData<T>& data,
                  const TrainConfig& config) {
  const SurrogateConfig& sc = config.surrogate;
  const int dim = sc.dim;
  const int cout = sc.out_channels();

  if (state.worker_rngs.empty())
    for (int w = 0; w < config.workers; ++w)
      state.worker_rngs.push_back(Rng::stream(config.seed, 1000 + w));

  if (!state.model.norm.all_frozen() &&
      state.step >= config.normalizer_freeze_step)
    state.model.norm.freeze_all();

  // Snapshots so an aborted step leaves every piece of state untouched.
  const Rng sample_rng_backup = state.sample_rng;
  const std::vector<Rng> worker_rngs_backup = state.worker_rngs;

  // Sample the batch: uniform over (train sim, usable frame, allowed patch).
  std::vector<uint32_t> frames_per, patches_per;
  for (size_t s : data.train_sims) {
    frames_per.push_back(
        static_cast<uint32_t>(data.sims[s].frames.size() - 1));
    patches_per.push_back(
        static_cast<uint32_t>(data.sims[s].allowed_patches.size()));
  }
  std::vector<PatchSample> batch;
  if (config.strict_equivalence) {
    // all patches of one (sim, frame) before the update
    std::vector<uint32_t> ones(frames_per.size(), 1);
    PatchSample pick = sample_patches(state.sample_rng, frames_per, ones, 1)[0];
    const SimData<T>& sim = data.sims[data.train_sims[pick.sim]];
    for (uint32_t i = 0; i < sim.allowed_patches.size(); ++i)
      batch.push_back({pick.sim, pick.frame, i});
  } else {
    batch = sample_patches(state.sample_rng, frames_per, patches_per,
                           config.batch_patches);
  }

  const int workers = config.workers;
  std::vector<WorkerScratch<T>> scratch(workers);
  for (auto& w : scratch) w.grads.assign(state.model.layout.total, T(0));

  // Pre-compute mask sizes so every worker can scale the loss identically.
  size_t total_masked = 0;
  std::vector<std::vector<uint8_t>> masks(batch.size());
  for (size_t b = 0; b < batch.size(); ++b) {
    const SimData<T>& sim = data.sims[data.train_sims[batch[b].sim]];
    const Patch& patch = sim.patches[sim.allowed_patches[batch[b].patch]];
    masks[b].assign(patch.num_subdomain(), 1);
    if (config.fluid_only_loss) {
      for (size_t i = 0; i < patch.num_subdomain(); ++i)
        if (sim.traj.mesh.node_type[patch.subdomain_nodes[i]] != NodeType::kFluid)
          masks[b][i] = 0;
    }
    for (uint8_t m : masks[b]) total_masked += m;
  }
  if (total_masked == 0) {
    std::cerr << "[pmgn] warning: empty loss mask; step skipped\n";
    return std::numeric_limits<double>::quiet_NaN();
  }
  const double scale = 1.0 / (static_cast<double>(cout) * total_masked);

  // Online normalization: the batch statistics merge in (batch order) before
  // the forward passes. Kept restorable so an aborted step leaves the state
  // untouched.
  const NormalizerSet norm_backup = state.model.norm;
  if (!state.model.norm.all_frozen()) {
    for (size_t b = 0; b < batch.size(); ++b) {
      const PatchSample& ps = batch[b];
      const SimData<T>& sim = data.sims[data.train_sims[ps.sim]];
      const uint32_t pidx = sim.allowed_patches[ps.patch];
      const Patch& patch = sim.patches[pidx];
      const GraphCtx<T>& ctx = sim.patch_ctx[pidx];
      FeatureMatrix<T> y = gather_state(sim.frames[ps.frame], patch);
      FeatureMatrix<T> y_next = gather_state(sim.frames[ps.frame + 1], patch);
      FeatureMatrix<T> node_x(sc.node_in(), y.cols());
      for (size_t r = 0; r < y.rows(); ++r)
        std::copy(y.row(r), y.row(r) + y.cols(), node_x.row(r));
      for (size_t r = 0; r < ctx.static_node.rows(); ++r)
        std::copy(ctx.static_node.row(r), ctx.static_node.row(r) + y.cols(),
                  node_x.row(y.rows() + r));
      state.model.norm.node_in.accumulate(node_x.data().data(), sc.node_in(),
                                          y.cols());
      state.model.norm.edge_in.accumulate(ctx.edge_features.data().data(),
                                          sc.edge_in(),
                                          ctx.edge_features.cols());
      FeatureMatrix<T> delta(cout, patch.num_subdomain());
      for (int c = 0; c < cout; ++c)
        for (size_t i = 0; i < patch.num_subdomain(); ++i)
          delta.at(c, i) = y_next.at(c, i) - y.at(c, i);
      state.model.norm.target.accumulate(delta.data().data(), cout,
                                         patch.num_subdomain());
    }
  }
  std::vector<double> inv_var(cout);
  for (int c = 0; c < cout; ++c)
    inv_var[c] = 1.0 / state.model.norm.target.variance(c);

  auto process = [&](int w) {
    WorkerScratch<T>& ws = scratch[w];
    for (size_t b = w; b < batch.size(); b += workers) {
      const PatchSample& ps = batch[b];
      const SimData<T>& sim = data.sims[data.train_sims[ps.sim]];
      const uint32_t pidx = sim.allowed_patches[ps.patch];
      const Patch& patch = sim.patches[pidx];
      const GraphCtx<T>& ctx = sim.patch_ctx[pidx];

      FeatureMatrix<T> y = gather_state(sim.frames[ps.frame], patch);
      FeatureMatrix<T> y_next = gather_state(sim.frames[ps.frame + 1], patch);

      apply_noise(y, dim, config, state.worker_rngs[w]);

      SurrogateEvaluator<T> net(state.model, ctx, &ws.grads, true);
      StepResult<T> step = integrator_step(config.integrator, net, y, true);

      // subdomain-masked MSE on normalized deltas; target is the data next
      // state minus the (noisy) input
      FeatureMatrix<T> upstream(cout, y.cols());
      for (int c = 0; c < cout; ++c) {
        const double wch = inv_var[c];
        for (size_t i = 0; i < patch.num_subdomain(); ++i) {
          if (!masks[b][i]) continue;
          const double diff = static_cast<double>(step.next.at(c, i)) -
                              static_cast<double>(y_next.at(c, i));
          ws.loss_sum += wch * diff * diff;
          upstream.at(c, i) = static_cast<T>(2.0 * wch * diff * scale);
        }
      }
      step_backward(config.integrator, net, step, upstream);
    }
  };

  if (config.parallel_workers && workers > 1) {
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (int w = 0; w < workers; ++w) threads.emplace_back(process, w);
    for (auto& t : threads) t.join();
  } else {
    for (int w = 0; w < workers; ++w) process(w);
  }

  double loss = 0.0;
  for (const auto& ws : scratch) loss += ws.loss_sum;
  loss *= scale;
  if (!std::isfinite(loss)) {
    std::cerr << "[pmgn] non-finite loss at step " << state.step
              << "; step aborted\n";
    state.model.norm = norm_backup;
    state.sample_rng = sample_rng_backup;
    state.worker_rngs = worker_rngs_backup;
    return std::numeric_limits<double>::quiet_NaN();
  }

  // Commit gradients in worker-id order.
  std::vector<T>& total = scratch[0].grads;
  for (int w = 1; w < workers; ++w)
    for (size_t i = 0; i < total.size(); ++i) total[i] += scratch[w].grads[i];

  const double lr = lr_schedule(config.lr_start, config.lr_end,
                                config.decay_horizon, state.step);
  adam_update(state.adam, state.model.params, total, lr, config.adam);
  state.step += 1;
  state.last_train_loss = loss;
  return loss;
}

template <class T>
EvalMetrics evaluate(const Surrogate<T>& model, const TrainData<T>& data,
                     IntegratorKind kind, const std::vector<size_t>& sims,
                     size_t n_samples, uint64_t seed) {
  if (sims.empty()) throw DataError("evaluate: no sims given");
  const int cout = model.config.out_channels();
  EvalMetrics m;
  m.mse_normalized_per_channel.assign(cout, 0.0);
  m.rmse_raw.assign(cout, 0.0);
  Rng rng(seed);
  std::vector<double> inv_var(cout);
  for (int c = 0; c < cout; ++c) inv_var[c] = 1.0 / model.norm.target.variance(c);
  size_t total_nodes = 0;
  for (size_t i = 0; i < n_samples; ++i) {
    const size_t s = sims[rng.next_below(sims.size())];
    const SimData<T>& sim = data.sims[s];
    const size_t frame = rng.next_below(sim.frames.size() - 1);
    SurrogateEvaluator<T> net(model, sim.full_ctx);
    StepResult<T> step = integrator_step(kind, net, sim.frames[frame]);
    const FeatureMatrix<T>& truth = sim.frames[frame + 1];
    const size_t n = truth.cols();
    for (int c = 0; c < cout; ++c) {
      double acc = 0.0;
      for (size_t v = 0; v < n; ++v) {
        const double d = static_cast<double>(step.next.at(c, v)) -
                         static_cast<double>(truth.at(c, v));
        acc += d * d;
      }
      m.rmse_raw[c] += acc;
      m.mse_normalized_per_channel[c] += acc * inv_var[c];
    }
    total_nodes += n;
  }
  for (int c = 0; c < cout; ++c) {
    m.rmse_raw[c] = std::sqrt(m.rmse_raw[c] / total_nodes);
    m.mse_normalized_per_channel[c] /= static_cast<double>(total_nodes);
    m.mse_normalized += m.mse_normalized_per_channel[c];
  }
  m.mse_normalized /= cout;
  m.samples = n_samples;
  return m;
}

template <class T>
TrainRunResult<T> run_training(const TrainConfig& config,
                               const TrainData<T>& data) {
  TrainRunResult<T> out;
  out.state = init_train_state<T>(config);
  TrainState<T>& st = out.state;
  double train_acc = 0.0;
  uint64_t train_acc_n = 0;
  const std::vector<size_t>& eval_sims =
      data.val_sims.empty() ? data.train_sims : data.val_sims;
  while (st.step < config.max_steps) {
    const double loss = train_step(st, data, config);
    if (std::isfinite(loss)) {
      train_acc += loss;
      ++train_acc_n;
    }
    if (st.step % config.eval_interval == 0 || st.step == config.max_steps) {
      EvalMetrics em = evaluate(st.model, data, config.integrator, eval_sims,
                                config.eval_samples, config.eval_seed);
      TrainCurveRow row;
      row.step = st.step;
      row.lr = lr_schedule(config.lr_start, config.lr_end, config.decay_horizon,
                           st.step);
      row.train_mse = train_acc_n ? train_acc / train_acc_n : 0.0;
      row.val_mse = em.mse_normalized;
      row.val_rmse_raw = em.rmse_raw;
      out.curve.push_back(row);
      st.val_history.emplace_back(st.step, em.mse_normalized);
      train_acc = 0.0;
      train_acc_n = 0;
      if (config.plateau_stop && st.step >= config.plateau_window) {
        double best_old = std::numeric_limits<double>::infinity();
        double best_all = std::numeric_limits<double>::infinity();
        for (const auto& [step, val] : st.val_history) {
          best_all = std::min(best_all, val);
          if (step + config.plateau_window <= st.step)
            best_old = std::min(best_old, val);
        }
        if (std::isfinite(best_old) &&
            (best_old - best_all) / best_old < config.plateau_rel_improvement)
          break;
      }
    }
  }
  out.stopped_at = st.step;
  return out;
}

#define PMGN_INSTANTIATE(T)                                                   \
  template TrainState<T> init_train_state<T>(const TrainConfig&);            \
  template double train_step<T>(TrainState<T>&, const TrainData<T>&,         \
                                const TrainConfig&);                         \
  template EvalMetrics evaluate<T>(const Surrogate<T>&, const TrainData<T>&, \
                                   IntegratorKind, const std::vector<size_t>&, \
                                   size_t, uint64_t);                        \
  template TrainRunResult<T> run_training<T>(const TrainConfig&,             \
                                             const TrainData<T>&);
PMGN_INSTANTIATE(float)
PMGN_INSTANTIATE(double)
#undef PMGN_INSTANTIATE

}  // namespace pmgn

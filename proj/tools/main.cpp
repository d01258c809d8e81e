#include <CLI11.hpp>

#include <cmath>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "pmgn/checkpoint.hpp"
#include "pmgn/delaunay.hpp"
#include "pmgn/equivalence.hpp"
#include "pmgn/error.hpp"
#include "pmgn/experiments.hpp"
#include "pmgn/ingest.hpp"
#include "pmgn/manifest.hpp"
#include "pmgn/rollout.hpp"
#include "pmgn/synth.hpp"
#include "pmgn/trainer.hpp"
#include "pmgn/trajectory_io.hpp"

namespace fs = std::filesystem;
using namespace pmgn;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitVerify = 3;

std::array<int, 3> parse_plan(const std::string& text) {
  std::array<int, 3> counts = {1, 1, 1};
  std::stringstream ss(text);
  std::string part;
  int i = 0;
  while (std::getline(ss, part, 'x')) {
    if (i >= 3) throw UsageError("plan has too many axes: " + text);
    try {
      counts[i] = std::stoi(part);
    } catch (const std::exception&) {
      throw UsageError("bad plan '" + text + "'");
    }
    if (counts[i] < 1) throw UsageError("plan counts must be >= 1");
    ++i;
  }
  if (i == 0) throw UsageError("empty plan");
  return counts;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create directory " + dir);
}

std::vector<Trajectory> load_dataset(const std::vector<std::string>& files,
                                     uint64_t synth_seed, size_t synth_sims,
                                     size_t synth_nodes, size_t synth_frames) {
  if (!files.empty()) {
    std::vector<Trajectory> out;
    out.reserve(files.size());
    for (const auto& f : files) out.push_back(read_trajectory(f));
    return out;
  }
  std::cerr << "[pmgn] no --data given; generating the bundled synthetic "
               "dataset (seed "
            << synth_seed << ")\n";
  return make_synth_dataset(synth_seed, synth_sims, synth_nodes, synth_frames);
}

int cmd_synth(uint64_t seed, size_t nodes, size_t frames, size_t sims,
              const std::string& out, bool bundled) {
  if (bundled) {
    ensure_dir(out);
    auto set = make_synth_dataset(kBundledDatasetSeed, kBundledSims,
                                  kBundledNodes, kBundledFrames);
    std::vector<std::string> written;
    for (size_t i = 0; i < set.size(); ++i) {
      char name[64];
      std::snprintf(name, sizeof(name), "sim_%03zu.mgtraj", i);
      const std::string path = out + "/" + name;
      write_trajectory(set[i], path);
      written.push_back(name);
    }
    write_manifest(out, "synth --bundled", "{}", kBundledDatasetSeed, written);
    std::cout << "wrote " << written.size() << " trajectories to " << out << "\n";
    return kExitOk;
  }
  if (sims <= 1) {
    Trajectory t = synth_trajectory(seed, nodes, frames);
    write_trajectory(t, out);
    const fs::path p(out);
    write_manifest(p.has_parent_path() ? p.parent_path().string() : ".",
                   "synth", "{}", seed, {p.filename().string()});
    std::cout << "wrote " << out << " (" << t.mesh.num_nodes() << " nodes, "
              << t.frames.size() << " frames, h=" << t.h << ")\n";
    return kExitOk;
  }
  ensure_dir(out);
  auto set = make_synth_dataset(seed, sims, nodes, frames);
  std::vector<std::string> written;
  for (size_t i = 0; i < set.size(); ++i) {
    char name[64];
    std::snprintf(name, sizeof(name), "sim_%03zu.mgtraj", i);
    write_trajectory(set[i], out + "/" + name);
    written.push_back(name);
  }
  write_manifest(out, "synth", "{}", seed, written);
  std::cout << "wrote " << written.size() << " trajectories to " << out << "\n";
  return kExitOk;
}

int cmd_partition(const std::string& traj_path, const std::string& plan_text,
                  int k, const std::string& out_dir) {
  Trajectory t = read_trajectory(traj_path);
  PartitionPlan plan = PartitionPlan::from_mesh(t.mesh, parse_plan(plan_text));
  const auto assignment = assign_subdomains(t.mesh, plan);
  const AdjacencyCsr adj =
      AdjacencyCsr::from_arcs(t.mesh.num_nodes(), t.mesh.arcs);
  const auto patches = build_patches(t.mesh, adj, assignment, plan, k);
  ensure_dir(out_dir);
  {
    std::ofstream out(out_dir + "/assignment.csv");
    out << "node_id,subdomain\n";
    for (size_t v = 0; v < assignment.size(); ++v)
      out << v << "," << assignment[v] << "\n";
  }
  {
    std::ofstream out(out_dir + "/patches.csv");
    out << "subdomain,nodes,ghosts,arcs\n";
    for (const Patch& p : patches)
      out << p.subdomain_id << "," << p.num_subdomain() << ","
          << p.ghost_nodes.size() << "," << p.arcs_local.size() << "\n";
  }
  write_manifest(out_dir, "partition", "{\"plan\":\"" + plan_text + "\"}", 0,
                 {"assignment.csv", "patches.csv"});
  const size_t empty = plan.num_subdomains() - patches.size();
  std::cout << plan.num_subdomains() << " subdomains (" << patches.size()
            << " non-empty, " << empty << " empty), k=" << k << "\n";
  return kExitOk;
}

template <class T>
int train_with_precision(TrainConfig config, std::vector<Trajectory> dataset,
                         const std::string& out_dir) {
  TrainData<T> data = prepare_train_data<T>(std::move(dataset), config);
  TrainRunResult<T> result = run_training<T>(config, data);
  CurveSeries series;
  series.label = "train";
  series.seed = config.seed;
  series.rows = result.curve;
  write_curve_csv(out_dir + "/curve.csv", {series});
  save_checkpoint(result.state, out_dir + "/checkpoint.ckpt");
  write_manifest(out_dir, "train", train_config_to_json(config), config.seed,
                 {"curve.csv", "checkpoint.ckpt"});
  if (!result.curve.empty())
    std::cout << "stopped at step " << result.stopped_at << ", val mse "
              << result.curve.back().val_mse << "\n";
  return kExitOk;
}

int cmd_train(const std::string& config_path, const std::string& experiment,
              const std::vector<std::string>& data_files,
              const std::string& out_dir, int64_t seed_override) {
  ensure_dir(out_dir);
  if (!experiment.empty()) {
    if (experiment == "integrator-compare") {
      IntegratorCompareOptions o;
      IntegratorCompareResult r = run_integrator_compare(o, &std::cerr);
      write_curve_csv(out_dir + "/integrator_compare.csv", r.series);
      write_manifest(out_dir, "train --experiment integrator-compare", "{}",
                     o.dataset_seed, {"integrator_compare.csv"});
    } else if (experiment == "subdomain-gap") {
      SubdomainGapOptions o;
      SubdomainGapResult r = run_subdomain_gap(o, &std::cerr);
      write_curve_csv(out_dir + "/subdomain_gap.csv", r.series);
      write_manifest(out_dir, "train --experiment subdomain-gap", "{}",
                     o.dataset_seed, {"subdomain_gap.csv"});
    } else if (experiment == "patch-parity") {
      PatchParityOptions o;
      PatchParityResult r = run_patch_parity(o, &std::cerr);
      write_curve_csv(out_dir + "/patch_parity.csv", r.series);
      write_manifest(out_dir, "train --experiment patch-parity", "{}",
                     o.dataset_seed, {"patch_parity.csv"});
    } else {
      throw UsageError("unknown experiment '" + experiment +
                       "' (integrator-compare|subdomain-gap|patch-parity)");
    }
    return kExitOk;
  }
  TrainConfig config =
      config_path.empty() ? TrainConfig{} : load_train_config(config_path);
  if (seed_override >= 0) config.seed = static_cast<uint64_t>(seed_override);
  config.validate();
  std::vector<Trajectory> dataset = load_dataset(
      data_files, kBundledDatasetSeed, kBundledSims, kBundledNodes,
      kBundledFrames);
  if (config.surrogate.precision == Precision::kF64)
    return train_with_precision<double>(config, std::move(dataset), out_dir);
  return train_with_precision<float>(config, std::move(dataset), out_dir);
}

template <class T>
int evaluate_with_precision(const std::string& ckpt_path,
                            std::vector<Trajectory> dataset, size_t samples,
                            uint64_t seed, const std::string& out_dir) {
  TrainState<T> state = load_checkpoint<T>(ckpt_path);
  TrainConfig config;
  config.surrogate = state.model.config;
  TrainData<T> data = prepare_train_data<T>(std::move(dataset), config);
  std::vector<size_t> sims =
      data.val_sims.empty() ? data.train_sims : data.val_sims;
  EvalMetrics m = evaluate(state.model, data, config.integrator, sims, samples,
                           seed);
  std::cout << "samples," << m.samples << "\n";
  std::cout << "mse_normalized," << m.mse_normalized << "\n";
  for (size_t c = 0; c < m.rmse_raw.size(); ++c)
    std::cout << "rmse_raw_" << c << "," << m.rmse_raw[c] << "\n";
  if (!out_dir.empty()) {
    ensure_dir(out_dir);
    std::ofstream out(out_dir + "/metrics.csv");
    out << "metric,value\n";
    out << "mse_normalized," << m.mse_normalized << "\n";
    for (size_t c = 0; c < m.rmse_raw.size(); ++c)
      out << "rmse_raw_" << c << "," << m.rmse_raw[c] << "\n";
    write_manifest(out_dir, "evaluate", "{}", seed, {"metrics.csv"});
  }
  return kExitOk;
}

int cmd_evaluate(const std::string& ckpt, const std::vector<std::string>& files,
                 size_t samples, uint64_t seed, const std::string& out_dir) {
  std::vector<Trajectory> dataset = load_dataset(
      files, kBundledDatasetSeed, kBundledSims, kBundledNodes, kBundledFrames);
  if (peek_checkpoint_precision(ckpt) == Precision::kF64)
    return evaluate_with_precision<double>(ckpt, std::move(dataset), samples,
                                           seed, out_dir);
  return evaluate_with_precision<float>(ckpt, std::move(dataset), samples, seed,
                                        out_dir);
}

template <class T>
int rollout_with_precision(const std::string& ckpt_path,
                           const std::string& traj_path, size_t steps,
                           bool patched, const std::string& plan_text, int k,
                           const std::string& out_dir) {
  TrainState<T> state = load_checkpoint<T>(ckpt_path);
  Trajectory traj = read_trajectory(traj_path);
  RolloutResult<T> r;
  if (patched) {
    PartitionPlan plan = PartitionPlan::from_mesh(traj.mesh, parse_plan(plan_text));
    r = rollout_patched(state.model, IntegratorKind::kFE, traj, plan, k, steps);
  } else {
    r = rollout_full(state.model, IntegratorKind::kFE, traj, steps);
  }
  ensure_dir(out_dir);
  write_rollout_csv(out_dir + "/rollout.csv", r.rmse);
  write_manifest(out_dir, patched ? "rollout --patched" : "rollout", "{}", 0,
                 {"rollout.csv"});
  std::cout << "steps," << r.states.size() << "\n";
  std::cout << "divergence_step," << r.divergence_step << "\n";
  if (!r.rmse.empty()) {
    std::cout << "final_rmse";
    for (double v : r.rmse.back()) std::cout << "," << v;
    std::cout << "\n";
  }
  return kExitOk;
}

int cmd_rollout(const std::string& ckpt, const std::string& traj, size_t steps,
                bool patched, const std::string& plan, int k,
                const std::string& out_dir) {
  if (peek_checkpoint_precision(ckpt) == Precision::kF64)
    return rollout_with_precision<double>(ckpt, traj, steps, patched, plan, k,
                                          out_dir);
  return rollout_with_precision<float>(ckpt, traj, steps, patched, plan, k,
                                       out_dir);
}

int cmd_verify(int m, int k, const std::string& integrator, uint64_t seed,
               size_t nodes, const std::string& plan_text, int latent) {
  VerifySetup setup;
  setup.seed = seed;
  setup.n_nodes = nodes;
  setup.mp_steps = m;
  setup.latent_dim = latent;
  setup.k = k;
  setup.plan_counts = parse_plan(plan_text);
  setup.kind = parse_integrator(integrator);
  EquivalenceReport rep = run_verify(setup);
  std::cout << "patches," << rep.patches << "\n";
  std::cout << "forward_max_abs_diff," << rep.forward_max_abs_diff << "\n";
  std::cout << "forward_bitexact," << (rep.forward_bitexact ? 1 : 0) << "\n";
  std::cout << "failing_nodes," << rep.failing_nodes.size() << "\n";
  std::cout << "grad_rel_l2," << rep.grad_rel_l2 << "\n";
  std::cout << "result," << (rep.pass ? "PASS" : "FAIL") << "\n";
  return rep.pass ? kExitOk : kExitVerify;
}

int cmd_ode_order(const std::string& kind_text, const std::string& out_csv) {
  const IntegratorKind kind = parse_integrator(kind_text);
  const AnalyticOde ode = make_exponential_decay();
  const std::vector<double> hs = log_spaced(0.01, 1.0, 12);
  OrderFit fit = verify_order(kind, ode, hs);
  if (!out_csv.empty()) {
    write_order_csv(out_csv, kind_text, fit.points);
    const fs::path p(out_csv);
    write_manifest(p.has_parent_path() ? p.parent_path().string() : ".",
                   "ode-order", "{\"kind\":\"" + kind_text + "\"}", 0,
                   {p.filename().string()});
  }
  double lo = 0, hi = 0;
  switch (kind) {
    case IntegratorKind::kFE: lo = 1.8; hi = 2.2; break;
    case IntegratorKind::kH2: lo = 2.7; hi = 3.3; break;
    case IntegratorKind::kH3: lo = 3.6; hi = 4.4; break;
  }
  std::cout << "kind," << kind_text << "\n";
  std::cout << "slope," << fit.slope << "\n";
  std::cout << "expected_range," << lo << ".." << hi << "\n";
  const bool ok = fit.slope >= lo && fit.slope <= hi;
  std::cout << "result," << (ok ? "PASS" : "FAIL") << "\n";
  return ok ? kExitOk : kExitVerify;
}

int cmd_patch_growth(int dim, size_t nodes, const std::string& plan_text,
                     int kmax, uint64_t seed, const std::string& out_csv) {
  Mesh mesh = make_random_mesh(seed, nodes, dim);
  PartitionPlan plan = PartitionPlan::from_mesh(mesh, parse_plan(plan_text));
  auto rows = measure_patch_growth(mesh, plan, 0, kmax);
  write_patch_growth_csv(out_csv, rows);
  const fs::path p(out_csv);
  write_manifest(p.has_parent_path() ? p.parent_path().string() : ".",
                 "patch-growth", "{\"plan\":\"" + plan_text + "\"}", seed,
                 {p.filename().string()});
  for (const auto& r : rows)
    std::cout << "k=" << r.k << " mean=" << r.mean_nodes << " max=" << r.max_nodes
              << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"patchmgn: patch-trained mesh graph-network surrogates"};
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "generate synthetic trajectories");
  uint64_t synth_seed = 7;
  size_t synth_nodes = 2000, synth_frames = 50, synth_sims = 1;
  std::string synth_out = "out.mgtraj";
  bool synth_bundled = false;
  synth->add_option("--seed", synth_seed);
  synth->add_option("--nodes", synth_nodes);
  synth->add_option("--frames", synth_frames);
  synth->add_option("--sims", synth_sims);
  synth->add_option("--out", synth_out, "output file (or directory with --sims/--bundled)");
  synth->add_flag("--bundled", synth_bundled, "write the bundled 40-sim dataset");

  // ingest
  auto* ingest = app.add_subcommand("ingest", "convert CSV exports to a trajectory");
  std::string ing_nodes, ing_fields, ing_out = "out.mgtraj";
  IngestOptions ing_opts;
  ingest->add_option("--nodes", ing_nodes)->required();
  ingest->add_option("--fields", ing_fields)->required();
  ingest->add_option("--dim", ing_opts.dim);
  ingest->add_option("--h", ing_opts.h);
  ingest->add_option("--sim-id", ing_opts.sim_id);
  ingest->add_option("--inlet-velocity", ing_opts.inlet_velocity);
  ingest->add_option("--out", ing_out);

  // partition
  auto* part = app.add_subcommand("partition", "assign subdomains and build patches");
  std::string part_traj, part_plan = "2x2", part_out = "partition_out";
  int part_k = 3;
  part->add_option("--traj", part_traj)->required();
  part->add_option("--plan", part_plan);
  part->add_option("--k", part_k);
  part->add_option("--out-dir", part_out);

  // train
  auto* train = app.add_subcommand("train", "train a surrogate (or run an experiment preset)");
  std::string train_config, train_experiment, train_out = "train_out";
  std::vector<std::string> train_data;
  int64_t train_seed = -1;
  train->add_option("--config", train_config, "JSON config file");
  train->add_option("--experiment", train_experiment,
                    "integrator-compare|subdomain-gap|patch-parity");
  train->add_option("--data", train_data, "trajectory files")->expected(-1);
  train->add_option("--out-dir", train_out);
  train->add_option("--seed", train_seed, "override config seed");

  // evaluate
  auto* eval = app.add_subcommand("evaluate", "next-step metrics for a checkpoint");
  std::string eval_ckpt, eval_out;
  std::vector<std::string> eval_data;
  size_t eval_samples = 200;
  uint64_t eval_seed = 1;
  eval->add_option("--checkpoint", eval_ckpt)->required();
  eval->add_option("--data", eval_data)->expected(-1);
  eval->add_option("--samples", eval_samples);
  eval->add_option("--seed", eval_seed);
  eval->add_option("--out-dir", eval_out);

  // rollout
  auto* roll = app.add_subcommand("rollout", "autoregressive rollout");
  std::string roll_ckpt, roll_traj, roll_plan = "2x2", roll_out = "rollout_out";
  size_t roll_steps = 50;
  bool roll_patched = false;
  int roll_k = 3;
  roll->add_option("--checkpoint", roll_ckpt)->required();
  roll->add_option("--traj", roll_traj)->required();
  roll->add_option("--steps", roll_steps);
  roll->add_flag("--patched", roll_patched);
  roll->add_option("--plan", roll_plan);
  roll->add_option("--k", roll_k);
  roll->add_option("--out-dir", roll_out);

  // verify
  auto* verify = app.add_subcommand("verify", "patch-vs-full equivalence check");
  int ver_m = 3, ver_k = 3, ver_latent = 32;
  std::string ver_integrator = "fe", ver_plan = "2x2";
  uint64_t ver_seed = 7;
  size_t ver_nodes = 2000;
  verify->add_option("--m", ver_m, "message-passing steps");
  verify->add_option("--k", ver_k, "ghost width (hops)");
  verify->add_option("--integrator", ver_integrator);
  verify->add_option("--seed", ver_seed);
  verify->add_option("--nodes", ver_nodes);
  verify->add_option("--plan", ver_plan);
  verify->add_option("--latent", ver_latent);

  // ode-order
  auto* order = app.add_subcommand("ode-order", "integrator order slopes on an analytic ODE");
  std::string order_kind = "fe", order_out;
  order->add_option("--kind", order_kind);
  order->add_option("--out", order_out, "CSV path");

  // patch-growth
  auto* growth = app.add_subcommand("patch-growth", "mean patch size vs ghost width");
  int gr_dim = 3, gr_kmax = 7;
  size_t gr_nodes = 20000;
  uint64_t gr_seed = 5;
  std::string gr_plan = "6x6x6", gr_out = "patch_growth.csv";
  growth->add_option("--dim", gr_dim);
  growth->add_option("--nodes", gr_nodes);
  growth->add_option("--plan", gr_plan);
  growth->add_option("--kmax", gr_kmax);
  growth->add_option("--seed", gr_seed);
  growth->add_option("--out", gr_out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (synth->parsed())
      return cmd_synth(synth_seed, synth_nodes, synth_frames, synth_sims,
                       synth_out, synth_bundled);
    if (ingest->parsed()) {
      Trajectory t = ingest_csv(ing_nodes, ing_fields, ing_opts);
      write_trajectory(t, ing_out);
      const fs::path p(ing_out);
      write_manifest(p.has_parent_path() ? p.parent_path().string() : ".",
                     "ingest", "{}", 0, {p.filename().string()});
      std::cout << "wrote " << ing_out << " (" << t.mesh.num_nodes()
                << " nodes, " << t.frames.size() << " frames)\n";
      return kExitOk;
    }
    if (part->parsed()) return cmd_partition(part_traj, part_plan, part_k, part_out);
    if (train->parsed())
      return cmd_train(train_config, train_experiment, train_data, train_out,
                       train_seed);
    if (eval->parsed())
      return cmd_evaluate(eval_ckpt, eval_data, eval_samples, eval_seed, eval_out);
    if (roll->parsed())
      return cmd_rollout(roll_ckpt, roll_traj, roll_steps, roll_patched,
                         roll_plan, roll_k, roll_out);
    if (verify->parsed())
      return cmd_verify(ver_m, ver_k, ver_integrator, ver_seed, ver_nodes,
                        ver_plan, ver_latent);
    if (order->parsed()) return cmd_ode_order(order_kind, order_out);
    if (growth->parsed())
      return cmd_patch_growth(gr_dim, gr_nodes, gr_plan, gr_kmax, gr_seed, gr_out);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const VerificationError& e) {
    std::cerr << "verification error: " << e.what() << "\n";
    return kExitVerify;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

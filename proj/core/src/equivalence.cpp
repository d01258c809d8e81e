#include "pmgn/equivalence.hpp"

#include <cmath>

#include "pmgn/synth.hpp"

namespace pmgn {
namespace {

// Warm the normalizer statistics from one frame so normalization is
// non-trivial, then freeze.
template <class T>
void fit_and_freeze_norm(Surrogate<T>& model, const GraphCtx<T>& ctx,
                         const FeatureMatrix<T>& y,
                         const FeatureMatrix<T>& y_next) {
  const SurrogateConfig& c = model.config;
  const size_t n = y.cols();
  FeatureMatrix<T> node_x(c.node_in(), n);
  for (size_t r = 0; r < y.rows(); ++r)
    std::copy(y.row(r), y.row(r) + n, node_x.row(r));
  for (size_t r = 0; r < ctx.static_node.rows(); ++r)
    std::copy(ctx.static_node.row(r), ctx.static_node.row(r) + n,
              node_x.row(y.rows() + r));
  model.norm.node_in.accumulate(node_x.data().data(), c.node_in(), n);
  model.norm.edge_in.accumulate(ctx.edge_features.data().data(), c.edge_in(),
                                ctx.edge_features.cols());
  FeatureMatrix<T> delta(c.out_channels(), n);
  for (int ch = 0; ch < c.out_channels(); ++ch)
    for (size_t v = 0; v < n; ++v)
      delta.at(ch, v) = y_next.at(ch, v) - y.at(ch, v);
  model.norm.target.accumulate(delta.data().data(), c.out_channels(), n);
  model.norm.freeze_all();
}

}  // namespace

template <class T>
EquivalenceReport verify_full_equivalence(const Surrogate<T>& model_in,
                                          const Trajectory& traj, size_t frame,
                                          const PartitionPlan& plan, int k,
                                          IntegratorKind kind) {
  if (frame + 1 >= traj.frames.size())
    throw DataError("verify_full_equivalence: frame needs a successor");
  Surrogate<T> model = model_in;

  const Mesh& mesh = traj.mesh;
  const size_t n = mesh.num_nodes();
  const int cout = model.config.out_channels();
  GraphCtx<T> full_ctx = build_graph_ctx<T>(mesh);
  FeatureMatrix<T> y = frame_state<T>(traj, frame, model.config.include_pressure);
  FeatureMatrix<T> y_next =
      frame_state<T>(traj, frame + 1, model.config.include_pressure);
  if (!model.norm.all_frozen()) fit_and_freeze_norm(model, full_ctx, y, y_next);

  std::vector<double> inv_var(cout);
  for (int c = 0; c < cout; ++c)
    inv_var[c] = 1.0 / model.norm.target.variance(c);
  const double scale = 1.0 / (static_cast<double>(cout) * n);

  // Full-domain step + gradient of the global mean loss.
  std::vector<T> grads_full(model.layout.total, T(0));
  FeatureMatrix<T> next_full;
  {
    SurrogateEvaluator<T> net(model, full_ctx, &grads_full, true);
    StepResult<T> step = integrator_step(kind, net, y, true);
    next_full = step.next;
    FeatureMatrix<T> upstream(cout, n);
    for (int c = 0; c < cout; ++c)
      for (size_t v = 0; v < n; ++v) {
        const double diff = static_cast<double>(step.next.at(c, v)) -
                            static_cast<double>(y_next.at(c, v));
        upstream.at(c, v) = static_cast<T>(2.0 * inv_var[c] * diff * scale);
      }
    step_backward(kind, net, step, upstream);
  }

  // Patched execution: same loss, masked to each patch's subdomain nodes,
  // gradients accumulated over all patches before comparing.
  const AdjacencyCsr adj = AdjacencyCsr::from_arcs(n, mesh.arcs);
  const std::vector<uint32_t> assignment = assign_subdomains(mesh, plan);
  const std::vector<Patch> patches = build_patches(mesh, adj, assignment, plan, k);

  EquivalenceReport rep;
  rep.patches = patches.size();
  rep.nodes = n;
  std::vector<T> grads_patch(model.layout.total, T(0));
  for (const Patch& patch : patches) {
    GraphCtx<T> ctx = build_graph_ctx<T>(mesh, patch);
    FeatureMatrix<T> yp = gather_state(y, patch);
    FeatureMatrix<T> yp_next = gather_state(y_next, patch);
    SurrogateEvaluator<T> net(model, ctx, &grads_patch, true);
    StepResult<T> step = integrator_step(kind, net, yp, true);
    FeatureMatrix<T> upstream(cout, yp.cols());
    for (size_t i = 0; i < patch.num_subdomain(); ++i) {
      const uint32_t g = patch.subdomain_nodes[i];
      bool differs = false;
      for (int c = 0; c < cout; ++c) {
        const double a = static_cast<double>(step.next.at(c, i));
        const double b = static_cast<double>(next_full.at(c, g));
        const double diff = std::fabs(a - b);
        if (diff > rep.forward_max_abs_diff) rep.forward_max_abs_diff = diff;
        if (a != b || std::signbit(a) != std::signbit(b)) differs = true;
        const double ldiff = a - static_cast<double>(yp_next.at(c, i));
        upstream.at(c, i) = static_cast<T>(2.0 * inv_var[c] * ldiff * scale);
      }
      if (differs) {
        rep.forward_bitexact = false;
        rep.failing_nodes.push_back(g);
      }
    }
    step_backward(kind, net, step, upstream);
  }

  double num = 0.0, den = 0.0;
  for (size_t i = 0; i < grads_full.size(); ++i) {
    const double d = static_cast<double>(grads_patch[i]) -
                     static_cast<double>(grads_full[i]);
    num += d * d;
    den += static_cast<double>(grads_full[i]) * static_cast<double>(grads_full[i]);
  }
  rep.grad_rel_l2 = den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
  rep.forward_pass = rep.forward_bitexact || rep.forward_max_abs_diff <= 1e-12;
  rep.grad_pass = rep.grad_rel_l2 <= 1e-12;
  rep.pass = rep.forward_pass && rep.grad_pass;
  return rep;
}

template EquivalenceReport verify_full_equivalence<float>(
    const Surrogate<float>&, const Trajectory&, size_t, const PartitionPlan&,
    int, IntegratorKind);
template EquivalenceReport verify_full_equivalence<double>(
    const Surrogate<double>&, const Trajectory&, size_t, const PartitionPlan&,
    int, IntegratorKind);

EquivalenceReport run_verify(const VerifySetup& setup) {
  SynthParams sp;
  sp.n_nodes = setup.n_nodes;
  sp.n_frames = 3;
  Trajectory traj = synth_trajectory(setup.seed, sp);
  SurrogateConfig sc;
  sc.dim = 2;
  sc.mp_steps = setup.mp_steps;
  sc.latent_dim = setup.latent_dim;
  sc.precision = Precision::kF64;
  Surrogate<double> model = init_surrogate<double>(setup.seed ^ 0xC0FFEE, sc);
  PartitionPlan plan = PartitionPlan::from_mesh(traj.mesh, setup.plan_counts);
  return verify_full_equivalence(model, traj, 0, plan, setup.k, setup.kind);
}

}  // namespace pmgn

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "oracles.hpp"
#include "pmgn/integrators.hpp"
#include "pmgn/rng.hpp"
#include "pmgn/surrogate.hpp"
#include "pmgn/synth.hpp"

using namespace pmgn;

namespace {

Mesh path_mesh(size_t n) {
  Mesh mesh;
  mesh.dim = 2;
  mesh.positions.resize(n * 2);
  mesh.boundary_index.assign(n, kFluidSentinel);
  for (size_t v = 0; v < n; ++v) {
    mesh.positions[v * 2] = 0.1f * static_cast<float>(v);
    mesh.positions[v * 2 + 1] = 0.25f;
  }
  for (uint32_t v = 0; v + 1 < n; ++v) {
    mesh.arcs.push_back({v, v + 1});
    mesh.arcs.push_back({v + 1, v});
  }
  mesh.derive_node_types();
  return mesh;
}

template <class T>
Surrogate<T> warmed_model(uint64_t seed, const SurrogateConfig& cfg,
                          const GraphCtx<T>& ctx, const FeatureMatrix<T>& state) {
  Surrogate<T> model = init_surrogate<T>(seed, cfg);
  // non-trivial but frozen statistics
  FeatureMatrix<T> node_x(cfg.node_in(), state.cols());
  for (size_t r = 0; r < state.rows(); ++r)
    std::copy(state.row(r), state.row(r) + state.cols(), node_x.row(r));
  for (size_t r = 0; r < ctx.static_node.rows(); ++r)
    std::copy(ctx.static_node.row(r), ctx.static_node.row(r) + state.cols(),
              node_x.row(state.rows() + r));
  model.norm.node_in.accumulate(node_x.data().data(), cfg.node_in(), state.cols());
  model.norm.edge_in.accumulate(ctx.edge_features.data().data(), cfg.edge_in(),
                                ctx.edge_features.cols());
  std::vector<T> fake(cfg.out_channels() * state.cols());
  Rng r(seed + 1);
  for (auto& v : fake) v = static_cast<T>(r.uniform(-1, 1));
  model.norm.target.accumulate(fake.data(), cfg.out_channels(), state.cols());
  model.norm.freeze_all();
  return model;
}

template <class T>
FeatureMatrix<T> random_state(uint64_t seed, int channels, size_t n) {
  Rng rng(seed);
  FeatureMatrix<T> state(channels, n);
  for (auto& v : state.data()) v = static_cast<T>(rng.uniform(-1, 1));
  return state;
}

}  // namespace

TEST_SUITE("surrogate") {

TEST_CASE("m=0 output depends only on the node's own features") {
  Mesh mesh = path_mesh(9);
  GraphCtx<double> ctx = build_graph_ctx<double>(mesh);
  SurrogateConfig cfg;
  cfg.mp_steps = 0;
  cfg.latent_dim = 8;
  cfg.precision = Precision::kF64;
  FeatureMatrix<double> state = random_state<double>(1, cfg.state_channels(), 9);
  Surrogate<double> model = warmed_model(2, cfg, ctx, state);

  FeatureMatrix<double> base;
  net_forward(model, ctx, state, base, nullptr);
  FeatureMatrix<double> perturbed = state;
  perturbed.at(0, 5) += 0.5;
  FeatureMatrix<double> out;
  net_forward(model, ctx, perturbed, out, nullptr);
  for (size_t v = 0; v < 9; ++v)
    for (int c = 0; c < cfg.out_channels(); ++c) {
      if (v == 5)
        continue;
      CHECK(out.at(c, v) == base.at(c, v));
    }
  CHECK(out.at(0, 5) != base.at(0, 5));
}

TEST_CASE("m=2: locality horizon is exactly two hops on a path") {
  Mesh mesh = path_mesh(11);
  GraphCtx<double> ctx = build_graph_ctx<double>(mesh);
  SurrogateConfig cfg;
  cfg.mp_steps = 2;
  cfg.latent_dim = 8;
  cfg.precision = Precision::kF64;
  FeatureMatrix<double> state = random_state<double>(3, cfg.state_channels(), 11);
  Surrogate<double> model = warmed_model(4, cfg, ctx, state);

  FeatureMatrix<double> base;
  net_forward(model, ctx, state, base, nullptr);
  // perturb node 8: nodes within 2 hops (6..10) may change; 0..5 must not
  FeatureMatrix<double> perturbed = state;
  perturbed.at(1, 8) += 1.0;
  FeatureMatrix<double> out;
  net_forward(model, ctx, perturbed, out, nullptr);
  for (size_t v = 0; v <= 5; ++v)
    for (int c = 0; c < cfg.out_channels(); ++c)
      CHECK(out.at(c, v) == base.at(c, v));
  bool changed_within = false;
  for (size_t v = 6; v <= 10; ++v)
    for (int c = 0; c < cfg.out_channels(); ++c)
      if (out.at(c, v) != base.at(c, v)) changed_within = true;
  CHECK(changed_within);
  CHECK(out.at(0, 6) != base.at(0, 6));  // exactly at the horizon
}

TEST_CASE("isomorphic disjoint components produce identical outputs") {
  // two copies of the same 4-node square graph, identical features
  Mesh mesh;
  mesh.dim = 2;
  const float sq[8] = {0, 0, 1, 0, 0, 1, 1, 1};
  mesh.positions.assign(16, 0.0f);
  for (int copy = 0; copy < 2; ++copy)
    for (int v = 0; v < 4; ++v) {
      mesh.positions[(copy * 4 + v) * 2] = sq[v * 2];
      mesh.positions[(copy * 4 + v) * 2 + 1] = sq[v * 2 + 1];
    }
  mesh.boundary_index.assign(8, kFluidSentinel);
  auto link = [&](uint32_t a, uint32_t b) {
    mesh.arcs.push_back({a, b});
    mesh.arcs.push_back({b, a});
  };
  for (uint32_t copy = 0; copy < 2; ++copy) {
    const uint32_t o = copy * 4;
    link(o + 0, o + 1);
    link(o + 1, o + 3);
    link(o + 3, o + 2);
    link(o + 2, o + 0);
  }
  std::sort(mesh.arcs.begin(), mesh.arcs.end(), [](const Arc& x, const Arc& y) {
    auto kx = std::minmax(x.sender, x.receiver);
    auto ky = std::minmax(y.sender, y.receiver);
    if (kx != ky) return kx < ky;
    return x.sender < y.sender;
  });
  mesh.derive_node_types();
  GraphCtx<double> ctx = build_graph_ctx<double>(mesh);
  SurrogateConfig cfg;
  cfg.mp_steps = 3;
  cfg.latent_dim = 8;
  cfg.precision = Precision::kF64;
  FeatureMatrix<double> state(cfg.state_channels(), 8);
  Rng rng(5);
  for (int c = 0; c < cfg.state_channels(); ++c)
    for (int v = 0; v < 4; ++v) {
      const double val = rng.uniform(-1, 1);
      state.at(c, v) = val;
      state.at(c, v + 4) = val;
    }
  Surrogate<double> model = warmed_model(6, cfg, ctx, state);
  FeatureMatrix<double> out;
  net_forward(model, ctx, state, out, nullptr);
  for (int c = 0; c < cfg.out_channels(); ++c)
    for (int v = 0; v < 4; ++v) CHECK(out.at(c, v) == out.at(c, v + 4));
}

TEST_CASE("permutation equivariance is bit-exact with re-sorted aggregation") {
  Mesh mesh = make_random_mesh(61, 120, 2);
  GraphCtx<double> ctx = build_graph_ctx<double>(mesh);
  SurrogateConfig cfg;
  cfg.mp_steps = 2;
  cfg.latent_dim = 8;
  cfg.precision = Precision::kF64;
  const size_t n = mesh.num_nodes();
  FeatureMatrix<double> state = random_state<double>(7, cfg.state_channels(), n);
  Surrogate<double> model = warmed_model(8, cfg, ctx, state);
  FeatureMatrix<double> base;
  net_forward(model, ctx, state, base, nullptr);

  // permute node ids
  std::vector<uint32_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0u);
  Rng rng(9);
  for (size_t i = n; i > 1; --i)
    std::swap(perm[i - 1], perm[rng.next_below(i)]);
  Mesh pmesh;
  pmesh.dim = 2;
  pmesh.positions.resize(n * 2);
  pmesh.boundary_index.resize(n);
  for (size_t v = 0; v < n; ++v) {
    pmesh.positions[perm[v] * 2] = mesh.positions[v * 2];
    pmesh.positions[perm[v] * 2 + 1] = mesh.positions[v * 2 + 1];
    pmesh.boundary_index[perm[v]] = mesh.boundary_index[v];
  }
  // arcs in the ORIGINAL aggregation order, relabeled: per receiver the
  // sender sequence stays sorted by the original ids
  std::vector<Arc> arcs;
  for (size_t a = 0; a < ctx.send.size(); ++a)
    arcs.push_back({perm[ctx.send[a]], perm[ctx.recv[a]]});
  pmesh.derive_node_types();
  GraphCtx<double> pctx = build_graph_ctx<double>(pmesh, arcs);
  FeatureMatrix<double> pstate(cfg.state_channels(), n);
  for (int c = 0; c < cfg.state_channels(); ++c)
    for (size_t v = 0; v < n; ++v) pstate.at(c, perm[v]) = state.at(c, v);
  FeatureMatrix<double> pout;
  net_forward(model, pctx, pstate, pout, nullptr);
  for (int c = 0; c < cfg.out_channels(); ++c)
    for (size_t v = 0; v < n; ++v)
      CHECK(pout.at(c, perm[v]) == base.at(c, v));
}

TEST_CASE("repeated forward and backward are bit-identical") {
  Mesh mesh = make_random_mesh(71, 150, 2);
  GraphCtx<double> ctx = build_graph_ctx<double>(mesh);
  SurrogateConfig cfg;
  cfg.mp_steps = 2;
  cfg.latent_dim = 8;
  cfg.precision = Precision::kF64;
  FeatureMatrix<double> state =
      random_state<double>(11, cfg.state_channels(), mesh.num_nodes());
  Surrogate<double> model = warmed_model(12, cfg, ctx, state);
  FeatureMatrix<double> out1, out2;
  EvalTape<double> tape1, tape2;
  net_forward(model, ctx, state, out1, &tape1);
  net_forward(model, ctx, state, out2, &tape2);
  CHECK(out1.data() == out2.data());
  FeatureMatrix<double> up = random_state<double>(13, cfg.out_channels(),
                                                  mesh.num_nodes());
  std::vector<double> g1(model.layout.total, 0.0), g2(model.layout.total, 0.0);
  net_backward(model, ctx, tape1, up, g1, nullptr);
  net_backward(model, ctx, tape2, up, g2, nullptr);
  CHECK(g1 == g2);
}

TEST_CASE("gradients match central finite differences") {
  Mesh mesh = path_mesh(7);
  GraphCtx<double> ctx = build_graph_ctx<double>(mesh);
  SurrogateConfig cfg;
  cfg.mp_steps = 1;
  cfg.latent_dim = 4;
  cfg.precision = Precision::kF64;
  FeatureMatrix<double> state = random_state<double>(21, cfg.state_channels(), 7);
  FeatureMatrix<double> target = random_state<double>(22, cfg.out_channels(), 7);

  for (uint64_t seed = 0; seed < 20; ++seed) {
    Surrogate<double> model = warmed_model(100 + seed, cfg, ctx, state);
    REQUIRE(model.layout.total <= 500);
    auto loss = [&](const Surrogate<double>& m) {
      FeatureMatrix<double> out;
      net_forward(m, ctx, state, out, nullptr);
      double l = 0.0;
      for (size_t i = 0; i < out.data().size(); ++i) {
        const double d = out.data()[i] - target.data()[i];
        l += d * d;
      }
      return l;
    };
    std::vector<double> grads(model.layout.total, 0.0);
    {
      FeatureMatrix<double> out;
      EvalTape<double> tape;
      net_forward(model, ctx, state, out, &tape);
      FeatureMatrix<double> up(cfg.out_channels(), 7);
      for (size_t i = 0; i < out.data().size(); ++i)
        up.data()[i] = 2.0 * (out.data()[i] - target.data()[i]);
      net_backward(model, ctx, tape, up, grads, nullptr);
    }
    double max_rel = 0.0, gmax = 0.0;
    std::vector<double> fd(model.layout.total, 0.0);
    const double eps = 1e-6;
    for (size_t i = 0; i < model.layout.total; ++i) {
      Surrogate<double> mp = model;
      mp.params[i] += eps;
      Surrogate<double> mm = model;
      mm.params[i] -= eps;
      fd[i] = (loss(mp) - loss(mm)) / (2 * eps);
      gmax = std::max(gmax, std::fabs(fd[i]));
    }
    for (size_t i = 0; i < model.layout.total; ++i) {
      const double denom =
          std::max(std::max(std::fabs(grads[i]), std::fabs(fd[i])), 1e-4 * gmax);
      max_rel = std::max(max_rel, std::fabs(grads[i] - fd[i]) / denom);
    }
    CHECK(max_rel <= 1e-6);
  }
}

TEST_CASE("zero upstream gradient gives zero gradients") {
  Mesh mesh = path_mesh(6);
  GraphCtx<double> ctx = build_graph_ctx<double>(mesh);
  SurrogateConfig cfg;
  cfg.mp_steps = 1;
  cfg.latent_dim = 4;
  cfg.precision = Precision::kF64;
  FeatureMatrix<double> state = random_state<double>(31, cfg.state_channels(), 6);
  Surrogate<double> model = warmed_model(32, cfg, ctx, state);
  FeatureMatrix<double> out;
  EvalTape<double> tape;
  net_forward(model, ctx, state, out, &tape);
  FeatureMatrix<double> up(cfg.out_channels(), 6);
  std::vector<double> grads(model.layout.total, 0.0);
  net_backward(model, ctx, tape, up, grads, nullptr);
  for (double g : grads) CHECK(g == 0.0);
}

TEST_CASE("masked loss gradient is the sum of per-node gradients") {
  Mesh mesh = path_mesh(8);
  GraphCtx<double> ctx = build_graph_ctx<double>(mesh);
  SurrogateConfig cfg;
  cfg.mp_steps = 1;
  cfg.latent_dim = 4;
  cfg.precision = Precision::kF64;
  FeatureMatrix<double> state = random_state<double>(41, cfg.state_channels(), 8);
  Surrogate<double> model = warmed_model(42, cfg, ctx, state);
  const std::vector<size_t> mask = {1, 4, 6};

  auto grad_for = [&](const std::vector<size_t>& nodes) {
    FeatureMatrix<double> out;
    EvalTape<double> tape;
    net_forward(model, ctx, state, out, &tape);
    FeatureMatrix<double> up(cfg.out_channels(), 8);
    for (size_t v : nodes)
      for (int c = 0; c < cfg.out_channels(); ++c)
        up.at(c, v) = 2.0 * out.at(c, v);
    std::vector<double> grads(model.layout.total, 0.0);
    net_backward(model, ctx, tape, up, grads, nullptr);
    return grads;
  };
  auto combined = grad_for(mask);
  std::vector<double> summed(model.layout.total, 0.0);
  for (size_t v : mask) {
    auto g = grad_for({v});
    for (size_t i = 0; i < summed.size(); ++i) summed[i] += g[i];
  }
  double max_rel = 0.0, scale = 0.0;
  for (double g : combined) scale = std::max(scale, std::fabs(g));
  for (size_t i = 0; i < summed.size(); ++i)
    max_rel = std::max(max_rel,
                       std::fabs(summed[i] - combined[i]) / std::max(scale, 1e-12));
  CHECK(max_rel < 1e-12);
}

TEST_CASE("normalizer merge is order-stable and floored") {
  Rng rng(55);
  std::vector<std::vector<double>> batches;
  for (int b = 0; b < 50; ++b) {
    std::vector<double> batch(2 * 137);
    for (auto& v : batch) v = rng.uniform(-3, 3);
    batches.push_back(batch);
  }
  RunningStats fwd(2), rev(2);
  for (const auto& b : batches) fwd.accumulate(b.data(), 2, b.size() / 2);
  for (auto it = batches.rbegin(); it != batches.rend(); ++it)
    rev.accumulate(it->data(), 2, it->size() / 2);
  for (size_t c = 0; c < 2; ++c) {
    CHECK(fwd.mean(c) == doctest::Approx(rev.mean(c)).epsilon(1e-12));
    CHECK(fwd.variance(c) == doctest::Approx(rev.variance(c)).epsilon(1e-12));
  }
  // floor
  RunningStats constant(1);
  std::vector<double> same(1000, 4.25);
  constant.accumulate(same.data(), 1, same.size());
  CHECK(constant.variance(0) == RunningStats::kVarianceFloor);
  // freeze is a hard stop
  RunningStats frozen(1);
  frozen.accumulate(same.data(), 1, same.size());
  frozen.freeze();
  std::vector<double> other(10, -100.0);
  frozen.accumulate(other.data(), 1, other.size());
  CHECK(frozen.mean(0) == doctest::Approx(4.25));
}

TEST_CASE("init is deterministic per seed and rejects non-finite inputs") {
  SurrogateConfig cfg;
  cfg.mp_steps = 2;
  cfg.latent_dim = 8;
  cfg.precision = Precision::kF64;
  Surrogate<double> a = init_surrogate<double>(77, cfg);
  Surrogate<double> b = init_surrogate<double>(77, cfg);
  Surrogate<double> c = init_surrogate<double>(78, cfg);
  CHECK(a.params == b.params);
  CHECK(a.params != c.params);

  Mesh mesh = path_mesh(5);
  GraphCtx<double> ctx = build_graph_ctx<double>(mesh);
  FeatureMatrix<double> state = random_state<double>(1, cfg.state_channels(), 5);
  Surrogate<double> model = warmed_model(79, cfg, ctx, state);
  state.at(0, 2) = std::numeric_limits<double>::quiet_NaN();
  FeatureMatrix<double> out;
  CHECK_THROWS_AS(net_forward(model, ctx, state, out, nullptr), DataError);
}

}  // TEST_SUITE

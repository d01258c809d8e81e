#include <doctest.h>

#include <cmath>

#include "pmgn/integrators.hpp"
#include "pmgn/rng.hpp"
#include "pmgn/synth.hpp"

using namespace pmgn;

namespace {

constexpr IntegratorKind kKinds[] = {IntegratorKind::kFE, IntegratorKind::kH2,
                                     IntegratorKind::kH3};

class ZeroEval final : public StageEvaluator<double> {
public:
  explicit ZeroEval(size_t c, size_t n) : c_(c), n_(n) {}
  size_t state_channels() const override { return c_; }
  size_t num_items() const override { return n_; }
  void eval(int, const FeatureMatrix<double>& s, FeatureMatrix<double>& d) override {
    d = FeatureMatrix<double>(s.rows(), s.cols());
  }
  void backward(int, const FeatureMatrix<double>&, FeatureMatrix<double>&) override {}

private:
  size_t c_, n_;
};

class ConstEval final : public StageEvaluator<double> {
public:
  ConstEval(size_t c, size_t n, double value) : c_(c), n_(n), value_(value) {}
  size_t state_channels() const override { return c_; }
  size_t num_items() const override { return n_; }
  void eval(int, const FeatureMatrix<double>& s, FeatureMatrix<double>& d) override {
    d = FeatureMatrix<double>(s.rows(), s.cols(), value_);
  }
  void backward(int, const FeatureMatrix<double>&, FeatureMatrix<double>&) override {}

private:
  size_t c_, n_;
  double value_;
};

// N(y) = h * lambda * y
class LinearEval final : public StageEvaluator<double> {
public:
  LinearEval(double h, double lambda) : h_(h), lambda_(lambda) {}
  size_t state_channels() const override { return 1; }
  size_t num_items() const override { return 1; }
  void eval(int, const FeatureMatrix<double>& s, FeatureMatrix<double>& d) override {
    d = s;
    for (auto& v : d.data()) v *= h_ * lambda_;
  }
  void backward(int, const FeatureMatrix<double>&, FeatureMatrix<double>&) override {}

private:
  double h_, lambda_;
};

// Replays the first stage's output for every stage.
class FrozenStageEval final : public StageEvaluator<double> {
public:
  explicit FrozenStageEval(uint64_t seed) : seed_(seed) {}
  size_t state_channels() const override { return 2; }
  size_t num_items() const override { return 3; }
  void eval(int stage, const FeatureMatrix<double>& s,
            FeatureMatrix<double>& d) override {
    if (stage == 0) {
      Rng rng(seed_);
      first_ = FeatureMatrix<double>(s.rows(), s.cols());
      for (auto& v : first_.data()) v = rng.uniform(-0.3, 0.3);
    }
    d = first_;
  }
  void backward(int, const FeatureMatrix<double>&, FeatureMatrix<double>&) override {}

private:
  uint64_t seed_;
  FeatureMatrix<double> first_;
};

class NanAtStage final : public StageEvaluator<double> {
public:
  explicit NanAtStage(int bad) : bad_(bad) {}
  size_t state_channels() const override { return 1; }
  size_t num_items() const override { return 1; }
  void eval(int stage, const FeatureMatrix<double>& s,
            FeatureMatrix<double>& d) override {
    d = FeatureMatrix<double>(s.rows(), s.cols(), 0.01);
    if (stage == bad_) d.at(0, 0) = std::nan("");
  }
  void backward(int, const FeatureMatrix<double>&, FeatureMatrix<double>&) override {}

private:
  int bad_;
};

Mesh small_path(size_t n) {
  Mesh mesh;
  mesh.dim = 2;
  mesh.positions.resize(n * 2);
  mesh.boundary_index.assign(n, kFluidSentinel);
  for (size_t v = 0; v < n; ++v) {
    mesh.positions[v * 2] = 0.1f * v;
    mesh.positions[v * 2 + 1] = 0.5f;
  }
  for (uint32_t v = 0; v + 1 < n; ++v) {
    mesh.arcs.push_back({v, v + 1});
    mesh.arcs.push_back({v + 1, v});
  }
  mesh.derive_node_types();
  return mesh;
}

template <class T>
Surrogate<T> tiny_model(uint64_t seed, int m, const GraphCtx<T>& ctx, size_t n) {
  SurrogateConfig cfg;
  cfg.mp_steps = m;
  cfg.latent_dim = 4;
  cfg.precision = Precision::kF64;
  Surrogate<T> model = init_surrogate<T>(seed, cfg);
  Rng rng(seed + 5);
  FeatureMatrix<T> node_x(cfg.node_in(), n);
  for (auto& v : node_x.data()) v = static_cast<T>(rng.uniform(-1, 1));
  model.norm.node_in.accumulate(node_x.data().data(), cfg.node_in(), n);
  model.norm.edge_in.accumulate(ctx.edge_features.data().data(), cfg.edge_in(),
                                ctx.edge_features.cols());
  std::vector<T> fake(cfg.out_channels() * n);
  for (auto& v : fake) v = static_cast<T>(rng.uniform(-1, 1));
  model.norm.target.accumulate(fake.data(), cfg.out_channels(), n);
  model.norm.freeze_all();
  return model;
}

}  // namespace

TEST_SUITE("integrators") {

TEST_CASE("stage counts") {
  CHECK(integrator_stages(IntegratorKind::kFE) == 1);
  CHECK(integrator_stages(IntegratorKind::kH2) == 2);
  CHECK(integrator_stages(IntegratorKind::kH3) == 3);
  CHECK(parse_integrator("h2") == IntegratorKind::kH2);
  CHECK_THROWS_AS(parse_integrator("rk4"), UsageError);
}

TEST_CASE("zero derivative returns the state unchanged for all kinds") {
  FeatureMatrix<double> y(2, 5);
  Rng rng(1);
  for (auto& v : y.data()) v = rng.uniform(-2, 2);
  for (IntegratorKind kind : kKinds) {
    ZeroEval net(2, 5);
    auto r = integrator_step(kind, net, y);
    CHECK(r.next.data() == y.data());
  }
}

TEST_CASE("constant derivative lands on y + c exactly for all kinds") {
  FeatureMatrix<double> y(2, 4);
  Rng rng(2);
  for (auto& v : y.data()) v = rng.uniform(-2, 2);
  const double c = 0.8125;  // exactly representable
  for (IntegratorKind kind : kKinds) {
    ConstEval net(2, 4, c);
    auto r = integrator_step(kind, net, y);
    for (size_t i = 0; i < y.data().size(); ++i)
      CHECK(r.next.data()[i] == doctest::Approx(y.data()[i] + c).epsilon(1e-15));
  }
}

TEST_CASE("linear test equation reproduces the closed-form stage algebra") {
  // N(y) = -0.1 y from y=1: FE 0.9, H2 0.905, H3 0.90483333...
  LinearEval net(0.1, -1.0);
  FeatureMatrix<double> y(1, 1, 1.0);
  auto fe = integrator_step(IntegratorKind::kFE, net, y);
  CHECK(fe.next.at(0, 0) == doctest::Approx(0.9).epsilon(1e-15));
  auto h2 = integrator_step(IntegratorKind::kH2, net, y);
  CHECK(h2.next.at(0, 0) == doctest::Approx(0.905).epsilon(1e-15));
  auto h3 = integrator_step(IntegratorKind::kH3, net, y);
  CHECK(h3.next.at(0, 0) == doctest::Approx(0.904833333333333).epsilon(1e-12));
  CHECK(std::fabs(h3.next.at(0, 0) - std::exp(-0.1)) <
        std::fabs(h2.next.at(0, 0) - std::exp(-0.1)));
}

TEST_CASE("H2/H3 collapse to FE when all stage evaluations are forced equal") {
  FeatureMatrix<double> y(2, 3);
  Rng rng(3);
  for (auto& v : y.data()) v = rng.uniform(-1, 1);
  FrozenStageEval fe_net(11);
  auto fe = integrator_step(IntegratorKind::kFE, fe_net, y);
  for (IntegratorKind kind : {IntegratorKind::kH2, IntegratorKind::kH3}) {
    FrozenStageEval net(11);
    auto r = integrator_step(kind, net, y);
    CHECK(r.next.data() == fe.next.data());  // bit-exact via fma combinations
  }
}

TEST_CASE("NaN stages are rejected with the stage index") {
  FeatureMatrix<double> y(1, 1, 1.0);
  NanAtStage net(1);
  CHECK_THROWS_WITH_AS(integrator_step(IntegratorKind::kH2, net, y),
                       doctest::Contains("stage 1"), DataError);
  NanAtStage net2(2);
  CHECK_THROWS_WITH_AS(integrator_step(IntegratorKind::kH3, net2, y),
                       doctest::Contains("stage 2"), DataError);
}

TEST_CASE("local error slopes match the orders on the decay equation") {
  const auto hs = log_spaced(0.01, 1.0, 12);
  const AnalyticOde ode = make_exponential_decay();
  CHECK(verify_order(IntegratorKind::kFE, ode, hs).slope ==
        doctest::Approx(2.0).epsilon(0.1));
  CHECK(verify_order(IntegratorKind::kH2, ode, hs).slope ==
        doctest::Approx(3.0).epsilon(0.1));
  CHECK(verify_order(IntegratorKind::kH3, ode, hs).slope ==
        doctest::Approx(4.0).epsilon(0.1));
}

TEST_CASE("local error slopes match the orders on the oscillator") {
  const auto hs = log_spaced(0.01, 1.0, 12);
  const AnalyticOde ode = make_oscillator();
  CHECK(verify_order(IntegratorKind::kFE, ode, hs).slope ==
        doctest::Approx(2.0).epsilon(0.1));
  CHECK(verify_order(IntegratorKind::kH2, ode, hs).slope ==
        doctest::Approx(3.0).epsilon(0.1));
  CHECK(verify_order(IntegratorKind::kH3, ode, hs).slope ==
        doctest::Approx(4.0).epsilon(0.1));
}

TEST_CASE("step receptive field compounds to stages*m hops") {
  const size_t n = 15;
  Mesh mesh = small_path(n);
  GraphCtx<double> ctx = build_graph_ctx<double>(mesh);
  Surrogate<double> model = tiny_model<double>(91, 1, ctx, n);  // m = 1
  FeatureMatrix<double> y(model.config.state_channels(), n);
  Rng rng(92);
  for (auto& v : y.data()) v = rng.uniform(-1, 1);

  for (IntegratorKind kind : kKinds) {
    const int horizon = integrator_stages(kind);  // s * m with m = 1
    SurrogateEvaluator<double> net(model, ctx);
    auto base = integrator_step(kind, net, y);
    FeatureMatrix<double> yp = y;
    const size_t src = 10;
    yp.at(0, src) += 0.7;
    SurrogateEvaluator<double> net2(model, ctx);
    auto out = integrator_step(kind, net2, yp);
    for (size_t v = 0; v < n; ++v) {
      const int dist = std::abs(static_cast<int>(v) - static_cast<int>(src));
      bool same = true;
      for (size_t c = 0; c < y.rows(); ++c)
        if (out.next.at(c, v) != base.next.at(c, v)) same = false;
      if (dist > horizon) CHECK(same);
      if (dist <= horizon) CHECK(!same);
    }
  }
}

TEST_CASE("step_backward matches finite differences through all kinds") {
  const size_t n = 7;
  Mesh mesh = small_path(n);
  GraphCtx<double> ctx = build_graph_ctx<double>(mesh);
  FeatureMatrix<double> y(3, n);
  FeatureMatrix<double> target(3, n);
  Rng rng(93);
  for (auto& v : y.data()) v = rng.uniform(-1, 1);
  for (auto& v : target.data()) v = rng.uniform(-1, 1);

  for (IntegratorKind kind : kKinds) {
    Surrogate<double> model = tiny_model<double>(70 + int(kind), 1, ctx, n);
    REQUIRE(model.layout.total <= 500);
    auto loss = [&](const Surrogate<double>& m) {
      SurrogateEvaluator<double> net(m, ctx);
      auto r = integrator_step(kind, net, y);
      double l = 0.0;
      for (size_t i = 0; i < r.next.data().size(); ++i) {
        const double d = r.next.data()[i] - target.data()[i];
        l += d * d;
      }
      return l;
    };
    std::vector<double> grads(model.layout.total, 0.0);
    {
      SurrogateEvaluator<double> net(model, ctx, &grads, true);
      auto r = integrator_step(kind, net, y, true);
      FeatureMatrix<double> up(3, n);
      for (size_t i = 0; i < r.next.data().size(); ++i)
        up.data()[i] = 2.0 * (r.next.data()[i] - target.data()[i]);
      step_backward(kind, net, r, up);
    }
    const double eps = 1e-6;
    double max_rel = 0.0, gmax = 0.0;
    std::vector<double> fd(model.layout.total);
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

}  // TEST_SUITE

#include "pmgn/integrators.hpp"

#include <cmath>

namespace pmgn {

int integrator_stages(IntegratorKind k) {
  switch (k) {
    case IntegratorKind::kFE: return 1;
    case IntegratorKind::kH2: return 2;
    case IntegratorKind::kH3: return 3;
  }
  return 1;
}

const char* integrator_name(IntegratorKind k) {
  switch (k) {
    case IntegratorKind::kFE: return "fe";
    case IntegratorKind::kH2: return "h2";
    case IntegratorKind::kH3: return "h3";
  }
  return "?";
}

IntegratorKind parse_integrator(const std::string& name) {
  if (name == "fe") return IntegratorKind::kFE;
  if (name == "h2") return IntegratorKind::kH2;
  if (name == "h3") return IntegratorKind::kH3;
  throw UsageError("unknown integrator '" + name + "' (expected fe|h2|h3)");
}

template <class T>
void SurrogateEvaluator<T>::eval(int stage, const FeatureMatrix<T>& state,
                                 FeatureMatrix<T>& delta) {
  EvalTape<T>* tape = nullptr;
  if (keep_tape_) {
    if (tapes_.size() <= static_cast<size_t>(stage))
      tapes_.resize(stage + 1);
    tape = &tapes_[stage];
  }
  net_forward(model_, graph_, state, delta, tape);
}

template <class T>
void SurrogateEvaluator<T>::backward(int stage, const FeatureMatrix<T>& ddelta,
                                     FeatureMatrix<T>& dstate) {
  if (!keep_tape_ || static_cast<size_t>(stage) >= tapes_.size())
    throw DataError("SurrogateEvaluator: backward without retained tape");
  if (!grads_) throw DataError("SurrogateEvaluator: no gradient buffer");
  net_backward(model_, graph_, tapes_[stage], ddelta, *grads_, &dstate);
}

template class SurrogateEvaluator<float>;
template class SurrogateEvaluator<double>;

namespace {

template <class T>
void check_stage_finite(const FeatureMatrix<T>& delta, int stage) {
  for (const T& v : delta.data())
    if (!std::isfinite(static_cast<double>(v)))
      throw DataError("integrator_step: non-finite value in stage " +
                      std::to_string(stage));
}

// out[i] = y[i] + c * k[i]
template <class T>
FeatureMatrix<T> axpy(const FeatureMatrix<T>& y, T c, const FeatureMatrix<T>& k) {
  FeatureMatrix<T> out(y.rows(), y.cols());
  const T* ys = y.data().data();
  const T* ks = k.data().data();
  T* os = out.data().data();
  for (size_t i = 0; i < y.data().size(); ++i)
    os[i] = std::fma(c, ks[i], ys[i]);
  return out;
}

}  // namespace

template <class T>
StepResult<T> integrator_step(IntegratorKind kind, StageEvaluator<T>& net,
                              const FeatureMatrix<T>& y, bool keep_stages) {
  StepResult<T> r;
  const int s = integrator_stages(kind);
  std::vector<FeatureMatrix<T>> inputs, deltas;
  inputs.reserve(s);
  deltas.reserve(s);

  inputs.push_back(y);
  FeatureMatrix<T> k1;
  net.eval(0, inputs[0], k1);
  check_stage_finite(k1, 0);
  deltas.push_back(std::move(k1));

  switch (kind) {
    case IntegratorKind::kFE: {
      r.next = axpy(y, T(1), deltas[0]);
      break;
    }
    case IntegratorKind::kH2: {
      inputs.push_back(axpy(y, T(1), deltas[0]));
      FeatureMatrix<T> k2;
      net.eval(1, inputs[1], k2);
      check_stage_finite(k2, 1);
      deltas.push_back(std::move(k2));
      // y + 1/2 (k1 + k2)
      r.next = FeatureMatrix<T>(y.rows(), y.cols());
      const T* ys = y.data().data();
      const T* a = deltas[0].data().data();
      const T* b = deltas[1].data().data();
      T* o = r.next.data().data();
      for (size_t i = 0; i < y.data().size(); ++i)
        o[i] = std::fma(T(0.5), a[i] + b[i], ys[i]);
      break;
    }
    case IntegratorKind::kH3: {
      const T c2 = T(1) / T(3);
      const T c3 = T(2) / T(3);
      inputs.push_back(axpy(y, c2, deltas[0]));
      FeatureMatrix<T> k2;
      net.eval(1, inputs[1], k2);
      check_stage_finite(k2, 1);
      deltas.push_back(std::move(k2));
      inputs.push_back(axpy(y, c3, deltas[1]));
      FeatureMatrix<T> k3;
      net.eval(2, inputs[2], k3);
      check_stage_finite(k3, 2);
      deltas.push_back(std::move(k3));
      // y + 1/4 (k1 + 3 k3)
      r.next = FeatureMatrix<T>(y.rows(), y.cols());
      const T* ys = y.data().data();
      const T* a = deltas[0].data().data();
      const T* c = deltas[2].data().data();
      T* o = r.next.data().data();
      for (size_t i = 0; i < y.data().size(); ++i)
        o[i] = std::fma(T(0.25), std::fma(T(3), c[i], a[i]), ys[i]);
      break;
    }
  }
  if (keep_stages) {
    r.stage_inputs = std::move(inputs);
    r.stage_deltas = std::move(deltas);
  }
  return r;
}

template <class T>
FeatureMatrix<T> step_backward(IntegratorKind kind, StageEvaluator<T>& net,
                               const StepResult<T>& result,
                               const FeatureMatrix<T>& upstream) {
  if (result.stage_inputs.empty())
    throw DataError("step_backward: step was not taken with keep_stages");
  const size_t total = upstream.data().size();
  auto scaled = [&](T c, const FeatureMatrix<T>& m) {
    FeatureMatrix<T> out(m.rows(), m.cols());
    for (size_t i = 0; i < total; ++i) out.data()[i] = c * m.data()[i];
    return out;
  };
  auto add_into = [&](FeatureMatrix<T>& dst, const FeatureMatrix<T>& src) {
    for (size_t i = 0; i < total; ++i) dst.data()[i] += src.data()[i];
  };

  FeatureMatrix<T> dy = upstream;  // direct y term of next = y + ...
  switch (kind) {
    case IntegratorKind::kFE: {
      net.backward(0, upstream, dy);
      break;
    }
    case IntegratorKind::kH2: {
      // next = y + 1/2 (k1 + k2); u = y + k1
      FeatureMatrix<T> dd2 = scaled(T(0.5), upstream);
      FeatureMatrix<T> du(upstream.rows(), upstream.cols());
      net.backward(1, dd2, du);
      add_into(dy, du);  // u depends on y directly
      FeatureMatrix<T> dd1 = scaled(T(0.5), upstream);
      add_into(dd1, du);  // u = y + k1
      net.backward(0, dd1, dy);
      break;
    }
    case IntegratorKind::kH3: {
      const T c2 = T(1) / T(3);
      const T c3 = T(2) / T(3);
      FeatureMatrix<T> dd3 = scaled(T(0.75), upstream);
      FeatureMatrix<T> du3(upstream.rows(), upstream.cols());
      net.backward(2, dd3, du3);
      add_into(dy, du3);
      FeatureMatrix<T> dd2 = scaled(c3, du3);
      FeatureMatrix<T> du2(upstream.rows(), upstream.cols());
      net.backward(1, dd2, du2);
      add_into(dy, du2);
      FeatureMatrix<T> dd1 = scaled(T(0.25), upstream);
      for (size_t i = 0; i < total; ++i)
        dd1.data()[i] += c2 * du2.data()[i];
      net.backward(0, dd1, dy);
      break;
    }
  }
  return dy;
}

#define PMGN_INSTANTIATE(T)                                                    \
  template StepResult<T> integrator_step<T>(IntegratorKind, StageEvaluator<T>&, \
                                            const FeatureMatrix<T>&, bool);   \
  template FeatureMatrix<T> step_backward<T>(IntegratorKind, StageEvaluator<T>&, \
                                             const StepResult<T>&,            \
                                             const FeatureMatrix<T>&);
PMGN_INSTANTIATE(float)
PMGN_INSTANTIATE(double)
#undef PMGN_INSTANTIATE

AnalyticOde make_exponential_decay() {
  AnalyticOde ode;
  ode.name = "exponential";
  ode.channels = 1;
  ode.y0 = {1.0};
  ode.rhs = [](const double* y, double* dy) { dy[0] = -y[0]; };
  ode.flow = [](double h, double* y) { y[0] = std::exp(-h); };
  return ode;
}

AnalyticOde make_oscillator() {
  AnalyticOde ode;
  ode.name = "oscillator";
  ode.channels = 2;
  ode.y0 = {1.0, 0.0};
  ode.rhs = [](const double* y, double* dy) {
    dy[0] = y[1];
    dy[1] = -y[0];
  };
  ode.flow = [](double h, double* y) {
    y[0] = std::cos(h);
    y[1] = std::sin(h);
  };
  return ode;
}

namespace {

// Wraps h*f(y) as a stage evaluator over a single-column state.
class OdeEvaluator final : public StageEvaluator<double> {
public:
  OdeEvaluator(const AnalyticOde& ode, double h) : ode_(ode), h_(h) {}
  size_t state_channels() const override { return ode_.channels; }
  size_t num_items() const override { return 1; }
  void eval(int, const FeatureMatrix<double>& state,
            FeatureMatrix<double>& delta) override {
    std::vector<double> y(ode_.channels), dy(ode_.channels);
    for (int c = 0; c < ode_.channels; ++c) y[c] = state.at(c, 0);
    ode_.rhs(y.data(), dy.data());
    delta = FeatureMatrix<double>(ode_.channels, 1);
    for (int c = 0; c < ode_.channels; ++c) delta.at(c, 0) = h_ * dy[c];
  }
  void backward(int, const FeatureMatrix<double>&, FeatureMatrix<double>&) override {
    throw DataError("OdeEvaluator has no backward");
  }

private:
  const AnalyticOde& ode_;
  double h_;
};

}  // namespace

std::vector<double> log_spaced(double lo, double hi, size_t count) {
  std::vector<double> out(count);
  for (size_t i = 0; i < count; ++i) {
    const double t = count > 1 ? double(i) / double(count - 1) : 0.0;
    out[i] = lo * std::pow(hi / lo, t);
  }
  return out;
}

OrderFit verify_order(IntegratorKind kind, const AnalyticOde& ode,
                      const std::vector<double>& h_values) {
  OrderFit fit;
  for (double h : h_values) {
    OdeEvaluator net(ode, h);
    FeatureMatrix<double> y(ode.channels, 1);
    for (int c = 0; c < ode.channels; ++c) y.at(c, 0) = ode.y0[c];
    StepResult<double> r = integrator_step(kind, net, y);
    std::vector<double> exact(ode.channels);
    for (int c = 0; c < ode.channels; ++c) exact[c] = ode.y0[c];
    ode.flow(h, exact.data());
    double err2 = 0.0;
    for (int c = 0; c < ode.channels; ++c) {
      const double d = r.next.at(c, 0) - exact[c];
      err2 += d * d;
    }
    fit.points.emplace_back(h, std::sqrt(err2));
  }
  // Least squares on log-log, skipping round-off-floor points.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  size_t m = 0;
  for (const auto& [h, err] : fit.points) {
    if (err < 1e-13) continue;
    const double lx = std::log(h), ly = std::log(err);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    ++m;
  }
  if (m < 2) throw DataError("verify_order: too few usable points for a fit");
  const double denom = double(m) * sxx - sx * sx;
  fit.slope = (double(m) * sxy - sx * sy) / denom;
  return fit;
}

}  // namespace pmgn

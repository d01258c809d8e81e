#pragma once

#include <functional>
#include <string>
#include <vector>

#include "pmgn/matrix.hpp"
#include "pmgn/surrogate.hpp"

namespace pmgn {

// State-update schemes wrapping a scaled-derivative predictor N(y) ~ h*f(y):
//   FE: y + N(y)
//   H2: y + 1/2 (N(y) + N(y + N(y)))
//   H3: k1 = N(y); k2 = N(y + k1/3); k3 = N(y + 2 k2/3); y + 1/4 (k1 + 3 k3)
// h never appears explicitly; the predictor carries the scaling.
enum class IntegratorKind : uint8_t { kFE = 0, kH2 = 1, kH3 = 2 };

int integrator_stages(IntegratorKind k);
const char* integrator_name(IntegratorKind k);
IntegratorKind parse_integrator(const std::string& name);

// One stage evaluation: given the raw state, produce the raw scaled
// derivative. Implementations own per-stage tapes for reverse mode.
template <class T>
class StageEvaluator {
public:
  virtual ~StageEvaluator() = default;
  virtual size_t state_channels() const = 0;
  virtual size_t num_items() const = 0;
  // stage in [0, stages); called in increasing order within a step.
  virtual void eval(int stage, const FeatureMatrix<T>& state,
                    FeatureMatrix<T>& delta) = 0;
  // Reverse of eval: upstream w.r.t. delta; adds state gradient into dstate
  // (same shape). Called in decreasing stage order.
  virtual void backward(int stage, const FeatureMatrix<T>& ddelta,
                        FeatureMatrix<T>& dstate) = 0;
};

// Surrogate-backed evaluator; stage inputs are re-normalized with the same
// stored statistics on every stage. Gradients accumulate into *grads.
template <class T>
class SurrogateEvaluator final : public StageEvaluator<T> {
public:
  SurrogateEvaluator(const Surrogate<T>& model, const GraphCtx<T>& graph,
                     std::vector<T>* grads = nullptr, bool keep_tape = false)
      : model_(model), graph_(graph), grads_(grads), keep_tape_(keep_tape) {}

  size_t state_channels() const override {
    return model_.config.state_channels();
  }
  size_t num_items() const override { return graph_.n_nodes; }
  void eval(int stage, const FeatureMatrix<T>& state,
            FeatureMatrix<T>& delta) override;
  void backward(int stage, const FeatureMatrix<T>& ddelta,
                FeatureMatrix<T>& dstate) override;

private:
  const Surrogate<T>& model_;
  const GraphCtx<T>& graph_;
  std::vector<T>* grads_;
  bool keep_tape_;
  std::vector<EvalTape<T>> tapes_;
};

// Step result; stage inputs/deltas retained when keep_stages is set (needed
// by step_backward).
template <class T>
struct StepResult {
  FeatureMatrix<T> next;
  std::vector<FeatureMatrix<T>> stage_inputs;
  std::vector<FeatureMatrix<T>> stage_deltas;
};

// Throws DataError naming the stage index if a stage produces a non-finite
// value.
template <class T>
StepResult<T> integrator_step(IntegratorKind kind, StageEvaluator<T>& net,
                              const FeatureMatrix<T>& y, bool keep_stages = false);

// Reverse mode through the composed stages. upstream is w.r.t. result.next;
// returns the gradient w.r.t. y. Parameter gradients flow through the
// evaluator's backward.
template <class T>
FeatureMatrix<T> step_backward(IntegratorKind kind, StageEvaluator<T>& net,
                               const StepResult<T>& result,
                               const FeatureMatrix<T>& upstream);

// Order verification on an analytic right-hand side with known flow.
struct AnalyticOde {
  std::string name;
  int channels = 1;
  std::vector<double> y0;
  // f(y) into dy
  std::function<void(const double* y, double* dy)> rhs;
  // exact solution at time h from y0
  std::function<void(double h, double* y)> flow;
};
AnalyticOde make_exponential_decay();  // y' = -y, y0 = 1
AnalyticOde make_oscillator();         // y' = (y2, -y1), y0 = (1, 0)

struct OrderFit {
  double slope = 0.0;
  std::vector<std::pair<double, double>> points;  // (h, one-step error)
};

// Least-squares slope of log(error) vs log(h) for a single step from y0,
// excluding points at the round-off floor.
OrderFit verify_order(IntegratorKind kind, const AnalyticOde& ode,
                      const std::vector<double>& h_values);

std::vector<double> log_spaced(double lo, double hi, size_t count);

}  // namespace pmgn

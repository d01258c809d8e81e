#include "pmgn/adam.hpp"

#include <cmath>

namespace pmgn {

double lr_schedule(double lr_start, double lr_end, uint64_t horizon,
                   uint64_t step) {
  if (!(lr_end > 0.0 && lr_end < lr_start))
    throw DataError("lr_schedule: need 0 < lr_end < lr_start");
  if (horizon == 0 || step >= horizon) return lr_end;
  const double t = static_cast<double>(step) / static_cast<double>(horizon);
  return lr_start * std::exp(std::log(lr_end / lr_start) * t);
}

template <class T>
void adam_update(AdamState<T>& state, std::vector<T>& params,
                 const std::vector<T>& grads, double lr,
                 const AdamConfig& config) {
  if (params.size() != grads.size() || params.size() != state.m.size() ||
      params.size() != state.v.size())
    throw DataError("adam_update: buffer size mismatch");
  state.t += 1;
  const double b1 = config.beta1, b2 = config.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
  const T tb1 = static_cast<T>(b1), tb2 = static_cast<T>(b2);
  const T nb1 = static_cast<T>(1.0 - b1), nb2 = static_cast<T>(1.0 - b2);
  const T ibc1 = static_cast<T>(1.0 / bc1), ibc2 = static_cast<T>(1.0 / bc2);
  const T tlr = static_cast<T>(lr), teps = static_cast<T>(config.eps);
  for (size_t i = 0; i < params.size(); ++i) {
    const T g = grads[i];
    state.m[i] = tb1 * state.m[i] + nb1 * g;
    state.v[i] = tb2 * state.v[i] + nb2 * g * g;
    const T mhat = state.m[i] * ibc1;
    const T vhat = state.v[i] * ibc2;
    params[i] -= tlr * mhat / (std::sqrt(vhat) + teps);
  }
}

template void adam_update<float>(AdamState<float>&, std::vector<float>&,
                                 const std::vector<float>&, double,
                                 const AdamConfig&);
template void adam_update<double>(AdamState<double>&, std::vector<double>&,
                                  const std::vector<double>&, double,
                                  const AdamConfig&);

}  // namespace pmgn

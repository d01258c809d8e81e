#pragma once

#include <cstdint>
#include <vector>

#include "pmgn/error.hpp"

namespace pmgn {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Exponential interpolation from lr_start to lr_end over horizon steps,
// clamped at lr_end afterwards (exact at the endpoint).
double lr_schedule(double lr_start, double lr_end, uint64_t horizon,
                   uint64_t step);

template <class T>
struct AdamState {
  std::vector<T> m, v;
  uint64_t t = 0;

  explicit AdamState(size_t n = 0) : m(n, T(0)), v(n, T(0)) {}
};

// One bias-corrected update in place.
template <class T>
void adam_update(AdamState<T>& state, std::vector<T>& params,
                 const std::vector<T>& grads, double lr,
                 const AdamConfig& config);

}  // namespace pmgn

#pragma once

#include <cstddef>
#include <vector>

#include "pmgn/error.hpp"

namespace pmgn {

// Streaming per-channel mean/variance with Chan's parallel merge. Statistics
// accumulate in double regardless of model precision. Variance is floored at
// 1e-8 when queried. Once frozen, accumulate() is a no-op.
class RunningStats {
public:
  static constexpr double kVarianceFloor = 1e-8;

  RunningStats() = default;
  explicit RunningStats(size_t channels)
      : mean_(channels, 0.0), m2_(channels, 0.0) {}

  size_t channels() const { return mean_.size(); }
  double count() const { return count_; }
  bool frozen() const { return frozen_; }
  void freeze() { frozen_ = true; }

  // Merge a finished batch given per-channel batch mean and sum of squared
  // deviations over batch_count samples.
  void merge(const std::vector<double>& batch_mean,
             const std::vector<double>& batch_m2, double batch_count);

  // Convenience: accumulate channel-major values (rows = channels).
  template <class T>
  void accumulate(const T* values, size_t channels, size_t count);

  double mean(size_t c) const { return mean_[c]; }
  double variance(size_t c) const {
    if (count_ < 1.0) return 1.0;
    const double v = m2_[c] / count_;
    return v < kVarianceFloor ? kVarianceFloor : v;
  }
  double stddev(size_t c) const;

  const std::vector<double>& raw_mean() const { return mean_; }
  const std::vector<double>& raw_m2() const { return m2_; }
  void restore(std::vector<double> mean, std::vector<double> m2, double count,
               bool frozen);

private:
  std::vector<double> mean_, m2_;
  double count_ = 0.0;
  bool frozen_ = false;
};

struct NormalizerSet {
  RunningStats node_in;
  RunningStats edge_in;
  RunningStats target;

  void freeze_all() {
    node_in.freeze();
    edge_in.freeze();
    target.freeze();
  }
  bool all_frozen() const {
    return node_in.frozen() && edge_in.frozen() && target.frozen();
  }
};

}  // namespace pmgn

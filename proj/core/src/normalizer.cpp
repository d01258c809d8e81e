#include "pmgn/normalizer.hpp"

#include <cmath>

namespace pmgn {

void RunningStats::merge(const std::vector<double>& batch_mean,
                         const std::vector<double>& batch_m2,
                         double batch_count) {
  if (frozen_ || batch_count <= 0.0) return;
  if (batch_mean.size() != mean_.size() || batch_m2.size() != m2_.size())
    throw DataError("RunningStats::merge: channel mismatch");
  const double na = count_, nb = batch_count, nab = na + nb;
  for (size_t c = 0; c < mean_.size(); ++c) {
    const double delta = batch_mean[c] - mean_[c];
    mean_[c] += delta * (nb / nab);
    m2_[c] += batch_m2[c] + delta * delta * (na * nb / nab);
  }
  count_ = nab;
}

template <class T>
void RunningStats::accumulate(const T* values, size_t channels, size_t count) {
  if (frozen_ || count == 0) return;
  std::vector<double> bm(channels, 0.0), bm2(channels, 0.0);
  for (size_t c = 0; c < channels; ++c) {
    const T* row = values + c * count;
    double s = 0.0;
    for (size_t i = 0; i < count; ++i) s += static_cast<double>(row[i]);
    bm[c] = s / static_cast<double>(count);
    double q = 0.0;
    for (size_t i = 0; i < count; ++i) {
      const double d = static_cast<double>(row[i]) - bm[c];
      q += d * d;
    }
    bm2[c] = q;
  }
  merge(bm, bm2, static_cast<double>(count));
}

template void RunningStats::accumulate<float>(const float*, size_t, size_t);
template void RunningStats::accumulate<double>(const double*, size_t, size_t);

double RunningStats::stddev(size_t c) const { return std::sqrt(variance(c)); }

void RunningStats::restore(std::vector<double> mean, std::vector<double> m2,
                           double count, bool frozen) {
  mean_ = std::move(mean);
  m2_ = std::move(m2);
  count_ = count;
  frozen_ = frozen;
}

}  // namespace pmgn

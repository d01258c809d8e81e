#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <vector>

namespace pmgn {

// Channel-major 2D array: row = feature channel, column = item (node, arc).
// All network math runs on this layout so that per-item arithmetic
// vectorizes along the item axis without cross-item reductions.
template <class T>
class FeatureMatrix {
public:
  FeatureMatrix() = default;
  FeatureMatrix(size_t rows, size_t cols, T value = T(0))
      : rows_(rows), cols_(cols), data_(rows * cols, value) {}

  size_t rows() const { return rows_; }
  size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  T* row(size_t r) { return data_.data() + r * cols_; }
  const T* row(size_t r) const { return data_.data() + r * cols_; }

  T& at(size_t r, size_t c) { return data_[r * cols_ + c]; }
  const T& at(size_t r, size_t c) const { return data_[r * cols_ + c]; }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  void fill(T value) { data_.assign(data_.size(), value); }

  bool same_shape(const FeatureMatrix& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_;
  }

private:
  size_t rows_ = 0;
  size_t cols_ = 0;
  std::vector<T> data_;
};

// Deterministic dense kernels.
//
// Reproducibility contract: the floating-point result of every output
// element is a fixed function of its mathematical inputs and the loop
// bounds printed in its own index -- never of the total column count, the
// chunk a column lands in, or SIMD lane membership. Accumulations run in
// ascending index order with explicit std::fma, so a node evaluated inside
// a patch produces bit-identical values to the same node evaluated in the
// full graph. Reductions along the item axis (used only for parameter
// gradients) use a fixed 16-lane tree.
namespace kernels {

// Column tile sized so the accumulator stays in vector registers across the
// whole k loop (4 AVX-512 registers).
template <class T>
inline constexpr size_t kTile = 256 / sizeof(T);

namespace detail {

// One output row over one column tile; CONST_TILE selects the constant-width
// main path. Per-element op order (init, ascending-k fma) is identical in
// both paths, so tile membership cannot change results.
template <class T, bool CONST_TILE>
inline void linear_row_tile(const T* wrow, T bi, size_t in_dim, const T* x,
                            size_t stride, size_t c0, size_t nc, T* yr) {
  constexpr size_t kT = kTile<T>;
  const size_t width = CONST_TILE ? kT : nc;
  T acc[kT];
  for (size_t c = 0; c < width; ++c) acc[c] = bi;
  for (size_t k = 0; k < in_dim; ++k) {
    const T wik = wrow[k];
    const T* xr = x + k * stride + c0;
    for (size_t c = 0; c < width; ++c) acc[c] = std::fma(wik, xr[c], acc[c]);
  }
  for (size_t c = 0; c < width; ++c) yr[c] = acc[c];
}

}  // namespace detail

// Y[i][v] = b[i] + sum_k W[i*K+k] * X[k][v]
template <class T>
void linear_forward(const T* w, const T* b, size_t out_dim, size_t in_dim,
                    const FeatureMatrix<T>& x, FeatureMatrix<T>& y) {
  assert(x.rows() == in_dim && y.rows() == out_dim && x.cols() == y.cols());
  const size_t n = x.cols();
  constexpr size_t kT = kTile<T>;
  size_t c0 = 0;
  for (; c0 + kT <= n; c0 += kT)
    for (size_t i = 0; i < out_dim; ++i)
      detail::linear_row_tile<T, true>(w + i * in_dim, b[i], in_dim,
                                       x.data().data(), n, c0, kT, y.row(i) + c0);
  if (c0 < n)
    for (size_t i = 0; i < out_dim; ++i)
      detail::linear_row_tile<T, false>(w + i * in_dim, b[i], in_dim,
                                        x.data().data(), n, c0, n - c0, y.row(i) + c0);
}

// dX[k][v] = sum_i W[i*K+k] * dY[i][v]
template <class T>
void linear_backward_input(const T* w, size_t out_dim, size_t in_dim,
                           const FeatureMatrix<T>& dy, FeatureMatrix<T>& dx) {
  assert(dy.rows() == out_dim && dx.rows() == in_dim && dy.cols() == dx.cols());
  // Materialize W^T for unit-stride access; cost is negligible next to the
  // O(I*K*N) accumulation.
  std::vector<T> wt(in_dim * out_dim);
  for (size_t i = 0; i < out_dim; ++i)
    for (size_t k = 0; k < in_dim; ++k) wt[k * out_dim + i] = w[i * in_dim + k];
  const size_t n = dy.cols();
  constexpr size_t kT = kTile<T>;
  size_t c0 = 0;
  for (; c0 + kT <= n; c0 += kT)
    for (size_t k = 0; k < in_dim; ++k)
      detail::linear_row_tile<T, true>(wt.data() + k * out_dim, T(0), out_dim,
                                       dy.data().data(), n, c0, kT, dx.row(k) + c0);
  if (c0 < n)
    for (size_t k = 0; k < in_dim; ++k)
      detail::linear_row_tile<T, false>(wt.data() + k * out_dim, T(0), out_dim,
                                        dy.data().data(), n, c0, n - c0, dx.row(k) + c0);
}

// Fixed-shape reduction along the item axis: 16 independent lanes filled in
// ascending order, then a fixed tree sum. Result depends only on the input
// values and n.
template <class T>
T dot_reduce(const T* a, const T* b, size_t n) {
  T lane[16] = {};
  size_t v = 0;
  for (; v + 16 <= n; v += 16)
    for (size_t j = 0; j < 16; ++j) lane[j] = std::fma(a[v + j], b[v + j], lane[j]);
  for (size_t j = 0; v + j < n; ++j) lane[j] = std::fma(a[v + j], b[v + j], lane[j]);
  T s01 = (lane[0] + lane[1]) + (lane[2] + lane[3]);
  T s23 = (lane[4] + lane[5]) + (lane[6] + lane[7]);
  T s45 = (lane[8] + lane[9]) + (lane[10] + lane[11]);
  T s67 = (lane[12] + lane[13]) + (lane[14] + lane[15]);
  return (s01 + s23) + (s45 + s67);
}

template <class T>
T sum_reduce(const T* a, size_t n) {
  T lane[16] = {};
  size_t v = 0;
  for (; v + 16 <= n; v += 16)
    for (size_t j = 0; j < 16; ++j) lane[j] += a[v + j];
  for (size_t j = 0; v + j < n; ++j) lane[j] += a[v + j];
  T s01 = (lane[0] + lane[1]) + (lane[2] + lane[3]);
  T s23 = (lane[4] + lane[5]) + (lane[6] + lane[7]);
  T s45 = (lane[8] + lane[9]) + (lane[10] + lane[11]);
  T s67 = (lane[12] + lane[13]) + (lane[14] + lane[15]);
  return (s01 + s23) + (s45 + s67);
}

// dW[i*K+k] += sum_v dY[i][v] * X[k][v];  db[i] += sum_v dY[i][v]
template <class T>
void linear_backward_params(const FeatureMatrix<T>& x, const FeatureMatrix<T>& dy,
                            T* dw, T* db) {
  const size_t out_dim = dy.rows();
  const size_t in_dim = x.rows();
  const size_t n = x.cols();
  for (size_t i = 0; i < out_dim; ++i) {
    const T* dyr = dy.row(i);
    for (size_t k = 0; k < in_dim; ++k)
      dw[i * in_dim + k] += dot_reduce(dyr, x.row(k), n);
    db[i] += sum_reduce(dyr, n);
  }
}

template <class T>
void relu_forward(const FeatureMatrix<T>& x, FeatureMatrix<T>& y) {
  const T* xs = x.data().data();
  T* ys = y.data().data();
  const size_t n = x.data().size();
  for (size_t i = 0; i < n; ++i) ys[i] = xs[i] > T(0) ? xs[i] : T(0);
}

// dx = dy where the forward input was positive.
template <class T>
void relu_backward(const FeatureMatrix<T>& x, const FeatureMatrix<T>& dy,
                   FeatureMatrix<T>& dx) {
  const T* xs = x.data().data();
  const T* dys = dy.data().data();
  T* dxs = dx.data().data();
  const size_t n = x.data().size();
  for (size_t i = 0; i < n; ++i) dxs[i] = xs[i] > T(0) ? dys[i] : T(0);
}

// Per-column (per-item) layer normalization over the channel axis.
// mean/invstd are written per column for the backward pass.
template <class T>
void layernorm_forward(const T* gamma, const T* beta, const FeatureMatrix<T>& x,
                       FeatureMatrix<T>& y, std::vector<T>& mean,
                       std::vector<T>& invstd, T eps) {
  const size_t k_dim = x.rows();
  const size_t n = x.cols();
  mean.assign(n, T(0));
  invstd.assign(n, T(0));
  const T inv_k = T(1) / static_cast<T>(k_dim);
  for (size_t k = 0; k < k_dim; ++k) {
    const T* xr = x.row(k);
    for (size_t c = 0; c < n; ++c) mean[c] += xr[c];
  }
  for (size_t c = 0; c < n; ++c) mean[c] *= inv_k;
  for (size_t k = 0; k < k_dim; ++k) {
    const T* xr = x.row(k);
    for (size_t c = 0; c < n; ++c) {
      const T d = xr[c] - mean[c];
      invstd[c] = std::fma(d, d, invstd[c]);
    }
  }
  for (size_t c = 0; c < n; ++c)
    invstd[c] = T(1) / std::sqrt(invstd[c] * inv_k + eps);
  for (size_t k = 0; k < k_dim; ++k) {
    const T* xr = x.row(k);
    T* yr = y.row(k);
    const T g = gamma[k];
    const T b = beta[k];
    for (size_t c = 0; c < n; ++c)
      yr[c] = std::fma(g, (xr[c] - mean[c]) * invstd[c], b);
  }
}

template <class T>
void layernorm_backward(const T* gamma, const FeatureMatrix<T>& x,
                        const std::vector<T>& mean, const std::vector<T>& invstd,
                        const FeatureMatrix<T>& dy, FeatureMatrix<T>& dx,
                        T* dgamma, T* dbeta) {
  const size_t k_dim = x.rows();
  const size_t n = x.cols();
  const T inv_k = T(1) / static_cast<T>(k_dim);
  // Per-column sums of dxhat and dxhat*xhat, channel order fixed.
  std::vector<T> sum_d(n, T(0)), sum_dx(n, T(0));
  std::vector<T> xhat_row(n);
  for (size_t k = 0; k < k_dim; ++k) {
    const T* xr = x.row(k);
    const T* dyr = dy.row(k);
    const T g = gamma[k];
    T dg = T(0);
    for (size_t c = 0; c < n; ++c) {
      const T xh = (xr[c] - mean[c]) * invstd[c];
      const T dxh = dyr[c] * g;
      sum_d[c] += dxh;
      sum_dx[c] = std::fma(dxh, xh, sum_dx[c]);
    }
    // dgamma/dbeta via the fixed-lane reductions for determinism.
    for (size_t c = 0; c < n; ++c) xhat_row[c] = (xr[c] - mean[c]) * invstd[c];
    dg = dot_reduce(dyr, xhat_row.data(), n);
    dgamma[k] += dg;
    dbeta[k] += sum_reduce(dyr, n);
  }
  for (size_t k = 0; k < k_dim; ++k) {
    const T* xr = x.row(k);
    const T* dyr = dy.row(k);
    T* dxr = dx.row(k);
    const T g = gamma[k];
    for (size_t c = 0; c < n; ++c) {
      const T xh = (xr[c] - mean[c]) * invstd[c];
      const T dxh = dyr[c] * g;
      dxr[c] = invstd[c] * (dxh - inv_k * sum_d[c] - xh * inv_k * sum_dx[c]);
    }
  }
}

}  // namespace kernels
}  // namespace pmgn

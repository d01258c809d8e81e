#include "oracles.hpp"

#include <cmath>

#include "pmgn/geom_predicates.hpp"

namespace oracles {
namespace {

// Sign of the incircle determinant in long double; falls back to the exact
// predicate when the magnitude is too close to call.
int incircle_ld(const double* a, const double* b, const double* c,
                const double* p) {
  long double r[3][3];
  const double* q[3] = {a, b, c};
  for (int i = 0; i < 3; ++i) {
    r[i][0] = static_cast<long double>(q[i][0]) - p[0];
    r[i][1] = static_cast<long double>(q[i][1]) - p[1];
    r[i][2] = r[i][0] * r[i][0] + r[i][1] * r[i][1];
  }
  const long double det =
      r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1]) -
      r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0]) +
      r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0]);
  const long double scale =
      std::fabs(r[0][2]) + std::fabs(r[1][2]) + std::fabs(r[2][2]) + 1e-300L;
  if (std::fabs(det) > 1e-14L * scale * scale) return det > 0 ? 1 : -1;
  return pmgn::geom::incircle(a, b, c, p);
}

int orient2d_ld(const double* a, const double* b, const double* c) {
  const long double det =
      (static_cast<long double>(b[0]) - a[0]) * (static_cast<long double>(c[1]) - a[1]) -
      (static_cast<long double>(b[1]) - a[1]) * (static_cast<long double>(c[0]) - a[0]);
  if (std::fabs(det) > 1e-16L) return det > 0 ? 1 : -1;
  return pmgn::geom::orient2d(a, b, c);
}

}  // namespace

EdgeSet brute_delaunay_2d(const std::vector<double>& pts) {
  const size_t n = pts.size() / 2;
  EdgeSet edges;
  for (uint32_t i = 0; i < n; ++i)
    for (uint32_t j = i + 1; j < n; ++j)
      for (uint32_t k = j + 1; k < n; ++k) {
        const double* a = &pts[i * 2];
        const double* b = &pts[j * 2];
        const double* c = &pts[k * 2];
        const int ori = orient2d_ld(a, b, c);
        if (ori == 0) continue;
        bool empty = true;
        for (uint32_t m = 0; m < n && empty; ++m) {
          if (m == i || m == j || m == k) continue;
          if (incircle_ld(a, b, c, &pts[m * 2]) * ori > 0) empty = false;
        }
        if (empty) {
          edges.insert({i, j});
          edges.insert({i, k});
          edges.insert({j, k});
        }
      }
  return edges;
}

EdgeSet brute_delaunay_3d(const std::vector<double>& pts) {
  const size_t n = pts.size() / 3;
  EdgeSet edges;
  for (uint32_t i = 0; i < n; ++i)
    for (uint32_t j = i + 1; j < n; ++j)
      for (uint32_t k = j + 1; k < n; ++k)
        for (uint32_t l = k + 1; l < n; ++l) {
          const double* a = &pts[i * 3];
          const double* b = &pts[j * 3];
          const double* c = &pts[k * 3];
          const double* d = &pts[l * 3];
          const int ori = pmgn::geom::orient3d(a, b, c, d);
          if (ori == 0) continue;
          bool empty = true;
          for (uint32_t m = 0; m < n && empty; ++m) {
            if (m == i || m == j || m == k || m == l) continue;
            if (pmgn::geom::insphere(a, b, c, d, &pts[m * 3]) * ori > 0)
              empty = false;
          }
          if (empty) {
            const uint32_t v[4] = {i, j, k, l};
            for (int x = 0; x < 4; ++x)
              for (int y = x + 1; y < 4; ++y) edges.insert({v[x], v[y]});
          }
        }
  return edges;
}

EdgeSet edge_set(const std::vector<pmgn::Arc>& arcs) {
  EdgeSet out;
  for (const pmgn::Arc& a : arcs)
    out.insert({std::min(a.sender, a.receiver), std::max(a.sender, a.receiver)});
  return out;
}

BitAdjacency::BitAdjacency(size_t n, const std::vector<pmgn::Arc>& arcs)
    : n_(n), words_((n + 63) / 64), rows_(n * words_, 0) {
  for (const pmgn::Arc& a : arcs)
    rows_[a.receiver * words_ + a.sender / 64] |= uint64_t(1) << (a.sender % 64);
}

std::vector<uint32_t> BitAdjacency::distances(const std::vector<uint32_t>& seeds,
                                              uint32_t max_hops) const {
  std::vector<uint64_t> reached(words_, 0), frontier(words_, 0), next(words_, 0);
  for (uint32_t s : seeds) {
    reached[s / 64] |= uint64_t(1) << (s % 64);
    frontier[s / 64] |= uint64_t(1) << (s % 64);
  }
  std::vector<uint32_t> dist(n_, UINT32_MAX);
  for (uint32_t s : seeds) dist[s] = 0;
  for (uint32_t hop = 1; hop <= max_hops; ++hop) {
    std::fill(next.begin(), next.end(), 0);
    // next = A * frontier (boolean), i.e. nodes adjacent to the frontier
    for (size_t v = 0; v < n_; ++v) {
      const uint64_t* row = &rows_[v * words_];
      bool hit = false;
      for (size_t w = 0; w < words_ && !hit; ++w)
        if (row[w] & frontier[w]) hit = true;
      if (hit) next[v / 64] |= uint64_t(1) << (v % 64);
    }
    bool any = false;
    for (size_t w = 0; w < words_; ++w) {
      next[w] &= ~reached[w];
      reached[w] |= next[w];
      if (next[w]) any = true;
    }
    for (size_t v = 0; v < n_; ++v)
      if ((next[v / 64] >> (v % 64)) & 1) dist[v] = hop;
    frontier = next;
    if (!any) break;
  }
  return dist;
}

std::vector<uint32_t> power_distances(size_t n, const std::vector<pmgn::Arc>& arcs,
                                      const std::vector<uint32_t>& seeds,
                                      uint32_t max_hops) {
  return BitAdjacency(n, arcs).distances(seeds, max_hops);
}

std::vector<double> adam_reference(std::vector<double> params,
                                   const std::vector<double>& grads,
                                   const std::vector<double>& lrs, double beta1,
                                   double beta2, double eps) {
  std::vector<double> m(params.size(), 0.0), v(params.size(), 0.0);
  for (size_t step = 0; step < lrs.size(); ++step) {
    const double t = static_cast<double>(step + 1);
    for (size_t i = 0; i < params.size(); ++i) {
      m[i] = beta1 * m[i] + (1.0 - beta1) * grads[i];
      v[i] = beta2 * v[i] + (1.0 - beta2) * grads[i] * grads[i];
      const double mhat = m[i] / (1.0 - std::pow(beta1, t));
      const double vhat = v[i] / (1.0 - std::pow(beta2, t));
      params[i] -= lrs[step] * mhat / (std::sqrt(vhat) + eps);
    }
  }
  return params;
}

}  // namespace oracles

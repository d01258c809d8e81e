#include "pmgn/geom_predicates.hpp"

#include <gmpxx.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

#include "pmgn/error.hpp"

namespace pmgn::geom {
namespace {

int sign_of(double v, double errbound) {
  if (v > errbound) return 1;
  if (v < -errbound) return -1;
  return 0;  // undecided
}

int sign_mpq(const mpq_class& q) { return sgn(q); }

using Q = mpq_class;

Q qdet2(const Q& a, const Q& b, const Q& c, const Q& d) { return a * d - b * c; }

Q qdet3(const std::array<Q, 9>& m) {
  return m[0] * qdet2(m[4], m[5], m[7], m[8]) -
         m[1] * qdet2(m[3], m[5], m[6], m[8]) +
         m[2] * qdet2(m[3], m[4], m[6], m[7]);
}

Q qdet4(const std::array<Q, 16>& m) {
  Q det = 0;
  for (int col = 0; col < 4; ++col) {
    std::array<Q, 9> minor;
    int mi = 0;
    for (int r = 1; r < 4; ++r)
      for (int c = 0; c < 4; ++c)
        if (c != col) minor[mi++] = m[r * 4 + c];
    Q term = m[col] * qdet3(minor);
    det += (col % 2 == 0) ? term : -term;
  }
  return det;
}

Q qorient2d(const double* a, const double* b, const double* c) {
  return qdet2(Q(b[0]) - Q(a[0]), Q(b[1]) - Q(a[1]), Q(c[0]) - Q(a[0]),
               Q(c[1]) - Q(a[1]));
}

Q qorient3d(const double* a, const double* b, const double* c, const double* d) {
  std::array<Q, 9> m = {Q(b[0]) - Q(a[0]), Q(b[1]) - Q(a[1]), Q(b[2]) - Q(a[2]),
                        Q(c[0]) - Q(a[0]), Q(c[1]) - Q(a[1]), Q(c[2]) - Q(a[2]),
                        Q(d[0]) - Q(a[0]), Q(d[1]) - Q(a[1]), Q(d[2]) - Q(a[2])};
  return qdet3(m);
}

// incircle determinant, rows (a-p, b-p, c-p) with lifted third column.
Q qincircle(const double* a, const double* b, const double* c, const double* p) {
  auto lift = [&](const double* q, std::array<Q, 3>& row) {
    row[0] = Q(q[0]) - Q(p[0]);
    row[1] = Q(q[1]) - Q(p[1]);
    row[2] = row[0] * row[0] + row[1] * row[1];
  };
  std::array<Q, 3> ra, rb, rc;
  lift(a, ra);
  lift(b, rb);
  lift(c, rc);
  std::array<Q, 9> m = {ra[0], ra[1], ra[2], rb[0], rb[1],
                        rb[2], rc[0], rc[1], rc[2]};
  return qdet3(m);
}

Q qinsphere(const double* a, const double* b, const double* c, const double* d,
            const double* p) {
  auto lift = [&](const double* q, std::array<Q, 4>& row) {
    row[0] = Q(q[0]) - Q(p[0]);
    row[1] = Q(q[1]) - Q(p[1]);
    row[2] = Q(q[2]) - Q(p[2]);
    row[3] = row[0] * row[0] + row[1] * row[1] + row[2] * row[2];
  };
  std::array<Q, 4> ra, rb, rc, rd;
  lift(a, ra);
  lift(b, rb);
  lift(c, rc);
  lift(d, rd);
  std::array<Q, 16> m = {ra[0], ra[1], ra[2], ra[3], rb[0], rb[1], rb[2], rb[3],
                         rc[0], rc[1], rc[2], rc[3], rd[0], rd[1], rd[2], rd[3]};
  return qdet4(m);
}

}  // namespace

int orient2d(const double* a, const double* b, const double* c) {
  const double ax = b[0] - a[0], ay = b[1] - a[1];
  const double bx = c[0] - a[0], by = c[1] - a[1];
  const double det = ax * by - ay * bx;
  const double perm = std::fabs(ax * by) + std::fabs(ay * bx);
  int s = sign_of(det, perm * 1e-14);
  if (s != 0 || perm == 0.0) return det == 0.0 && perm == 0.0 ? 0 : s;
  return sign_mpq(qorient2d(a, b, c));
}

int orient3d(const double* a, const double* b, const double* c, const double* d) {
  double m[9];
  for (int i = 0; i < 3; ++i) {
    m[0 * 3 + i] = b[i] - a[i];
    m[1 * 3 + i] = c[i] - a[i];
    m[2 * 3 + i] = d[i] - a[i];
  }
  const double t0 = m[0] * (m[4] * m[8] - m[5] * m[7]);
  const double t1 = m[1] * (m[3] * m[8] - m[5] * m[6]);
  const double t2 = m[2] * (m[3] * m[7] - m[4] * m[6]);
  const double det = t0 - t1 + t2;
  const double perm = std::fabs(m[0]) * (std::fabs(m[4] * m[8]) + std::fabs(m[5] * m[7])) +
                      std::fabs(m[1]) * (std::fabs(m[3] * m[8]) + std::fabs(m[5] * m[6])) +
                      std::fabs(m[2]) * (std::fabs(m[3] * m[7]) + std::fabs(m[4] * m[6]));
  int s = sign_of(det, perm * 1e-13);
  if (s != 0 || perm == 0.0) return det == 0.0 && perm == 0.0 ? 0 : s;
  return sign_mpq(qorient3d(a, b, c, d));
}

int incircle(const double* a, const double* b, const double* c, const double* p) {
  double r[3][3];
  const double* q[3] = {a, b, c};
  double perm = 0.0;
  for (int i = 0; i < 3; ++i) {
    r[i][0] = q[i][0] - p[0];
    r[i][1] = q[i][1] - p[1];
    r[i][2] = r[i][0] * r[i][0] + r[i][1] * r[i][1];
  }
  const double t0 = r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1]);
  const double t1 = r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0]);
  const double t2 = r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0]);
  const double det = t0 - t1 + t2;
  perm = std::fabs(r[0][0]) * (std::fabs(r[1][1] * r[2][2]) + std::fabs(r[1][2] * r[2][1])) +
         std::fabs(r[0][1]) * (std::fabs(r[1][0] * r[2][2]) + std::fabs(r[1][2] * r[2][0])) +
         std::fabs(r[0][2]) * (std::fabs(r[1][0] * r[2][1]) + std::fabs(r[1][1] * r[2][0]));
  int s = sign_of(det, perm * 1e-13);
  if (s != 0 || perm == 0.0) return det == 0.0 && perm == 0.0 ? 0 : s;
  return sign_mpq(qincircle(a, b, c, p));
}

int insphere(const double* a, const double* b, const double* c, const double* d,
             const double* p) {
  double r[4][4];
  const double* q[4] = {a, b, c, d};
  for (int i = 0; i < 4; ++i) {
    r[i][0] = q[i][0] - p[0];
    r[i][1] = q[i][1] - p[1];
    r[i][2] = q[i][2] - p[2];
    r[i][3] = r[i][0] * r[i][0] + r[i][1] * r[i][1] + r[i][2] * r[i][2];
  }
  double det = 0.0, perm = 0.0;
  for (int col = 0; col < 4; ++col) {
    double minor[3][3];
    double aminor[3][3];
    for (int i = 1; i < 4; ++i) {
      int mc = 0;
      for (int cc = 0; cc < 4; ++cc) {
        if (cc == col) continue;
        minor[i - 1][mc] = r[i][cc];
        aminor[i - 1][mc] = std::fabs(r[i][cc]);
        ++mc;
      }
    }
    const double d3 =
        minor[0][0] * (minor[1][1] * minor[2][2] - minor[1][2] * minor[2][1]) -
        minor[0][1] * (minor[1][0] * minor[2][2] - minor[1][2] * minor[2][0]) +
        minor[0][2] * (minor[1][0] * minor[2][1] - minor[1][1] * minor[2][0]);
    const double p3 =
        aminor[0][0] * (aminor[1][1] * aminor[2][2] + aminor[1][2] * aminor[2][1]) +
        aminor[0][1] * (aminor[1][0] * aminor[2][2] + aminor[1][2] * aminor[2][0]) +
        aminor[0][2] * (aminor[1][0] * aminor[2][1] + aminor[1][1] * aminor[2][0]);
    const double term = r[0][col] * d3;
    det += (col % 2 == 0) ? term : -term;
    perm += std::fabs(r[0][col]) * p3;
  }
  // The lifted 4x4 determinant is negative when p is inside for a
  // positively oriented tet (parity flips with dimension), so negate to
  // match the inside-positive contract.
  int s = sign_of(det, perm * 1e-12);
  if (s != 0) return -s;
  if (perm == 0.0 && det == 0.0) return 0;
  return -sign_mpq(qinsphere(a, b, c, d, p));
}

// Symbolic perturbation: lifted coordinate of point q becomes
// |q|^2 - eps^(rank_q + 1). The determinant is linear in the lifted column,
// so the perturbed determinant is det0 plus one term per point; with eps
// infinitesimal the nonzero term of smallest rank decides. Coefficients are
// evaluated exactly.
int incircle_sos(const double* a, const double* b, const double* c,
                 const double* p, uint32_t rank_a, uint32_t rank_b,
                 uint32_t rank_c, uint32_t rank_p) {
  int s = incircle(a, b, c, p);
  if (s != 0) return s;
  // Perturbation coefficients: d(det)/d(lift_q) * (-1) for q in {a,b,c},
  // and sum of cofactors (= orient2d(a,b,c)) for p.
  struct Term {
    uint32_t rank;
    int which;  // 0=a,1=b,2=c,3=p
  };
  std::array<Term, 4> terms = {{{rank_a, 0}, {rank_b, 1}, {rank_c, 2}, {rank_p, 3}}};
  std::sort(terms.begin(), terms.end(),
            [](const Term& x, const Term& y) { return x.rank < y.rank; });
  for (const Term& t : terms) {
    Q coef;
    switch (t.which) {
      // Cofactors of the lifted column carry alternating signs; the
      // perturbation enters as -w, flipping them again.
      case 0: coef = -qorient2d(p, b, c); break;
      case 1: coef = qorient2d(p, a, c); break;
      case 2: coef = -qorient2d(p, a, b); break;
      case 3: coef = qorient2d(a, b, c); break;
    }
    int cs = sign_mpq(coef);
    if (cs != 0) return cs;
  }
  return 0;  // fully collinear input
}

int insphere_sos(const double* a, const double* b, const double* c,
                 const double* d, const double* p, uint32_t rank_a,
                 uint32_t rank_b, uint32_t rank_c, uint32_t rank_d,
                 uint32_t rank_p) {
  int s = insphere(a, b, c, d, p);
  if (s != 0) return s;
  struct Term {
    uint32_t rank;
    int which;  // 0=a..3=d,4=p
  };
  std::array<Term, 5> terms = {
      {{rank_a, 0}, {rank_b, 1}, {rank_c, 2}, {rank_d, 3}, {rank_p, 4}}};
  std::sort(terms.begin(), terms.end(),
            [](const Term& x, const Term& y) { return x.rank < y.rank; });
  for (const Term& t : terms) {
    // Coefficients expand the raw determinant; negated like insphere itself.
    Q coef;
    switch (t.which) {
      case 0: coef = qorient3d(p, b, c, d); break;
      case 1: coef = -qorient3d(p, a, c, d); break;
      case 2: coef = qorient3d(p, a, b, d); break;
      case 3: coef = -qorient3d(p, a, b, c); break;
      case 4: coef = qorient3d(a, b, c, d); break;
    }
    int cs = sign_mpq(coef);
    if (cs != 0) return -cs;
  }
  return 0;  // fully coplanar input
}

int coplanar_incircle_sos(const double* a, const double* b, const double* c,
                          const double* p, uint32_t rank_a, uint32_t rank_b,
                          uint32_t rank_c, uint32_t rank_p) {
  // In-plane incircle determinant evaluated in the dual coordinates
  // (x.u, x.v) with u=b-a, v=c-a. That coordinate map is the (positive
  // definite) Gram matrix applied to true plane coordinates, so signs are
  // preserved; orientation-dependence cancels by multiplying with the
  // triangle orientation computed in the same coordinates.
  std::array<Q, 3> u, v;
  for (int i = 0; i < 3; ++i) {
    u[i] = Q(b[i]) - Q(a[i]);
    v[i] = Q(c[i]) - Q(a[i]);
  }
  // Explicit return type: gmpxx expression templates must not escape the
  // lambda or they dangle.
  auto dotq = [](const std::array<Q, 3>& x, const std::array<Q, 3>& y) -> Q {
    return x[0] * y[0] + x[1] * y[1] + x[2] * y[2];
  };
  auto diff = [&](const double* x, const double* y) {
    std::array<Q, 3> d;
    for (int i = 0; i < 3; ++i) d[i] = Q(x[i]) - Q(y[i]);
    return d;
  };
  const std::array<Q, 3> ap = diff(a, p), bp = diff(b, p), cp = diff(c, p);
  std::array<Q, 9> m = {dotq(ap, u), dotq(ap, v), dotq(ap, ap),
                        dotq(bp, u), dotq(bp, v), dotq(bp, bp),
                        dotq(cp, u), dotq(cp, v), dotq(cp, cp)};
  const std::array<Q, 3> ba = diff(b, a), ca = diff(c, a);
  const Q orient = qdet2(dotq(ba, u), dotq(ba, v), dotq(ca, u), dotq(ca, v));
  const int so = sign_mpq(orient);
  if (so == 0)
    throw DegeneracyError("coplanar_incircle_sos: degenerate triangle");
  const Q det = qdet3(m);
  int s = sign_mpq(det);
  if (s != 0) return s * so;
  // Same lifted-weight expansion as incircle_sos, in plane coordinates.
  struct Term {
    uint32_t rank;
    int which;
  };
  std::array<Term, 4> terms = {{{rank_a, 0}, {rank_b, 1}, {rank_c, 2}, {rank_p, 3}}};
  std::sort(terms.begin(), terms.end(),
            [](const Term& x, const Term& y) { return x.rank < y.rank; });
  for (const Term& t : terms) {
    Q coef;
    switch (t.which) {
      case 0: coef = -qdet2(m[3], m[4], m[6], m[7]); break;
      case 1: coef = qdet2(m[0], m[1], m[6], m[7]); break;
      case 2: coef = -qdet2(m[0], m[1], m[3], m[4]); break;
      case 3: coef = orient; break;
    }
    int cs = sign_mpq(coef);
    if (cs != 0) return cs * so;
  }
  return 0;  // a, b, c, p all collinear; unreachable for valid facets
}

int diametral_side(const double* a, const double* b, const double* p, int dim) {
  Q acc = 0;
  for (int i = 0; i < dim; ++i)
    acc += (Q(p[i]) - Q(a[i])) * (Q(p[i]) - Q(b[i]));
  if (acc < 0) return -1;
  if (acc > 0) return 1;
  return 0;
}

std::vector<uint32_t> lex_ranks(const double* pts, size_t n, int dim) {
  std::vector<uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  auto lex_less = [&](uint32_t x, uint32_t y) {
    for (int i = 0; i < dim; ++i) {
      if (pts[x * dim + i] < pts[y * dim + i]) return true;
      if (pts[x * dim + i] > pts[y * dim + i]) return false;
    }
    return false;
  };
  std::sort(order.begin(), order.end(), lex_less);
  for (size_t i = 0; i + 1 < n; ++i) {
    bool equal = true;
    for (int d = 0; d < dim; ++d)
      if (pts[order[i] * dim + d] != pts[order[i + 1] * dim + d]) {
        equal = false;
        break;
      }
    if (equal)
      throw DegeneracyError("duplicate point at index " +
                            std::to_string(order[i + 1]));
  }
  std::vector<uint32_t> rank(n);
  for (size_t i = 0; i < n; ++i) rank[order[i]] = static_cast<uint32_t>(i);
  return rank;
}

}  // namespace pmgn::geom

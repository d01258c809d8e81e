#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace pmgn::geom {

// Exact-sign geometric predicates: fast double evaluation with a permanent
// based error filter, falling back to arbitrary-precision rationals when the
// filter cannot certify the sign. Inputs are raw coordinate pointers.
//
// orient2d(a,b,c):  sign of det[b-a; c-a].  +1 = counter-clockwise.
// orient3d(a,b,c,d): sign of det[b-a; c-a; d-a]. +1 = d on the positive side.
// incircle(a,b,c,p): for CCW (a,b,c): +1 iff p strictly inside the circle.
// insphere(a,b,c,d,p): for positively oriented (a,b,c,d): +1 iff p strictly
//                      inside the sphere.
int orient2d(const double* a, const double* b, const double* c);
int orient3d(const double* a, const double* b, const double* c, const double* d);
int incircle(const double* a, const double* b, const double* c, const double* p);
int insphere(const double* a, const double* b, const double* c, const double* d,
             const double* p);

// Tie-broken variants: exact zeros are resolved by symbolic perturbation of
// the lifted coordinates, with perturbation magnitude decreasing in the
// lexicographic rank of the point (rank 0 = lexicographically smallest).
// The result is the in-circle/in-sphere test of an infinitesimally perturbed
// point set, so the induced triangulation is unique and deterministic.
// Never returns 0 unless the configuration is fully degenerate (collinear /
// coplanar respectively).
int incircle_sos(const double* a, const double* b, const double* c,
                 const double* p, uint32_t rank_a, uint32_t rank_b,
                 uint32_t rank_c, uint32_t rank_p);
int insphere_sos(const double* a, const double* b, const double* c,
                 const double* d, const double* p, uint32_t rank_a,
                 uint32_t rank_b, uint32_t rank_c, uint32_t rank_d,
                 uint32_t rank_p);

// In-circumcircle test for four coplanar points in 3D (any plane), with the
// same rank-ordered symbolic perturbation as incircle_sos. Returns +1 when p
// lies inside the circle through (a,b,c) within their common plane, -1
// outside; never 0 for a non-degenerate triangle (a,b,c).
int coplanar_incircle_sos(const double* a, const double* b, const double* c,
                          const double* p, uint32_t rank_a, uint32_t rank_b,
                          uint32_t rank_c, uint32_t rank_p);

// Exact sign of (p-a).(p-b): -1 strictly inside the diametral span of
// segment ab (collinear case), +1 outside, 0 on.
int diametral_side(const double* a, const double* b, const double* p, int dim);

// Lexicographic ranks of n points with the given dimension; throws
// DegeneracyError on duplicate points.
std::vector<uint32_t> lex_ranks(const double* pts, size_t n, int dim);

}  // namespace pmgn::geom

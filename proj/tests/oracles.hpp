#pragma once

// Independent oracles used to freeze expected values. They deliberately
// avoid the library's construction paths: the Delaunay oracle enumerates
// simplices against the empty-circumcircle definition, the hop oracle uses
// boolean adjacency powering, and the Adam reference replays the update rule
// directly.

#include <cstdint>
#include <set>
#include <utility>
#include <vector>

#include "pmgn/mesh.hpp"

namespace oracles {

using EdgeSet = std::set<std::pair<uint32_t, uint32_t>>;

// Empty-circumcircle enumeration over all triples (2D) / quadruples (3D).
// Long-double arithmetic with an exact referee on near-ties.
EdgeSet brute_delaunay_2d(const std::vector<double>& pts);
EdgeSet brute_delaunay_3d(const std::vector<double>& pts);

EdgeSet edge_set(const std::vector<pmgn::Arc>& arcs);

// Boolean adjacency powering: dist[v] = smallest j with (A^j x)[v] != 0 for
// the seed indicator x (UINT32_MAX if unreachable).
class BitAdjacency {
public:
  BitAdjacency(size_t n, const std::vector<pmgn::Arc>& arcs);
  std::vector<uint32_t> distances(const std::vector<uint32_t>& seeds,
                                  uint32_t max_hops) const;

private:
  size_t n_, words_;
  std::vector<uint64_t> rows_;
};

// dist-to-set helper built on the powering oracle.
std::vector<uint32_t> power_distances(size_t n, const std::vector<pmgn::Arc>& arcs,
                                      const std::vector<uint32_t>& seeds,
                                      uint32_t max_hops);

// Reference Adam trajectory with constant gradients, double precision.
std::vector<double> adam_reference(std::vector<double> params,
                                   const std::vector<double>& grads,
                                   const std::vector<double>& lrs, double beta1,
                                   double beta2, double eps);

}  // namespace oracles

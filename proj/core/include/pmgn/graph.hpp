#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "pmgn/mesh.hpp"

namespace pmgn {

inline constexpr uint32_t kUnreached = std::numeric_limits<uint32_t>::max();

// Undirected adjacency in CSR form, neighbors ascending per node.
struct AdjacencyCsr {
  std::vector<uint32_t> offsets;  // size n+1
  std::vector<uint32_t> neighbors;

  size_t num_nodes() const { return offsets.empty() ? 0 : offsets.size() - 1; }

  static AdjacencyCsr from_arcs(size_t n_nodes, const std::vector<Arc>& arcs);
};

// Hop distance from a seed set to every node (kUnreached if disconnected).
std::vector<uint32_t> bfs_distances(const AdjacencyCsr& adj,
                                    const std::vector<uint32_t>& seeds);

}  // namespace pmgn

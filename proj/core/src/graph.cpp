#include "pmgn/graph.hpp"

namespace pmgn {

AdjacencyCsr AdjacencyCsr::from_arcs(size_t n_nodes, const std::vector<Arc>& arcs) {
  AdjacencyCsr csr;
  csr.offsets.assign(n_nodes + 1, 0);
  for (const Arc& a : arcs) ++csr.offsets[a.receiver + 1];
  for (size_t v = 0; v < n_nodes; ++v) csr.offsets[v + 1] += csr.offsets[v];
  csr.neighbors.resize(arcs.size());
  std::vector<uint32_t> cursor(csr.offsets.begin(), csr.offsets.end() - 1);
  // Arcs are sorted by (min, max, dir), so per-receiver insertion order is
  // ascending in the sender id.
  for (const Arc& a : arcs) csr.neighbors[cursor[a.receiver]++] = a.sender;
  return csr;
}

std::vector<uint32_t> bfs_distances(const AdjacencyCsr& adj,
                                    const std::vector<uint32_t>& seeds) {
  std::vector<uint32_t> dist(adj.num_nodes(), kUnreached);
  std::vector<uint32_t> frontier;
  for (uint32_t s : seeds) {
    if (dist[s] == 0) continue;
    dist[s] = 0;
    frontier.push_back(s);
  }
  uint32_t level = 0;
  std::vector<uint32_t> next;
  while (!frontier.empty()) {
    ++level;
    next.clear();
    for (uint32_t v : frontier) {
      for (uint32_t i = adj.offsets[v]; i < adj.offsets[v + 1]; ++i) {
        const uint32_t u = adj.neighbors[i];
        if (dist[u] != kUnreached) continue;
        dist[u] = level;
        next.push_back(u);
      }
    }
    frontier.swap(next);
  }
  return dist;
}

}  // namespace pmgn

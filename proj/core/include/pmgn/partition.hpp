#pragma once

#include <array>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "pmgn/graph.hpp"
#include "pmgn/mesh.hpp"
#include "pmgn/rng.hpp"

namespace pmgn {

// Uniform spatial decomposition: each axis of the bounding box divided into
// equal parts. Nodes exactly on an interior cell boundary go to the
// lower-index cell.
struct PartitionPlan {
  int dim = 2;
  std::array<int, 3> counts = {1, 1, 1};  // counts[2] = 1 in 2D
  std::array<double, 3> lo = {0, 0, 0};
  std::array<double, 3> hi = {1, 1, 1};

  size_t num_subdomains() const {
    return static_cast<size_t>(counts[0]) * counts[1] * counts[2];
  }
  // Cell boundaries along one axis: counts[axis]+1 values tiling [lo, hi].
  std::vector<double> boundaries(int axis) const;

  static PartitionPlan from_mesh(const Mesh& mesh, std::array<int, 3> counts);
};

// Deterministic per-node subdomain ids (row-major over axis cells).
std::vector<uint32_t> assign_subdomains(const Mesh& mesh,
                                        const PartitionPlan& plan);

// Ghost zone: nodes at hop distance 1..k from the subdomain set. k=0 gives
// the empty set.
std::vector<uint32_t> khop_ghost(const AdjacencyCsr& adj,
                                 const std::vector<uint32_t>& subdomain_nodes,
                                 int k);

// Subdomain + ghost zone with the induced local graph. Local ids: subdomain
// nodes first (ascending global id), then ghosts (ascending global id).
// Induced arcs contain exactly the full-graph arcs with both endpoints in
// the patch, ordered by (receiver_local, sender_global) so per-receiver
// aggregation order matches the full graph.
struct Patch {
  uint32_t subdomain_id = 0;
  int k = 0;
  std::vector<uint32_t> subdomain_nodes;  // global ids, ascending
  std::vector<uint32_t> ghost_nodes;      // global ids, ascending
  std::vector<uint32_t> local_to_global;
  std::unordered_map<uint32_t, uint32_t> global_to_local;
  std::vector<Arc> arcs_local;          // local ids, aggregation order
  std::vector<uint32_t> ghost_owner;    // owning subdomain per ghost node

  size_t num_subdomain() const { return subdomain_nodes.size(); }
  size_t num_local() const { return local_to_global.size(); }
};

// Throws DataError for an empty subdomain (callers skip those; the plan
// keeps them so subdomain ids stay stable).
Patch build_patch(const Mesh& mesh, const AdjacencyCsr& adj,
                  const std::vector<uint32_t>& subdomain_assignment,
                  uint32_t subdomain_id, int k);

// All non-empty patches of a plan, ascending subdomain id.
std::vector<Patch> build_patches(const Mesh& mesh, const AdjacencyCsr& adj,
                                 const std::vector<uint32_t>& assignment,
                                 const PartitionPlan& plan, int k);

// Uniform draw over (simulation, timestep, non-empty subdomain) triples.
// frames_per_sim counts usable input frames (frames - 1 when a next-frame
// target is needed). patches_per_sim gives each sim's non-empty patch count.
struct PatchSample {
  uint32_t sim = 0;
  uint32_t frame = 0;
  uint32_t patch = 0;  // index into that sim's non-empty patch list
};
std::vector<PatchSample> sample_patches(Rng& rng,
                                        const std::vector<uint32_t>& frames_per_sim,
                                        const std::vector<uint32_t>& patches_per_sim,
                                        size_t count);

// Mean/max patch node count (subdomain + ghost) per k over the non-empty
// subdomains.
struct PatchGrowthRow {
  int k = 0;
  double mean_nodes = 0.0;
  uint64_t max_nodes = 0;
};
std::vector<PatchGrowthRow> measure_patch_growth(const Mesh& mesh,
                                                 const PartitionPlan& plan,
                                                 int k_min, int k_max);

}  // namespace pmgn

#include "pmgn/partition.hpp"

#include <algorithm>
#include <cmath>

namespace pmgn {

std::vector<double> PartitionPlan::boundaries(int axis) const {
  std::vector<double> b(counts[axis] + 1);
  for (int i = 0; i <= counts[axis]; ++i)
    b[i] = lo[axis] + (hi[axis] - lo[axis]) * static_cast<double>(i) /
                          static_cast<double>(counts[axis]);
  return b;
}

PartitionPlan PartitionPlan::from_mesh(const Mesh& mesh,
                                       std::array<int, 3> counts) {
  PartitionPlan plan;
  plan.dim = mesh.dim;
  plan.counts = counts;
  if (mesh.dim == 2) plan.counts[2] = 1;
  for (int a = 0; a < 3; ++a)
    if (plan.counts[a] < 1) throw DataError("PartitionPlan: counts must be >= 1");
  for (int a = 0; a < mesh.dim; ++a) {
    double lo = mesh.positions[a], hi = mesh.positions[a];
    for (size_t v = 0; v < mesh.num_nodes(); ++v) {
      const double x = mesh.positions[v * mesh.dim + a];
      lo = std::min(lo, x);
      hi = std::max(hi, x);
    }
    plan.lo[a] = lo;
    plan.hi[a] = hi;
  }
  return plan;
}

namespace {

// Cell index along one axis; exact boundary values fall to the lower cell.
int axis_cell(double x, double lo, double hi, int count) {
  if (count == 1) return 0;
  const double t = (x - lo) / (hi - lo) * count;
  int cell = static_cast<int>(std::ceil(t)) - 1;
  if (cell < 0) cell = 0;
  if (cell >= count) cell = count - 1;
  return cell;
}

}  // namespace

std::vector<uint32_t> assign_subdomains(const Mesh& mesh,
                                        const PartitionPlan& plan) {
  const size_t n = mesh.num_nodes();
  std::vector<uint32_t> assignment(n);
  for (size_t v = 0; v < n; ++v) {
    uint32_t id = 0;
    for (int a = plan.dim - 1; a >= 0; --a) {
      const double x = mesh.positions[v * mesh.dim + a];
      if (x < plan.lo[a] || x > plan.hi[a])
        throw DataError("assign_subdomains: node outside the plan's bounding box");
      id = id * plan.counts[a] +
           axis_cell(x, plan.lo[a], plan.hi[a], plan.counts[a]);
    }
    assignment[v] = id;
  }
  return assignment;
}

std::vector<uint32_t> khop_ghost(const AdjacencyCsr& adj,
                                 const std::vector<uint32_t>& subdomain_nodes,
                                 int k) {
  if (k < 0) throw DataError("khop_ghost: k must be >= 0");
  std::vector<uint32_t> ghosts;
  if (k == 0) return ghosts;
  std::vector<uint32_t> dist = bfs_distances(adj, subdomain_nodes);
  for (uint32_t v = 0; v < dist.size(); ++v)
    if (dist[v] != kUnreached && dist[v] >= 1 &&
        dist[v] <= static_cast<uint32_t>(k))
      ghosts.push_back(v);
  return ghosts;
}

Patch build_patch(const Mesh& mesh, const AdjacencyCsr& adj,
                  const std::vector<uint32_t>& subdomain_assignment,
                  uint32_t subdomain_id, int k) {
  Patch patch;
  patch.subdomain_id = subdomain_id;
  patch.k = k;
  for (uint32_t v = 0; v < subdomain_assignment.size(); ++v)
    if (subdomain_assignment[v] == subdomain_id)
      patch.subdomain_nodes.push_back(v);
  if (patch.subdomain_nodes.empty())
    throw DataError("build_patch: subdomain " + std::to_string(subdomain_id) +
                    " is empty");
  patch.ghost_nodes = khop_ghost(adj, patch.subdomain_nodes, k);
  // both lists come out ascending already
  patch.local_to_global = patch.subdomain_nodes;
  patch.local_to_global.insert(patch.local_to_global.end(),
                               patch.ghost_nodes.begin(),
                               patch.ghost_nodes.end());
  patch.global_to_local.reserve(patch.local_to_global.size() * 2);
  for (uint32_t l = 0; l < patch.local_to_global.size(); ++l)
    patch.global_to_local.emplace(patch.local_to_global[l], l);
  patch.ghost_owner.reserve(patch.ghost_nodes.size());
  for (uint32_t g : patch.ghost_nodes)
    patch.ghost_owner.push_back(subdomain_assignment[g]);
  // Induced arcs; mesh arcs are globally sorted so the per-receiver sender
  // order carries over.
  struct Key {
    uint32_t recv_local;
    uint32_t send_global;
    Arc arc;
  };
  std::vector<Key> keys;
  for (const Arc& a : mesh.arcs) {
    auto si = patch.global_to_local.find(a.sender);
    if (si == patch.global_to_local.end()) continue;
    auto ri = patch.global_to_local.find(a.receiver);
    if (ri == patch.global_to_local.end()) continue;
    keys.push_back({ri->second, a.sender, Arc{si->second, ri->second}});
  }
  std::sort(keys.begin(), keys.end(), [](const Key& x, const Key& y) {
    if (x.recv_local != y.recv_local) return x.recv_local < y.recv_local;
    return x.send_global < y.send_global;
  });
  patch.arcs_local.reserve(keys.size());
  for (const Key& kk : keys) patch.arcs_local.push_back(kk.arc);
  return patch;
}

std::vector<Patch> build_patches(const Mesh& mesh, const AdjacencyCsr& adj,
                                 const std::vector<uint32_t>& assignment,
                                 const PartitionPlan& plan, int k) {
  std::vector<bool> non_empty(plan.num_subdomains(), false);
  for (uint32_t id : assignment) non_empty[id] = true;
  std::vector<Patch> patches;
  for (uint32_t s = 0; s < plan.num_subdomains(); ++s)
    if (non_empty[s]) patches.push_back(build_patch(mesh, adj, assignment, s, k));
  return patches;
}

std::vector<PatchSample> sample_patches(Rng& rng,
                                        const std::vector<uint32_t>& frames_per_sim,
                                        const std::vector<uint32_t>& patches_per_sim,
                                        size_t count) {
  if (frames_per_sim.size() != patches_per_sim.size())
    throw DataError("sample_patches: per-sim table size mismatch");
  uint64_t total = 0;
  std::vector<uint64_t> cumulative(frames_per_sim.size() + 1, 0);
  for (size_t s = 0; s < frames_per_sim.size(); ++s) {
    total += static_cast<uint64_t>(frames_per_sim[s]) * patches_per_sim[s];
    cumulative[s + 1] = total;
  }
  if (total == 0) throw DataError("sample_patches: no (frame, patch) pairs");
  std::vector<PatchSample> out;
  out.reserve(count);
  for (size_t i = 0; i < count; ++i) {
    const uint64_t pick = rng.next_below(total);
    size_t sim = 0;
    while (cumulative[sim + 1] <= pick) ++sim;
    const uint64_t within = pick - cumulative[sim];
    PatchSample s;
    s.sim = static_cast<uint32_t>(sim);
    s.frame = static_cast<uint32_t>(within / patches_per_sim[sim]);
    s.patch = static_cast<uint32_t>(within % patches_per_sim[sim]);
    out.push_back(s);
  }
  return out;
}

std::vector<PatchGrowthRow> measure_patch_growth(const Mesh& mesh,
                                                 const PartitionPlan& plan,
                                                 int k_min, int k_max) {
  if (k_min < 0 || k_max < k_min)
    throw DataError("measure_patch_growth: bad k range");
  const AdjacencyCsr adj = AdjacencyCsr::from_arcs(mesh.num_nodes(), mesh.arcs);
  const std::vector<uint32_t> assignment = assign_subdomains(mesh, plan);
  std::vector<std::vector<uint32_t>> subdomains(plan.num_subdomains());
  for (uint32_t v = 0; v < assignment.size(); ++v)
    subdomains[assignment[v]].push_back(v);
  std::vector<PatchGrowthRow> rows;
  for (int k = k_min; k <= k_max; ++k) {
    PatchGrowthRow row;
    row.k = k;
    uint64_t total = 0, nonempty = 0;
    for (const auto& sub : subdomains) {
      if (sub.empty()) continue;
      ++nonempty;
      const size_t size = sub.size() + khop_ghost(adj, sub, k).size();
      total += size;
      row.max_nodes = std::max<uint64_t>(row.max_nodes, size);
    }
    row.mean_nodes = static_cast<double>(total) / static_cast<double>(nonempty);
    rows.push_back(row);
  }
  return rows;
}

}  // namespace pmgn

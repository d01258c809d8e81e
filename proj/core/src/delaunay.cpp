#include "pmgn/delaunay.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <numeric>
#include <unordered_map>
#include <vector>

#include "pmgn/geom_predicates.hpp"

namespace pmgn {
namespace {

constexpr int32_t kInf = -1;
constexpr int32_t kNone = -2;

// Incremental Bowyer-Watson with an explicit infinite vertex: every hull
// facet is covered by one "infinite" cell, so outside-hull insertions use the
// same cavity machinery as interior ones.
template <int D>
class Triangulator {
public:
  Triangulator(const double* pts, size_t n) : pts_(pts), n_(n) {
    rank_ = geom::lex_ranks(pts, n, D);
  }

  void run() {
    std::vector<uint32_t> order(n_);
    std::iota(order.begin(), order.end(), 0u);
    std::sort(order.begin(), order.end(),
              [&](uint32_t a, uint32_t b) { return rank_[a] < rank_[b]; });
    std::array<int32_t, D + 1> seed{};
    std::vector<bool> used(n_, false);
    pick_initial_simplex(order, seed, used);
    build_initial_complex(seed);
    for (uint32_t idx : order)
      if (!used[idx]) insert(static_cast<int32_t>(idx));
  }

  // Finite cells with positive orientation, lexicographically sorted.
  std::vector<std::array<uint32_t, D + 1>> extract_cells() const {
    std::vector<std::array<uint32_t, D + 1>> out;
    for (const Cell& c : cells_) {
      if (!c.alive || is_infinite(c)) continue;
      std::array<int32_t, D + 1> ids = c.v;
      std::sort(ids.begin(), ids.end());
      if (orient_ids(ids) < 0) std::swap(ids[D - 1], ids[D]);
      std::array<uint32_t, D + 1> cell{};
      for (int i = 0; i <= D; ++i) cell[i] = static_cast<uint32_t>(ids[i]);
      out.push_back(cell);
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  std::vector<Arc> extract_arcs() const {
    std::vector<uint64_t> undirected;
    for (const Cell& c : cells_) {
      if (!c.alive || is_infinite(c)) continue;
      for (int i = 0; i <= D; ++i)
        for (int j = i + 1; j <= D; ++j) {
          uint32_t a = static_cast<uint32_t>(c.v[i]);
          uint32_t b = static_cast<uint32_t>(c.v[j]);
          if (a > b) std::swap(a, b);
          undirected.push_back((static_cast<uint64_t>(a) << 32) | b);
        }
    }
    std::sort(undirected.begin(), undirected.end());
    undirected.erase(std::unique(undirected.begin(), undirected.end()),
                     undirected.end());
    std::vector<Arc> arcs;
    arcs.reserve(undirected.size() * 2);
    for (uint64_t key : undirected) {
      const uint32_t a = static_cast<uint32_t>(key >> 32);
      const uint32_t b = static_cast<uint32_t>(key & 0xffffffffu);
      arcs.push_back({a, b});
      arcs.push_back({b, a});
    }
    return arcs;
  }

private:
  struct Cell {
    std::array<int32_t, D + 1> v;    // vertex ids; kInf marks the infinite one
    std::array<int32_t, D + 1> adj;  // neighbor across the facet opposite v[i]
    uint32_t stamp = 0;
    bool bad = false;
    bool alive = true;
  };

  static bool is_infinite(const Cell& c) {
    for (int i = 0; i <= D; ++i)
      if (c.v[i] == kInf) return true;
    return false;
  }

  const double* pt(int32_t id) const { return pts_ + static_cast<size_t>(id) * D; }

  int orient_ids(const std::array<int32_t, D + 1>& ids) const {
    if constexpr (D == 2)
      return geom::orient2d(pt(ids[0]), pt(ids[1]), pt(ids[2]));
    else
      return geom::orient3d(pt(ids[0]), pt(ids[1]), pt(ids[2]), pt(ids[3]));
  }

  // Facet orientation test used for walking and visibility: sign of
  // orient(facet..., x).
  int facet_side(const std::array<int32_t, D>& f, int32_t x) const {
    if constexpr (D == 2)
      return geom::orient2d(pt(f[0]), pt(f[1]), pt(x));
    else
      return geom::orient3d(pt(f[0]), pt(f[1]), pt(f[2]), pt(x));
  }

  std::array<int32_t, D> facet_of(const Cell& c, int opp) const {
    std::array<int32_t, D> f{};
    int k = 0;
    for (int i = 0; i <= D; ++i)
      if (i != opp) f[k++] = c.v[i];
    return f;
  }

  bool in_conflict(const Cell& c, int32_t p) {
    int inf_slot = -1;
    for (int i = 0; i <= D; ++i)
      if (c.v[i] == kInf) inf_slot = i;
    if (inf_slot < 0) {
      const int ori = orient_ids(c.v);
      int ins;
      if constexpr (D == 2)
        ins = geom::incircle_sos(pt(c.v[0]), pt(c.v[1]), pt(c.v[2]), pt(p),
                                 rank_[c.v[0]], rank_[c.v[1]], rank_[c.v[2]],
                                 rank_[p]);
      else
        ins = geom::insphere_sos(pt(c.v[0]), pt(c.v[1]), pt(c.v[2]), pt(c.v[3]),
                                 pt(p), rank_[c.v[0]], rank_[c.v[1]],
                                 rank_[c.v[2]], rank_[c.v[3]], rank_[p]);
      return ins * ori > 0;
    }
    // Infinite cell: conflict iff p is strictly outside the hull facet, or
    // exactly on its plane and inside the facet's own circumdisk.
    const std::array<int32_t, D> f = facet_of(c, inf_slot);
    const Cell& nb = cells_[c.adj[inf_slot]];
    int32_t apex = kNone;
    for (int i = 0; i <= D; ++i) {
      bool in_facet = false;
      for (int j = 0; j < D; ++j)
        if (nb.v[i] == f[j]) in_facet = true;
      if (!in_facet) apex = nb.v[i];
    }
    const int sp = facet_side(f, p);
    const int sa = facet_side(f, apex);
    if (sp * sa < 0) return true;   // strictly visible
    if (sp != 0) return false;      // strictly on the inner side
    if constexpr (D == 2) {
      return geom::diametral_side(pt(f[0]), pt(f[1]), pt(p), 2) < 0;
    } else {
      return geom::coplanar_incircle_sos(pt(f[0]), pt(f[1]), pt(f[2]), pt(p),
                                         rank_[f[0]], rank_[f[1]], rank_[f[2]],
                                         rank_[p]) > 0;
    }
  }

  void pick_initial_simplex(const std::vector<uint32_t>& order,
                            std::array<int32_t, D + 1>& seed,
                            std::vector<bool>& used) {
    if (n_ < D + 1)
      throw DegeneracyError("need at least " + std::to_string(D + 1) +
                            " points, got " + std::to_string(n_));
    seed[0] = static_cast<int32_t>(order[0]);
    size_t cursor = 1;
    // points are duplicate-free (lex_ranks checked), so order[1] differs
    seed[1] = static_cast<int32_t>(order[cursor++]);
    if constexpr (D == 2) {
      size_t i = cursor;
      for (; i < n_; ++i)
        if (geom::orient2d(pt(seed[0]), pt(seed[1]), pt(order[i])) != 0) break;
      if (i == n_) throw DegeneracyError("all points are collinear");
      seed[2] = static_cast<int32_t>(order[i]);
    } else {
      size_t i = cursor;
      for (; i < n_; ++i)
        if (!collinear3(seed[0], seed[1], static_cast<int32_t>(order[i]))) break;
      if (i == n_) throw DegeneracyError("all points are collinear");
      seed[2] = static_cast<int32_t>(order[i]);
      size_t j = cursor;
      for (; j < n_; ++j) {
        int32_t cand = static_cast<int32_t>(order[j]);
        if (cand == seed[2]) continue;
        if (geom::orient3d(pt(seed[0]), pt(seed[1]), pt(seed[2]), pt(cand)) != 0)
          break;
      }
      if (j == n_) throw DegeneracyError("all points are coplanar");
      seed[3] = static_cast<int32_t>(order[j]);
    }
    for (int i = 0; i <= D; ++i) used[seed[i]] = true;
  }

  bool collinear3(int32_t a, int32_t b, int32_t c) const {
    // cross(b-a, c-a) == 0, checked exactly via 2x2 minors in double
    // (differences of doubles may round, so confirm with the 3 coordinate
    // plane orientations).
    for (int i = 0; i < 3; ++i) {
      const int j = (i + 1) % 3;
      double pa[2] = {pt(a)[i], pt(a)[j]};
      double pb[2] = {pt(b)[i], pt(b)[j]};
      double pc[2] = {pt(c)[i], pt(c)[j]};
      if (geom::orient2d(pa, pb, pc) != 0) return false;
    }
    return true;
  }

  void build_initial_complex(const std::array<int32_t, D + 1>& seed) {
    // Cells = all (D+1)-subsets of {seed..., inf}: the boundary complex of a
    // (D+1)-simplex. Cell k omits element k of the extended vertex set.
    std::array<int32_t, D + 2> ext{};
    for (int i = 0; i <= D; ++i) ext[i] = seed[i];
    ext[D + 1] = kInf;
    for (int k = 0; k <= D + 1; ++k) {
      Cell c;
      int m = 0;
      for (int i = 0; i <= D + 1; ++i)
        if (i != k) c.v[m++] = ext[i];
      c.adj.fill(kNone);
      cells_.push_back(c);
    }
    // Adjacency: cell k's facet opposite vertex x leads to the cell omitting
    // x.
    for (int k = 0; k <= D + 1; ++k) {
      for (int l = 0; l <= D; ++l) {
        const int32_t x = cells_[k].v[l];
        for (int k2 = 0; k2 <= D + 1; ++k2) {
          if (k2 == k) continue;
          bool omits_x = true;
          for (int i = 0; i <= D; ++i)
            if (cells_[k2].v[i] == x) omits_x = false;
          if (omits_x) {
            cells_[k].adj[l] = k2;
            break;
          }
        }
      }
    }
    hint_ = 0;
    while (is_infinite(cells_[hint_])) ++hint_;
  }

  int32_t locate_conflict(int32_t p) {
    int32_t cur = hint_;
    size_t steps = 0;
    const size_t limit = cells_.size() * 4 + 64;
    while (steps++ < limit) {
      Cell& c = cells_[cur];
      if (is_infinite(c)) {
        if (in_conflict(c, p)) return cur;
        break;  // exited the hull without conflict; fall back to scanning
      }
      int32_t next = kNone;
      for (int i = 0; i <= D; ++i) {
        const std::array<int32_t, D> f = facet_of(c, i);
        const int sp = facet_side(f, p);
        if (sp == 0) continue;
        const int sv = facet_side(f, c.v[i]);
        if (sp * sv < 0) {
          next = c.adj[i];
          break;
        }
      }
      if (next == kNone) {
        // p is weakly inside this cell; in the perturbed world it conflicts
        // with this cell or a near neighbor.
        int32_t found = local_search(cur, p, 256);
        if (found != kNone) return found;
        break;
      }
      cur = next;
    }
    for (size_t i = 0; i < cells_.size(); ++i)
      if (cells_[i].alive && in_conflict(cells_[i], static_cast<int32_t>(p)))
        return static_cast<int32_t>(i);
    throw DegeneracyError("no conflicting cell found (duplicate point?)");
  }

  int32_t local_search(int32_t start, int32_t p, size_t budget) {
    ++stamp_;
    std::vector<int32_t> queue{start};
    cells_[start].stamp = stamp_;
    size_t qi = 0;
    while (qi < queue.size() && queue.size() <= budget) {
      const int32_t id = queue[qi++];
      if (in_conflict(cells_[id], p)) return id;
      for (int i = 0; i <= D; ++i) {
        const int32_t nb = cells_[id].adj[i];
        if (nb >= 0 && cells_[nb].alive && cells_[nb].stamp != stamp_) {
          cells_[nb].stamp = stamp_;
          queue.push_back(nb);
        }
      }
    }
    return kNone;
  }

  void insert(int32_t p) {
    const int32_t seed = locate_conflict(p);
    // Flood the conflict cavity.
    ++stamp_;
    std::vector<int32_t> bad{seed};
    cells_[seed].stamp = stamp_;
    cells_[seed].bad = true;
    for (size_t qi = 0; qi < bad.size(); ++qi) {
      const Cell& c = cells_[bad[qi]];
      for (int i = 0; i <= D; ++i) {
        const int32_t nb = c.adj[i];
        if (nb < 0 || cells_[nb].stamp == stamp_) continue;
        cells_[nb].stamp = stamp_;
        if (in_conflict(cells_[nb], p)) {
          cells_[nb].bad = true;
          bad.push_back(nb);
        }
      }
    }
    // Boundary facets -> new cells around p.
    std::map<std::array<int32_t, D>, std::pair<int32_t, int>> ridge_glue;
    std::vector<int32_t> created;
    for (const int32_t b : bad) {
      for (int i = 0; i <= D; ++i) {
        const int32_t nb = cells_[b].adj[i];
        if (nb >= 0 && cells_[nb].bad) continue;  // internal facet
        Cell nc;
        const std::array<int32_t, D> f = facet_of(cells_[b], i);
        for (int j = 0; j < D; ++j) nc.v[j] = f[j];
        nc.v[D] = p;
        nc.adj.fill(kNone);
        nc.adj[D] = nb;
        const int32_t nid = static_cast<int32_t>(cells_.size());
        cells_.push_back(nc);
        created.push_back(nid);
        if (nb >= 0) {
          // Repoint the good neighbor's facet from the dying cell to nid.
          for (int j = 0; j <= D; ++j)
            if (cells_[nb].adj[j] == b) cells_[nb].adj[j] = nid;
        }
        // Glue ridges (facets of the new cell that contain p).
        for (int j = 0; j < D; ++j) {
          std::array<int32_t, D> key{};
          int m = 0;
          for (int l = 0; l < D; ++l)
            if (l != j) key[m++] = f[l];
          key[m] = kNone;  // pad
          std::sort(key.begin(), key.begin() + (D - 1));
          auto it = ridge_glue.find(key);
          if (it == ridge_glue.end()) {
            ridge_glue.emplace(key, std::make_pair(nid, j));
          } else {
            cells_[nid].adj[j] = it->second.first;
            cells_[it->second.first].adj[it->second.second] = nid;
            ridge_glue.erase(it);
          }
        }
      }
    }
    for (const int32_t b : bad) {
      cells_[b].alive = false;
      cells_[b].bad = false;
    }
    for (const int32_t nid : created)
      if (!is_infinite(cells_[nid])) {
        hint_ = nid;
        break;
      }
  }

  const double* pts_;
  size_t n_;
  std::vector<uint32_t> rank_;
  std::vector<Cell> cells_;
  int32_t hint_ = 0;
  uint32_t stamp_ = 0;
};

}  // namespace

std::vector<Arc> build_edges_delaunay(const double* positions, size_t n, int dim) {
  if (dim == 2) {
    Triangulator<2> tri(positions, n);
    tri.run();
    return tri.extract_arcs();
  }
  if (dim == 3) {
    Triangulator<3> tri(positions, n);
    tri.run();
    return tri.extract_arcs();
  }
  throw DataError("build_edges_delaunay: dim must be 2 or 3");
}

std::vector<Arc> build_edges_delaunay(const std::vector<double>& positions,
                                      int dim) {
  return build_edges_delaunay(positions.data(), positions.size() / dim, dim);
}

std::vector<Arc> build_edges_delaunay(const std::vector<float>& positions,
                                      int dim) {
  std::vector<double> pts(positions.begin(), positions.end());
  return build_edges_delaunay(pts.data(), pts.size() / dim, dim);
}

DelaunayCells build_delaunay_cells(const double* positions, size_t n, int dim) {
  DelaunayCells out;
  if (dim == 2) {
    Triangulator<2> tri(positions, n);
    tri.run();
    out.arcs = tri.extract_arcs();
    out.triangles = tri.extract_cells();
  } else if (dim == 3) {
    Triangulator<3> tri(positions, n);
    tri.run();
    out.arcs = tri.extract_arcs();
    out.tetrahedra = tri.extract_cells();
  } else {
    throw DataError("build_delaunay_cells: dim must be 2 or 3");
  }
  return out;
}

}  // namespace pmgn

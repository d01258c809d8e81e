#pragma once

#include <array>
#include <vector>

#include "pmgn/mesh.hpp"

namespace pmgn {

// Delaunay triangulation edges (2D triangles / 3D tetrahedra) as directed
// arcs, deduplicated, both directions present, sorted by
// (min_id, max_id, direction). Exactly cocircular/cospherical inputs are
// tie-broken by symbolic perturbation ordered by lexicographic point rank,
// so the result is deterministic. Throws DegeneracyError for inputs that
// admit no triangulation (fewer than dim+1 points, duplicates, all points
// collinear/coplanar).
std::vector<Arc> build_edges_delaunay(const double* positions, size_t n, int dim);
std::vector<Arc> build_edges_delaunay(const std::vector<double>& positions, int dim);
std::vector<Arc> build_edges_delaunay(const std::vector<float>& positions, int dim);

// Full cell lists for callers that need faces as well as edges. Triangles
// are counter-clockwise; tetrahedra positively oriented; both sorted
// lexicographically by vertex ids.
struct DelaunayCells {
  std::vector<Arc> arcs;
  std::vector<std::array<uint32_t, 3>> triangles;   // 2D only
  std::vector<std::array<uint32_t, 4>> tetrahedra;  // 3D only
};
DelaunayCells build_delaunay_cells(const double* positions, size_t n, int dim);

}  // namespace pmgn

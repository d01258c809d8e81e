#include "pmgn/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

namespace pmgn {

const char* node_type_name(NodeType t) {
  switch (t) {
    case NodeType::kFluid: return "fluid";
    case NodeType::kLiquidInlet: return "liquid_inlet";
    case NodeType::kOutlet: return "outlet";
    case NodeType::kGasInlet: return "gas_inlet";
    case NodeType::kInletToOutletWall: return "inlet_to_outlet_wall";
    case NodeType::kSideWall: return "side_wall";
    case NodeType::kPacking: return "packing";
  }
  return "?";
}

NodeTypeInfo node_type_from_boundary(double boundary_index, int dim) {
  if (dim != 2 && dim != 3)
    throw DataError("node_type_from_boundary: dim must be 2 or 3, got " +
                    std::to_string(dim));
  if (is_fluid_sentinel(boundary_index))
    return {NodeType::kFluid, kNoContactAngle};
  const long b = std::lround(boundary_index);
  if (static_cast<double>(b) == boundary_index) {
    if (dim == 2) {
      switch (b) {
        case 34: return {NodeType::kLiquidInlet, kNoContactAngle};
        case 31: return {NodeType::kOutlet, kNoContactAngle};
        case 30: return {NodeType::kGasInlet, kNoContactAngle};
        case 29: return {NodeType::kInletToOutletWall, 180.0};
        case 28: return {NodeType::kSideWall, 33.5};
        case 27: return {NodeType::kPacking, 33.5};
        default: break;
      }
    } else {
      switch (b) {
        case 47: return {NodeType::kLiquidInlet, kNoContactAngle};
        case 46: return {NodeType::kOutlet, kNoContactAngle};
        case 45: return {NodeType::kGasInlet, kNoContactAngle};
        case 44: return {NodeType::kInletToOutletWall, 180.0};
        case 43: return {NodeType::kSideWall, 33.5};
        case 42: return {NodeType::kPacking, 33.5};
        default: break;
      }
    }
  }
  throw DataError("node_type_from_boundary: unmapped boundary index " +
                  std::to_string(boundary_index) + " for dim " +
                  std::to_string(dim));
}

void Mesh::derive_node_types() {
  const size_t n = boundary_index.size();
  node_type.resize(n);
  contact_angle.resize(n);
  for (size_t v = 0; v < n; ++v) {
    NodeTypeInfo info = node_type_from_boundary(boundary_index[v], dim);
    node_type[v] = info.type;
    contact_angle[v] = info.contact_angle;
  }
}

void Mesh::validate() const {
  const size_t n = num_nodes();
  if (dim != 2 && dim != 3) throw DataError("Mesh: dim must be 2 or 3");
  if (positions.size() != n * static_cast<size_t>(dim))
    throw DataError("Mesh: positions length mismatch");
  if (node_type.size() != n || contact_angle.size() != n)
    throw DataError("Mesh: node attribute length mismatch");
  for (float p : positions)
    if (!std::isfinite(p)) throw DataError("Mesh: non-finite position");
  std::unordered_set<uint64_t> seen;
  seen.reserve(arcs.size() * 2);
  for (const Arc& a : arcs) {
    if (a.sender == a.receiver) throw DataError("Mesh: self-loop arc");
    if (a.sender >= n || a.receiver >= n)
      throw DataError("Mesh: arc endpoint out of range");
    seen.insert((static_cast<uint64_t>(a.sender) << 32) | a.receiver);
  }
  if (seen.size() != arcs.size()) throw DataError("Mesh: duplicate arc");
  for (const Arc& a : arcs) {
    if (!seen.count((static_cast<uint64_t>(a.receiver) << 32) | a.sender))
      throw DataError("Mesh: missing reverse arc for " +
                      std::to_string(a.sender) + "->" +
                      std::to_string(a.receiver));
  }
}

void Trajectory::validate() const {
  mesh.validate();
  if (frames.size() < 2) throw DataError("Trajectory: needs at least 2 frames");
  if (!(h > 0.0)) throw DataError("Trajectory: timestep h must be positive");
  const size_t n = mesh.num_nodes();
  const size_t d = static_cast<size_t>(mesh.dim);
  for (const FieldFrame& f : frames) {
    if (f.momentum.size() != n * d || f.volume_fraction.size() != n)
      throw DataError("Trajectory: frame field length mismatch");
    if (!f.pressure.empty() && f.pressure.size() != n)
      throw DataError("Trajectory: pressure length mismatch");
    for (float a : f.volume_fraction)
      if (!(a >= 0.0f && a <= 1.0f))
        throw DataError("Trajectory: volume fraction outside [0,1]");
  }
}

template <class T>
void build_edge_features(const Mesh& mesh, std::vector<T>& out, size_t* rows_out) {
  const size_t d = static_cast<size_t>(mesh.dim);
  const size_t e = mesh.num_arcs();
  const size_t rows = d + 1;
  out.assign(rows * e, T(0));
  for (size_t a = 0; a < e; ++a) {
    const Arc& arc = mesh.arcs[a];
    double norm2 = 0.0;
    for (size_t i = 0; i < d; ++i) {
      const double delta =
          static_cast<double>(mesh.positions[arc.receiver * d + i]) -
          static_cast<double>(mesh.positions[arc.sender * d + i]);
      out[i * e + a] = static_cast<T>(delta);
      norm2 += delta * delta;
    }
    const double norm = std::sqrt(norm2);
    if (!(norm > 0.0))
      throw DataError("build_edge_features: zero-length edge " +
                      std::to_string(arc.sender) + "->" +
                      std::to_string(arc.receiver));
    out[d * e + a] = static_cast<T>(norm);
  }
  if (rows_out) *rows_out = rows;
}

template void build_edge_features<float>(const Mesh&, std::vector<float>&, size_t*);
template void build_edge_features<double>(const Mesh&, std::vector<double>&, size_t*);

}  // namespace pmgn

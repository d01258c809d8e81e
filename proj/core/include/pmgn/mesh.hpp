#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "pmgn/error.hpp"

namespace pmgn {

enum class NodeType : uint8_t {
  kFluid = 0,
  kLiquidInlet,
  kOutlet,
  kGasInlet,
  kInletToOutletWall,
  kSideWall,
  kPacking,
};
inline constexpr size_t kNumNodeTypes = 7;

const char* node_type_name(NodeType t);

// Liquid/gas densities used to convert velocity to momentum per unit volume.
inline constexpr double kLiquidDensity = 1010.0;
inline constexpr double kGasDensity = 1.18415;

// boundary_index value marking interior fluid nodes. Data sources print it
// with fewer digits than a full double, so matching is by magnitude.
inline constexpr double kFluidSentinel = 1.7976931348623157e308;
inline bool is_fluid_sentinel(double b) { return b >= 9e307; }

// Contact angle "not applicable" encoding (degrees are never negative).
inline constexpr double kNoContactAngle = -1.0;

// Boundary-index table lookup. Throws DataError on an unmapped index,
// reporting the offending value.
struct NodeTypeInfo {
  NodeType type;
  double contact_angle;  // kNoContactAngle when not applicable
};
NodeTypeInfo node_type_from_boundary(double boundary_index, int dim);

// momentum_i = [alpha*rho_L + (1-alpha)*rho_G] * u_i
template <size_t D>
std::array<double, D> momentum_from_velocity(const std::array<double, D>& u,
                                             double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw DataError("momentum_from_velocity: alpha outside [0,1]: " +
                    std::to_string(alpha));
  const double rho = alpha * kLiquidDensity + (1.0 - alpha) * kGasDensity;
  std::array<double, D> m{};
  for (size_t i = 0; i < D; ++i) m[i] = rho * u[i];
  return m;
}

// One directed arc. Undirected mesh edges are stored as both directions.
struct Arc {
  uint32_t sender;
  uint32_t receiver;
  friend bool operator==(const Arc&, const Arc&) = default;
};

// Static mesh geometry. Immutable once constructed; concurrent reads are
// safe.
struct Mesh {
  int dim = 2;
  // positions[v*dim + a], meters
  std::vector<float> positions;
  std::vector<double> boundary_index;
  std::vector<NodeType> node_type;
  std::vector<double> contact_angle;  // degrees, kNoContactAngle if absent
  // Canonical order: sorted by (min(s,r), max(s,r), s>r), i.e. the
  // low-to-high direction of each undirected edge first.
  std::vector<Arc> arcs;

  size_t num_nodes() const { return boundary_index.size(); }
  size_t num_arcs() const { return arcs.size(); }

  // Derives node_type/contact_angle from boundary_index via the table.
  void derive_node_types();
  // Checks the structural invariants (no self-loops, reverse arcs present,
  // finite positions). Throws DataError on violation.
  void validate() const;
};

// Per-frame dynamic fields. Lengths equal the node count.
struct FieldFrame {
  std::vector<float> momentum;         // [v*dim + a], kg m^-2 s^-1
  std::vector<float> volume_fraction;  // in [0,1]
  std::vector<float> pressure;         // optional; empty when absent
};

struct Trajectory {
  Mesh mesh;
  std::vector<FieldFrame> frames;
  double h = 0.0;  // seconds between frames
  int64_t sim_id = 0;
  double inlet_velocity = 0.0;  // split metadata

  void validate() const;
};

// Per-arc relative displacement (receiver minus sender) and its norm,
// channel-major: rows [dx, dy, (dz), norm], one column per arc.
// Computed in double from the stored float positions, then cast.
template <class T>
void build_edge_features(const Mesh& mesh, std::vector<T>& out,
                         size_t* rows_out);

}  // namespace pmgn

#pragma once

#include <string>

#include "pmgn/mesh.hpp"

namespace pmgn {

// Converts external CFD exports into a Trajectory.
//
// nodes CSV:  node_id,x,y[,z],boundary_index            (header required)
// fields CSV: frame,node_id,u_x,u_y[,u_z],volume_fraction[,pressure]
//
// Node ids must cover 0..n-1; frames must cover 0..F-1 with every node
// present in each frame. Velocities are converted to momentum per unit
// volume with the density-weighted formula; volume fractions are clamped to
// [0,1]; node types derive from the boundary index table; edges come from
// Delaunay triangulation of the stored float positions.
struct IngestOptions {
  int dim = 2;
  double h = 0.01;
  int64_t sim_id = 0;
  double inlet_velocity = 0.0;
};

Trajectory ingest_csv(const std::string& nodes_path,
                      const std::string& fields_path,
                      const IngestOptions& options);

}  // namespace pmgn

#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "pmgn/mesh.hpp"

namespace pmgn {

// Synthetic trajectory generator: a scalar volume-fraction field evolved by
// explicit upwind advection + graph diffusion on a random Delaunay mesh over
// the unit square. Advective edge flows are stream-function differences
// between the two triangles adjacent to each edge, so interior transport is
// exactly circulation-based; net divergence at hull nodes is removed by an
// explicit accounted drain. A sinusoidally modulated inlet occupies the left
// band, an outlet sink the right band. The momentum field is the static
// analytic velocity weighted by the density formula. Deterministic per seed.
struct SynthParams {
  size_t n_nodes = 2000;
  size_t n_frames = 50;
  int substeps = 10;         // internal explicit steps per saved frame
  double diffusion = 0.002;  // per-edge conductance
  double flow_scale = 1.0;   // scales the stream function; split metadata
  double outlet_rate = 0.5;
  double h = -1.0;           // saved-frame timestep; <= 0 chooses max stable
  double cfl_safety = 0.8;
  double inlet_cycles_per_frame = 0.04;
  double inlet_phase = 0.0;
};

// Static per-mesh state of the scheme; exposed so tests can replay single
// steps and do independent conservation bookkeeping.
struct SynthContext {
  Mesh mesh;
  SynthParams params;
  std::vector<double> velocity;                   // [v*2+a], curl of psi
  std::vector<uint8_t> is_inlet, is_outlet;
  std::vector<std::array<uint32_t, 2>> edges;     // undirected, i < j
  std::vector<double> edge_flow;                  // flow i -> j per edge
  std::vector<double> drain_rate;                 // per node, >= 0
  double dt = 0.0;  // substep size
  double h = 0.0;   // frame spacing = dt * substeps
};

struct StepBudget {
  double inlet_added = 0.0;
  double drained = 0.0;
};

// Throws DataError when an explicit h violates the CFL bound of the scheme.
SynthContext make_synth_context(uint64_t seed, const SynthParams& params);

// One explicit substep of size ctx.dt starting at absolute time t_abs.
// alpha is updated in place; budget (if given) accumulates boundary terms.
void synth_substep(const SynthContext& ctx, std::vector<double>& alpha,
                   double t_abs, StepBudget* budget);

double synth_inlet_value(const SynthContext& ctx, double t_abs);

Trajectory synth_trajectory(uint64_t seed, const SynthParams& params);
Trajectory synth_trajectory(uint64_t seed, size_t n_nodes, size_t n_frames);

// Random Delaunay mesh without fields (2D unit square or 3D unit cube).
Mesh make_random_mesh(uint64_t seed, size_t n_nodes, int dim);

// n_sims trajectories with inlet velocities spread over [0.6, 1.4] and
// per-sim meshes; sim_id = index.
std::vector<Trajectory> make_synth_dataset(uint64_t seed, size_t n_sims,
                                           size_t n_nodes, size_t n_frames);

// Validation picks: the 4 slowest, 4 fastest and 4 middle inlet velocities
// (or proportionally fewer for small sets). Returns sorted sim indices.
std::vector<size_t> validation_split(const std::vector<Trajectory>& dataset,
                                     size_t per_group = 4);

}  // namespace pmgn

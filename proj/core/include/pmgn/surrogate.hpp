#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pmgn/matrix.hpp"
#include "pmgn/mesh.hpp"
#include "pmgn/normalizer.hpp"
#include "pmgn/partition.hpp"
#include "pmgn/rng.hpp"

namespace pmgn {

enum class Precision : uint8_t { kF32 = 0, kF64 = 1 };

// Encoder-processor-decoder message-passing network. MLPs have
// mlp_hidden_layers hidden layers of latent_dim width and ReLU activations;
// encoder and processor MLP outputs are layer-normalized, the decoder's is
// not; processor node/edge latents use residual updates.
struct SurrogateConfig {
  int dim = 2;
  int mp_steps = 15;
  int latent_dim = 128;  // 150 for 3D data
  int mlp_hidden_layers = 2;
  bool include_pressure = false;
  Precision precision = Precision::kF32;

  // dynamic state channels fed back by integrators
  int state_channels() const { return dim + 1 + (include_pressure ? 1 : 0); }
  // state + contact angle + node-type one-hot
  int node_in() const { return state_channels() + 1 + int(kNumNodeTypes); }
  int edge_in() const { return dim + 1; }
  int out_channels() const { return state_channels(); }

  void validate() const;
};

struct LinearSpec {
  size_t w = 0, b = 0;
  int in = 0, out = 0;
};
struct MlpSpec {
  std::vector<LinearSpec> layers;
  size_t ln_gamma = 0, ln_beta = 0;
  bool has_ln = false;
};
struct ParamLayout {
  MlpSpec node_encoder, edge_encoder, decoder;
  std::vector<MlpSpec> edge_processor, node_processor;
  size_t total = 0;
};
ParamLayout build_layout(const SurrogateConfig& config);

// Full model: config, flat weights, normalizer statistics.
template <class T>
struct Surrogate {
  SurrogateConfig config;
  ParamLayout layout;
  std::vector<T> params;
  NormalizerSet norm;
};

// Uniform fan-in-scaled init, deterministic per seed. The decoder's last
// layer gets an extra 0.01 gain so an untrained model predicts near-zero
// normalized deltas (initial loss = target variance).
template <class T>
Surrogate<T> init_surrogate(uint64_t seed, const SurrogateConfig& config);

// Per-graph precompute: arc endpoints in processing order (receiver-major,
// ascending GLOBAL sender within each receiver, which makes per-node
// aggregation order identical between a patch and the full graph), edge
// features, and the static node-feature rows (contact angle, one-hot).
template <class T>
struct GraphCtx {
  size_t n_nodes = 0, n_arcs = 0;
  std::vector<uint32_t> send, recv;
  FeatureMatrix<T> edge_features;  // [edge_in][E]
  FeatureMatrix<T> static_node;    // [1 + kNumNodeTypes][N]
};

template <class T>
GraphCtx<T> build_graph_ctx(const Mesh& mesh);
template <class T>
GraphCtx<T> build_graph_ctx(const Mesh& mesh, const Patch& patch);
// Explicit arc sequence (testing hook for equivariance checks).
template <class T>
GraphCtx<T> build_graph_ctx(const Mesh& mesh, const std::vector<Arc>& arc_order);

// Saved intermediate activations for one network evaluation.
template <class T>
struct MlpTape {
  FeatureMatrix<T> input;
  std::vector<FeatureMatrix<T>> pre;   // pre-activation per layer
  std::vector<FeatureMatrix<T>> post;  // post-ReLU per hidden layer
  FeatureMatrix<T> ln_in;
  std::vector<T> ln_mean, ln_invstd;
};

template <class T>
struct EvalTape {
  FeatureMatrix<T> node_in_norm, edge_in_norm;
  MlpTape<T> node_enc, edge_enc;
  struct StepTape {
    FeatureMatrix<T> edge_cat, node_cat, agg;
    FeatureMatrix<T> h_in, e_in;  // latents entering the step (residual base)
    MlpTape<T> edge_mlp, node_mlp;
  };
  std::vector<StepTape> steps;
  MlpTape<T> decoder;
};

// Evaluates the network on raw state fields [state_channels][N]:
// normalizes inputs with the stored statistics, runs the message passing,
// and returns the denormalized scaled-derivative prediction (same shape as
// state). Keeps activations in tape when given. Throws DataError on
// non-finite inputs.
template <class T>
void net_forward(const Surrogate<T>& model, const GraphCtx<T>& g,
                 const FeatureMatrix<T>& state, FeatureMatrix<T>& delta_raw,
                 EvalTape<T>* tape);

// Reverse mode for net_forward: upstream gradient w.r.t. the raw delta.
// Parameter gradients are accumulated into grads (layout-sized); if dstate
// is non-null the gradient w.r.t. the raw state fields is added into it.
template <class T>
void net_backward(const Surrogate<T>& model, const GraphCtx<T>& g,
                  const EvalTape<T>& tape, const FeatureMatrix<T>& ddelta_raw,
                  std::vector<T>& grads, FeatureMatrix<T>* dstate);

// Raw state fields of one frame, channel-major [state_channels][N].
template <class T>
FeatureMatrix<T> frame_state(const Trajectory& traj, size_t frame,
                             bool include_pressure);
// Gather patch-local columns from a full-domain state.
template <class T>
FeatureMatrix<T> gather_state(const FeatureMatrix<T>& full, const Patch& patch);

const char* precision_name(Precision p);

}  // namespace pmgn

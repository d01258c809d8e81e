#include "pmgn/surrogate.hpp"

#include <algorithm>
#include <cmath>

namespace pmgn {

void SurrogateConfig::validate() const {
  if (dim != 2 && dim != 3) throw DataError("SurrogateConfig: dim must be 2 or 3");
  if (mp_steps < 0) throw DataError("SurrogateConfig: mp_steps must be >= 0");
  if (latent_dim < 1) throw DataError("SurrogateConfig: latent_dim must be >= 1");
  if (mlp_hidden_layers < 1)
    throw DataError("SurrogateConfig: mlp_hidden_layers must be >= 1");
}

const char* precision_name(Precision p) {
  return p == Precision::kF32 ? "f32" : "f64";
}

namespace {

MlpSpec make_mlp(size_t& offset, int in, int latent, int out, int hidden,
                 bool with_ln) {
  MlpSpec spec;
  int cur = in;
  for (int l = 0; l < hidden; ++l) {
    LinearSpec lin{offset, 0, cur, latent};
    offset += size_t(latent) * cur;
    lin.b = offset;
    offset += latent;
    spec.layers.push_back(lin);
    cur = latent;
  }
  LinearSpec last{offset, 0, cur, out};
  offset += size_t(out) * cur;
  last.b = offset;
  offset += out;
  spec.layers.push_back(last);
  spec.has_ln = with_ln;
  if (with_ln) {
    spec.ln_gamma = offset;
    offset += out;
    spec.ln_beta = offset;
    offset += out;
  }
  return spec;
}

}  // namespace

ParamLayout build_layout(const SurrogateConfig& c) {
  c.validate();
  ParamLayout lay;
  size_t off = 0;
  const int L = c.latent_dim, H = c.mlp_hidden_layers;
  lay.node_encoder = make_mlp(off, c.node_in(), L, L, H, true);
  lay.edge_encoder = make_mlp(off, c.edge_in(), L, L, H, true);
  lay.edge_processor.reserve(c.mp_steps);
  lay.node_processor.reserve(c.mp_steps);
  for (int t = 0; t < c.mp_steps; ++t) {
    lay.edge_processor.push_back(make_mlp(off, 3 * L, L, L, H, true));
    lay.node_processor.push_back(make_mlp(off, 2 * L, L, L, H, true));
  }
  lay.decoder = make_mlp(off, L, L, c.out_channels(), H, false);
  lay.total = off;
  return lay;
}

template <class T>
Surrogate<T> init_surrogate(uint64_t seed, const SurrogateConfig& config) {
  Surrogate<T> s;
  s.config = config;
  s.layout = build_layout(config);
  s.params.assign(s.layout.total, T(0));
  s.norm.node_in = RunningStats(config.node_in());
  s.norm.edge_in = RunningStats(config.edge_in());
  s.norm.target = RunningStats(config.out_channels());
  Rng rng(seed);
  auto fill_mlp = [&](const MlpSpec& spec, double out_gain) {
    for (size_t l = 0; l < spec.layers.size(); ++l) {
      const LinearSpec& lin = spec.layers[l];
      const double gain = (l + 1 == spec.layers.size()) ? out_gain : 1.0;
      const double a = gain * std::sqrt(1.0 / lin.in);
      for (int i = 0; i < lin.out * lin.in; ++i)
        s.params[lin.w + i] = static_cast<T>(rng.uniform(-a, a));
      for (int i = 0; i < lin.out; ++i) s.params[lin.b + i] = T(0);
    }
    if (spec.has_ln)
      for (int i = 0; i < spec.layers.back().out; ++i) {
        s.params[spec.ln_gamma + i] = T(1);
        s.params[spec.ln_beta + i] = T(0);
      }
  };
  fill_mlp(s.layout.node_encoder, 1.0);
  fill_mlp(s.layout.edge_encoder, 1.0);
  for (int t = 0; t < config.mp_steps; ++t) {
    fill_mlp(s.layout.edge_processor[t], 1.0);
    fill_mlp(s.layout.node_processor[t], 1.0);
  }
  fill_mlp(s.layout.decoder, 0.01);
  return s;
}

template Surrogate<float> init_surrogate<float>(uint64_t, const SurrogateConfig&);
template Surrogate<double> init_surrogate<double>(uint64_t, const SurrogateConfig&);

namespace {

template <class T>
void fill_static_rows(const Mesh& mesh, const std::vector<uint32_t>& nodes,
                      FeatureMatrix<T>& rows) {
  const size_t n = nodes.empty() ? mesh.num_nodes() : nodes.size();
  rows = FeatureMatrix<T>(1 + kNumNodeTypes, n);
  for (size_t i = 0; i < n; ++i) {
    const uint32_t v = nodes.empty() ? static_cast<uint32_t>(i) : nodes[i];
    rows.at(0, i) = static_cast<T>(mesh.contact_angle[v]);
    rows.at(1 + static_cast<size_t>(mesh.node_type[v]), i) = T(1);
  }
}

template <class T>
void fill_edge_features(const Mesh& mesh, const std::vector<uint32_t>& send_g,
                        const std::vector<uint32_t>& recv_g,
                        FeatureMatrix<T>& feats) {
  const size_t d = static_cast<size_t>(mesh.dim);
  const size_t e = send_g.size();
  feats = FeatureMatrix<T>(d + 1, e);
  for (size_t a = 0; a < e; ++a) {
    double norm2 = 0.0;
    for (size_t i = 0; i < d; ++i) {
      const double delta =
          static_cast<double>(mesh.positions[recv_g[a] * d + i]) -
          static_cast<double>(mesh.positions[send_g[a] * d + i]);
      feats.at(i, a) = static_cast<T>(delta);
      norm2 += delta * delta;
    }
    const double norm = std::sqrt(norm2);
    if (!(norm > 0.0))
      throw DataError("graph ctx: zero-length edge");
    feats.at(d, a) = static_cast<T>(norm);
  }
}

}  // namespace

template <class T>
GraphCtx<T> build_graph_ctx(const Mesh& mesh, const std::vector<Arc>& arc_order) {
  GraphCtx<T> g;
  g.n_nodes = mesh.num_nodes();
  g.n_arcs = arc_order.size();
  g.send.reserve(g.n_arcs);
  g.recv.reserve(g.n_arcs);
  for (const Arc& a : arc_order) {
    g.send.push_back(a.sender);
    g.recv.push_back(a.receiver);
  }
  fill_edge_features(mesh, g.send, g.recv, g.edge_features);
  fill_static_rows(mesh, {}, g.static_node);
  return g;
}

template <class T>
GraphCtx<T> build_graph_ctx(const Mesh& mesh) {
  // Processing order: receiver-major, ascending sender.
  std::vector<Arc> order = mesh.arcs;
  std::sort(order.begin(), order.end(), [](const Arc& x, const Arc& y) {
    if (x.receiver != y.receiver) return x.receiver < y.receiver;
    return x.sender < y.sender;
  });
  return build_graph_ctx<T>(mesh, order);
}

template <class T>
GraphCtx<T> build_graph_ctx(const Mesh& mesh, const Patch& patch) {
  GraphCtx<T> g;
  g.n_nodes = patch.num_local();
  g.n_arcs = patch.arcs_local.size();
  g.send.reserve(g.n_arcs);
  g.recv.reserve(g.n_arcs);
  std::vector<uint32_t> send_g, recv_g;
  send_g.reserve(g.n_arcs);
  recv_g.reserve(g.n_arcs);
  for (const Arc& a : patch.arcs_local) {
    g.send.push_back(a.sender);
    g.recv.push_back(a.receiver);
    send_g.push_back(patch.local_to_global[a.sender]);
    recv_g.push_back(patch.local_to_global[a.receiver]);
  }
  fill_edge_features(mesh, send_g, recv_g, g.edge_features);
  fill_static_rows(mesh, patch.local_to_global, g.static_node);
  return g;
}

#define PMGN_INSTANTIATE_CTX(T)                                              \
  template GraphCtx<T> build_graph_ctx<T>(const Mesh&);                      \
  template GraphCtx<T> build_graph_ctx<T>(const Mesh&, const Patch&);        \
  template GraphCtx<T> build_graph_ctx<T>(const Mesh&, const std::vector<Arc>&);
PMGN_INSTANTIATE_CTX(float)
PMGN_INSTANTIATE_CTX(double)
#undef PMGN_INSTANTIATE_CTX

namespace {

constexpr double kLnEps = 1e-5;

template <class T>
void mlp_forward(const MlpSpec& spec, const T* params, const FeatureMatrix<T>& x,
                 FeatureMatrix<T>& out, MlpTape<T>* tape) {
  const size_t n = x.cols();
  const size_t nl = spec.layers.size();
  FeatureMatrix<T> cur = x;
  if (tape) {
    tape->input = x;
    tape->pre.resize(nl);
    tape->post.resize(nl - 1);
  }
  for (size_t l = 0; l < nl; ++l) {
    const LinearSpec& lin = spec.layers[l];
    FeatureMatrix<T> z(lin.out, n);
    kernels::linear_forward(params + lin.w, params + lin.b, lin.out, lin.in,
                            cur, z);
    if (l + 1 < nl) {
      FeatureMatrix<T> a(lin.out, n);
      kernels::relu_forward(z, a);
      if (tape) {
        tape->pre[l] = std::move(z);
        tape->post[l] = a;
      }
      cur = std::move(a);
    } else {
      if (tape) tape->pre[l] = z;
      cur = std::move(z);
    }
  }
  if (spec.has_ln) {
    const int width = spec.layers.back().out;
    out = FeatureMatrix<T>(width, n);
    std::vector<T> mean, invstd;
    kernels::layernorm_forward(params + spec.ln_gamma, params + spec.ln_beta,
                               cur, out, mean, invstd, static_cast<T>(kLnEps));
    if (tape) {
      tape->ln_in = std::move(cur);
      tape->ln_mean = std::move(mean);
      tape->ln_invstd = std::move(invstd);
    }
  } else {
    out = std::move(cur);
  }
}

template <class T>
FeatureMatrix<T> mlp_backward(const MlpSpec& spec, const T* params,
                              const MlpTape<T>& tape, const FeatureMatrix<T>& dout,
                              T* grads) {
  const size_t nl = spec.layers.size();
  FeatureMatrix<T> dcur;
  if (spec.has_ln) {
    const int width = spec.layers.back().out;
    dcur = FeatureMatrix<T>(width, tape.ln_in.cols());
    kernels::layernorm_backward(params + spec.ln_gamma, tape.ln_in, tape.ln_mean,
                                tape.ln_invstd, dout, dcur,
                                grads + spec.ln_gamma, grads + spec.ln_beta);
  } else {
    dcur = dout;
  }
  for (size_t l = nl; l-- > 0;) {
    const LinearSpec& lin = spec.layers[l];
    if (l + 1 < nl) {
      // dcur is gradient after ReLU of layer l; fold through the ReLU.
      FeatureMatrix<T> dz(lin.out, dcur.cols());
      kernels::relu_backward(tape.pre[l], dcur, dz);
      dcur = std::move(dz);
    }
    const FeatureMatrix<T>& input = l == 0 ? tape.input : tape.post[l - 1];
    kernels::linear_backward_params(input, dcur, grads + lin.w, grads + lin.b);
    FeatureMatrix<T> dx(lin.in, dcur.cols());
    kernels::linear_backward_input(params + lin.w, lin.out, lin.in, dcur, dx);
    dcur = std::move(dx);
  }
  return dcur;
}

template <class T>
void check_finite(const FeatureMatrix<T>& m, const char* what) {
  for (const T& v : m.data())
    if (!std::isfinite(static_cast<double>(v)))
      throw DataError(std::string("net_forward: non-finite value in ") + what);
}

// rows of dst starting at row0 <- src rows
template <class T>
void copy_rows(const FeatureMatrix<T>& src, FeatureMatrix<T>& dst, size_t row0) {
  for (size_t r = 0; r < src.rows(); ++r) {
    const T* s = src.row(r);
    T* d = dst.row(row0 + r);
    std::copy(s, s + src.cols(), d);
  }
}

}  // namespace

template <class T>
void net_forward(const Surrogate<T>& model, const GraphCtx<T>& g,
                 const FeatureMatrix<T>& state, FeatureMatrix<T>& delta_raw,
                 EvalTape<T>* tape) {
  const SurrogateConfig& c = model.config;
  const size_t n = g.n_nodes, e = g.n_arcs;
  const size_t cs = c.state_channels();
  if (state.rows() != cs || state.cols() != n)
    throw DataError("net_forward: state shape mismatch");
  check_finite(state, "state");

  // Assemble + normalize node inputs: [state; contact angle; one-hot].
  FeatureMatrix<T> node_x(c.node_in(), n);
  copy_rows(state, node_x, 0);
  copy_rows(g.static_node, node_x, cs);
  for (int r = 0; r < c.node_in(); ++r) {
    const T shift = static_cast<T>(model.norm.node_in.mean(r));
    const T scale = static_cast<T>(1.0 / model.norm.node_in.stddev(r));
    T* row = node_x.row(r);
    for (size_t i = 0; i < n; ++i) row[i] = (row[i] - shift) * scale;
  }
  FeatureMatrix<T> edge_x(c.edge_in(), e);
  for (int r = 0; r < c.edge_in(); ++r) {
    const T shift = static_cast<T>(model.norm.edge_in.mean(r));
    const T scale = static_cast<T>(1.0 / model.norm.edge_in.stddev(r));
    const T* src = g.edge_features.row(r);
    T* row = edge_x.row(r);
    for (size_t i = 0; i < e; ++i) row[i] = (src[i] - shift) * scale;
  }

  EvalTape<T> local_tape;
  EvalTape<T>& tp = tape ? *tape : local_tape;
  tp.steps.clear();
  tp.node_in_norm = node_x;
  tp.edge_in_norm = edge_x;

  const T* p = model.params.data();
  FeatureMatrix<T> h, ee;
  mlp_forward(model.layout.node_encoder, p, node_x, h, tape ? &tp.node_enc : nullptr);
  mlp_forward(model.layout.edge_encoder, p, edge_x, ee, tape ? &tp.edge_enc : nullptr);

  const int L = c.latent_dim;
  tp.steps.resize(tape ? c.mp_steps : 0);
  for (int t = 0; t < c.mp_steps; ++t) {
    typename EvalTape<T>::StepTape* st = tape ? &tp.steps[t] : nullptr;
    if (st) {
      st->h_in = h;
      st->e_in = ee;
    }
    // edge update from [e, h_send, h_recv]
    FeatureMatrix<T> ecat(3 * L, e);
    copy_rows(ee, ecat, 0);
    for (int k = 0; k < L; ++k) {
      const T* hk = h.row(k);
      T* rs = ecat.row(L + k);
      T* rr = ecat.row(2 * L + k);
      for (size_t a = 0; a < e; ++a) {
        rs[a] = hk[g.send[a]];
        rr[a] = hk[g.recv[a]];
      }
    }
    FeatureMatrix<T> eu;
    mlp_forward(model.layout.edge_processor[t], p, ecat, eu,
                st ? &st->edge_mlp : nullptr);
    if (st) st->edge_cat = std::move(ecat);
    for (size_t i = 0; i < ee.data().size(); ++i) ee.data()[i] += eu.data()[i];

    // node update from [h, sum of incident updated edges]
    FeatureMatrix<T> agg(L, n);
    for (int k = 0; k < L; ++k) {
      const T* ek = ee.row(k);
      T* ak = agg.row(k);
      for (size_t a = 0; a < e; ++a) ak[g.recv[a]] += ek[a];
    }
    FeatureMatrix<T> ncat(2 * L, n);
    copy_rows(h, ncat, 0);
    copy_rows(agg, ncat, L);
    if (st) st->agg = std::move(agg);
    FeatureMatrix<T> hu;
    mlp_forward(model.layout.node_processor[t], p, ncat, hu,
                st ? &st->node_mlp : nullptr);
    if (st) st->node_cat = std::move(ncat);
    for (size_t i = 0; i < h.data().size(); ++i) h.data()[i] += hu.data()[i];
  }

  FeatureMatrix<T> out;
  mlp_forward(model.layout.decoder, p, h, out, tape ? &tp.decoder : nullptr);

  delta_raw = FeatureMatrix<T>(c.out_channels(), n);
  for (int r = 0; r < c.out_channels(); ++r) {
    const T mu = static_cast<T>(model.norm.target.mean(r));
    const T sigma = static_cast<T>(model.norm.target.stddev(r));
    const T* src = out.row(r);
    T* dst = delta_raw.row(r);
    for (size_t i = 0; i < n; ++i) dst[i] = std::fma(src[i], sigma, mu);
  }
}

template <class T>
void net_backward(const Surrogate<T>& model, const GraphCtx<T>& g,
                  const EvalTape<T>& tape, const FeatureMatrix<T>& ddelta_raw,
                  std::vector<T>& grads, FeatureMatrix<T>* dstate) {
  const SurrogateConfig& c = model.config;
  const size_t n = g.n_nodes, e = g.n_arcs;
  const int L = c.latent_dim;
  if (grads.size() != model.layout.total)
    throw DataError("net_backward: gradient buffer size mismatch");
  const T* p = model.params.data();
  T* gp = grads.data();

  FeatureMatrix<T> dout(c.out_channels(), n);
  for (int r = 0; r < c.out_channels(); ++r) {
    const T sigma = static_cast<T>(model.norm.target.stddev(r));
    const T* src = ddelta_raw.row(r);
    T* dst = dout.row(r);
    for (size_t i = 0; i < n; ++i) dst[i] = src[i] * sigma;
  }

  FeatureMatrix<T> dh = mlp_backward(model.layout.decoder, p, tape.decoder,
                                     dout, gp);
  FeatureMatrix<T> de(L, e);
  for (int t = c.mp_steps; t-- > 0;) {
    const auto& st = tape.steps[t];
    // node update backward
    FeatureMatrix<T> dncat = mlp_backward(model.layout.node_processor[t], p,
                                          st.node_mlp, dh, gp);
    // dh stays (residual); add the [h] rows of the cat input
    for (int k = 0; k < L; ++k) {
      const T* src = dncat.row(k);
      T* dst = dh.row(k);
      for (size_t i = 0; i < n; ++i) dst[i] += src[i];
    }
    // aggregation backward: per-arc gradient gathered from receiver
    for (int k = 0; k < L; ++k) {
      const T* dagg = dncat.row(L + k);
      T* dek = de.row(k);
      for (size_t a = 0; a < e; ++a) dek[a] += dagg[g.recv[a]];
    }
    // edge update backward
    FeatureMatrix<T> decat = mlp_backward(model.layout.edge_processor[t], p,
                                          st.edge_mlp, de, gp);
    for (int k = 0; k < L; ++k) {
      const T* src = decat.row(k);
      T* dst = de.row(k);
      for (size_t i = 0; i < e; ++i) dst[i] += src[i];
    }
    for (int k = 0; k < L; ++k) {
      const T* ds = decat.row(L + k);
      const T* dr = decat.row(2 * L + k);
      T* dst = dh.row(k);
      for (size_t a = 0; a < e; ++a) {
        dst[g.send[a]] += ds[a];
        dst[g.recv[a]] += dr[a];
      }
    }
  }

  FeatureMatrix<T> dnode_x = mlp_backward(model.layout.node_encoder, p,
                                          tape.node_enc, dh, gp);
  FeatureMatrix<T> dedge_x = mlp_backward(model.layout.edge_encoder, p,
                                          tape.edge_enc, de, gp);
  (void)dedge_x;  // edge features are static; no consumer
  if (dstate) {
    const size_t cs = c.state_channels();
    for (size_t r = 0; r < cs; ++r) {
      const T scale = static_cast<T>(1.0 / model.norm.node_in.stddev(r));
      const T* src = dnode_x.row(r);
      T* dst = dstate->row(r);
      for (size_t i = 0; i < n; ++i) dst[i] += src[i] * scale;
    }
  }
}

template <class T>
FeatureMatrix<T> frame_state(const Trajectory& traj, size_t frame,
                             bool include_pressure) {
  const size_t n = traj.mesh.num_nodes();
  const size_t d = static_cast<size_t>(traj.mesh.dim);
  const FieldFrame& fr = traj.frames.at(frame);
  const size_t cs = d + 1 + (include_pressure ? 1 : 0);
  FeatureMatrix<T> state(cs, n);
  for (size_t a = 0; a < d; ++a) {
    T* row = state.row(a);
    for (size_t v = 0; v < n; ++v)
      row[v] = static_cast<T>(fr.momentum[v * d + a]);
  }
  T* vf = state.row(d);
  for (size_t v = 0; v < n; ++v)
    vf[v] = static_cast<T>(fr.volume_fraction[v]);
  if (include_pressure) {
    if (fr.pressure.empty())
      throw DataError("frame_state: pressure requested but absent");
    T* pr = state.row(d + 1);
    for (size_t v = 0; v < n; ++v) pr[v] = static_cast<T>(fr.pressure[v]);
  }
  return state;
}

template <class T>
FeatureMatrix<T> gather_state(const FeatureMatrix<T>& full, const Patch& patch) {
  FeatureMatrix<T> local(full.rows(), patch.num_local());
  for (size_t r = 0; r < full.rows(); ++r) {
    const T* src = full.row(r);
    T* dst = local.row(r);
    for (size_t l = 0; l < patch.num_local(); ++l)
      dst[l] = src[patch.local_to_global[l]];
  }
  return local;
}

#define PMGN_INSTANTIATE(T)                                                   \
  template void net_forward<T>(const Surrogate<T>&, const GraphCtx<T>&,       \
                               const FeatureMatrix<T>&, FeatureMatrix<T>&,    \
                               EvalTape<T>*);                                 \
  template void net_backward<T>(const Surrogate<T>&, const GraphCtx<T>&,     \
                                const EvalTape<T>&, const FeatureMatrix<T>&, \
                                std::vector<T>&, FeatureMatrix<T>*);         \
  template FeatureMatrix<T> frame_state<T>(const Trajectory&, size_t, bool); \
  template FeatureMatrix<T> gather_state<T>(const FeatureMatrix<T>&,         \
                                            const Patch&);
PMGN_INSTANTIATE(float)
PMGN_INSTANTIATE(double)
#undef PMGN_INSTANTIATE

}  // namespace pmgn

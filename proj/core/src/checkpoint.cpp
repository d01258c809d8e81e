#include "pmgn/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <memory>

#include "pmgn/trajectory_io.hpp"

namespace pmgn {
namespace {

constexpr char kMagic[8] = {'M', 'G', 'C', 'K', 'P', 'T', '0', '1'};

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void put(std::FILE* f, const void* p, size_t bytes) {
  if (std::fwrite(p, 1, bytes, f) != bytes)
    throw DataError("checkpoint write failed");
}
void take(std::FILE* f, void* p, size_t bytes) {
  if (std::fread(p, 1, bytes, f) != bytes)
    throw TruncationError("checkpoint truncated");
}

template <class V>
void put_pod(std::FILE* f, const V& v) {
  put(f, &v, sizeof(V));
}
template <class V>
V take_pod(std::FILE* f) {
  V v;
  take(f, &v, sizeof(V));
  return v;
}

template <class V>
void put_vec(std::FILE* f, const std::vector<V>& v) {
  put_pod<uint64_t>(f, v.size());
  put(f, v.data(), v.size() * sizeof(V));
}
template <class V>
std::vector<V> take_vec(std::FILE* f) {
  const uint64_t n = take_pod<uint64_t>(f);
  std::vector<V> v(n);
  take(f, v.data(), n * sizeof(V));
  return v;
}

void put_stats(std::FILE* f, const RunningStats& s) {
  put_vec(f, s.raw_mean());
  put_vec(f, s.raw_m2());
  put_pod<double>(f, s.count());
  put_pod<uint8_t>(f, s.frozen() ? 1 : 0);
}
RunningStats take_stats(std::FILE* f) {
  RunningStats s;
  auto mean = take_vec<double>(f);
  auto m2 = take_vec<double>(f);
  const double count = take_pod<double>(f);
  const bool frozen = take_pod<uint8_t>(f) != 0;
  s.restore(std::move(mean), std::move(m2), count, frozen);
  return s;
}

void put_rng(std::FILE* f, const Rng& rng) {
  const auto st = rng.state();
  put(f, st.data(), sizeof(st));
}
Rng take_rng(std::FILE* f) {
  std::array<uint64_t, 4> st;
  take(f, st.data(), sizeof(st));
  Rng r;
  r.set_state(st);
  return r;
}

void put_config(std::FILE* f, const SurrogateConfig& c) {
  put_pod<int32_t>(f, c.dim);
  put_pod<int32_t>(f, c.mp_steps);
  put_pod<int32_t>(f, c.latent_dim);
  put_pod<int32_t>(f, c.mlp_hidden_layers);
  put_pod<uint8_t>(f, c.include_pressure ? 1 : 0);
  put_pod<uint8_t>(f, static_cast<uint8_t>(c.precision));
}
SurrogateConfig take_config(std::FILE* f) {
  SurrogateConfig c;
  c.dim = take_pod<int32_t>(f);
  c.mp_steps = take_pod<int32_t>(f);
  c.latent_dim = take_pod<int32_t>(f);
  c.mlp_hidden_layers = take_pod<int32_t>(f);
  c.include_pressure = take_pod<uint8_t>(f) != 0;
  c.precision = static_cast<Precision>(take_pod<uint8_t>(f));
  return c;
}

}  // namespace

template <class T>
void save_checkpoint(const TrainState<T>& state, const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw DataError("cannot open for writing: " + path);
  put(f.get(), kMagic, sizeof(kMagic));
  put_config(f.get(), state.model.config);
  put_vec(f.get(), state.model.params);
  put_stats(f.get(), state.model.norm.node_in);
  put_stats(f.get(), state.model.norm.edge_in);
  put_stats(f.get(), state.model.norm.target);
  put_vec(f.get(), state.adam.m);
  put_vec(f.get(), state.adam.v);
  put_pod<uint64_t>(f.get(), state.adam.t);
  put_pod<uint64_t>(f.get(), state.step);
  put_rng(f.get(), state.sample_rng);
  put_pod<uint64_t>(f.get(), state.worker_rngs.size());
  for (const Rng& r : state.worker_rngs) put_rng(f.get(), r);
  put_pod<uint64_t>(f.get(), state.val_history.size());
  for (const auto& [step, val] : state.val_history) {
    put_pod<uint64_t>(f.get(), step);
    put_pod<double>(f.get(), val);
  }
  if (std::fflush(f.get()) != 0) throw DataError("flush failed: " + path);
}

Precision peek_checkpoint_precision(const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw DataError("cannot open: " + path);
  char magic[8];
  take(f.get(), magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, 6) != 0)
    throw FormatError("not a checkpoint file: " + path);
  if (std::memcmp(magic, kMagic, 8) != 0)
    throw VersionError("unsupported checkpoint version in " + path);
  SurrogateConfig c = take_config(f.get());
  return c.precision;
}

template <class T>
TrainState<T> load_checkpoint(const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw DataError("cannot open: " + path);
  char magic[8];
  take(f.get(), magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, 6) != 0)
    throw FormatError("not a checkpoint file: " + path);
  if (std::memcmp(magic, kMagic, 8) != 0)
    throw VersionError("unsupported checkpoint version in " + path);
  TrainState<T> st;
  st.model.config = take_config(f.get());
  const bool want_f64 = std::is_same_v<T, double>;
  if ((st.model.config.precision == Precision::kF64) != want_f64)
    throw DataError("checkpoint precision mismatch: file is " +
                    std::string(precision_name(st.model.config.precision)));
  st.model.layout = build_layout(st.model.config);
  st.model.params = take_vec<T>(f.get());
  if (st.model.params.size() != st.model.layout.total)
    throw DataError("checkpoint parameter count mismatch");
  st.model.norm.node_in = take_stats(f.get());
  st.model.norm.edge_in = take_stats(f.get());
  st.model.norm.target = take_stats(f.get());
  st.adam.m = take_vec<T>(f.get());
  st.adam.v = take_vec<T>(f.get());
  st.adam.t = take_pod<uint64_t>(f.get());
  st.step = take_pod<uint64_t>(f.get());
  st.sample_rng = take_rng(f.get());
  const uint64_t nw = take_pod<uint64_t>(f.get());
  for (uint64_t i = 0; i < nw; ++i) st.worker_rngs.push_back(take_rng(f.get()));
  const uint64_t nh = take_pod<uint64_t>(f.get());
  for (uint64_t i = 0; i < nh; ++i) {
    const uint64_t step = take_pod<uint64_t>(f.get());
    const double val = take_pod<double>(f.get());
    st.val_history.emplace_back(step, val);
  }
  return st;
}

template void save_checkpoint<float>(const TrainState<float>&, const std::string&);
template void save_checkpoint<double>(const TrainState<double>&, const std::string&);
template TrainState<float> load_checkpoint<float>(const std::string&);
template TrainState<double> load_checkpoint<double>(const std::string&);

}  // namespace pmgn

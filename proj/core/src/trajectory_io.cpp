#include "pmgn/trajectory_io.hpp"

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <memory>
#include <vector>

namespace pmgn {
namespace {

static_assert(std::endian::native == std::endian::little,
              "trajectory format assumes a little-endian host");

constexpr char kMagic[8] = {'M', 'G', 'T', 'R', 'A', 'J', '0', '1'};

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void write_raw(std::FILE* f, const void* p, size_t bytes, const char* what) {
  if (std::fwrite(p, 1, bytes, f) != bytes)
    throw DataError(std::string("write failed for ") + what);
}

void read_raw(std::FILE* f, void* p, size_t bytes, const char* what) {
  if (std::fread(p, 1, bytes, f) != bytes)
    throw TruncationError(std::string("unexpected end of file reading ") + what);
}

template <class T>
void write_pod(std::FILE* f, const T& v, const char* what) {
  write_raw(f, &v, sizeof(T), what);
}

template <class T>
T read_pod(std::FILE* f, const char* what) {
  T v;
  read_raw(f, &v, sizeof(T), what);
  return v;
}

template <class T>
void write_vec(std::FILE* f, const std::vector<T>& v, const char* what) {
  write_raw(f, v.data(), v.size() * sizeof(T), what);
}

template <class T>
void read_vec(std::FILE* f, std::vector<T>& v, size_t count, const char* what) {
  v.resize(count);
  read_raw(f, v.data(), count * sizeof(T), what);
}

}  // namespace

void write_trajectory(const Trajectory& t, const std::string& path) {
  t.validate();
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw DataError("cannot open for writing: " + path);
  write_raw(f.get(), kMagic, sizeof(kMagic), "magic");
  write_pod<uint64_t>(f.get(), static_cast<uint64_t>(t.mesh.dim), "dim");
  write_pod<uint64_t>(f.get(), t.mesh.num_nodes(), "node count");
  write_pod<uint64_t>(f.get(), t.mesh.num_arcs(), "arc count");
  write_pod<uint64_t>(f.get(), t.frames.size(), "frame count");
  write_pod<double>(f.get(), t.h, "timestep");
  write_pod<int64_t>(f.get(), t.sim_id, "sim id");
  write_pod<double>(f.get(), t.inlet_velocity, "inlet velocity");
  const uint8_t has_pressure = t.frames.front().pressure.empty() ? 0 : 1;
  write_pod<uint8_t>(f.get(), has_pressure, "pressure flag");
  write_vec(f.get(), t.mesh.positions, "positions");
  write_vec(f.get(), t.mesh.boundary_index, "boundary index");
  std::vector<uint32_t> arcs;
  arcs.reserve(t.mesh.arcs.size() * 2);
  for (const Arc& a : t.mesh.arcs) {
    arcs.push_back(a.sender);
    arcs.push_back(a.receiver);
  }
  write_vec(f.get(), arcs, "arcs");
  for (const FieldFrame& fr : t.frames) {
    write_vec(f.get(), fr.momentum, "momentum");
    write_vec(f.get(), fr.volume_fraction, "volume fraction");
    if (has_pressure) write_vec(f.get(), fr.pressure, "pressure");
  }
  if (std::fflush(f.get()) != 0) throw DataError("flush failed: " + path);
}

Trajectory read_trajectory(const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw DataError("cannot open: " + path);
  char magic[8];
  read_raw(f.get(), magic, sizeof(magic), "magic");
  if (std::memcmp(magic, kMagic, 6) != 0)
    throw FormatError("not a trajectory file: bad magic in " + path);
  if (std::memcmp(magic, kMagic, 8) != 0)
    throw VersionError("unsupported trajectory version " +
                       std::string(magic + 6, 2) + " in " + path);
  Trajectory t;
  const uint64_t dim = read_pod<uint64_t>(f.get(), "dim");
  if (dim != 2 && dim != 3) throw DataError("invalid dim " + std::to_string(dim));
  t.mesh.dim = static_cast<int>(dim);
  const uint64_t n = read_pod<uint64_t>(f.get(), "node count");
  const uint64_t e = read_pod<uint64_t>(f.get(), "arc count");
  const uint64_t nf = read_pod<uint64_t>(f.get(), "frame count");
  t.h = read_pod<double>(f.get(), "timestep");
  t.sim_id = read_pod<int64_t>(f.get(), "sim id");
  t.inlet_velocity = read_pod<double>(f.get(), "inlet velocity");
  const uint8_t has_pressure = read_pod<uint8_t>(f.get(), "pressure flag");
  read_vec(f.get(), t.mesh.positions, n * dim, "positions");
  read_vec(f.get(), t.mesh.boundary_index, n, "boundary index");
  std::vector<uint32_t> arcs;
  read_vec(f.get(), arcs, e * 2, "arcs");
  t.mesh.arcs.resize(e);
  for (uint64_t i = 0; i < e; ++i)
    t.mesh.arcs[i] = {arcs[2 * i], arcs[2 * i + 1]};
  t.frames.resize(nf);
  for (FieldFrame& fr : t.frames) {
    read_vec(f.get(), fr.momentum, n * dim, "momentum");
    read_vec(f.get(), fr.volume_fraction, n, "volume fraction");
    if (has_pressure) read_vec(f.get(), fr.pressure, n, "pressure");
  }
  // Trailing garbage is a malformed file, not silently ignored.
  uint8_t extra;
  if (std::fread(&extra, 1, 1, f.get()) == 1)
    throw FormatError("trailing bytes after trajectory payload in " + path);
  t.mesh.derive_node_types();
  t.validate();
  return t;
}

}  // namespace pmgn

#include "pmgn/ingest.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

#include "pmgn/delaunay.hpp"

namespace pmgn {
namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::stringstream ss(line);
  while (std::getline(ss, cur, ',')) out.push_back(cur);
  return out;
}

double parse_num(const std::string& s, const std::string& where) {
  try {
    size_t pos = 0;
    double v = std::stod(s, &pos);
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError("ingest: cannot parse number '" + s + "' in " + where);
  }
}

std::ifstream open_or_throw(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("ingest: cannot open " + path);
  return in;
}

}  // namespace

Trajectory ingest_csv(const std::string& nodes_path,
                      const std::string& fields_path,
                      const IngestOptions& options) {
  const int dim = options.dim;
  if (dim != 2 && dim != 3) throw DataError("ingest: dim must be 2 or 3");
  Trajectory t;
  t.mesh.dim = dim;
  t.h = options.h;
  t.sim_id = options.sim_id;
  t.inlet_velocity = options.inlet_velocity;

  {
    std::ifstream in = open_or_throw(nodes_path);
    std::string line;
    if (!std::getline(in, line)) throw DataError("ingest: empty node table");
    const size_t ncols = 2 + dim;
    std::vector<std::array<double, 5>> rows;
    size_t lineno = 1;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      auto cells = split_csv_line(line);
      if (cells.size() != ncols)
        throw DataError("ingest: " + nodes_path + ":" + std::to_string(lineno) +
                        ": expected " + std::to_string(ncols) + " columns");
      std::array<double, 5> row{};
      for (size_t c = 0; c < ncols; ++c)
        row[c] = parse_num(cells[c], nodes_path + ":" + std::to_string(lineno));
      rows.push_back(row);
    }
    const size_t n = rows.size();
    t.mesh.positions.assign(n * dim, 0.0f);
    t.mesh.boundary_index.assign(n, 0.0);
    std::vector<bool> seen(n, false);
    for (const auto& row : rows) {
      const double idf = row[0];
      const size_t id = static_cast<size_t>(idf);
      if (idf != std::floor(idf) || id >= n)
        throw DataError("ingest: node ids must cover 0..n-1, got " +
                        std::to_string(idf));
      if (seen[id]) throw DataError("ingest: duplicate node id " + std::to_string(id));
      seen[id] = true;
      for (int a = 0; a < dim; ++a)
        t.mesh.positions[id * dim + a] = static_cast<float>(row[1 + a]);
      t.mesh.boundary_index[id] = row[1 + dim];
    }
  }
  t.mesh.derive_node_types();
  t.mesh.arcs = build_edges_delaunay(t.mesh.positions, dim);

  {
    std::ifstream in = open_or_throw(fields_path);
    std::string line;
    if (!std::getline(in, line)) throw DataError("ingest: empty field table");
    const size_t base_cols = 2 + dim + 1;  // frame,node,u...,alpha
    const size_t n = t.mesh.num_nodes();
    bool has_pressure = false;
    {
      auto header = split_csv_line(line);
      if (header.size() == base_cols + 1)
        has_pressure = true;
      else if (header.size() != base_cols)
        throw DataError("ingest: field table must have " +
                        std::to_string(base_cols) + " or " +
                        std::to_string(base_cols + 1) + " columns");
    }
    struct Row {
      size_t frame, node;
      std::array<double, 3> u;
      double alpha, pressure;
    };
    std::vector<Row> rows;
    size_t max_frame = 0, lineno = 1;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      auto cells = split_csv_line(line);
      if (cells.size() != base_cols + (has_pressure ? 1 : 0))
        throw DataError("ingest: " + fields_path + ":" + std::to_string(lineno) +
                        ": column count mismatch");
      const std::string where = fields_path + ":" + std::to_string(lineno);
      Row r{};
      r.frame = static_cast<size_t>(parse_num(cells[0], where));
      r.node = static_cast<size_t>(parse_num(cells[1], where));
      if (r.node >= n)
        throw DataError("ingest: node id out of range at " + where);
      for (int a = 0; a < dim; ++a) r.u[a] = parse_num(cells[2 + a], where);
      r.alpha = parse_num(cells[2 + dim], where);
      if (has_pressure) r.pressure = parse_num(cells[3 + dim], where);
      max_frame = std::max(max_frame, r.frame);
      rows.push_back(r);
    }
    const size_t nf = max_frame + 1;
    if (nf < 2) throw DataError("ingest: need at least 2 frames");
    t.frames.assign(nf, FieldFrame{});
    std::vector<size_t> counts(nf, 0);
    for (FieldFrame& fr : t.frames) {
      fr.momentum.assign(n * dim, 0.0f);
      fr.volume_fraction.assign(n, 0.0f);
      if (has_pressure) fr.pressure.assign(n, 0.0f);
    }
    for (const Row& r : rows) {
      FieldFrame& fr = t.frames[r.frame];
      const double alpha = std::clamp(r.alpha, 0.0, 1.0);
      const double rho = alpha * kLiquidDensity + (1.0 - alpha) * kGasDensity;
      for (int a = 0; a < dim; ++a)
        fr.momentum[r.node * dim + a] = static_cast<float>(rho * r.u[a]);
      fr.volume_fraction[r.node] = static_cast<float>(alpha);
      if (has_pressure) fr.pressure[r.node] = static_cast<float>(r.pressure);
      ++counts[r.frame];
    }
    for (size_t fidx = 0; fidx < nf; ++fidx)
      if (counts[fidx] != n)
        throw DataError("ingest: frame " + std::to_string(fidx) + " has " +
                        std::to_string(counts[fidx]) + " rows, expected " +
                        std::to_string(n));
  }
  t.validate();
  return t;
}

}  // namespace pmgn

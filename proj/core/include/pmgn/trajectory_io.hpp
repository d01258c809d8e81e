#pragma once

#include <string>

#include "pmgn/mesh.hpp"

namespace pmgn {

// Binary trajectory format "MGTRAJ01": little-endian, 64-bit counts,
// positions and fields as 32-bit floats, boundary_index as 64-bit float (it
// carries the fluid sentinel), arcs as pairs of 32-bit unsigned ints.
// read(write(t)) reproduces t field-for-field, bit-exact.
//
// Distinct failures: FormatError (bad magic), VersionError (recognized magic
// prefix, unsupported version), TruncationError (unexpected EOF), and
// DataError for semantic violations.
class FormatError : public DataError {
public:
  explicit FormatError(const std::string& m) : DataError(m) {}
};
class VersionError : public DataError {
public:
  explicit VersionError(const std::string& m) : DataError(m) {}
};
class TruncationError : public DataError {
public:
  explicit TruncationError(const std::string& m) : DataError(m) {}
};

void write_trajectory(const Trajectory& t, const std::string& path);
Trajectory read_trajectory(const std::string& path);

}  // namespace pmgn

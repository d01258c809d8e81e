#pragma once

#include <stdexcept>
#include <string>

namespace pmgn {

// Error categories map onto the CLI exit codes: usage -> 1, data -> 2,
// verification -> 3.
class UsageError : public std::runtime_error {
public:
  explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

class DataError : public std::runtime_error {
public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Geometric input that admits no triangulation (collinear/coplanar cloud,
// duplicate points).
class DegeneracyError : public DataError {
public:
  explicit DegeneracyError(const std::string& msg) : DataError(msg) {}
};

class VerificationError : public std::runtime_error {
public:
  explicit VerificationError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace pmgn

#pragma once

#include <stdexcept>
#include <string>

namespace ramcnn {

// Bad input data: malformed files, invalid configuration values, shape
// mismatches. Maps to CLI exit code 2.
class DataError : public std::runtime_error {
public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor/vector shape disagreement between operands.
class DimensionError : public DataError {
public:
  explicit DimensionError(const std::string& msg) : DataError(msg) {}
};

// Non-finite values where finite arithmetic was required (diverged training,
// overflow). Maps to CLI exit code 3.
class NumericError : public std::runtime_error {
public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace ramcnn

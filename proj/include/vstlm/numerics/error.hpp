// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace vstlm {

/// Base for every error the library raises.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand extents disagree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Invalid hyperparameters or model wiring.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed input files, bad ids, or unusable datasets.
class DataError : public Error {
 public:
  enum class Kind { kBadMagic, kTruncated, kExtentOverflow, kParse, kInvalid, kIo };

  DataError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// Training produced a non-finite loss or gradient.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace vstlm

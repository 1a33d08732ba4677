// SPDX-FileCopyrightText: © 2026 blocktensor developers
//
// SPDX-License-Identifier: Apache-2.0

#ifndef BLOCKTENSOR_ERRORS_HPP
#define BLOCKTENSOR_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace blocktensor {

/// Base class for all library errors.
class error : public std::runtime_error {
 public:
  explicit error(const std::string& what) : std::runtime_error(what) {}
};

/// A precondition on arguments was violated.
class invalid_argument : public error {
 public:
  explicit invalid_argument(const std::string& what) : error(what) {}
};

/// A rank touched a block it does not own under the current distribution.
class ownership_error : public error {
 public:
  explicit ownership_error(const std::string& what) : error(what) {}
};

/// The process grid shape does not support the requested algorithm.
class grid_error : public error {
 public:
  explicit grid_error(const std::string& what) : error(what) {}
};

/// Distributed layouts of the operands are incompatible. Carries the name
/// of the first mismatched dimension so the caller can redistribute and retry.
class layout_error : public error {
 public:
  layout_error(std::string dimension, const std::string& what)
      : error(what), dimension_(std::move(dimension)) {}
  const std::string& dimension() const noexcept { return dimension_; }

 private:
  std::string dimension_;
};

/// All rank workers are blocked on receives that can never be satisfied.
class deadlock_error : public error {
 public:
  explicit deadlock_error(const std::string& what) : error(what) {}
};

}  // namespace blocktensor

#endif  // BLOCKTENSOR_ERRORS_HPP

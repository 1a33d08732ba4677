// SPDX-FileCopyrightText: © 2026 blocktensor developers
//
// SPDX-License-Identifier: Apache-2.0

#ifndef BLOCKTENSOR_PARTITION_HPP
#define BLOCKTENSOR_PARTITION_HPP

#include <cstdint>

#include "blocktensor/errors.hpp"

namespace blocktensor {

/// Contiguous ceiling partition of [0, n) into `parts` ranges: every part but
/// the last holds ceil(n/parts) indices, the last takes the remainder (and
/// trailing parts may be empty when n < parts).
class ChunkPartition {
 public:
  ChunkPartition() = default;
  ChunkPartition(std::int64_t n, int parts) : n_(n), parts_(parts) {
    if (n < 0 || parts < 1) throw invalid_argument("ChunkPartition: bad arguments");
    chunk_ = (n + parts - 1) / parts;  // 0 only when n == 0
  }

  std::int64_t begin(int p) const { return std::min(n_, chunk_ * p); }
  std::int64_t end(int p) const { return std::min(n_, chunk_ * (p + 1)); }
  std::int64_t size(int p) const { return end(p) - begin(p); }

  int part_of(std::int64_t i) const {
    if (i < 0 || i >= n_) throw invalid_argument("ChunkPartition: index out of range");
    return chunk_ == 0 ? 0 : static_cast<int>(i / chunk_);
  }

  std::int64_t n() const noexcept { return n_; }
  int parts() const noexcept { return parts_; }

 private:
  std::int64_t n_ = 0;
  int parts_ = 1;
  std::int64_t chunk_ = 0;
};

}  // namespace blocktensor

#endif  // BLOCKTENSOR_PARTITION_HPP

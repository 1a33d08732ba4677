// SPDX-FileCopyrightText: © 2026 blocktensor developers
//
// SPDX-License-Identifier: Apache-2.0

#ifndef BLOCKTENSOR_COST_MODEL_HPP
#define BLOCKTENSOR_COST_MODEL_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "blocktensor/errors.hpp"

namespace blocktensor {

/// Problem description for the communication-volume model: element dimensions
/// of C(MxN) = A(MxK) * B(KxN), the occupancy of each matrix, and the process
/// count. Volumes are reported in matrix elements per process.
struct MultiplySpec {
  double m = 0;
  double n = 0;
  double k = 0;
  double occ_a = 1.0;
  double occ_b = 1.0;
  double occ_c = 1.0;
  double nprocs = 1;

  double stored_a() const { return occ_a * m * k; }
  double stored_b() const { return occ_b * k * n; }
  double stored_c() const { return occ_c * m * n; }

  void validate() const {
    if (m < 1 || n < 1 || k < 1) throw invalid_argument("MultiplySpec: dims must be >= 1");
    if (nprocs < 1) throw invalid_argument("MultiplySpec: process count must be >= 1");
    for (double o : {occ_a, occ_b, occ_c})
      if (o < 0.0 || o > 1.0)
        throw invalid_argument("MultiplySpec: occupancies must be in [0,1]");
  }
};

/// Per-process volume of the 2D algorithm: A and B tiles circulate over
/// sqrt(P) ring steps while C stays resident.
inline double cannon_volume(const MultiplySpec& s) {
  s.validate();
  return (s.stored_a() + s.stored_b()) / std::sqrt(s.nprocs);
}

/// Per-process volume of the linear-grid reduce algorithm: A and B move to
/// their K-slabs once, then the full partial result streams past every rank.
inline double case1_volume(const MultiplySpec& s) {
  s.validate();
  return (s.stored_a() + s.stored_b()) / s.nprocs + s.stored_c();
}

/// Per-process volume of the resident-A ring algorithm: A, B and C each move
/// once for the linear layout, and B circulates fully.
inline double case2_volume(const MultiplySpec& s) {
  s.validate();
  return (s.stored_a() + s.stored_b() + s.stored_c()) / s.nprocs + s.stored_b();
}

/// Largest result occupancy for which the linear-grid reduce algorithm still
/// beats the 2D algorithm, clamped to [0,1]. `s.occ_c` is ignored.
inline double occupancy_limit_case1(const MultiplySpec& s) {
  s.validate();
  const double tw = cannon_volume(s);
  const double raw = (tw - (s.stored_a() + s.stored_b()) / s.nprocs) / (s.m * s.n);
  return std::clamp(raw, 0.0, 1.0);
}

/// Occupancy-ratio bound with redistribution costs omitted and
/// occ_a = occ_b = occ: the reduce algorithm wins while occ_c/occ stays
/// below this value.
inline double occupancy_ratio_bound(double m, double n, double k, double nprocs) {
  if (m < 1 || n < 1 || k < 1 || nprocs < 1)
    throw invalid_argument("occupancy_ratio_bound: arguments must be >= 1");
  return k * (m + n) / (m * n * std::sqrt(nprocs));
}

/// Block-fill estimate for the result of a sparse-sparse product: each of the
/// n_blocks_k contributions independently hits an output block with
/// probability occ_a*occ_b. An approximation for planning only, never used on
/// correctness paths.
inline double estimate_result_occupancy(double occ_a, double occ_b, std::int64_t n_blocks_k) {
  if (n_blocks_k < 0) throw invalid_argument("estimate_result_occupancy: negative block count");
  const double p = std::clamp(occ_a * occ_b, 0.0, 1.0);
  return std::clamp(1.0 - std::pow(1.0 - p, static_cast<double>(n_blocks_k)), 0.0, 1.0);
}

}  // namespace blocktensor

#endif  // BLOCKTENSOR_COST_MODEL_HPP

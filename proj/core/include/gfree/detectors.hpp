#pragma once

// Linear baseline data detector operating on an external channel estimate.

#include "gfree/types.hpp"

namespace gfree {

struct ZfReport {
  bool overloaded = false;  // fewer antennas than active users; minimum-norm solution used
};

struct LinearDetector {
  enum class Kind { kZeroForcing };
  Kind kind = Kind::kZeroForcing;
  double regularization = 0.0;  // added to the Gram diagonal; 0 gives plain ZF
};

/// X_d = pinv(H_A) Y_d sliced onto QPSK; rows of inactive users are zero.
CMatrix zf_detect(const CMatrix& y_data, const CMatrix& h_hat, const ActiveSet& active_hat,
                  const LinearDetector& det = {}, ZfReport* report = nullptr);

}  // namespace gfree

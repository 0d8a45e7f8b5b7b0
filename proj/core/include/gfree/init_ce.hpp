#pragma once

// Pilot-only channel estimators: MMV-AMP (the BiGaBP initializer), the
// minimum-norm least-squares estimate, and a genie-aided linear MMSE reference.

#include "gfree/receiver.hpp"
#include "gfree/types.hpp"

namespace gfree {

struct InitialEstimate {
  CMatrix h_hat;       // N x M
  RMatrix psi_h;       // N x M error variances
  double lambda_hat = 1.0;
  RVector tau;         // per-user 1 / P(active)
  ActiveSet active_hat;
  int iterations = 0;
};

struct MmvAmpConfig {
  int max_iterations = 50;
  double damping = 0.8;      // weight on the fresh estimate
  double tolerance = 1e-6;   // relative change of the estimate
  double blowup = 1e6;       // divergence guard on the effective noise variance
};

/// AMP on the transposed pilot model Y_p^T = X_p^T H^T + W^T with a
/// Bernoulli-Gaussian row denoiser. `y_pilot` is N x K_p, `pilots` M x K_p.
InitialEstimate mmv_amp(const CMatrix& y_pilot, const CMatrix& pilots, const RMatrix& gamma, double lambda,
                        double n0, const MmvAmpConfig& cfg = {});

inline InitialEstimate mmv_amp(const ReceiverInput& in, const MmvAmpConfig& cfg = {}) {
  return mmv_amp(in.y_pilot(), in.pilots, in.gamma, in.lambda, in.n0, cfg);
}

/// H = Y_p (X_p^H X_p)^-1 X_p^H, the minimum-norm solution of H X_p = Y_p.
CMatrix mns_estimate(const CMatrix& y_pilot, const CMatrix& pilots);

/// Per-AP linear MMSE over the true active users given every transmitted
/// symbol (`x_true` is M x K). Inactive columns are zero.
CMatrix mmse_genie(const CMatrix& y, const CMatrix& x_true, const ActiveSet& active, const RMatrix& gamma,
                   double n0);

}  // namespace gfree

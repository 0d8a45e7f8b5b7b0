#pragma once

// Posterior of a Bernoulli-Gaussian vector h ~ lambda CN(0, Gamma) + (1 - lambda) delta(h)
// observed as mu = h + e, e ~ CN(0, Sigma), with diagonal Sigma and Gamma.

#include "gfree/types.hpp"

namespace gfree {

struct BgPosterior {
  CVector mean;
  RVector variance;
  double tau = 1.0;      // 1 / P(active | mu)
  double pi_term = 0.0;  // mu^H (Sigma^-1 - (Sigma + Gamma)^-1) mu
  double logdet = 0.0;   // log |Sigma^-1 Gamma + I|
  bool saturated = false;
};

/// Exponent arguments are clipped to +-kTauExponentCap before exp.
inline constexpr double kTauExponentCap = 700.0;

BgPosterior bg_posterior(const CVector& mu, const RVector& sigma, const RVector& gamma, double lambda);

/// Marginal density of mu, integrating h out of p(mu | h) p(h).
double bg_evidence(const CVector& mu, const RVector& sigma, const RVector& gamma, double lambda);

}  // namespace gfree

#include "gfree/bernoulli_gauss.hpp"

#include <cmath>

namespace gfree {

namespace {

void check(const CVector& mu, const RVector& sigma, const RVector& gamma, double lambda) {
  if (sigma.size() != mu.size() || gamma.size() != mu.size()) throw DomainError("posterior inputs differ in length");
  if (!(lambda > 0.0 && lambda <= 1.0)) throw DomainError("activity factor must lie in (0, 1]");
  if (!(sigma.minCoeff() > 0.0)) throw DomainError("observation variances must be positive");
  if (gamma.minCoeff() < 0.0) throw DomainError("prior variances must be non-negative");
}

}  // namespace

BgPosterior bg_posterior(const CVector& mu, const RVector& sigma, const RVector& gamma, double lambda) {
  check(mu, sigma, gamma, lambda);
  const Eigen::Index n = mu.size();
  BgPosterior out;
  for (Eigen::Index i = 0; i < n; ++i) {
    out.pi_term += std::norm(mu(i)) * gamma(i) / (sigma(i) * (sigma(i) + gamma(i)));
    out.logdet += std::log1p(gamma(i) / sigma(i));
  }
  if (lambda < 1.0) {
    double arg = -(out.pi_term - out.logdet);
    if (arg > kTauExponentCap) {
      arg = kTauExponentCap;
      out.saturated = true;
    } else if (arg < -kTauExponentCap) {
      arg = -kTauExponentCap;
    }
    out.tau = 1.0 + (1.0 - lambda) / lambda * std::exp(arg);
  }
  out.mean.resize(n);
  out.variance.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double shrink = gamma(i) / (sigma(i) + gamma(i));
    out.mean(i) = shrink * mu(i) / out.tau;
    out.variance(i) = (out.tau - 1.0) * std::norm(out.mean(i)) + sigma(i) * shrink / out.tau;
  }
  return out;
}

double bg_evidence(const CVector& mu, const RVector& sigma, const RVector& gamma, double lambda) {
  check(mu, sigma, gamma, lambda);
  // Summed in log space per branch; each branch is a complex Gaussian density.
  double log_active = std::log(lambda);
  double log_inactive = lambda < 1.0 ? std::log1p(-lambda) : -INFINITY;
  for (Eigen::Index i = 0; i < mu.size(); ++i) {
    const double s = sigma(i) + gamma(i);
    log_active += -std::norm(mu(i)) / s - std::log(kPi * s);
    log_inactive += -std::norm(mu(i)) / sigma(i) - std::log(kPi * sigma(i));
  }
  return std::exp(log_active) + std::exp(log_inactive);
}

}  // namespace gfree

#include "gfree/init_ce.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "gfree/bernoulli_gauss.hpp"

namespace gfree {

InitialEstimate mmv_amp(const CMatrix& y_pilot, const CMatrix& pilots, const RMatrix& gamma, double lambda,
                        double n0, const MmvAmpConfig& cfg) {
  const Eigen::Index n = y_pilot.rows();
  const Eigen::Index kp = y_pilot.cols();
  const Eigen::Index m = pilots.rows();
  if (kp < 1) throw DomainError("MMV-AMP needs at least one pilot symbol");
  if (pilots.cols() != kp) throw DomainError("pilot block and received pilots differ in length");
  if (gamma.rows() != n || gamma.cols() != m) throw DomainError("gamma must be N x M");
  if (!(lambda > 0.0 && lambda <= 1.0)) throw DomainError("activity factor must lie in (0, 1]");
  if (!(n0 > 0.0)) throw DomainError("noise power must be positive");
  if (cfg.max_iterations < 1) throw DomainError("MMV-AMP needs at least one iteration");
  if (!(cfg.damping > 0.0 && cfg.damping <= 1.0)) throw DomainError("damping must lie in (0, 1]");

  // Unit-norm measurement columns; the unknown rows absorb the column norms.
  const RVector col_norm = pilots.rowwise().norm();
  if (!(col_norm.minCoeff() > 0.0)) throw DomainError("a pilot sequence is all zero");
  CMatrix a(kp, m);
  for (Eigen::Index u = 0; u < m; ++u) a.col(u) = pilots.row(u).transpose() / col_norm(u);
  const CMatrix yt = y_pilot.transpose();  // K_p x N

  RMatrix prior(m, n);  // prior variance of row u of the scaled unknown, per antenna
  for (Eigen::Index u = 0; u < m; ++u) prior.row(u) = gamma.col(u).transpose() * (col_norm(u) * col_norm(u));

  CMatrix x = CMatrix::Zero(m, n);
  RMatrix var = prior * lambda;
  RVector tau = RVector::Ones(m);
  CMatrix z = yt;
  RVector sigma(n);
  double initial_sigma = 0.0;
  const double floor = std::max(n0, 1e-300);

  InitialEstimate out;
  for (int it = 0; it < cfg.max_iterations; ++it) {
    for (Eigen::Index c = 0; c < n; ++c) sigma(c) = std::max(z.col(c).squaredNorm() / static_cast<double>(kp), floor);
    if (it == 0) initial_sigma = sigma.maxCoeff();
    if (!std::isfinite(sigma.maxCoeff()) || sigma.maxCoeff() > cfg.blowup * initial_sigma)
      throw NumericError("MMV-AMP effective noise variance diverged", it);

    const CMatrix r = x + a.adjoint() * z;
    CMatrix x_new(m, n);
    RMatrix var_new(m, n);
    for (Eigen::Index u = 0; u < m; ++u) {
      const BgPosterior post = bg_posterior(r.row(u).transpose(), sigma, prior.row(u).transpose(), lambda);
      x_new.row(u) = post.mean.transpose();
      var_new.row(u) = post.variance.transpose();
      tau(u) = post.tau;
    }
    const double change = (x_new - x).norm() / std::max(x_new.norm(), 1e-300);
    x = cfg.damping * x_new + (1.0 - cfg.damping) * x;
    var = cfg.damping * var_new + (1.0 - cfg.damping) * var;

    // Onsager term: the denoiser's average divergence, per antenna.
    RVector onsager(n);
    for (Eigen::Index c = 0; c < n; ++c) onsager(c) = var_new.col(c).sum() / (sigma(c) * static_cast<double>(kp));
    z = yt - a * x + z * onsager.asDiagonal();
    out.iterations = it + 1;
    if (!x.allFinite()) throw NumericError("MMV-AMP produced a non-finite estimate", it);
    if (change < cfg.tolerance) break;
  }

  out.h_hat.resize(n, m);
  out.psi_h.resize(n, m);
  for (Eigen::Index u = 0; u < m; ++u) {
    out.h_hat.col(u) = x.row(u).transpose() / col_norm(u);
    out.psi_h.col(u) = var.row(u).transpose() / (col_norm(u) * col_norm(u));
  }
  out.psi_h = out.psi_h.cwiseMax(0.0);
  out.lambda_hat = lambda;
  out.tau = tau;
  out.active_hat = (tau.array() < 2.0).matrix();
  return out;
}

CMatrix mns_estimate(const CMatrix& y_pilot, const CMatrix& pilots) {
  if (y_pilot.cols() != pilots.cols()) throw DomainError("pilot block and received pilots differ in length");
  const CMatrix gram = pilots.adjoint() * pilots;  // K_p x K_p
  Eigen::FullPivLU<CMatrix> lu(gram);
  lu.setThreshold(1e-12);
  if (!lu.isInvertible()) throw NumericError("pilot Gram matrix is singular");
  return y_pilot * lu.inverse() * pilots.adjoint();
}

CMatrix mmse_genie(const CMatrix& y, const CMatrix& x_true, const ActiveSet& active, const RMatrix& gamma,
                   double n0) {
  const Eigen::Index n = y.rows();
  const Eigen::Index m = x_true.rows();
  if (x_true.cols() != y.cols()) throw DomainError("symbol block and received frame differ in length");
  if (active.size() != m || gamma.rows() != n || gamma.cols() != m) throw DomainError("inconsistent dimensions");
  if (!(n0 > 0.0)) throw DomainError("noise power must be positive");

  std::vector<Eigen::Index> idx;
  for (Eigen::Index u = 0; u < m; ++u)
    if (active(u)) idx.push_back(u);
  CMatrix h = CMatrix::Zero(n, m);
  if (idx.empty()) return h;
  const auto na = static_cast<Eigen::Index>(idx.size());
  CMatrix xa(na, x_true.cols());
  for (Eigen::Index i = 0; i < na; ++i) xa.row(i) = x_true.row(idx[static_cast<std::size_t>(i)]);
  const CMatrix xc = xa.conjugate();
  const CMatrix gram = xc * xa.transpose() / n0;  // X* X^T / N0

  for (Eigen::Index r = 0; r < n; ++r) {
    RVector g(na);
    for (Eigen::Index i = 0; i < na; ++i) g(i) = std::sqrt(std::max(gamma(r, idx[static_cast<std::size_t>(i)]), 0.0));
    CMatrix sys = g.asDiagonal() * gram * g.asDiagonal();
    sys.diagonal().array() += 1.0;
    const CVector rhs = g.asDiagonal() * (xc * y.row(r).transpose() / n0);
    const CVector est = g.asDiagonal() * sys.ldlt().solve(rhs);
    for (Eigen::Index i = 0; i < na; ++i) h(r, idx[static_cast<std::size_t>(i)]) = est(i);
  }
  return h;
}

}  // namespace gfree

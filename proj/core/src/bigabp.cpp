#include "gfree/bigabp.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "gfree/signal.hpp"

namespace gfree {

namespace {

void check_finite(double v, const char* what, int t, Eigen::Index n, Eigen::Index m, Eigen::Index k) {
  if (std::isfinite(v)) return;
  std::ostringstream os;
  os << "non-finite " << what << " at iteration " << t << ", edge (n=" << n << ", m=" << m << ", k=" << k << ")";
  throw NumericError(os.str(), t);
}

double mean_of(const std::vector<double>& v, std::size_t from, std::size_t to) {
  if (to <= from) return 0.0;
  double acc = 0.0;
  for (std::size_t i = from; i < to; ++i) acc += v[i];
  return acc / static_cast<double>(to - from);
}

}  // namespace

BeliefState initial_state(const CMatrix& pilots, Eigen::Index k_total, const InitialEstimate& init) {
  const Eigen::Index m = pilots.rows();
  const Eigen::Index kp = pilots.cols();
  const Eigen::Index n = init.h_hat.rows();
  if (init.h_hat.cols() != m || init.psi_h.rows() != n || init.psi_h.cols() != m)
    throw DomainError("initial estimate does not match the pilot block");
  if (k_total < kp) throw DomainError("frame shorter than its pilot block");

  BeliefState s;
  s.k_pilot = kp;
  s.x_hat = CEdges(n, m, k_total);
  s.psi_x = REdges(n, m, k_total, 1.0);
  s.h_hat = CEdges(n, m, k_total);
  s.psi_h = REdges(n, m, k_total);
  s.tau = RMatrix::Ones(k_total, m);
  for (Eigen::Index k = 0; k < k_total; ++k)
    for (Eigen::Index u = 0; u < m; ++u)
      for (Eigen::Index a = 0; a < n; ++a) {
        if (k < kp) {
          s.x_hat(a, u, k) = pilots(u, k);
          s.psi_x(a, u, k) = 0.0;
        }
        s.h_hat(a, u, k) = init.h_hat(a, u);
        s.psi_h(a, u, k) = std::max(init.psi_h(a, u), 0.0);
      }
  return s;
}

Residuals soft_ic(const CMatrix& y, const BeliefState& s, const RMatrix& gamma, double n0) {
  const Eigen::Index n = s.n_aps();
  const Eigen::Index m = s.users();
  const Eigen::Index kk = s.k_total();
  if (y.rows() != n || y.cols() != kk) throw DomainError("received frame does not match the belief state");
  if (gamma.rows() != n || gamma.cols() != m) throw DomainError("gamma must be N x M");

  Residuals r{CEdges(n, m, kk), REdges(n, m, kk), REdges(n, m, kk), REdges(n, m, kk)};
  std::vector<cplx> total(static_cast<std::size_t>(n));
  std::vector<double> var_total(static_cast<std::size_t>(n));
  for (Eigen::Index k = 0; k < kk; ++k) {
    std::fill(total.begin(), total.end(), cplx{});
    std::fill(var_total.begin(), var_total.end(), 0.0);
    for (Eigen::Index u = 0; u < m; ++u)
      for (Eigen::Index a = 0; a < n; ++a) {
        const cplx h = s.h_hat(a, u, k);
        const cplx x = s.x_hat(a, u, k);
        const double px = s.psi_x(a, u, k);
        total[static_cast<std::size_t>(a)] += h * x;
        var_total[static_cast<std::size_t>(a)] += std::norm(h) * px + (std::norm(x) + px) * s.psi_h(a, u, k);
      }
    for (Eigen::Index u = 0; u < m; ++u)
      for (Eigen::Index a = 0; a < n; ++a) {
        const cplx h = s.h_hat(a, u, k);
        const cplx x = s.x_hat(a, u, k);
        const double px = s.psi_x(a, u, k);
        const double own = std::norm(h) * px + (std::norm(x) + px) * s.psi_h(a, u, k);
        r.y_tilde(a, u, k) = y(a, k) - total[static_cast<std::size_t>(a)] + h * x;
        const double vy = std::max(var_total[static_cast<std::size_t>(a)] - own, 0.0) + n0;
        r.v_y(a, u, k) = std::max(vy, kVarianceFloor);
        r.v_x(a, u, k) = k >= s.k_pilot ? std::max(vy + s.psi_h(a, u, k), kVarianceFloor) : 0.0;
        r.v_h(a, u, k) = std::max(vy + gamma(a, u) * px, kVarianceFloor);
      }
  }
  return r;
}

ExtrinsicX extrinsic_x(const Residuals& res, const BeliefState& s, BeliefDiagnostics* diag) {
  const Eigen::Index n = s.n_aps();
  const Eigen::Index m = s.users();
  const Eigen::Index kp = s.k_pilot;
  const Eigen::Index kd = s.k_total() - kp;
  ExtrinsicX e{CEdges(n, m, kd), REdges(n, m, kd)};
  for (Eigen::Index d = 0; d < kd; ++d) {
    const Eigen::Index k = kp + d;
    for (Eigen::Index u = 0; u < m; ++u) {
      double prec = 0.0;
      cplx num{};
      for (Eigen::Index a = 0; a < n; ++a) {
        const cplx h = s.h_hat(a, u, k);
        const double v = res.v_x(a, u, k);
        prec += std::norm(h) / v;
        num += std::conj(h) * res.y_tilde(a, u, k) / v;
      }
      for (Eigen::Index a = 0; a < n; ++a) {
        const cplx h = s.h_hat(a, u, k);
        const double v = res.v_x(a, u, k);
        double p = prec - std::norm(h) / v;
        if (!(p > 1e-300)) {
          if (diag) ++diag->clamped_r;
          p = 1e-300;
        }
        // The mean uses the exact precision; only the stored variance is floored.
        e.psi_r(a, u, d) = std::max(1.0 / p, kVarianceFloor);
        e.r_hat(a, u, d) = (num - std::conj(h) * res.y_tilde(a, u, k) / v) / p;
      }
    }
  }
  return e;
}

ExtrinsicH extrinsic_h(const Residuals& res, const BeliefState& s, BeliefDiagnostics* diag) {
  const Eigen::Index n = s.n_aps();
  const Eigen::Index m = s.users();
  const Eigen::Index kk = s.k_total();
  ExtrinsicH e{CEdges(n, m, kk), REdges(n, m, kk)};
  for (Eigen::Index u = 0; u < m; ++u)
    for (Eigen::Index a = 0; a < n; ++a) {
      double prec = 0.0;
      cplx num{};
      for (Eigen::Index k = 0; k < kk; ++k) {
        const cplx x = s.x_hat(a, u, k);
        const double v = res.v_h(a, u, k);
        prec += std::norm(x) / v;
        num += std::conj(x) * res.y_tilde(a, u, k) / v;
      }
      for (Eigen::Index k = 0; k < kk; ++k) {
        const cplx x = s.x_hat(a, u, k);
        const double v = res.v_h(a, u, k);
        double p = prec - std::norm(x) / v;
        if (!(p > 1e-300)) {
          if (diag) ++diag->clamped_q;
          p = 1e-300;
        }
        e.sigma(a, u, k) = std::max(1.0 / p, kVarianceFloor);
        e.mu(a, u, k) = (num - std::conj(x) * res.y_tilde(a, u, k) / v) / p;
      }
    }
  return e;
}

DenoisedX denoise_x(cplx r_hat, double psi_r, double tau, double gamma_t) {
  if (!(tau >= 1.0)) throw DomainError("sparsity factor must be at least 1");
  if (!(gamma_t > 0.0 && gamma_t <= 1.0)) throw DomainError("belief scaling must lie in (0, 1]");
  if (!(psi_r > 0.0)) throw DomainError("extrinsic variance must be positive");
  const double s2 = std::sqrt(2.0);
  const double g = s2 * gamma_t / psi_r;
  const cplx mean = cplx(std::tanh(g * r_hat.real()), std::tanh(g * r_hat.imag())) / (s2 * tau);
  const double var = std::clamp((1.0 - std::norm(mean)) / tau, 0.0, 1.0);
  return {mean, var};
}

BgPosterior denoise_h(const CVector& mu, const RVector& sigma, const RVector& gamma_m, double lambda) {
  return bg_posterior(mu, sigma, gamma_m, lambda);
}

double normalization_constant(const CVector& mu, const RVector& sigma, const RVector& gamma_m, double lambda) {
  const BgPosterior p = bg_posterior(mu, sigma, gamma_m, lambda);
  // Assembled in log space; tau itself is finite even when its exponent saturates.
  double log_c = std::log(lambda) + std::log(p.tau);
  for (Eigen::Index i = 0; i < mu.size(); ++i) {
    const double s = sigma(i) + gamma_m(i);
    log_c += -std::norm(mu(i)) / s - std::log(kPi * s);
  }
  return std::exp(log_c);
}

void belief_sweep(const CMatrix& y, BeliefState& s, const RMatrix& gamma, double lambda, double n0,
                  const BeliefKnobs& knobs, int t) {
  const Eigen::Index n = s.n_aps();
  const Eigen::Index m = s.users();
  const Eigen::Index kk = s.k_total();
  const Eigen::Index kp = s.k_pilot;
  const double eta = knobs.eta;
  const double gamma_t = static_cast<double>(t) / static_cast<double>(knobs.t_max);

  const Residuals res = soft_ic(y, s, gamma, n0);
  const ExtrinsicX ex = extrinsic_x(res, s, &s.diag);
  const ExtrinsicH eh = extrinsic_h(res, s, &s.diag);

  // Channel beliefs per (k, m).
  CVector mu(n);
  RVector sigma(n);
  for (Eigen::Index k = 0; k < kk; ++k)
    for (Eigen::Index u = 0; u < m; ++u) {
      for (Eigen::Index a = 0; a < n; ++a) {
        mu(a) = eh.mu(a, u, k);
        sigma(a) = eh.sigma(a, u, k);
      }
      const BgPosterior post = denoise_h(mu, sigma, gamma.col(u), lambda);
      if (post.saturated) ++s.diag.tau_saturations;
      s.tau(k, u) = post.tau;
      for (Eigen::Index a = 0; a < n; ++a) {
        s.h_hat(a, u, k) = eta * post.mean(a) + (1.0 - eta) * s.h_hat(a, u, k);
        s.psi_h(a, u, k) = eta * post.variance(a) + (1.0 - eta) * s.psi_h(a, u, k);
        check_finite(std::abs(s.h_hat(a, u, k)) + s.psi_h(a, u, k), "channel message", t, a, u, k);
      }
    }

  // Symbol beliefs on data columns, using the sparsity factors just computed.
  for (Eigen::Index k = kp; k < kk; ++k)
    for (Eigen::Index u = 0; u < m; ++u)
      for (Eigen::Index a = 0; a < n; ++a) {
        const DenoisedX d = denoise_x(ex.r_hat(a, u, k - kp), ex.psi_r(a, u, k - kp), s.tau(k, u), gamma_t);
        s.x_hat(a, u, k) = eta * d.mean + (1.0 - eta) * s.x_hat(a, u, k);
        s.psi_x(a, u, k) = eta * d.variance + (1.0 - eta) * s.psi_x(a, u, k);
        check_finite(std::abs(s.x_hat(a, u, k)) + s.psi_x(a, u, k), "symbol message", t, a, u, k);
      }
  s.iteration = t;
}

namespace {

void record_traces(BeliefState& s, const GroundTruth* truth) {
  const Eigen::Index n = s.n_aps();
  const Eigen::Index m = s.users();
  const Eigen::Index kk = s.k_total();
  const std::size_t nm = static_cast<std::size_t>(n * m);
  s.mse_trace_x.push_back(mean_of(s.psi_x.data(), nm * static_cast<std::size_t>(s.k_pilot), s.psi_x.data().size()));
  s.mse_trace_h.push_back(mean_of(s.psi_h.data(), 0, s.psi_h.data().size()));
  if (!truth) return;
  double ex = 0.0, eh = 0.0;
  for (Eigen::Index k = 0; k < kk; ++k)
    for (Eigen::Index u = 0; u < m; ++u)
      for (Eigen::Index a = 0; a < n; ++a) {
        if (k >= s.k_pilot) ex += std::norm(s.x_hat(a, u, k) - truth->x(u, k));
        eh += std::norm(s.h_hat(a, u, k) - truth->h(a, u));
      }
  const double data_edges = static_cast<double>(n * m * (kk - s.k_pilot));
  s.emp_trace_x.push_back(data_edges > 0 ? ex / data_edges : 0.0);
  s.emp_trace_h.push_back(eh / static_cast<double>(n * m * kk));
}

}  // namespace

BeliefState run_belief_consensus(const ReceiverInput& in, const InitialEstimate& init, const BeliefKnobs& knobs,
                                 const GroundTruth* truth) {
  in.validate();
  if (knobs.t_max < 1) throw DomainError("t_max must be at least 1");
  if (!(knobs.eta > 0.0 && knobs.eta <= 1.0)) throw DomainError("damping factor must lie in (0, 1]");
  BeliefState s = initial_state(in.pilots, in.k_total(), init);
  for (int t = 1; t <= knobs.t_max; ++t) {
    belief_sweep(in.y, s, in.gamma, in.lambda, in.n0, knobs, t);
    record_traces(s, truth);
  }
  return s;
}

ConsensusX consensus_x(const Residuals& res, const BeliefState& s) {
  const Eigen::Index n = s.n_aps();
  const Eigen::Index m = s.users();
  const Eigen::Index kp = s.k_pilot;
  const Eigen::Index kd = s.k_total() - kp;
  ConsensusX c{CMatrix(m, kd), RMatrix(m, kd)};
  for (Eigen::Index d = 0; d < kd; ++d)
    for (Eigen::Index u = 0; u < m; ++u) {
      double prec = 0.0;
      cplx num{};
      for (Eigen::Index a = 0; a < n; ++a) {
        const cplx h = s.h_hat(a, u, kp + d);
        const double v = res.v_x(a, u, kp + d);
        prec += std::norm(h) / v;
        num += std::conj(h) * res.y_tilde(a, u, kp + d) / v;
      }
      prec = std::max(prec, 1e-300);
      c.psi_r(u, d) = std::max(1.0 / prec, kVarianceFloor);
      c.r_hat(u, d) = num / prec;
    }
  return c;
}

ConsensusH consensus_h(const Residuals& res, const BeliefState& s) {
  const Eigen::Index n = s.n_aps();
  const Eigen::Index m = s.users();
  const Eigen::Index kk = s.k_total();
  ConsensusH c{CMatrix(n, m), RMatrix(n, m)};
  for (Eigen::Index u = 0; u < m; ++u)
    for (Eigen::Index a = 0; a < n; ++a) {
      double prec = 0.0;
      cplx num{};
      for (Eigen::Index k = 0; k < kk; ++k) {
        const cplx x = s.x_hat(a, u, k);
        const double v = res.v_h(a, u, k);
        prec += std::norm(x) / v;
        num += std::conj(x) * res.y_tilde(a, u, k) / v;
      }
      prec = std::max(prec, 1e-300);
      c.psi_q(a, u) = std::max(1.0 / prec, kVarianceFloor);
      c.q_hat(a, u) = num / prec;
    }
  return c;
}

double activity_llr(const CVector& h_hat, const RVector& gamma_m, const RVector& psi) {
  double llr = 0.0;
  for (Eigen::Index i = 0; i < h_hat.size(); ++i) {
    const double p = std::max(psi(i), 1e-15);
    const double a = gamma_m(i) + p;
    const double e2 = std::norm(h_hat(i));
    llr += (-e2 / a - std::log(kPi * a)) - (-e2 / p - std::log(kPi * p));
  }
  return llr;
}

DetectionResult hard_decision(const ReceiverInput& in, const BeliefState& s) {
  in.validate();
  const Eigen::Index n = s.n_aps();
  const Eigen::Index m = s.users();
  const Residuals res = soft_ic(in.y, s, in.gamma, in.n0);
  const ConsensusX cx = consensus_x(res, s);
  const ConsensusH ch = consensus_h(res, s);
  const Constellation& qpsk = qpsk_gray();

  DetectionResult out;
  out.h_final.resize(n, m);
  out.llr.resize(m);
  out.active_hat.resize(m);
  for (Eigen::Index u = 0; u < m; ++u) {
    const CVector mu = ch.q_hat.col(u);
    const RVector sigma = ch.psi_q.col(u);
    const BgPosterior post = bg_posterior(mu, sigma, in.gamma.col(u), in.lambda);
    out.h_final.col(u) = post.mean;
    out.llr(u) = activity_llr(mu, in.gamma.col(u), sigma);
    out.active_hat(u) = out.llr(u) > 0.0;
  }

  out.x_hard = CMatrix::Zero(m, cx.r_hat.cols());
  const double s2 = std::sqrt(2.0);
  for (Eigen::Index u = 0; u < m; ++u) {
    if (!out.active_hat(u)) continue;
    for (Eigen::Index d = 0; d < cx.r_hat.cols(); ++d) {
      const double g = s2 / cx.psi_r(u, d);
      const cplx soft = cplx(std::tanh(g * cx.r_hat(u, d).real()), std::tanh(g * cx.r_hat(u, d).imag())) / s2;
      out.x_hard(u, d) = qpsk.nearest(soft);
    }
  }
  out.mse_trace_x = s.mse_trace_x;
  out.mse_trace_h = s.mse_trace_h;
  return out;
}

CMatrix gabp_detect(const CMatrix& y_data, const CMatrix& h_hat, const RMatrix& psi_h, const ActiveSet& active,
                    double n0, const BeliefKnobs& knobs) {
  const Eigen::Index n = y_data.rows();
  const Eigen::Index m = h_hat.cols();
  const Eigen::Index kd = y_data.cols();
  if (h_hat.rows() != n || psi_h.rows() != n || psi_h.cols() != m || active.size() != m)
    throw DomainError("channel estimate does not match the received block");
  if (!(n0 > 0.0)) throw DomainError("noise power must be positive");
  if (knobs.t_max < 1 || !(knobs.eta > 0.0 && knobs.eta <= 1.0)) throw DomainError("invalid belief knobs");

  std::vector<Eigen::Index> idx;
  for (Eigen::Index u = 0; u < m; ++u)
    if (active(u)) idx.push_back(u);
  CMatrix out = CMatrix::Zero(m, kd);
  if (idx.empty() || kd == 0) return out;
  const auto na = static_cast<Eigen::Index>(idx.size());

  BeliefState s;
  s.k_pilot = 0;
  s.x_hat = CEdges(n, na, kd);
  s.psi_x = REdges(n, na, kd, 1.0);
  s.h_hat = CEdges(n, na, kd);
  s.psi_h = REdges(n, na, kd);
  s.tau = RMatrix::Ones(kd, na);
  for (Eigen::Index k = 0; k < kd; ++k)
    for (Eigen::Index i = 0; i < na; ++i)
      for (Eigen::Index a = 0; a < n; ++a) {
        s.h_hat(a, i, k) = h_hat(a, idx[static_cast<std::size_t>(i)]);
        s.psi_h(a, i, k) = std::max(psi_h(a, idx[static_cast<std::size_t>(i)]), 0.0);
      }
  const RMatrix no_prior = RMatrix::Zero(n, na);

  for (int t = 1; t <= knobs.t_max; ++t) {
    const double gamma_t = static_cast<double>(t) / static_cast<double>(knobs.t_max);
    const Residuals res = soft_ic(y_data, s, no_prior, n0);
    const ExtrinsicX ex = extrinsic_x(res, s);
    for (Eigen::Index k = 0; k < kd; ++k)
      for (Eigen::Index i = 0; i < na; ++i)
        for (Eigen::Index a = 0; a < n; ++a) {
          const DenoisedX d = denoise_x(ex.r_hat(a, i, k), ex.psi_r(a, i, k), 1.0, gamma_t);
          s.x_hat(a, i, k) = knobs.eta * d.mean + (1.0 - knobs.eta) * s.x_hat(a, i, k);
          s.psi_x(a, i, k) = knobs.eta * d.variance + (1.0 - knobs.eta) * s.psi_x(a, i, k);
          check_finite(std::abs(s.x_hat(a, i, k)) + s.psi_x(a, i, k), "symbol message", t, a, i, k);
        }
  }

  const Residuals res = soft_ic(y_data, s, no_prior, n0);
  const ConsensusX cx = consensus_x(res, s);
  const Constellation& qpsk = qpsk_gray();
  for (Eigen::Index i = 0; i < na; ++i)
    for (Eigen::Index k = 0; k < kd; ++k) out(idx[static_cast<std::size_t>(i)], k) = qpsk.nearest(cx.r_hat(i, k));
  return out;
}

CMatrix genie_gabp_detect(const CMatrix& y_data, const CMatrix& h_true, const ActiveSet& active_true, double n0,
                          const BeliefKnobs& knobs) {
  return gabp_detect(y_data, h_true, RMatrix::Zero(h_true.rows(), h_true.cols()), active_true, n0, knobs);
}

}  // namespace gfree

#pragma once

// Bilinear Gaussian belief propagation for joint activity detection, channel
// estimation and data detection.
//
// Edge messages are stored per (antenna n, user m, time k). x_hat(n,m,k) is
// the soft symbol replica of user m at time k sent towards antenna n, and
// h_hat(n,m,k) the channel replica of link (n,m) sent towards time k.

#include <vector>

#include "gfree/bernoulli_gauss.hpp"
#include "gfree/init_ce.hpp"
#include "gfree/receiver.hpp"
#include "gfree/types.hpp"

namespace gfree {

template <class T>
class EdgeTensor {
 public:
  EdgeTensor() = default;
  EdgeTensor(Eigen::Index n, Eigen::Index m, Eigen::Index k, T fill = T{})
      : n_(n), m_(m), k_(k), v_(static_cast<std::size_t>(n * m * k), fill) {}

  T& operator()(Eigen::Index n, Eigen::Index m, Eigen::Index k) { return v_[index(n, m, k)]; }
  const T& operator()(Eigen::Index n, Eigen::Index m, Eigen::Index k) const { return v_[index(n, m, k)]; }

  Eigen::Index n() const noexcept { return n_; }
  Eigen::Index m() const noexcept { return m_; }
  Eigen::Index k() const noexcept { return k_; }
  std::vector<T>& data() noexcept { return v_; }
  const std::vector<T>& data() const noexcept { return v_; }

 private:
  std::size_t index(Eigen::Index n, Eigen::Index m, Eigen::Index k) const {
    return static_cast<std::size_t>((k * m_ + m) * n_ + n);
  }
  Eigen::Index n_ = 0, m_ = 0, k_ = 0;
  std::vector<T> v_;
};

using CEdges = EdgeTensor<cplx>;
using REdges = EdgeTensor<double>;

/// Lower bound applied to every message variance.
inline constexpr double kVarianceFloor = 1e-12;

struct BeliefKnobs {
  int t_max = 32;
  double eta = 0.5;
};

struct BeliefDiagnostics {
  long clamped_r = 0;  // extrinsic symbol variances hit the floor
  long clamped_q = 0;  // extrinsic channel variances hit the floor
  long tau_saturations = 0;
};

struct BeliefState {
  Eigen::Index k_pilot = 0;
  CEdges x_hat;
  REdges psi_x;
  CEdges h_hat;
  REdges psi_h;
  RMatrix tau;  // K x M
  int iteration = 0;
  std::vector<double> mse_trace_x;  // mean data-edge psi_x per iteration
  std::vector<double> mse_trace_h;  // mean psi_h per iteration
  std::vector<double> emp_trace_x;  // filled only when ground truth is supplied
  std::vector<double> emp_trace_h;
  BeliefDiagnostics diag;

  Eigen::Index n_aps() const noexcept { return x_hat.n(); }
  Eigen::Index users() const noexcept { return x_hat.m(); }
  Eigen::Index k_total() const noexcept { return x_hat.k(); }
};

/// Pilot columns pinned with zero variance, data columns zero
/// mean and unit variance, channel replicas from the initial estimate.
BeliefState initial_state(const CMatrix& pilots, Eigen::Index k_total, const InitialEstimate& init);

struct Residuals {
  CEdges y_tilde;  // y_nk minus every other user's replica, indexed (n, m, k)
  REdges v_y;
  REdges v_x;      // meaningful on data columns only
  REdges v_h;
};

Residuals soft_ic(const CMatrix& y, const BeliefState& s, const RMatrix& gamma, double n0);

/// Leave-one-antenna-out symbol beliefs on data columns; k is offset by K_p.
struct ExtrinsicX {
  CEdges r_hat;  // (n, m, k - K_p)
  REdges psi_r;
};

ExtrinsicX extrinsic_x(const Residuals& res, const BeliefState& s, BeliefDiagnostics* diag = nullptr);

/// Leave-one-time-out channel beliefs; mu(n,m,k) and sigma(n,m,k) form the
/// vector mean and diagonal covariance for user m at time k.
struct ExtrinsicH {
  CEdges mu;
  REdges sigma;
};

ExtrinsicH extrinsic_h(const Residuals& res, const BeliefState& s, BeliefDiagnostics* diag = nullptr);

struct DenoisedX {
  cplx mean;
  double variance;
};

/// Gray-QPSK soft symbol scaled by 1/tau and by the belief scaling gamma_t.
DenoisedX denoise_x(cplx r_hat, double psi_r, double tau, double gamma_t);

/// Bernoulli-Gaussian vector denoiser for one (k, m).
BgPosterior denoise_h(const CVector& mu, const RVector& sigma, const RVector& gamma_m, double lambda);

/// lambda exp(-mu^H (Sigma + Gamma)^-1 mu) tau / (pi^N |Gamma + Sigma|).
double normalization_constant(const CVector& mu, const RVector& sigma, const RVector& gamma_m, double lambda);

/// Optional truth for recording empirical MSE traces.
struct GroundTruth {
  CMatrix h;  // N x M, effective units
  CMatrix x;  // M x K, unit-energy symbols
};

/// One damped message-passing sweep at iteration t (1-based) of t_max.
void belief_sweep(const CMatrix& y, BeliefState& s, const RMatrix& gamma, double lambda, double n0,
                  const BeliefKnobs& knobs, int t);

BeliefState run_belief_consensus(const ReceiverInput& in, const InitialEstimate& init, const BeliefKnobs& knobs,
                                 const GroundTruth* truth = nullptr);

/// Full-consensus statistics of the hard-decision stage.
struct ConsensusX {
  CMatrix r_hat;  // M x K_d
  RMatrix psi_r;
};
struct ConsensusH {
  CMatrix q_hat;  // N x M
  RMatrix psi_q;
};
ConsensusX consensus_x(const Residuals& res, const BeliefState& s);
ConsensusH consensus_h(const Residuals& res, const BeliefState& s);

struct DetectionResult {
  CMatrix x_hard;  // M x K_d, zero rows for users declared inactive
  CMatrix h_final;  // N x M
  ActiveSet active_hat;
  RVector llr;
  std::vector<double> mse_trace_x;
  std::vector<double> mse_trace_h;
};

/// Log-likelihood ratio of activity for one user column observed as
/// h_hat = h + e, e ~ CN(0, diag(psi)): sum_n log CN(h_hat; 0, gamma + psi)
/// - log CN(h_hat; 0, psi). psi is floored at 1e-15.
double activity_llr(const CVector& h_hat, const RVector& gamma_m, const RVector& psi);

/// Final consensus over all edges. Activity is declared where the LLR of the
/// unshrunk consensus channel statistic is positive; h_final is the
/// Bernoulli-Gaussian posterior mean of that statistic.
DetectionResult hard_decision(const ReceiverInput& in, const BeliefState& s);

/// Symbol-only belief propagation with a fixed channel estimate restricted to
/// `active`. Runs on the data block; returns M x K_d hard decisions with zero
/// rows for inactive users.
CMatrix gabp_detect(const CMatrix& y_data, const CMatrix& h_hat, const RMatrix& psi_h, const ActiveSet& active,
                    double n0, const BeliefKnobs& knobs);

/// gabp_detect with the true channel, zero channel error and the true active set.
CMatrix genie_gabp_detect(const CMatrix& y_data, const CMatrix& h_true, const ActiveSet& active_true, double n0,
                          const BeliefKnobs& knobs = {});

}  // namespace gfree

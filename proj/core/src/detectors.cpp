#include "gfree/detectors.hpp"

#include <vector>

#include "gfree/signal.hpp"

namespace gfree {

CMatrix zf_detect(const CMatrix& y_data, const CMatrix& h_hat, const ActiveSet& active_hat,
                  const LinearDetector& det, ZfReport* report) {
  const Eigen::Index n = y_data.rows();
  const Eigen::Index m = h_hat.cols();
  if (h_hat.rows() != n || active_hat.size() != m) throw DomainError("channel estimate does not match the data block");
  if (!(det.regularization >= 0.0) || !std::isfinite(det.regularization))
    throw DomainError("regularization must be finite and non-negative");

  std::vector<Eigen::Index> idx;
  for (Eigen::Index u = 0; u < m; ++u)
    if (active_hat(u)) idx.push_back(u);
  CMatrix out = CMatrix::Zero(m, y_data.cols());
  if (report) *report = ZfReport{};
  if (idx.empty()) return out;

  const auto na = static_cast<Eigen::Index>(idx.size());
  CMatrix ha(n, na);
  for (Eigen::Index i = 0; i < na; ++i) ha.col(i) = h_hat.col(idx[static_cast<std::size_t>(i)]);

  CMatrix est;
  if (det.regularization > 0.0) {
    CMatrix gram = ha.adjoint() * ha;
    gram.diagonal().array() += det.regularization;
    est = gram.ldlt().solve(ha.adjoint() * y_data);
  } else {
    Eigen::CompleteOrthogonalDecomposition<CMatrix> cod(ha);
    cod.setThreshold(1e-10);
    const bool overloaded = n < na;
    if (!overloaded && cod.rank() < na) throw NumericError("channel estimate of the active users is rank deficient");
    if (report) report->overloaded = overloaded;
    est = cod.solve(y_data);
  }

  const Constellation& qpsk = qpsk_gray();
  for (Eigen::Index i = 0; i < na; ++i)
    for (Eigen::Index k = 0; k < y_data.cols(); ++k) out(idx[static_cast<std::size_t>(i)], k) = qpsk.nearest(est(i, k));
  return out;
}

}  // namespace gfree

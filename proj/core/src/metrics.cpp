#include "gfree/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace gfree {

namespace {

void check_same(const BitMatrix& a, const BitMatrix& b, const ActiveSet& t, const ActiveSet& h) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw DomainError("bit matrices differ in shape");
  if (t.size() != a.rows() || h.size() != a.rows()) throw DomainError("activity vectors must have one entry per user");
}

}  // namespace

BerReport ber_with_lost_bits(const BitMatrix& true_bits, const BitMatrix& hat_bits, const ActiveSet& active_true,
                             const ActiveSet& active_hat) {
  check_same(true_bits, hat_bits, active_true, active_hat);
  BerReport r;
  const long per_user = static_cast<long>(true_bits.cols());
  for (Eigen::Index u = 0; u < true_bits.rows(); ++u) {
    if (!active_true(u)) continue;
    r.total_bits += per_user;
    if (!active_hat(u)) {
      r.lost_bits += per_user;
      continue;
    }
    r.detected_bit_errors += (true_bits.row(u).array() != hat_bits.row(u).array()).count();
  }
  if (r.total_bits == 0) {
    r.empty = true;
    return r;
  }
  r.ber = static_cast<double>(r.detected_bit_errors + r.lost_bits) / static_cast<double>(r.total_bits);
  return r;
}

NmseReport nmse(const CMatrix& h_true, const CMatrix& h_hat) {
  if (h_true.rows() != h_hat.rows() || h_true.cols() != h_hat.cols()) throw DomainError("channel matrices differ in shape");
  NmseReport r;
  const double ref = h_true.squaredNorm();
  if (ref == 0.0) {
    r.undefined = true;
    r.nmse = std::nan("");
    return r;
  }
  r.nmse = (h_true - h_hat).squaredNorm() / ref;
  return r;
}

double block_error_rate(const BitMatrix& true_bits, const BitMatrix& hat_bits, const ActiveSet& active_true,
                        const ActiveSet& active_hat) {
  check_same(true_bits, hat_bits, active_true, active_hat);
  int users = 0, errors = 0;
  for (Eigen::Index u = 0; u < true_bits.rows(); ++u) {
    if (!active_true(u)) continue;
    ++users;
    if (!active_hat(u) || (true_bits.row(u).array() != hat_bits.row(u).array()).any()) ++errors;
  }
  return users == 0 ? 0.0 : static_cast<double>(errors) / users;
}

double effective_throughput(double block_error, int k_data, int bits_per_symbol) {
  if (!(block_error >= 0.0 && block_error <= 1.0)) throw DomainError("block error rate must lie in [0, 1]");
  if (k_data < 0 || bits_per_symbol < 1) throw DomainError("invalid frame dimensions");
  return (1.0 - block_error) * k_data * bits_per_symbol;
}

DetectionCounts detection_errors(const ActiveSet& active_true, const ActiveSet& active_hat) {
  if (active_true.size() != active_hat.size()) throw DomainError("activity vectors differ in length");
  DetectionCounts c;
  for (Eigen::Index u = 0; u < active_true.size(); ++u) {
    if (active_true(u) && !active_hat(u)) ++c.md;
    if (!active_true(u) && active_hat(u)) ++c.fa;
  }
  return c;
}

SeTracking se_tracking_report(const std::vector<double>& predicted, const std::vector<double>& empirical) {
  if (predicted.size() != empirical.size()) throw DomainError("traces differ in length");
  SeTracking r;
  r.ratio.reserve(predicted.size());
  for (std::size_t i = 0; i < predicted.size(); ++i) r.ratio.push_back(empirical[i] / std::max(predicted[i], 1e-300));
  for (std::size_t i = predicted.size() / 2; i < r.ratio.size(); ++i) r.max_final_half = std::max(r.max_final_half, r.ratio[i]);
  return r;
}

namespace {

std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t q = i; q <= j; ++q) r[order[q]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) throw DomainError("spearman needs two equal-length series");
  const std::vector<double> ra = ranks(a), rb = ranks(b);
  const double n = static_cast<double>(a.size());
  const double mean = (n + 1.0) / 2.0;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - mean) * (rb[i] - mean);
    saa += (ra[i] - mean) * (ra[i] - mean);
    sbb += (rb[i] - mean) * (rb[i] - mean);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

}  // namespace gfree

#pragma once

// Figures of merit: BER with lost bits, NMSE, missed detections, effective
// throughput and state-evolution tracking.

#include <cstdint>
#include <string>
#include <vector>

#include "gfree/types.hpp"

namespace gfree {

struct BerReport {
  double ber = 0.0;
  long detected_bit_errors = 0;  // among users that are active and detected
  long lost_bits = 0;            // every bit of a missed active user
  long total_bits = 0;           // |A_true| * bits per user
  bool empty = false;            // no active users; ber reported as 0
};

BerReport ber_with_lost_bits(const BitMatrix& true_bits, const BitMatrix& hat_bits, const ActiveSet& active_true,
                             const ActiveSet& active_hat);

struct NmseReport {
  double nmse = 0.0;
  bool undefined = false;  // all-zero reference channel
};

NmseReport nmse(const CMatrix& h_true, const CMatrix& h_hat);

/// Fraction of active users whose frame has a bit error or was missed.
double block_error_rate(const BitMatrix& true_bits, const BitMatrix& hat_bits, const ActiveSet& active_true,
                        const ActiveSet& active_hat);

/// (1 - P_e) * K_d * b, bits per user frame.
double effective_throughput(double block_error, int k_data, int bits_per_symbol);

struct DetectionCounts {
  int md = 0;
  int fa = 0;
};

DetectionCounts detection_errors(const ActiveSet& active_true, const ActiveSet& active_hat);

struct SeTracking {
  std::vector<double> ratio;  // empirical / predicted per iteration
  double max_final_half = 0.0;
};

/// Predicted values are floored at 1e-300 before dividing.
SeTracking se_tracking_report(const std::vector<double>& predicted, const std::vector<double>& empirical);

/// Spearman rank correlation with average ranks for ties.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

struct TrialOutcome {
  std::string receiver;
  double ber = 0.0;  // NaN for estimator-only rows
  double nmse = 0.0;
  int md = 0;
  int fa = 0;
  double throughput_bits = 0.0;  // system-wide per frame
  int iterations_run = 0;
  int active_users = 0;  // |A_true| of the realization
  std::uint64_t realization_hash = 0;
  std::string error;  // empty unless the receiver failed
};

}  // namespace gfree

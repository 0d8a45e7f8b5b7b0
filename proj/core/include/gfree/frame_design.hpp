#pragma once

// Low-coherence unit-norm frames used as non-orthogonal pilot matrices.
//
// A frame is a J x L complex matrix (J < L) whose columns are unit-norm
// frame vectors. Column l becomes the pilot sequence of user l once the
// frame is transposed into the M x K_p pilot block.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "gfree/types.hpp"

namespace gfree {

class FrameMatrix {
 public:
  /// Validates J <= L and unit column norms (within 1e-9).
  explicit FrameMatrix(CMatrix entries);

  /// Normalizes every column to unit norm first. Zero columns are rejected.
  static FrameMatrix normalized(CMatrix entries);

  const CMatrix& entries() const noexcept { return entries_; }
  Eigen::Index rows() const noexcept { return entries_.rows(); }
  Eigen::Index cols() const noexcept { return entries_.cols(); }
  RVector column_norms() const { return entries_.colwise().norm().transpose(); }

 private:
  CMatrix entries_;
};

struct CsidcoConfig {
  int outer_iterations = 40;
  double solver_tolerance = 1e-7;
  int solver_max_steps = 400;
  int tighten_rounds = 50;
  std::uint64_t seed = 1;
  // Coherence-bounded alternating projection run between CSIDCO and tighten.
  // Zero iterations skips it.
  int projection_iterations = 3000;
  double coherence_target_ratio = 1.12;  // target = ratio * welch_bound
};

/// One per-column quadratic subproblem over x = [Re f; Im f; t_R; t_I].
struct QcqpSubproblem {
  RMatrix phi;     // (2J+2)^2, selects the slack variables
  RMatrix a_r1;    // (L-1) x (2J+2)
  RMatrix a_r2;
  RMatrix a_i1;
  RMatrix a_i2;
  RMatrix xi;      // (2J+2)^2, selects the frame-vector part
  RVector b;       // [Re f~; Im f~; 0; 0]
  double radius = 0.0;
  RVector start;   // ball centre with slacks at the current max |Re|/|Im| correlations

  Eigen::Index dim() const noexcept { return phi.rows(); }
  Eigen::Index frame_dim() const noexcept { return (phi.rows() - 2) / 2; }
  double objective(const RVector& x) const { return x.dot(phi * x); }
  /// x^T Xi x - 2 b^T x + 1 - T^2
  double ball_value(const RVector& x) const { return x.dot(xi * x) - 2.0 * b.dot(x) + 1.0 - radius * radius; }
  /// Largest value over all four linear blocks applied to x.
  double max_linear_value(const RVector& x) const;
};

/// Solver failure; carries the last iterate so callers can inspect it.
class SolverError : public NumericError {
 public:
  SolverError(const std::string& what, RVector last_iterate)
      : NumericError(what), last_iterate_(std::move(last_iterate)) {}
  const RVector& last_iterate() const noexcept { return last_iterate_; }

 private:
  RVector last_iterate_;
};

double mutual_coherence(const CMatrix& frame);
inline double mutual_coherence(const FrameMatrix& f) { return mutual_coherence(f.entries()); }

/// sqrt((L-J)/(J(L-1))), valid for J < L <= J^2.
double welch_bound(int j, int l);

struct FrameBounds {
  double alpha = 0.0;
  double beta = 0.0;
  double spread() const noexcept { return (beta - alpha) / alpha; }
};
FrameBounds frame_bounds(const CMatrix& frame);
inline FrameBounds frame_bounds(const FrameMatrix& f) { return frame_bounds(f.entries()); }

/// Largest |<f_col, f_other>| (normalized) between column `col` and the rest.
double column_coherence(const CMatrix& frame, Eigen::Index col);

/// Column index is zero-based.
QcqpSubproblem build_subproblem(const FrameMatrix& frame, Eigen::Index col);

struct SubproblemSolution {
  RVector x;
  double objective = 0.0;
  int newton_steps = 0;
  /// First 2J entries decoded into a unit-norm column.
  CVector column() const;
};

SubproblemSolution solve_subproblem(const QcqpSubproblem& p, const CsidcoConfig& cfg);

struct CsidcoTrace {
  std::vector<double> coherence;  // after each outer iteration; entry 0 is the start frame
  int accepted_updates = 0;
  int rejected_updates = 0;
  int reseeded_columns = 0;
};

/// Column-normalized i.i.d. complex Gaussian J x L frame.
FrameMatrix gaussian_frame(int j, int l, std::uint64_t seed);

/// J rows drawn without replacement from the L-point DFT, columns normalized.
FrameMatrix truncated_dft_frame(int j, int l, std::uint64_t seed);

FrameMatrix csidco_design(int j, int l, const CsidcoConfig& cfg, CsidcoTrace* trace = nullptr);

/// Same sweeps as csidco_design, starting from a given frame.
FrameMatrix csidco_refine(const FrameMatrix& start, const CsidcoConfig& cfg, CsidcoTrace* trace = nullptr);

/// Closest tight frame via the polar factor, then column renormalization, `rounds` times.
FrameMatrix tighten(const FrameMatrix& frame, int rounds);

/// Alternating projection between Gram matrices with unit diagonal and
/// off-diagonal moduli clipped at `target`, and Gram matrices of (L/J)-tight
/// frames. Returns the resulting tight frame with unit-norm columns.
FrameMatrix coherence_projection(const FrameMatrix& frame, double target, int iterations);

/// csidco_design, then coherence_projection (kept only if it lowers the
/// coherence), then tighten(cfg.tighten_rounds).
FrameMatrix design_pilots(int j, int l, const CsidcoConfig& cfg, CsidcoTrace* trace = nullptr);

// Binary file: "GFRM", u32 version, u64 J, u64 L, then J*L (re, im) float64
// pairs in column-major order. All integers and floats little-endian.
inline constexpr std::uint32_t kFrameFormatVersion = 1;

void save_frame(const std::filesystem::path& path, const FrameMatrix& frame);
FrameMatrix load_frame(const std::filesystem::path& path);

/// FNV-1a over the file bytes, hex encoded. Used for sweep provenance.
std::string file_content_hash(const std::filesystem::path& path);

}  // namespace gfree

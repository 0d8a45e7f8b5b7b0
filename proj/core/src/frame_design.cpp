#include "gfree/frame_design.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>
#include <sstream>

#include "gfree/random.hpp"

namespace gfree {

namespace {

constexpr double kUnitNormTol = 1e-9;

void check_unit_norm(const CMatrix& m) {
  for (Eigen::Index c = 0; c < m.cols(); ++c) {
    const double n = m.col(c).norm();
    if (!(std::abs(n - 1.0) <= kUnitNormTol)) {
      std::ostringstream os;
      os << "frame column " << c << " has norm " << n << ", expected 1";
      throw DomainError(os.str());
    }
  }
}

}  // namespace

FrameMatrix::FrameMatrix(CMatrix entries) : entries_(std::move(entries)) {
  if (entries_.rows() < 1 || entries_.cols() < 1) throw DomainError("frame must be non-empty");
  if (entries_.rows() > entries_.cols()) throw DomainError("frame needs J <= L");
  check_unit_norm(entries_);
}

FrameMatrix FrameMatrix::normalized(CMatrix entries) {
  for (Eigen::Index c = 0; c < entries.cols(); ++c) {
    const double n = entries.col(c).norm();
    if (n == 0.0 || !std::isfinite(n)) throw DomainError("cannot normalize a zero or non-finite column");
    entries.col(c) /= n;
  }
  return FrameMatrix(std::move(entries));
}

double mutual_coherence(const CMatrix& frame) {
  if (frame.cols() < 2) throw DomainError("mutual coherence needs at least two columns");
  const RVector norms = frame.colwise().norm().transpose();
  const CMatrix gram = frame.adjoint() * frame;
  double mu = 0.0;
  for (Eigen::Index a = 0; a < frame.cols(); ++a)
    for (Eigen::Index b = a + 1; b < frame.cols(); ++b)
      mu = std::max(mu, std::abs(gram(a, b)) / (norms(a) * norms(b)));
  return std::min(mu, 1.0);
}

double column_coherence(const CMatrix& frame, Eigen::Index col) {
  const double own = frame.col(col).norm();
  const CVector corr = frame.adjoint() * frame.col(col);
  double mu = 0.0;
  for (Eigen::Index c = 0; c < frame.cols(); ++c) {
    if (c == col) continue;
    mu = std::max(mu, std::abs(corr(c)) / (own * frame.col(c).norm()));
  }
  return mu;
}

double welch_bound(int j, int l) {
  if (j < 1 || l <= j) throw DomainError("Welch bound requires an overcomplete frame (L > J)");
  if (static_cast<long long>(l) > static_cast<long long>(j) * j) throw DomainError("Welch bound requires L <= J^2");
  return std::sqrt(static_cast<double>(l - j) / (static_cast<double>(j) * (l - 1)));
}

FrameBounds frame_bounds(const CMatrix& frame) {
  if (frame.size() == 0 || frame.norm() == 0.0) throw DomainError("frame bounds of a zero frame");
  const CMatrix op = frame * frame.adjoint();
  Eigen::SelfAdjointEigenSolver<CMatrix> es(op, Eigen::EigenvaluesOnly);
  return {es.eigenvalues().minCoeff(), es.eigenvalues().maxCoeff()};
}

double QcqpSubproblem::max_linear_value(const RVector& x) const {
  return std::max({(a_r1 * x).maxCoeff(), (a_r2 * x).maxCoeff(), (a_i1 * x).maxCoeff(), (a_i2 * x).maxCoeff()});
}

QcqpSubproblem build_subproblem(const FrameMatrix& frame, Eigen::Index col) {
  const CMatrix& f = frame.entries();
  const Eigen::Index j = f.rows();
  const Eigen::Index l = f.cols();
  if (col < 0 || col >= l) throw DomainError("column index out of range");
  if (l < 2) throw DomainError("subproblem needs at least two columns");
  const Eigen::Index d = 2 * j + 2;

  // F~_l: the frame with column `col` pruned.
  CMatrix others(j, l - 1);
  for (Eigen::Index c = 0, o = 0; c < l; ++c)
    if (c != col) others.col(o++) = f.col(c);
  const RMatrix re_t = others.real().transpose();
  const RMatrix im_t = others.imag().transpose();
  const RVector ones = RVector::Ones(l - 1);

  QcqpSubproblem p;
  p.phi = RMatrix::Zero(d, d);
  p.phi(2 * j, 2 * j) = 1.0;
  p.phi(2 * j + 1, 2 * j + 1) = 1.0;
  p.xi = RMatrix::Zero(d, d);
  p.xi.topLeftCorner(2 * j, 2 * j).setIdentity();

  p.a_r1 = RMatrix::Zero(l - 1, d);
  p.a_r1 << re_t, im_t, -ones, RVector::Zero(l - 1);
  p.a_r2 = RMatrix::Zero(l - 1, d);
  p.a_r2 << -re_t, -im_t, -ones, RVector::Zero(l - 1);
  p.a_i1 = RMatrix::Zero(l - 1, d);
  p.a_i1 << -im_t, re_t, RVector::Zero(l - 1), -ones;
  p.a_i2 = RMatrix::Zero(l - 1, d);
  p.a_i2 << im_t, -re_t, RVector::Zero(l - 1), -ones;

  p.b = RVector::Zero(d);
  p.b.head(j) = f.col(col).real();
  p.b.segment(j, j) = f.col(col).imag();

  const CVector corr = others.adjoint() * f.col(col);
  const double own_sq = f.col(col).squaredNorm();
  double worst_sq = 0.0;
  for (Eigen::Index c = 0; c < l - 1; ++c)
    worst_sq = std::max(worst_sq, std::norm(corr(c)) / (own_sq * others.col(c).squaredNorm()));
  p.radius = 1.0 - worst_sq;
  if (!(p.radius > 1e-12)) throw DomainError("degenerate column: duplicated frame vector gives zero radius");

  p.start = p.b;
  p.start(2 * j) = corr.real().cwiseAbs().maxCoeff();
  p.start(2 * j + 1) = corr.imag().cwiseAbs().maxCoeff();
  return p;
}

CVector SubproblemSolution::column() const {
  const Eigen::Index j = (x.size() - 2) / 2;
  CVector c(j);
  for (Eigen::Index i = 0; i < j; ++i) c(i) = cplx(x(i), x(j + i));
  const double n = c.norm();
  if (n == 0.0) throw NumericError("subproblem solution has a zero frame vector");
  return c / n;
}

namespace {

// Log-barrier state for one QCQP. The four linear blocks are stacked into G.
struct Barrier {
  const QcqpSubproblem& p;
  RMatrix g;
  Eigen::Index m;

  explicit Barrier(const QcqpSubproblem& prob) : p(prob) {
    g.resize(4 * p.a_r1.rows(), p.dim());
    g << p.a_r1, p.a_r2, p.a_i1, p.a_i2;
    m = g.rows() + 1;
  }

  bool strictly_feasible(const RVector& x, RVector& lin, double& quad) const {
    lin = g * x;
    quad = p.ball_value(x);
    return lin.maxCoeff() < 0.0 && quad < 0.0;
  }

  double value(double s, const RVector& x, const RVector& lin, double quad) const {
    return s * p.objective(x) - (-lin.array()).log().sum() - std::log(-quad);
  }
};

}  // namespace

SubproblemSolution solve_subproblem(const QcqpSubproblem& p, const CsidcoConfig& cfg) {
  if (cfg.solver_tolerance <= 0.0) throw DomainError("solver tolerance must be positive");
  if (cfg.solver_max_steps < 1) throw DomainError("solver step budget must be positive");
  const Eigen::Index d = p.dim();
  const Eigen::Index j = p.frame_dim();
  Barrier bar(p);

  // Strictly interior start: lift the slacks off the active correlations.
  RVector x = p.start;
  const double lift = 1e-3 + 0.05 * std::max(p.start(2 * j), p.start(2 * j + 1));
  x(2 * j) += lift;
  x(2 * j + 1) += lift;

  RVector lin;
  double quad = 0.0;
  if (!bar.strictly_feasible(x, lin, quad)) throw SolverError("starting point is not strictly feasible", x);

  SubproblemSolution sol;
  const double start_objective = p.objective(p.start);
  double s = static_cast<double>(bar.m) / std::max(start_objective, 1e-6);
  constexpr double kGrowth = 12.0;
  int steps = 0;

  while (true) {
    // Centering by damped Newton.
    for (;;) {
      if (++steps > cfg.solver_max_steps) throw SolverError("QCQP barrier solver exceeded its step budget", x);
      const RVector inv = (-lin.array()).inverse().matrix();
      const RVector grad_q = 2.0 * (p.xi * x) - 2.0 * p.b;
      RVector grad = 2.0 * s * (p.phi * x) + bar.g.transpose() * inv - grad_q / quad;
      RMatrix hess = 2.0 * s * p.phi + bar.g.transpose() * inv.cwiseAbs2().asDiagonal() * bar.g +
                     (grad_q * grad_q.transpose()) / (quad * quad) - 2.0 * p.xi / quad;
      const RVector step = hess.ldlt().solve(-grad);
      const double decrement = -grad.dot(step);
      if (!std::isfinite(decrement)) throw SolverError("non-finite Newton decrement", x);
      if (decrement / 2.0 <= 1e-9) break;

      const double f0 = bar.value(s, x, lin, quad);
      double t = 1.0;
      RVector trial(d), trial_lin;
      double trial_quad = 0.0;
      bool moved = false;
      for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
        trial = x + t * step;
        if (!bar.strictly_feasible(trial, trial_lin, trial_quad)) continue;
        const double fv = bar.value(s, trial, trial_lin, trial_quad);
        if (fv < f0 && fv <= f0 - 0.25 * t * decrement) {
          moved = true;
          break;
        }
      }
      if (!moved || (trial - x).norm() <= 1e-15 * (1.0 + x.norm())) break;  // numerically centred
      x = trial;
      lin = trial_lin;
      quad = trial_quad;
    }
    if (static_cast<double>(bar.m) / s < cfg.solver_tolerance) break;
    s *= kGrowth;
  }

  sol.newton_steps = steps;
  // The barrier iterate sits strictly inside; snap the slacks onto the
  // correlations they bound, which can only lower the objective.
  RVector snapped = x;
  {
    RVector z = x;
    z(2 * j) = 0.0;
    z(2 * j + 1) = 0.0;
    snapped(2 * j) = std::max((p.a_r1 * z).maxCoeff(), (p.a_r2 * z).maxCoeff());
    snapped(2 * j + 1) = std::max((p.a_i1 * z).maxCoeff(), (p.a_i2 * z).maxCoeff());
    snapped(2 * j) = std::max(snapped(2 * j), 0.0);
    snapped(2 * j + 1) = std::max(snapped(2 * j + 1), 0.0);
  }
  if (p.objective(snapped) <= start_objective) {
    sol.x = snapped;
  } else {
    sol.x = p.start;
  }
  sol.objective = p.objective(sol.x);
  return sol;
}

FrameMatrix gaussian_frame(int j, int l, std::uint64_t seed) {
  if (j < 1 || l < 1) throw DomainError("frame dimensions must be positive");
  Rng rng(seed);
  return FrameMatrix::normalized(complex_normal_matrix(rng, j, l));
}

FrameMatrix truncated_dft_frame(int j, int l, std::uint64_t seed) {
  if (j < 1 || l < j) throw DomainError("truncated DFT needs 1 <= J <= L");
  Rng rng(seed);
  std::vector<int> rows(static_cast<std::size_t>(l));
  std::iota(rows.begin(), rows.end(), 0);
  std::shuffle(rows.begin(), rows.end(), rng);
  CMatrix f(j, l);
  for (int r = 0; r < j; ++r)
    for (int c = 0; c < l; ++c) {
      const double ph = -2.0 * kPi * static_cast<double>(rows[static_cast<std::size_t>(r)]) * c / l;
      f(r, c) = std::polar(1.0, ph);
    }
  return FrameMatrix::normalized(std::move(f));
}

FrameMatrix csidco_design(int j, int l, const CsidcoConfig& cfg, CsidcoTrace* trace) {
  (void)welch_bound(j, l);  // enforces J < L <= J^2
  return csidco_refine(gaussian_frame(j, l, cfg.seed), cfg, trace);
}

namespace {

// Rotates every other column so its correlation with `col` is real and
// non-negative. Column phases do not change any coherence, but with the
// correlations on the real axis the slack objective equals the squared
// worst correlation at the ball centre.
CMatrix phase_aligned(const CMatrix& f, Eigen::Index col) {
  CMatrix g = f;
  const CVector c = f.adjoint() * f.col(col);
  for (Eigen::Index k = 0; k < f.cols(); ++k) {
    if (k == col || std::abs(c(k)) == 0.0) continue;
    g.col(k) *= c(k) / std::abs(c(k));
  }
  return g;
}

}  // namespace

FrameMatrix csidco_refine(const FrameMatrix& start, const CsidcoConfig& cfg, CsidcoTrace* trace) {
  if (cfg.outer_iterations < 0) throw DomainError("outer iteration count must be non-negative");
  Rng rng(derive_seed(cfg.seed, {0x5eed}));
  CMatrix f = start.entries();
  const Eigen::Index j = f.rows();
  const Eigen::Index l = f.cols();

  CsidcoTrace local;
  CsidcoTrace& tr = trace ? *trace : local;
  tr = CsidcoTrace{};
  tr.coherence.push_back(mutual_coherence(f));

  for (int outer = 0; outer < cfg.outer_iterations; ++outer) {
    int accepted = 0;
    for (Eigen::Index col = 0; col < l; ++col) {
      QcqpSubproblem p;
      try {
        p = build_subproblem(FrameMatrix(phase_aligned(f, col)), col);
      } catch (const DomainError&) {
        // Duplicated column: draw a fresh direction and move on.
        CVector fresh(j);
        for (Eigen::Index r = 0; r < j; ++r) fresh(r) = complex_normal(rng);
        f.col(col) = fresh / fresh.norm();
        ++tr.reseeded_columns;
        continue;
      }
      const double before = column_coherence(f, col);
      const CVector old = f.col(col);
      const CVector proposal = solve_subproblem(p, cfg).column();

      // Accept only if this column's worst correlation does not grow; shorter
      // steps along the same direction are tried before giving up.
      bool ok = false;
      double step = 1.0;
      for (int tries = 0; tries < 4 && !ok; ++tries, step *= 0.5) {
        CVector cand = old + step * (proposal - old);
        const double n = cand.norm();
        if (n == 0.0) continue;
        f.col(col) = cand / n;
        ok = column_coherence(f, col) <= before;
      }
      if (ok) {
        ++accepted;
        ++tr.accepted_updates;
      } else {
        f.col(col) = old;
        ++tr.rejected_updates;
      }
    }
    tr.coherence.push_back(mutual_coherence(f));
    if (accepted == 0) break;
  }
  return FrameMatrix::normalized(std::move(f));
}

FrameMatrix tighten(const FrameMatrix& frame, int rounds) {
  if (rounds < 0) throw DomainError("tightening rounds must be non-negative");
  if (rounds == 0) return frame;
  CMatrix f = frame.entries();
  const double j = static_cast<double>(f.rows());
  const double l = static_cast<double>(f.cols());
  for (int r = 0; r < rounds; ++r) {
    Eigen::BDCSVD<CMatrix> svd(f, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const RVector& sv = svd.singularValues();
    if (sv.size() < f.rows() || sv.minCoeff() <= 1e-12 * sv.maxCoeff())
      throw NumericError("tightening needs a full row rank frame", r);
    f = std::sqrt(l / j) * svd.matrixU() * svd.matrixV().adjoint();
    for (Eigen::Index c = 0; c < f.cols(); ++c) f.col(c) /= f.col(c).norm();
  }
  return FrameMatrix::normalized(std::move(f));
}

FrameMatrix coherence_projection(const FrameMatrix& frame, double target, int iterations) {
  if (iterations < 0) throw DomainError("projection iterations must be non-negative");
  if (!(target > 0.0 && target <= 1.0)) throw DomainError("coherence target must lie in (0, 1]");
  if (iterations == 0) return frame;
  const Eigen::Index j = frame.rows();
  const Eigen::Index l = frame.cols();
  const double scale = static_cast<double>(l) / static_cast<double>(j);
  CMatrix g = frame.entries().adjoint() * frame.entries();
  Eigen::SelfAdjointEigenSolver<CMatrix> es;
  CMatrix u;
  for (int it = 0; it < iterations; ++it) {
    for (Eigen::Index c = 0; c < l; ++c)
      for (Eigen::Index r = 0; r < l; ++r) {
        if (r == c) {
          g(r, c) = 1.0;
          continue;
        }
        const double a = std::abs(g(r, c));
        if (a > target) g(r, c) *= target / a;
      }
    es.compute(g);
    if (es.info() != Eigen::Success) throw NumericError("Gram eigendecomposition failed", it);
    u = es.eigenvectors().rightCols(j);
    g = scale * u * u.adjoint();
  }
  return FrameMatrix::normalized(std::sqrt(scale) * u.adjoint());
}

FrameMatrix design_pilots(int j, int l, const CsidcoConfig& cfg, CsidcoTrace* trace) {
  FrameMatrix f = csidco_design(j, l, cfg, trace);
  if (cfg.projection_iterations > 0) {
    FrameMatrix p = coherence_projection(f, cfg.coherence_target_ratio * welch_bound(j, l), cfg.projection_iterations);
    if (mutual_coherence(p) < mutual_coherence(f)) f = std::move(p);
  }
  return tighten(f, cfg.tighten_rounds);
}

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}
void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}
void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

std::uint64_t get_u(const std::string& in, std::size_t pos, int width) {
  std::uint64_t v = 0;
  for (int i = 0; i < width; ++i)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + static_cast<std::size_t>(i)])) << (8 * i);
  return v;
}

std::string read_all(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(is), {});
}

constexpr char kMagic[4] = {'G', 'F', 'R', 'M'};
constexpr std::size_t kHeaderBytes = 4 + 4 + 8 + 8;

}  // namespace

void save_frame(const std::filesystem::path& path, const FrameMatrix& frame) {
  const CMatrix& f = frame.entries();
  std::string buf(kMagic, 4);
  put_u32(buf, kFrameFormatVersion);
  put_u64(buf, static_cast<std::uint64_t>(f.rows()));
  put_u64(buf, static_cast<std::uint64_t>(f.cols()));
  for (Eigen::Index c = 0; c < f.cols(); ++c)
    for (Eigen::Index r = 0; r < f.rows(); ++r) {
      put_f64(buf, f(r, c).real());
      put_f64(buf, f(r, c).imag());
    }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot write " + path.string());
  os.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!os) throw FormatError("short write to " + path.string());
}

FrameMatrix load_frame(const std::filesystem::path& path) {
  const std::string buf = read_all(path);
  if (buf.size() < kHeaderBytes) throw FormatError("frame file truncated in header");
  if (std::memcmp(buf.data(), kMagic, 4) != 0) throw FormatError("not a frame file (bad magic)");
  const auto version = static_cast<std::uint32_t>(get_u(buf, 4, 4));
  if (version != kFrameFormatVersion)
    throw FormatError("unsupported frame format version " + std::to_string(version));
  const std::uint64_t j = get_u(buf, 8, 8);
  const std::uint64_t l = get_u(buf, 16, 8);
  if (j == 0 || l == 0 || j > l || l > (1u << 20)) throw FormatError("frame header has invalid dimensions");
  const std::uint64_t expected = kHeaderBytes + j * l * 16;
  if (buf.size() != expected) throw FormatError("frame file size does not match its J x L header");
  CMatrix f(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(l));
  std::size_t pos = kHeaderBytes;
  for (Eigen::Index c = 0; c < f.cols(); ++c)
    for (Eigen::Index r = 0; r < f.rows(); ++r) {
      const double re = std::bit_cast<double>(get_u(buf, pos, 8));
      const double im = std::bit_cast<double>(get_u(buf, pos + 8, 8));
      f(r, c) = cplx(re, im);
      pos += 16;
    }
  try {
    return FrameMatrix(std::move(f));
  } catch (const DomainError& e) {
    throw FormatError(std::string("frame file violates frame invariants: ") + e.what());
  }
}

std::string file_content_hash(const std::filesystem::path& path) {
  const std::string buf = read_all(path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : buf) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

}  // namespace gfree

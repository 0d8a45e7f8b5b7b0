#include "gfree/signal.hpp"

#include <cmath>
#include <random>

#include "gfree/random.hpp"

namespace gfree {

int Constellation::slice(cplx x) const {
  int best = 0;
  double best_d = std::norm(x - points[0]);
  for (int q = 1; q < static_cast<int>(points.size()); ++q) {
    const double d = std::norm(x - points[static_cast<std::size_t>(q)]);
    if (d < best_d) {
      best_d = d;
      best = q;
    }
  }
  return best;
}

const Constellation& qpsk_gray() {
  static const Constellation c = [] {
    Constellation k;
    const double a = 1.0 / std::sqrt(2.0);
    for (int q = 0; q < 4; ++q) {
      const double re = (q & 2) ? -a : a;
      const double im = (q & 1) ? -a : a;
      k.points[static_cast<std::size_t>(q)] = cplx(re, im);
    }
    return k;
  }();
  return c;
}

CMatrix TxFrame::x() const {
  CMatrix out(users(), k_pilot() + k_data());
  out << x_pilot, x_data;
  return out;
}

BitMatrix random_bits(std::uint64_t seed, Eigen::Index users, Eigen::Index n_bits) {
  Rng rng(seed);
  std::bernoulli_distribution coin(0.5);
  BitMatrix b(users, n_bits);
  for (Eigen::Index c = 0; c < n_bits; ++c)
    for (Eigen::Index r = 0; r < users; ++r) b(r, c) = coin(rng) ? 1 : 0;
  return b;
}

TxFrame assemble_tx(const FrameMatrix& pilots, const BitMatrix& bits, const ActiveSet& active, double power_dbm) {
  const Eigen::Index m = pilots.cols();
  const Eigen::Index kp = pilots.rows();
  const Constellation& qpsk = qpsk_gray();
  if (active.size() != m) throw DomainError("activity vector length differs from the number of pilot columns");
  if (bits.rows() != m) throw DomainError("bit matrix needs one row per user");
  if (bits.cols() % qpsk.bits_per_symbol != 0) throw DomainError("bit count is not a whole number of symbols");
  if (!std::isfinite(power_dbm)) throw DomainError("transmit power must be finite");

  TxFrame tx;
  tx.tx_power_dbm = power_dbm;
  tx.amplitude = std::sqrt(dbm_to_watts(power_dbm));
  tx.active = active;
  tx.data_bits = bits;
  const Eigen::Index kd = bits.cols() / qpsk.bits_per_symbol;
  tx.x_pilot = CMatrix::Zero(m, kp);
  tx.x_data = CMatrix::Zero(m, kd);
  const double pilot_gain = tx.amplitude * std::sqrt(static_cast<double>(kp));
  for (Eigen::Index u = 0; u < m; ++u) {
    if (!active(u)) continue;
    tx.x_pilot.row(u) = pilot_gain * pilots.entries().col(u).transpose();
    for (Eigen::Index k = 0; k < kd; ++k) tx.x_data(u, k) = tx.amplitude * qpsk.map(bits(u, 2 * k), bits(u, 2 * k + 1));
  }
  return tx;
}

RxFrame received_signal(const TxFrame& tx, const CMatrix& h, const CMatrix& w, double n0) {
  if (h.cols() != tx.users()) throw DomainError("channel and transmit frame disagree on the user count");
  const Eigen::Index k = tx.k_pilot() + tx.k_data();
  if (w.rows() != h.rows() || w.cols() != k) throw DomainError("noise block has the wrong shape");
  RxFrame rx;
  rx.n0 = n0;
  rx.y = h * tx.x() + w;
  return rx;
}

RxFrame transmit(const TxFrame& tx, const ChannelRealization& ch, std::uint64_t seed) {
  Rng rng(seed);
  const CMatrix w = complex_normal_matrix(rng, ch.h.rows(), tx.k_pilot() + tx.k_data(), ch.noise_power_n0);
  return received_signal(tx, ch.h, w, ch.noise_power_n0);
}

BitMatrix demap(const CMatrix& x) {
  const Constellation& qpsk = qpsk_gray();
  BitMatrix b(x.rows(), 2 * x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r)
    for (Eigen::Index k = 0; k < x.cols(); ++k) {
      const int q = qpsk.slice(x(r, k));
      b(r, 2 * k) = Constellation::bit(q, 0);
      b(r, 2 * k + 1) = Constellation::bit(q, 1);
    }
  return b;
}

}  // namespace gfree

#pragma once

// Gray-QPSK mapping, transmit frame assembly and the linear uplink Y = HX + W.

#include <array>
#include <cstdint>

#include "gfree/channel.hpp"
#include "gfree/frame_design.hpp"
#include "gfree/types.hpp"

namespace gfree {

/// Gray QPSK. Label q = 2*b0 + b1 maps to ((1 - 2 b0) + j (1 - 2 b1)) / sqrt(2).
struct Constellation {
  std::array<cplx, 4> points;
  int bits_per_symbol = 2;

  cplx map(std::uint8_t b0, std::uint8_t b1) const { return points[2u * b0 + b1]; }
  /// Nearest point; exact ties go to the lowest label.
  int slice(cplx x) const;
  cplx nearest(cplx x) const { return points[static_cast<std::size_t>(slice(x))]; }
  static std::uint8_t bit(int label, int which) { return static_cast<std::uint8_t>((label >> (1 - which)) & 1); }
};

const Constellation& qpsk_gray();

struct TxFrame {
  CMatrix x_pilot;       // M x K_p
  CMatrix x_data;        // M x K_d
  BitMatrix data_bits;   // M x (K_d * b), rows of inactive users are ignored
  ActiveSet active;
  double tx_power_dbm = 0.0;
  double amplitude = 1.0;  // sqrt of the linear transmit power in watts

  Eigen::Index users() const noexcept { return x_pilot.rows(); }
  Eigen::Index k_pilot() const noexcept { return x_pilot.cols(); }
  Eigen::Index k_data() const noexcept { return x_data.cols(); }
  CMatrix x() const;
  /// Unit-energy data symbols before the power amplitude (M x K_d).
  CMatrix unit_data() const { return x_data / amplitude; }
};

struct RxFrame {
  CMatrix y;  // N x K
  double n0 = 1.0;
};

/// Uniform random bits, M x n_bits.
BitMatrix random_bits(std::uint64_t seed, Eigen::Index users, Eigen::Index n_bits);

/// Pilot row m is sqrt(K_p) * (frame column m)^T so that pilot and data symbols
/// share unit average energy; both blocks are then scaled by the amplitude.
TxFrame assemble_tx(const FrameMatrix& pilots, const BitMatrix& bits, const ActiveSet& active, double power_dbm);

/// Y = H X + W with the given noise block.
RxFrame received_signal(const TxFrame& tx, const CMatrix& h, const CMatrix& w, double n0);

/// Y = H X + W, W i.i.d. CN(0, N0).
RxFrame transmit(const TxFrame& tx, const ChannelRealization& ch, std::uint64_t seed);

/// Hard-decides every entry of `x` onto the constellation and returns the bit
/// labels, M x (K * 2).
BitMatrix demap(const CMatrix& x);

}  // namespace gfree

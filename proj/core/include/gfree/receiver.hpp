#pragma once

// What a receiver knows about one frame. Receivers work in whatever units the
// caller picks; the harness divides everything by sqrt(N0) so that N0 = 1 and
// the variances stay far from the numerical floors.

#include "gfree/channel.hpp"
#include "gfree/signal.hpp"
#include "gfree/types.hpp"

namespace gfree {

struct ReceiverInput {
  CMatrix y;       // N x K
  CMatrix pilots;  // M x K_p unit-energy pilot symbols (inactive users included)
  RMatrix gamma;   // N x M prior variances of the effective channel
  double lambda = 1.0;
  double n0 = 1.0;

  Eigen::Index n_aps() const noexcept { return y.rows(); }
  Eigen::Index users() const noexcept { return pilots.rows(); }
  Eigen::Index k_pilot() const noexcept { return pilots.cols(); }
  Eigen::Index k_total() const noexcept { return y.cols(); }
  Eigen::Index k_data() const noexcept { return y.cols() - pilots.cols(); }
  CMatrix y_pilot() const { return y.leftCols(k_pilot()); }
  CMatrix y_data() const { return y.rightCols(k_data()); }
  void validate() const;
};

/// Effective channel amp*H/sqrt(N0) seen by a noise-normalized receiver.
CMatrix effective_channel(const ChannelRealization& ch, const TxFrame& tx);

/// Builds the noise-normalized receiver view: Y / sqrt(N0), gamma * amp^2 / N0, N0 = 1.
ReceiverInput normalized_input(const RxFrame& rx, const TxFrame& tx, const FrameMatrix& pilots,
                               const RMatrix& gamma, double lambda);

/// sqrt(K_p) * F^T, the unit-energy pilot block of every user.
CMatrix pilot_symbols(const FrameMatrix& pilots);

}  // namespace gfree

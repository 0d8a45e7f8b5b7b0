#include "gfree/receiver.hpp"

#include <cmath>

namespace gfree {

void ReceiverInput::validate() const {
  if (pilots.rows() < 1 || pilots.cols() < 1) throw DomainError("empty pilot block");
  if (y.cols() < pilots.cols()) throw DomainError("received frame shorter than the pilot block");
  if (gamma.rows() != y.rows() || gamma.cols() != pilots.rows()) throw DomainError("gamma must be N x M");
  if (!(lambda > 0.0 && lambda <= 1.0)) throw DomainError("activity factor must lie in (0, 1]");
  if (!(n0 > 0.0)) throw DomainError("noise power must be positive");
}

CMatrix effective_channel(const ChannelRealization& ch, const TxFrame& tx) {
  return ch.h * (tx.amplitude / std::sqrt(ch.noise_power_n0));
}

CMatrix pilot_symbols(const FrameMatrix& pilots) {
  return std::sqrt(static_cast<double>(pilots.rows())) * pilots.entries().transpose();
}

ReceiverInput normalized_input(const RxFrame& rx, const TxFrame& tx, const FrameMatrix& pilots,
                               const RMatrix& gamma, double lambda) {
  if (!(rx.n0 > 0.0)) throw DomainError("noise power must be positive");
  ReceiverInput in;
  const double s = 1.0 / std::sqrt(rx.n0);
  in.y = rx.y * s;
  in.pilots = pilot_symbols(pilots);
  in.gamma = gamma * (tx.amplitude * tx.amplitude / rx.n0);
  in.lambda = lambda;
  in.n0 = 1.0;
  in.validate();
  return in;
}

}  // namespace gfree

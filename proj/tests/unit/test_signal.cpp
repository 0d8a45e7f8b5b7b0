#include <doctest.h>

#include <bitset>

#include "gfree/frame_design.hpp"
#include "gfree/receiver.hpp"
#include "gfree/signal.hpp"
#include "test_util.hpp"

using namespace gfree;

TEST_SUITE("signal") {
  TEST_CASE("gray qpsk mapping") {
    const Constellation& c = qpsk_gray();
    const double a = 1.0 / std::sqrt(2.0);
    CHECK(c.map(0, 0) == cplx(a, a));
    double energy = 0.0;
    for (const cplx& p : c.points) {
      CHECK(std::norm(p) == doctest::Approx(1.0));
      energy += std::norm(p) / 4.0;
    }
    CHECK(energy == doctest::Approx(1.0));
    // Nearest neighbours (distance sqrt 2) differ in exactly one bit.
    for (int p = 0; p < 4; ++p)
      for (int q = 0; q < 4; ++q) {
        if (p == q) continue;
        const double d = std::abs(c.points[p] - c.points[q]);
        if (std::abs(d - std::sqrt(2.0)) < 1e-12) CHECK(std::bitset<2>(p ^ q).count() == 1);
      }
  }

  TEST_CASE("slicing ties go to the lowest label") {
    const Constellation& c = qpsk_gray();
    CHECK(c.slice(cplx(0.0, 0.0)) == 0);
    CHECK(c.slice(cplx(-0.5, 0.0)) == 2);
    CHECK(c.slice(cplx(0.0, -0.5)) == 1);
  }

  TEST_CASE("transmit frame assembly") {
    const FrameMatrix f = gaussian_frame(4, 6, 1);
    const BitMatrix bits = random_bits(2, 6, 10);
    ActiveSet active(6);
    active << true, false, true, true, false, true;
    const TxFrame tx = assemble_tx(f, bits, active, 0.0);
    CHECK(tx.amplitude == doctest::Approx(std::sqrt(1e-3)));
    CHECK(tx.k_data() == 5);
    for (int m = 0; m < 6; ++m) {
      if (!active(m)) {
        CHECK(tx.x().row(m).isZero(0.0));
        continue;
      }
      for (int k = 0; k < 4; ++k) CHECK(std::abs(tx.x_pilot(m, k) - tx.amplitude * 2.0 * f.entries()(k, m)) < 1e-15);
      // Per-symbol power equals the linear transmit power.
      CHECK(tx.x().row(m).squaredNorm() / 9.0 == doctest::Approx(1e-3));
    }
    CHECK_THROWS_AS(assemble_tx(f, random_bits(2, 6, 9), active, 0.0), DomainError);
    CHECK_THROWS_AS(assemble_tx(f, random_bits(2, 5, 10), active, 0.0), DomainError);
  }

  TEST_CASE("no active users leaves only noise") {
    const FrameMatrix f = gaussian_frame(2, 3, 1);
    const TxFrame tx = assemble_tx(f, random_bits(1, 3, 4), ActiveSet::Constant(3, false), 10.0);
    CHECK(tx.x().isZero(0.0));
    ChannelRealization ch;
    ch.h = test::random_cmatrix(5, 3, 4);
    ch.active = ActiveSet::Constant(3, true);
    ch.noise_power_n0 = 1.0;
    const CMatrix w = test::random_cmatrix(5, 4, 8);
    CHECK(received_signal(tx, ch.h, w, 1.0).y == w);
  }

  TEST_CASE("noise moment and superposition") {
    const FrameMatrix f = gaussian_frame(2, 3, 1);
    const TxFrame zero = assemble_tx(f, random_bits(1, 3, 100000), ActiveSet::Constant(3, false), 0.0);
    ChannelRealization ch;
    ch.h = CMatrix::Zero(1, 3);
    ch.active = ActiveSet::Constant(3, false);
    ch.noise_power_n0 = 2.5e-3;
    const RxFrame rx = transmit(zero, ch, 3);
    CHECK(test::rel_err(rx.y.squaredNorm() / static_cast<double>(rx.y.size()), 2.5e-3) < 0.05);

    const TxFrame a = assemble_tx(f, random_bits(4, 3, 6), ActiveSet::Constant(3, true), 0.0);
    const TxFrame b = assemble_tx(f, random_bits(5, 3, 6), ActiveSet::Constant(3, true), 3.0);
    const CMatrix h = test::random_cmatrix(4, 3, 6);
    const CMatrix w = test::random_cmatrix(4, 5, 7);
    TxFrame sum = a;
    sum.x_pilot += b.x_pilot;
    sum.x_data += b.x_data;
    const CMatrix lhs = received_signal(sum, h, w, 1.0).y - w;
    const CMatrix rhs = (received_signal(a, h, w, 1.0).y - w) + (received_signal(b, h, w, 1.0).y - w);
    CHECK((lhs - rhs).norm() < 1e-12);
  }

  TEST_CASE("single user, one symbol, no noise") {
    const FrameMatrix f = FrameMatrix(CMatrix::Ones(1, 1));
    BitMatrix bits(1, 0);
    const TxFrame tx = assemble_tx(f, bits, ActiveSet::Constant(1, true), 30.0);
    const CMatrix h = test::random_cmatrix(3, 1, 2);
    const RxFrame rx = received_signal(tx, h, CMatrix::Zero(3, 1), 1.0);
    CHECK((rx.y - h * tx.x_pilot(0, 0)).norm() < 1e-15);
  }

  TEST_CASE("demapping round trip through an identity channel") {
    const BitMatrix bits = random_bits(9, 4, 40);
    const FrameMatrix f = gaussian_frame(2, 4, 2);
    const TxFrame tx = assemble_tx(f, bits, ActiveSet::Constant(4, true), 0.0);
    CHECK(demap(tx.unit_data()) == bits);
    CHECK(demap(tx.x_data) == bits);
  }

  TEST_CASE("noise-normalized receiver view") {
    const FrameMatrix f = gaussian_frame(3, 4, 2);
    const TxFrame tx = assemble_tx(f, random_bits(1, 4, 6), ActiveSet::Constant(4, true), -10.0);
    ChannelRealization ch;
    ch.h = test::random_cmatrix(2, 4, 5, 1e-10);
    ch.active = ActiveSet::Constant(4, true);
    ch.noise_power_n0 = 1e-14;
    const RxFrame rx = transmit(tx, ch, 8);
    const RMatrix gamma = RMatrix::Constant(2, 4, 1e-10);
    const ReceiverInput in = normalized_input(rx, tx, f, gamma, 0.5);
    CHECK(in.n0 == 1.0);
    CHECK(in.gamma(0, 0) == doctest::Approx(1e-10 * 1e-4 / 1e-14));
    const CMatrix h_eff = effective_channel(ch, tx);
    const CMatrix w = rx.y - ch.h * tx.x();
    const CMatrix x_unit = tx.x() / tx.amplitude;
    CHECK((in.y - h_eff * x_unit - w / 1e-7).norm() < 1e-9 * in.y.norm());
    CHECK((in.pilots - pilot_symbols(f)).norm() == 0.0);
  }
}

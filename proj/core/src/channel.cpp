#include "gfree/channel.hpp"

#include <cmath>
#include <random>

#include "gfree/random.hpp"

namespace gfree {

namespace {
constexpr double kBoltzmann = 1.380649e-23;
}

double Topology::distance(Eigen::Index n, Eigen::Index m) const {
  const double dx = ap_positions(n, 0) - user_positions(m, 0);
  const double dy = ap_positions(n, 1) - user_positions(m, 1);
  const double dz = ap_height_m - user_height_m;
  return std::sqrt(dx * dx + dy * dy + dz * dz);
}

Topology build_topology(int n_aps, int m_users, double area_side_m, std::uint64_t seed) {
  if (n_aps < 1) throw DomainError("need at least one access point");
  if (m_users < 1) throw DomainError("need at least one user");
  if (!(area_side_m > 0.0) || !std::isfinite(area_side_m)) throw DomainError("area side must be positive");

  Topology t;
  t.area_side_m = area_side_m;
  const int grid = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n_aps)) - 1e-12));
  const double spacing = area_side_m / grid;
  t.ap_positions.resize(n_aps, 2);
  for (int i = 0; i < n_aps; ++i) {
    t.ap_positions(i, 0) = spacing * (i % grid + 0.5);
    t.ap_positions(i, 1) = spacing * (i / grid + 0.5);
  }

  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, area_side_m);
  t.user_positions.resize(m_users, 2);
  for (int m = 0; m < m_users; ++m) {
    t.user_positions(m, 0) = u(rng);
    t.user_positions(m, 1) = u(rng);
  }
  return t;
}

double umi_pathloss_db(double distance_m) {
  if (!(distance_m > 0.0)) throw DomainError("distance must be positive");
  return 30.5 + 36.7 * std::log10(distance_m);
}

LargeScale pathloss(const Topology& t, std::uint64_t shadowing_seed, double shadowing_std_db) {
  if (shadowing_std_db < 0.0) throw DomainError("shadowing deviation must be non-negative");
  const Eigen::Index n = t.n_aps();
  const Eigen::Index m = t.m_users();
  LargeScale ls;
  ls.beta_db.resize(n, m);
  ls.gamma.resize(n, m);
  Rng rng(shadowing_seed);
  std::normal_distribution<double> shadow(0.0, 1.0);
  for (Eigen::Index c = 0; c < m; ++c)
    for (Eigen::Index r = 0; r < n; ++r) {
      const double b = umi_pathloss_db(t.distance(r, c)) + shadowing_std_db * shadow(rng);
      ls.beta_db(r, c) = b;
      ls.gamma(r, c) = std::pow(10.0, -b / 10.0);
    }
  return ls;
}

ChannelRealization sample_channel(const LargeScale& ls, double lambda, double n0, std::uint64_t seed) {
  if (!(lambda > 0.0 && lambda <= 1.0)) throw DomainError("activity factor must lie in (0, 1]");
  if (!(n0 > 0.0)) throw DomainError("noise power must be positive");
  const Eigen::Index n = ls.gamma.rows();
  const Eigen::Index m = ls.gamma.cols();
  ChannelRealization ch;
  ch.lambda = lambda;
  ch.noise_power_n0 = n0;
  ch.active = ActiveSet::Constant(m, false);
  ch.h = CMatrix::Zero(n, m);

  Rng rng(seed);
  std::bernoulli_distribution coin(lambda);
  for (Eigen::Index c = 0; c < m; ++c) ch.active(c) = coin(rng);
  // Fading is drawn for every user so the activity pattern does not shift
  // the channel draws of other users.
  for (Eigen::Index c = 0; c < m; ++c)
    for (Eigen::Index r = 0; r < n; ++r) {
      const cplx g = complex_normal(rng, ls.gamma(r, c));
      if (ch.active(c)) ch.h(r, c) = g;
    }
  return ch;
}

double noise_floor_dbm(double bandwidth_hz, double nf_db, double temperature_k) {
  if (!(bandwidth_hz > 0.0)) throw DomainError("bandwidth must be positive");
  if (!(temperature_k > 0.0)) throw DomainError("temperature must be positive");
  return 10.0 * std::log10(1000.0 * kBoltzmann * temperature_k) + nf_db + 10.0 * std::log10(bandwidth_hz);
}

}  // namespace gfree

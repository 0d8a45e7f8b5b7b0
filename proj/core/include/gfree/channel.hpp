#pragma once

// Cell-free topology, large-scale fading and Bernoulli-Gaussian channels.

#include <cmath>
#include <cstdint>

#include "gfree/types.hpp"

namespace gfree {

using Positions = Eigen::Matrix<double, Eigen::Dynamic, 2>;

struct Topology {
  Positions ap_positions;    // N x 2, meters
  Positions user_positions;  // M x 2, meters
  double ap_height_m = 10.0;
  double user_height_m = 1.65;
  double area_side_m = 0.0;

  Eigen::Index n_aps() const noexcept { return ap_positions.rows(); }
  Eigen::Index m_users() const noexcept { return user_positions.rows(); }
  /// 3-D AP-user separation including the antenna heights.
  double distance(Eigen::Index n, Eigen::Index m) const;
};

struct LargeScale {
  RMatrix gamma;    // N x M, linear variances
  RMatrix beta_db;  // N x M pathloss in dB
};

struct ChannelRealization {
  CMatrix h;  // N x M, inactive columns exactly zero
  ActiveSet active;
  double lambda = 1.0;
  double noise_power_n0 = 1.0;

  Eigen::Index active_count() const { return active.count(); }
};

/// APs on a cell-centred sqrt(N) grid (surplus points of the next square grid
/// dropped row-major), users i.i.d. uniform over the square.
Topology build_topology(int n_aps, int m_users, double area_side_m, std::uint64_t seed);

/// Urban-microcell pathloss in dB at 3-D distance d, without shadowing.
double umi_pathloss_db(double distance_m);

/// beta = 30.5 + 36.7 log10(d) + N(0, shadowing_std_db^2) per link.
LargeScale pathloss(const Topology& t, std::uint64_t shadowing_seed, double shadowing_std_db = 4.0);

/// Each user active with probability lambda; active columns CN(0, gamma_nm).
ChannelRealization sample_channel(const LargeScale& ls, double lambda, double n0, std::uint64_t seed);

/// Thermal noise power in dBm over `bandwidth_hz`, plus the receiver noise figure.
double noise_floor_dbm(double bandwidth_hz, double nf_db, double temperature_k);

inline double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

}  // namespace gfree

#pragma once

// Simulation scenario and its key=value configuration format.
//
//   # comment
//   n_aps = 100
//   tx_power_dbm_sweep = [-8, -4, 0, 4, 8, 12, 16]
//   receivers = bigabp, zf_mmvamp
//
// Unknown keys are rejected.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace gfree {

struct Scenario {
  std::string scenario_id = "default";
  int n_aps = 100;
  int m_users = 100;
  double area_side_m = 1000.0;
  double lambda = 0.5;
  int k_total = 140;
  int k_pilot = 14;
  double subcarrier_khz = 15.0;
  double nf_db = 5.0;
  double temperature_k = 293.15;
  double shadowing_std_db = 4.0;
  std::vector<double> tx_power_dbm_sweep = {-4.0, 0.0, 4.0, 8.0, 12.0, 16.0};
  int t_max = 32;
  double eta = 0.5;
  std::vector<std::string> receivers = {"bigabp", "zf_mmvamp", "gabp_mmvamp", "genie_gabp"};
  int trials = 20;
  std::uint64_t master_seed = 1;
  // Pilot frame: loaded from pilot_file when set, otherwise designed with pilot_seed.
  std::string pilot_file;
  std::uint64_t pilot_seed = 1;
  int csidco_iterations = 40;
  int projection_iterations = 3000;

  int k_data() const noexcept { return k_total - k_pilot; }
  /// Throws DomainError naming the offending field.
  void validate() const;
  /// Canonical key=value rendering; parse_scenario(to_config()) round-trips.
  std::string to_config() const;
};

/// Every receiver name understood by the harness.
const std::vector<std::string>& known_receivers();

Scenario parse_scenario(const std::string& text);
Scenario load_scenario(const std::filesystem::path& path);

}  // namespace gfree

#pragma once

// Seeded Monte-Carlo trials over transmit power, CSV persistence and summaries.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gfree/bigabp.hpp"
#include "gfree/channel.hpp"
#include "gfree/frame_design.hpp"
#include "gfree/init_ce.hpp"
#include "gfree/metrics.hpp"
#include "gfree/receiver.hpp"
#include "gfree/scenario.hpp"
#include "gfree/signal.hpp"

namespace gfree {

inline constexpr const char* kCodeVersion = "gfree-0.1.0";

struct PilotFrame {
  FrameMatrix frame;
  std::string hash;  // content hash of the frame file, or of the designed entries
};

/// Loads s.pilot_file, or designs a k_pilot x m_users frame from s.pilot_seed.
PilotFrame obtain_pilots(const Scenario& s);

/// Hash of a frame's entries in the on-disk byte layout.
std::string frame_hash(const FrameMatrix& f);

/// Seed of trial `trial` at power index `power_index`.
std::uint64_t trial_seed(std::uint64_t master_seed, std::size_t power_index, std::size_t trial);

/// Everything one trial draws, shared by every receiver.
struct TrialContext {
  Topology topology;
  LargeScale large_scale;
  ChannelRealization channel;
  TxFrame tx;
  RxFrame rx;
  ReceiverInput input;  // noise-normalized
  CMatrix h_eff;        // channel in the receiver's units
  CMatrix x_unit;       // M x K unit-energy symbols
};

TrialContext make_trial(const Scenario& s, const FrameMatrix& pilots, double power_dbm, std::uint64_t seed);

/// FNV-1a over the bytes of everything a receiver reads.
std::uint64_t input_hash(const ReceiverInput& in);

/// Runs every receiver of the scenario on one realization. Receiver failures
/// are recorded in TrialOutcome::error instead of thrown.
std::vector<TrialOutcome> run_trial(const Scenario& s, const FrameMatrix& pilots, double power_dbm,
                                    std::uint64_t seed);

struct SweepRow {
  std::string scenario_id;
  std::uint64_t seed = 0;
  std::size_t power_index = 0;
  std::size_t trial = 0;
  double tx_power_dbm = 0.0;
  TrialOutcome outcome;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::map<std::string, std::string> provenance;
};

struct SweepOptions {
  int threads = 0;  // 0: GFREE_THREADS or the hardware concurrency
  std::optional<std::filesystem::path> checkpoint;  // rows are appended here as trials finish
  std::function<void(std::size_t done, std::size_t total)> progress;
};

/// Worker count: explicit request, else GFREE_THREADS, else hardware concurrency.
int worker_count(int requested);

/// Runs every (power, trial) pair not already present in `completed` and
/// returns the union sorted canonically.
SweepResult run_sweep(const Scenario& s, const PilotFrame& pilots, const SweepOptions& opt = {},
                      const std::vector<SweepRow>& completed = {});

/// Canonical order: scenario, power index, trial, receiver.
void sort_rows(std::vector<SweepRow>& rows);

extern const char* const kCsvHeader;

std::string format_row(const SweepRow& r);
void write_csv(const std::filesystem::path& path, const SweepResult& result);
/// Reads rows (ignoring '#' provenance lines); power and trial indices are
/// recovered from the scenario when given.
std::vector<SweepRow> read_csv(const std::filesystem::path& path, const Scenario* s = nullptr);

struct SummaryRow {
  std::string scenario_id;
  double tx_power_dbm = 0.0;
  std::string receiver;
  int trials = 0;
  int failures = 0;
  double ber_mean = 0.0, ber_median = 0.0, ber_q25 = 0.0, ber_q75 = 0.0;
  double nmse_median = 0.0, nmse_q25 = 0.0, nmse_q75 = 0.0;
  double md_mean = 0.0, fa_mean = 0.0;
  double md_probability = 0.0;  // missed users over active users, pooled
  double throughput_mean = 0.0;
};

/// One row per (scenario, power, receiver), in canonical order.
std::vector<SummaryRow> summarize(const std::vector<SweepRow>& rows);
void write_summary_csv(const std::filesystem::path& path, const std::vector<SummaryRow>& rows);

/// Linear-interpolated quantile of a copy of `v`; NaNs are dropped.
double quantile(std::vector<double> v, double q);

}  // namespace gfree

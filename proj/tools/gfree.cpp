// gfree command-line driver: pilot design, single trials, sweeps, reports.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "gfree/frame_design.hpp"
#include "gfree/harness.hpp"
#include "gfree/scenario.hpp"

namespace fs = std::filesystem;
using namespace gfree;

namespace {

enum Exit { kOk = 0, kFailure = 1, kConfig = 2, kNumeric = 3 };

int design_pilots_cmd(int rows, int cols, std::uint64_t seed, int iterations, int projection, const fs::path& out) {
  CsidcoConfig cfg;
  cfg.seed = seed;
  cfg.outer_iterations = iterations;
  cfg.projection_iterations = projection;
  CsidcoTrace trace;
  const FrameMatrix f = design_pilots(rows, cols, cfg, &trace);
  save_frame(out, f);

  const FrameBounds b = frame_bounds(f);
  nlohmann::json meta = {
      {"j", rows},
      {"l", cols},
      {"seed", seed},
      {"outer_iterations", iterations},
      {"projection_iterations", projection},
      {"coherence", mutual_coherence(f)},
      {"welch_bound", welch_bound(rows, cols)},
      {"alpha", b.alpha},
      {"beta", b.beta},
      {"csidco_coherence_trace", trace.coherence},
      {"accepted_updates", trace.accepted_updates},
      {"rejected_updates", trace.rejected_updates},
      {"content_hash", file_content_hash(out)},
      {"code_version", kCodeVersion},
  };
  std::ofstream(fs::path(out).concat(".json")) << meta.dump(2) << '\n';
  std::printf("wrote %s: coherence %.4f, welch bound %.4f\n", out.string().c_str(), mutual_coherence(f),
              welch_bound(rows, cols));
  return kOk;
}

int run_cmd(const fs::path& config, const fs::path& out, std::size_t power_index, std::size_t trial) {
  const Scenario s = load_scenario(config);
  if (power_index >= s.tx_power_dbm_sweep.size()) throw DomainError("power index outside tx_power_dbm_sweep");
  const PilotFrame pilots = obtain_pilots(s);
  const std::uint64_t seed = trial_seed(s.master_seed, power_index, trial);
  const double power = s.tx_power_dbm_sweep[power_index];
  SweepResult r;
  r.provenance["code_version"] = kCodeVersion;
  r.provenance["frame_hash"] = pilots.hash;
  for (TrialOutcome& o : run_trial(s, pilots.frame, power, seed))
    r.rows.push_back(SweepRow{s.scenario_id, seed, power_index, trial, power, std::move(o)});
  write_csv(out, r);
  for (const SweepRow& row : r.rows)
    if (!row.outcome.error.empty())
      std::fprintf(stderr, "%s failed: %s\n", row.outcome.receiver.c_str(), row.outcome.error.c_str());
  return kOk;
}

int sweep_cmd(const fs::path& config, const fs::path& out, int threads, bool quiet) {
  const Scenario s = load_scenario(config);
  const PilotFrame pilots = obtain_pilots(s);

  // Completed rows come from a previous output file and from the checkpoint
  // of an interrupted run.
  const fs::path partial = fs::path(out).concat(".partial");
  std::vector<SweepRow> completed;
  for (const fs::path& p : {out, partial})
    if (fs::exists(p)) {
      auto rows = read_csv(p, &s);
      completed.insert(completed.end(), rows.begin(), rows.end());
    }
  if (fs::exists(partial) && !completed.empty()) {
    // Rewrite the checkpoint without duplicates before appending to it.
    SweepResult merged;
    merged.rows = completed;
    sort_rows(merged.rows);
    merged.rows.erase(std::unique(merged.rows.begin(), merged.rows.end(),
                                  [](const SweepRow& a, const SweepRow& b) {
                                    return a.seed == b.seed && a.outcome.receiver == b.outcome.receiver;
                                  }),
                      merged.rows.end());
    completed = merged.rows;
    write_csv(partial, merged);
  }

  SweepOptions opt;
  opt.threads = threads;
  opt.checkpoint = partial;
  if (!quiet)
    opt.progress = [](std::size_t done, std::size_t total) {
      std::fprintf(stderr, "\r%zu/%zu trials", done, total);
      if (done == total) std::fputc('\n', stderr);
    };
  const SweepResult r = run_sweep(s, pilots, opt, completed);
  write_csv(out, r);
  fs::remove(partial);
  std::size_t failures = 0;
  for (const SweepRow& row : r.rows) failures += !row.outcome.error.empty();
  std::printf("wrote %zu rows to %s (%zu receiver failures)\n", r.rows.size(), out.string().c_str(), failures);
  return kOk;
}

int report_cmd(const fs::path& in, const fs::path& out) {
  const std::vector<SummaryRow> rows = summarize(read_csv(in));
  write_summary_csv(out, rows);
  std::printf("wrote %zu summary rows to %s\n", rows.size(), out.string().c_str());
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Grant-free cell-free MIMO link-level simulator"};
  app.require_subcommand(1);

  int rows = 14, cols = 100, iterations = 40, projection = 3000;
  std::uint64_t seed = 1;
  fs::path frame_out = "pilots.gfrm";
  auto* design = app.add_subcommand("design-pilots", "Design a low-coherence pilot frame");
  design->add_option("--rows,--j", rows, "Pilot length J")->capture_default_str();
  design->add_option("--cols,--l", cols, "Number of users L")->capture_default_str();
  design->add_option("--seed", seed, "Starting-frame seed")->capture_default_str();
  design->add_option("--iterations", iterations, "Outer CSIDCO sweeps")->capture_default_str();
  design->add_option("--projection", projection, "Coherence projection iterations (0 disables)")->capture_default_str();
  design->add_option("--out", frame_out, "Frame file; a .json sidecar is written next to it")->capture_default_str();

  fs::path config, out;
  std::size_t power_index = 0, trial = 0;
  auto* run = app.add_subcommand("run", "Run one trial of every receiver");
  run->add_option("--config", config, "Scenario file")->required();
  run->add_option("--out", out, "Output CSV")->required();
  run->add_option("--power-index", power_index, "Index into tx_power_dbm_sweep")->capture_default_str();
  run->add_option("--trial", trial, "Trial index")->capture_default_str();

  int threads = 0;
  bool quiet = false;
  auto* sweep = app.add_subcommand("sweep", "Run the full power sweep, resuming if output exists");
  sweep->add_option("--config", config, "Scenario file")->required();
  sweep->add_option("--out", out, "Output CSV")->required();
  sweep->add_option("--threads", threads, "Worker threads (default: GFREE_THREADS or all cores)");
  sweep->add_flag("--quiet", quiet, "No progress output");

  fs::path in;
  fs::path summary;
  auto* report = app.add_subcommand("report", "Aggregate a sweep CSV per (power, receiver)");
  report->add_option("--in", in, "Sweep CSV")->required()->check(CLI::ExistingFile);
  report->add_option("--out", summary, "Summary CSV (default: <in>.summary.csv)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfig;
  }

  try {
    if (*design) return design_pilots_cmd(rows, cols, seed, iterations, projection, frame_out);
    if (*run) return run_cmd(config, out, power_index, trial);
    if (*sweep) return sweep_cmd(config, out, threads, quiet);
    if (*report) return report_cmd(in, summary.empty() ? fs::path(in).concat(".summary.csv") : summary);
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return kNumeric;
  } catch (const DomainError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfig;
  } catch (const FormatError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kFailure;
  }
  return kFailure;
}

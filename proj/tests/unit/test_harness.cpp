#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "gfree/harness.hpp"
#include "test_util.hpp"

using namespace gfree;

namespace {

Scenario small_scenario() {
  Scenario s;
  s.scenario_id = "unit";
  s.n_aps = 9;
  s.m_users = 8;
  s.k_pilot = 4;
  s.k_total = 16;
  s.area_side_m = 300.0;
  s.tx_power_dbm_sweep = {0.0, 10.0};
  s.receivers = {"bigabp", "genie_gabp"};
  s.trials = 3;
  s.t_max = 8;
  s.csidco_iterations = 3;
  s.projection_iterations = 50;
  return s;
}

const PilotFrame& small_pilots() {
  static const PilotFrame p = obtain_pilots(small_scenario());
  return p;
}

std::vector<std::string> rendered(const std::vector<SweepRow>& rows) {
  std::vector<std::string> out;
  for (const SweepRow& r : rows) out.push_back(format_row(r));
  return out;
}

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "gfree_harness_test";
  std::filesystem::create_directories(dir);
  const auto p = dir / name;
  std::filesystem::remove(p);
  return p;
}

}  // namespace

TEST_SUITE("harness") {
  TEST_CASE("scenario config round trip and rejection of bad input") {
    Scenario s = small_scenario();
    s.master_seed = 0xfeedbeefcafeULL;
    s.receivers = {"bigabp", "mns", "genie_mmse"};
    const Scenario back = parse_scenario(s.to_config());
    CHECK(back.to_config() == s.to_config());
    CHECK(back.master_seed == s.master_seed);
    CHECK(back.tx_power_dbm_sweep == s.tx_power_dbm_sweep);
    CHECK_THROWS_AS(parse_scenario("n_apz = 3\n"), FormatError);
    CHECK_THROWS_AS(parse_scenario("n_aps\n"), FormatError);
    CHECK_THROWS_AS(parse_scenario("k_pilot = 14\nk_total = 14\n"), FormatError);
    CHECK_THROWS_AS(parse_scenario("receivers = [bigabp, mystery]\n"), FormatError);
  }

  TEST_CASE("defaults describe the full-scale setup") {
    const Scenario d;
    CHECK(d.n_aps == 100);
    CHECK(d.m_users == 100);
    CHECK(d.lambda == 0.5);
    CHECK(d.k_pilot == 14);
    CHECK(d.k_total == 140);
    CHECK(d.t_max == 32);
    CHECK(d.eta == 0.5);
    CHECK(*std::max_element(d.tx_power_dbm_sweep.begin(), d.tx_power_dbm_sweep.end()) == 16.0);
    CHECK_NOTHROW(d.validate());
  }

  TEST_CASE("trial seeds depend on every coordinate") {
    std::set<std::uint64_t> seen;
    for (std::size_t p = 0; p < 5; ++p)
      for (std::size_t t = 0; t < 20; ++t) seen.insert(trial_seed(1, p, t));
    CHECK(seen.size() == 100);
    CHECK(trial_seed(1, 0, 1) != trial_seed(1, 1, 0));
    CHECK(trial_seed(1, 0, 0) != trial_seed(2, 0, 0));
    CHECK(trial_seed(7, 3, 4) == trial_seed(7, 3, 4));
  }

  TEST_CASE("run_trial: same seed twice gives identical outcomes") {
    const Scenario s = small_scenario();
    const auto a = run_trial(s, small_pilots().frame, 10.0, 42);
    const auto b = run_trial(s, small_pilots().frame, 10.0, 42);
    REQUIRE(a.size() == 2);
    REQUIRE(b.size() == 2);
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].receiver == b[i].receiver);
      CHECK(a[i].ber == b[i].ber);
      CHECK(a[i].nmse == b[i].nmse);
      CHECK(a[i].md == b[i].md);
      CHECK(a[i].realization_hash == b[i].realization_hash);
    }
  }

  TEST_CASE("run_trial: every receiver sees the same realization") {
    Scenario s = small_scenario();
    s.receivers = known_receivers();
    const auto out = run_trial(s, small_pilots().frame, 0.0, 9);
    REQUIRE(out.size() == known_receivers().size());
    const TrialContext c = make_trial(s, small_pilots().frame, 0.0, 9);
    for (const TrialOutcome& o : out) {
      CHECK(o.error.empty());
      CHECK(o.realization_hash == input_hash(c.input));
      CHECK(o.active_users == static_cast<int>(c.channel.active_count()));
    }
    // Adding receivers does not perturb the realization.
    s.receivers = {"mns"};
    CHECK(run_trial(s, small_pilots().frame, 0.0, 9)[0].realization_hash == out[0].realization_hash);
  }

  TEST_CASE("run_trial: empty receiver list is a domain error") {
    Scenario s = small_scenario();
    s.receivers.clear();
    CHECK_THROWS_AS(run_trial(s, small_pilots().frame, 0.0, 1), DomainError);
  }

  TEST_CASE("run_sweep: 2 powers x 3 trials x 2 receivers gives 12 rows in canonical order") {
    const SweepResult r = run_sweep(small_scenario(), small_pilots(), SweepOptions{1, {}, {}});
    REQUIRE(r.rows.size() == 12);
    for (std::size_t i = 0; i < r.rows.size(); ++i) {
      CHECK(r.rows[i].power_index == i / 6);
      CHECK(r.rows[i].trial == (i / 2) % 3);
      CHECK(r.rows[i].outcome.receiver == (i % 2 == 0 ? "bigabp" : "genie_gabp"));
      CHECK(r.rows[i].seed == trial_seed(1, r.rows[i].power_index, r.rows[i].trial));
    }
    CHECK(r.provenance.count("code_version") == 1);
    CHECK(r.provenance.at("frame_hash") == small_pilots().hash);
  }

  TEST_CASE("run_sweep: result is independent of the thread schedule") {
    const Scenario s = small_scenario();
    const SweepResult one = run_sweep(s, small_pilots(), SweepOptions{1, {}, {}});
    const SweepResult three = run_sweep(s, small_pilots(), SweepOptions{3, {}, {}});
    CHECK(rendered(one.rows) == rendered(three.rows));
  }

  TEST_CASE("run_sweep: resume skips completed pairs and reproduces the full run") {
    const Scenario s = small_scenario();
    const SweepResult full = run_sweep(s, small_pilots(), SweepOptions{1, {}, {}});

    // Checkpoint a fresh run, keep only the first two trials, then resume.
    const auto ckpt = scratch("resume.partial");
    SweepOptions opt{1, ckpt, {}};
    run_sweep(s, small_pilots(), opt);
    std::vector<SweepRow> done = read_csv(ckpt, &s);
    CHECK(rendered(done).size() == 12);
    done.resize(4);
    std::size_t total_jobs = 0;
    opt.checkpoint.reset();
    opt.progress = [&](std::size_t, std::size_t total) { total_jobs = total; };
    const SweepResult resumed = run_sweep(s, small_pilots(), opt, done);
    CHECK(total_jobs == 4);
    CHECK(rendered(resumed.rows) == rendered(full.rows));
  }

  TEST_CASE("csv write and read round trip") {
    const Scenario s = small_scenario();
    SweepResult r = run_sweep(s, small_pilots(), SweepOptions{1, {}, {}});
    const auto path = scratch("rt.csv");
    write_csv(path, r);
    std::vector<SweepRow> back = read_csv(path, &s);
    CHECK(rendered(back) == rendered(r.rows));
    for (std::size_t i = 0; i < back.size(); ++i) {
      CHECK(back[i].power_index == r.rows[i].power_index);
      CHECK(back[i].trial == r.rows[i].trial);
    }
    std::ofstream(path) << "scenario_id,seed\nx,1\n";
    CHECK_THROWS_AS(read_csv(path), FormatError);
  }

  TEST_CASE("summary groups by power and receiver") {
    std::vector<SweepRow> rows;
    for (int t = 0; t < 4; ++t) {
      SweepRow r;
      r.scenario_id = "s";
      r.tx_power_dbm = 5.0;
      r.outcome.receiver = "bigabp";
      r.outcome.ber = 0.1 * t;
      r.outcome.nmse = 1.0 + t;
      r.outcome.md = t % 2;
      r.outcome.active_users = 4;
      r.outcome.throughput_bits = 100.0;
      rows.push_back(r);
      r.outcome.receiver = "mns";
      r.outcome.ber = std::nan("");
      r.outcome.md = -1;
      rows.push_back(r);
    }
    const auto sum = summarize(rows);
    REQUIRE(sum.size() == 2);
    CHECK(sum[0].receiver == "bigabp");
    CHECK(sum[0].trials == 4);
    CHECK(sum[0].ber_mean == doctest::Approx(0.15));
    CHECK(sum[0].ber_median == doctest::Approx(0.15));
    CHECK(sum[0].nmse_median == doctest::Approx(2.5));
    CHECK(sum[0].md_probability == doctest::Approx(2.0 / 16.0));
    CHECK(std::isnan(sum[1].ber_median));
    CHECK(std::isnan(sum[1].md_probability));
  }

  TEST_CASE("quantile interpolates and drops NaN") {
    CHECK(quantile({3.0, 1.0, 2.0, std::nan("")}, 0.5) == 2.0);
    CHECK(quantile({0.0, 10.0}, 0.25) == 2.5);
    CHECK(std::isnan(quantile({}, 0.5)));
  }

  TEST_CASE("worker count honours the explicit request") {
    CHECK(worker_count(3) == 3);
    CHECK(worker_count(0) >= 1);
  }

  TEST_CASE("genie receiver at the top power on a 16 x 16 downscale") {
    Scenario s;
    s.scenario_id = "genie16";
    s.n_aps = 16;
    s.m_users = 16;
    s.k_pilot = 4;
    s.k_total = 48;
    s.receivers = {"genie_gabp"};
    s.csidco_iterations = 5;
    s.projection_iterations = 300;
    const double top = *std::max_element(s.tx_power_dbm_sweep.begin(), s.tx_power_dbm_sweep.end());
    const PilotFrame p = obtain_pilots(s);
    double ber = 0.0;
    const int trials = 20;
    for (int t = 0; t < trials; ++t) ber += run_trial(s, p.frame, top, trial_seed(3, 0, t))[0].ber;
    CHECK(ber / trials < 1e-3);
  }
}

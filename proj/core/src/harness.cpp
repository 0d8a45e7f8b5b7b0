#include "gfree/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

#include "gfree/detectors.hpp"
#include "gfree/random.hpp"

namespace gfree {

namespace {

struct Fnv {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  void bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= c[i];
      h *= 0x100000001b3ULL;
    }
  }
  template <class Derived>
  void matrix(const Eigen::MatrixBase<Derived>& m) {
    const auto r = static_cast<std::uint64_t>(m.rows()), c = static_cast<std::uint64_t>(m.cols());
    bytes(&r, sizeof r);
    bytes(&c, sizeof c);
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      for (Eigen::Index i = 0; i < m.rows(); ++i) {
        const auto v = m(i, j);
        bytes(&v, sizeof v);
      }
  }
};

std::string hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string fmt(double d) {
  if (std::isnan(d)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", d);
  return buf;
}

const double kNan = std::nan("");

}  // namespace

std::string frame_hash(const FrameMatrix& f) {
  Fnv h;
  h.matrix(f.entries());
  return hex(h.h);
}

PilotFrame obtain_pilots(const Scenario& s) {
  if (!s.pilot_file.empty()) {
    FrameMatrix f = load_frame(s.pilot_file);
    if (f.rows() != s.k_pilot || f.cols() != s.m_users)
      throw FormatError("pilot file is " + std::to_string(f.rows()) + " x " + std::to_string(f.cols()) +
                        ", scenario needs k_pilot x m_users");
    return {std::move(f), file_content_hash(s.pilot_file)};
  }
  CsidcoConfig cfg;
  cfg.seed = s.pilot_seed;
  cfg.outer_iterations = s.csidco_iterations;
  cfg.projection_iterations = s.projection_iterations;
  FrameMatrix f = design_pilots(s.k_pilot, s.m_users, cfg);
  std::string h = frame_hash(f);
  return {std::move(f), h};
}

std::uint64_t trial_seed(std::uint64_t master_seed, std::size_t power_index, std::size_t trial) {
  return derive_seed(master_seed, {static_cast<std::uint64_t>(power_index), static_cast<std::uint64_t>(trial)});
}

TrialContext make_trial(const Scenario& s, const FrameMatrix& pilots, double power_dbm, std::uint64_t seed) {
  s.validate();
  if (pilots.rows() != s.k_pilot || pilots.cols() != s.m_users) throw DomainError("pilot frame does not fit the scenario");
  TrialContext c;
  c.topology = build_topology(s.n_aps, s.m_users, s.area_side_m, stream_seed(seed, Stream::kTopology));
  c.large_scale = pathloss(c.topology, stream_seed(seed, Stream::kShadowing), s.shadowing_std_db);
  const double n0 = dbm_to_watts(noise_floor_dbm(s.subcarrier_khz * 1e3, s.nf_db, s.temperature_k));
  c.channel = sample_channel(c.large_scale, s.lambda, n0, stream_seed(seed, Stream::kChannel));
  const BitMatrix bits = random_bits(stream_seed(seed, Stream::kBits), s.m_users, 2 * s.k_data());
  c.tx = assemble_tx(pilots, bits, c.channel.active, power_dbm);
  c.rx = transmit(c.tx, c.channel, stream_seed(seed, Stream::kNoise));
  c.input = normalized_input(c.rx, c.tx, pilots, c.large_scale.gamma, s.lambda);
  c.h_eff = effective_channel(c.channel, c.tx);
  c.x_unit = c.tx.x() / c.tx.amplitude;
  return c;
}

std::uint64_t input_hash(const ReceiverInput& in) {
  Fnv h;
  h.matrix(in.y);
  h.matrix(in.pilots);
  h.matrix(in.gamma);
  h.bytes(&in.lambda, sizeof in.lambda);
  h.bytes(&in.n0, sizeof in.n0);
  return h.h;
}

namespace {

TrialOutcome data_outcome(const std::string& name, const TrialContext& c, const CMatrix& x_hard,
                          const ActiveSet& active_hat, const Scenario& s) {
  TrialOutcome o;
  o.receiver = name;
  const BitMatrix hat_bits = demap(x_hard);
  const BerReport br = ber_with_lost_bits(c.tx.data_bits, hat_bits, c.channel.active, active_hat);
  o.ber = br.empty ? 0.0 : br.ber;
  const DetectionCounts dc = detection_errors(c.channel.active, active_hat);
  o.md = dc.md;
  o.fa = dc.fa;
  const double pe = block_error_rate(c.tx.data_bits, hat_bits, c.channel.active, active_hat);
  o.throughput_bits = effective_throughput(pe, s.k_data(), 2) * static_cast<double>(c.channel.active_count());
  return o;
}

bool wants(const Scenario& s, const char* name) {
  return std::find(s.receivers.begin(), s.receivers.end(), name) != s.receivers.end();
}

}  // namespace

std::vector<TrialOutcome> run_trial(const Scenario& s, const FrameMatrix& pilots, double power_dbm,
                                    std::uint64_t seed) {
  s.validate();
  const TrialContext c = make_trial(s, pilots, power_dbm, seed);
  const BeliefKnobs knobs{s.t_max, s.eta};
  const int active = static_cast<int>(c.channel.active_count());

  std::optional<InitialEstimate> init;
  std::string init_error;
  if (wants(s, "bigabp") || wants(s, "zf_mmvamp") || wants(s, "gabp_mmvamp") || wants(s, "mmv_amp")) {
    try {
      init = mmv_amp(c.input);
    } catch (const std::exception& e) {
      init_error = e.what();
    }
  }
  auto need_init = [&] {
    if (!init) throw NumericError("MMV-AMP initialization failed: " + init_error);
    return *init;
  };

  std::vector<TrialOutcome> out;
  for (const std::string& name : s.receivers) {
    TrialOutcome o;
    try {
      if (name == "bigabp") {
        const BeliefState st = run_belief_consensus(c.input, need_init(), knobs);
        const DetectionResult d = hard_decision(c.input, st);
        o = data_outcome(name, c, d.x_hard, d.active_hat, s);
        o.nmse = nmse(c.h_eff, d.h_final).nmse;
        o.iterations_run = st.iteration;
      } else if (name == "zf_mmvamp") {
        const InitialEstimate& ie = need_init();
        o = data_outcome(name, c, zf_detect(c.input.y_data(), ie.h_hat, ie.active_hat), ie.active_hat, s);
        o.nmse = nmse(c.h_eff, ie.h_hat).nmse;
        o.iterations_run = ie.iterations;
      } else if (name == "gabp_mmvamp") {
        const InitialEstimate& ie = need_init();
        const CMatrix x = gabp_detect(c.input.y_data(), ie.h_hat, ie.psi_h, ie.active_hat, c.input.n0, knobs);
        o = data_outcome(name, c, x, ie.active_hat, s);
        o.nmse = nmse(c.h_eff, ie.h_hat).nmse;
        o.iterations_run = s.t_max;
      } else if (name == "genie_gabp") {
        const CMatrix x = genie_gabp_detect(c.input.y_data(), c.h_eff, c.channel.active, c.input.n0, knobs);
        o = data_outcome(name, c, x, c.channel.active, s);
        o.nmse = 0.0;
        o.iterations_run = s.t_max;
      } else if (name == "mmv_amp") {
        const InitialEstimate& ie = need_init();
        const DetectionCounts dc = detection_errors(c.channel.active, ie.active_hat);
        o.ber = kNan;
        o.throughput_bits = kNan;
        o.nmse = nmse(c.h_eff, ie.h_hat).nmse;
        o.md = dc.md;
        o.fa = dc.fa;
        o.iterations_run = ie.iterations;
      } else if (name == "mns") {
        o.ber = kNan;
        o.throughput_bits = kNan;
        o.nmse = nmse(c.h_eff, mns_estimate(c.input.y_pilot(), c.input.pilots)).nmse;
        o.md = o.fa = -1;
      } else if (name == "genie_mmse") {
        o.ber = kNan;
        o.throughput_bits = kNan;
        o.nmse = nmse(c.h_eff, mmse_genie(c.input.y, c.x_unit, c.channel.active, c.input.gamma, c.input.n0)).nmse;
        o.md = o.fa = -1;
      } else {
        throw DomainError("unknown receiver '" + name + "'");
      }
    } catch (const DomainError&) {
      throw;
    } catch (const std::exception& e) {
      o = TrialOutcome{};
      o.ber = o.nmse = o.throughput_bits = kNan;
      o.md = o.fa = -1;
      o.error = e.what();
    }
    o.receiver = name;
    o.active_users = active;
    o.realization_hash = input_hash(c.input);
    out.push_back(std::move(o));
  }
  return out;
}

void sort_rows(std::vector<SweepRow>& rows) {
  const auto& names = known_receivers();
  auto rank = [&](const std::string& r) { return std::find(names.begin(), names.end(), r) - names.begin(); };
  std::stable_sort(rows.begin(), rows.end(), [&](const SweepRow& a, const SweepRow& b) {
    return std::make_tuple(a.scenario_id, a.power_index, a.trial, rank(a.outcome.receiver)) <
           std::make_tuple(b.scenario_id, b.power_index, b.trial, rank(b.outcome.receiver));
  });
}

const char* const kCsvHeader =
    "scenario_id,seed,tx_power_dbm,receiver,ber,nmse,md,fa,throughput_bits,iterations_run,active_users";

std::string format_row(const SweepRow& r) {
  const TrialOutcome& o = r.outcome;
  std::ostringstream os;
  os << r.scenario_id << ',' << r.seed << ',' << fmt(r.tx_power_dbm) << ',' << o.receiver << ',' << fmt(o.ber) << ','
     << fmt(o.nmse) << ',' << o.md << ',' << o.fa << ',' << fmt(o.throughput_bits) << ',' << o.iterations_run << ','
     << o.active_users;
  return os.str();
}

int worker_count(int requested) {
  if (requested > 0) return requested;
  if (const char* e = std::getenv("GFREE_THREADS")) {
    const int v = std::atoi(e);
    if (v > 0) return v;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

SweepResult run_sweep(const Scenario& s, const PilotFrame& pilots, const SweepOptions& opt,
                      const std::vector<SweepRow>& completed) {
  s.validate();
  SweepResult result;
  result.provenance["code_version"] = kCodeVersion;
  result.provenance["frame_hash"] = pilots.hash;
  std::istringstream cfg(s.to_config());
  for (std::string line; std::getline(cfg, line);) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string t) {
      t.erase(0, t.find_first_not_of(' '));
      t.erase(t.find_last_not_of(' ') + 1);
      return t;
    };
    result.provenance["config." + trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }

  // A (power, trial) pair counts as done only when every receiver is present.
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> seen;
  for (const SweepRow& r : completed)
    if (r.scenario_id == s.scenario_id) ++seen[{r.power_index, r.trial}];
  std::set<std::pair<std::size_t, std::size_t>> done;
  for (const auto& [key, count] : seen)
    if (count >= s.receivers.size()) done.insert(key);
  for (const SweepRow& r : completed)
    if (r.scenario_id == s.scenario_id && done.count({r.power_index, r.trial})) result.rows.push_back(r);

  std::vector<std::pair<std::size_t, std::size_t>> jobs;
  for (std::size_t p = 0; p < s.tx_power_dbm_sweep.size(); ++p)
    for (std::size_t t = 0; t < static_cast<std::size_t>(s.trials); ++t)
      if (!done.count({p, t})) jobs.emplace_back(p, t);

  std::vector<std::vector<SweepRow>> slots(jobs.size());
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> finished{0};
  std::mutex io;
  std::ofstream checkpoint;
  if (opt.checkpoint) {
    const bool fresh = !std::filesystem::exists(*opt.checkpoint) || std::filesystem::file_size(*opt.checkpoint) == 0;
    checkpoint.open(*opt.checkpoint, std::ios::app);
    if (!checkpoint) throw FormatError("cannot open checkpoint " + opt.checkpoint->string());
    if (fresh) checkpoint << kCsvHeader << '\n' << std::flush;
  }

  auto worker = [&] {
    for (;;) {
      const std::size_t j = next.fetch_add(1);
      if (j >= jobs.size()) return;
      const auto [p, t] = jobs[j];
      const std::uint64_t seed = trial_seed(s.master_seed, p, t);
      const double power = s.tx_power_dbm_sweep[p];
      std::vector<SweepRow> rows;
      for (TrialOutcome& o : run_trial(s, pilots.frame, power, seed))
        rows.push_back(SweepRow{s.scenario_id, seed, p, t, power, std::move(o)});
      {
        std::lock_guard<std::mutex> lock(io);
        if (checkpoint.is_open()) {
          for (const SweepRow& r : rows) checkpoint << format_row(r) << '\n';
          checkpoint.flush();
        }
        slots[j] = std::move(rows);
        const std::size_t f = ++finished;
        if (opt.progress) opt.progress(f, jobs.size());
      }
    }
  };

  const int n_workers = std::max(1, std::min<int>(worker_count(opt.threads), static_cast<int>(jobs.size())));
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < n_workers; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (auto& slot : slots)
    for (auto& r : slot) result.rows.push_back(std::move(r));
  sort_rows(result.rows);
  return result;
}

void write_csv(const std::filesystem::path& path, const SweepResult& result) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw FormatError("cannot write " + path.string());
  for (const auto& [k, v] : result.provenance) os << "# " << k << '=' << v << '\n';
  os << kCsvHeader << '\n';
  for (const SweepRow& r : result.rows) os << format_row(r) << '\n';
  if (!os) throw FormatError("short write to " + path.string());
}

namespace {

double parse_double(const std::string& v) {
  if (v == "nan") return kNan;
  std::size_t pos = 0;
  const double d = std::stod(v, &pos);
  if (pos != v.size()) throw std::invalid_argument(v);
  return d;
}

}  // namespace

std::vector<SweepRow> read_csv(const std::filesystem::path& path, const Scenario* s) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open " + path.string());
  std::vector<SweepRow> rows;
  std::string line;
  int lineno = 0;
  bool header = false;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    if (line.rfind("scenario_id,", 0) == 0) {
      header = true;
      continue;
    }
    if (!header) throw FormatError(path.string() + ": missing CSV header");
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 11) throw FormatError(path.string() + ":" + std::to_string(lineno) + ": expected 11 fields");
    SweepRow r;
    try {
      r.scenario_id = f[0];
      r.seed = std::stoull(f[1]);
      r.tx_power_dbm = parse_double(f[2]);
      r.outcome.receiver = f[3];
      r.outcome.ber = parse_double(f[4]);
      r.outcome.nmse = parse_double(f[5]);
      r.outcome.md = std::stoi(f[6]);
      r.outcome.fa = std::stoi(f[7]);
      r.outcome.throughput_bits = parse_double(f[8]);
      r.outcome.iterations_run = std::stoi(f[9]);
      r.outcome.active_users = std::stoi(f[10]);
    } catch (const std::exception&) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": malformed field");
    }
    if (s) {
      // Recover the sweep coordinates from the seed.
      bool found = false;
      for (std::size_t p = 0; p < s->tx_power_dbm_sweep.size() && !found; ++p)
        for (std::size_t t = 0; t < static_cast<std::size_t>(s->trials) && !found; ++t)
          if (trial_seed(s->master_seed, p, t) == r.seed) {
            r.power_index = p;
            r.trial = t;
            found = true;
          }
      if (!found) r.scenario_id += "?";  // not part of this sweep
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

double quantile(std::vector<double> v, double q) {
  v.erase(std::remove_if(v.begin(), v.end(), [](double d) { return std::isnan(d); }), v.end());
  if (v.empty()) return kNan;
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

std::vector<SummaryRow> summarize(const std::vector<SweepRow>& rows) {
  struct Acc {
    std::vector<double> ber, nmse, thr;
    double md = 0, fa = 0, active = 0;
    int n = 0, failures = 0, det_rows = 0;
  };
  std::map<std::tuple<std::string, double, std::string>, Acc> groups;
  for (const SweepRow& r : rows) {
    Acc& a = groups[{r.scenario_id, r.tx_power_dbm, r.outcome.receiver}];
    ++a.n;
    if (!r.outcome.error.empty() || (std::isnan(r.outcome.nmse) && r.outcome.md < 0)) ++a.failures;
    a.ber.push_back(r.outcome.ber);
    a.nmse.push_back(r.outcome.nmse);
    a.thr.push_back(r.outcome.throughput_bits);
    if (r.outcome.md >= 0) {
      a.md += r.outcome.md;
      a.fa += r.outcome.fa;
      a.active += r.outcome.active_users;
      ++a.det_rows;
    }
  }
  std::vector<SummaryRow> out;
  const auto& names = known_receivers();
  for (auto& [key, a] : groups) {
    SummaryRow s;
    std::tie(s.scenario_id, s.tx_power_dbm, s.receiver) = key;
    s.trials = a.n;
    s.failures = a.failures;
    std::vector<double> ber_ok;
    for (double b : a.ber)
      if (!std::isnan(b)) ber_ok.push_back(b);
    s.ber_mean = ber_ok.empty() ? kNan : std::accumulate(ber_ok.begin(), ber_ok.end(), 0.0) / ber_ok.size();
    s.ber_median = quantile(a.ber, 0.5);
    s.ber_q25 = quantile(a.ber, 0.25);
    s.ber_q75 = quantile(a.ber, 0.75);
    s.nmse_median = quantile(a.nmse, 0.5);
    s.nmse_q25 = quantile(a.nmse, 0.25);
    s.nmse_q75 = quantile(a.nmse, 0.75);
    s.md_mean = a.det_rows ? a.md / a.det_rows : kNan;
    s.fa_mean = a.det_rows ? a.fa / a.det_rows : kNan;
    s.md_probability = a.active > 0 ? a.md / a.active : kNan;
    std::vector<double> thr_ok;
    for (double t : a.thr)
      if (!std::isnan(t)) thr_ok.push_back(t);
    s.throughput_mean = thr_ok.empty() ? kNan : std::accumulate(thr_ok.begin(), thr_ok.end(), 0.0) / thr_ok.size();
    out.push_back(s);
  }
  auto rank = [&](const std::string& r) { return std::find(names.begin(), names.end(), r) - names.begin(); };
  std::stable_sort(out.begin(), out.end(), [&](const SummaryRow& a, const SummaryRow& b) {
    return std::make_tuple(a.scenario_id, a.tx_power_dbm, rank(a.receiver)) <
           std::make_tuple(b.scenario_id, b.tx_power_dbm, rank(b.receiver));
  });
  return out;
}

void write_summary_csv(const std::filesystem::path& path, const std::vector<SummaryRow>& rows) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw FormatError("cannot write " + path.string());
  os << "scenario_id,tx_power_dbm,receiver,trials,failures,ber_mean,ber_median,ber_q25,ber_q75,"
        "nmse_median,nmse_q25,nmse_q75,md_mean,fa_mean,md_probability,throughput_mean\n";
  for (const SummaryRow& r : rows)
    os << r.scenario_id << ',' << fmt(r.tx_power_dbm) << ',' << r.receiver << ',' << r.trials << ',' << r.failures << ','
       << fmt(r.ber_mean) << ',' << fmt(r.ber_median) << ',' << fmt(r.ber_q25) << ',' << fmt(r.ber_q75) << ','
       << fmt(r.nmse_median) << ',' << fmt(r.nmse_q25) << ',' << fmt(r.nmse_q75) << ',' << fmt(r.md_mean) << ','
       << fmt(r.fa_mean) << ',' << fmt(r.md_probability) << ',' << fmt(r.throughput_mean) << '\n';
  if (!os) throw FormatError("short write to " + path.string());
}

}  // namespace gfree

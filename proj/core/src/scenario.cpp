#include "gfree/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "gfree/types.hpp"

namespace gfree {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(std::string v) {
  v = trim(v);
  if (!v.empty() && v.front() == '[') {
    if (v.back() != ']') throw FormatError("unterminated list: " + v);
    v = v.substr(1, v.size() - 2);
  }
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.size() >= 2 && item.front() == '"' && item.back() == '"') item = item.substr(1, item.size() - 2);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  double d = 0.0;
  try {
    d = std::stod(v, &pos);
  } catch (const std::exception&) {
    throw FormatError("key '" + key + "': not a number: " + v);
  }
  if (pos != v.size()) throw FormatError("key '" + key + "': trailing characters in " + v);
  return d;
}

long long to_int(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  long long i = 0;
  try {
    i = std::stoll(v, &pos);
  } catch (const std::exception&) {
    throw FormatError("key '" + key + "': not an integer: " + v);
  }
  if (pos != v.size()) throw FormatError("key '" + key + "': not an integer: " + v);
  return i;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  unsigned long long i = 0;
  try {
    if (!v.empty() && v.front() == '-') throw std::invalid_argument("negative");
    i = std::stoull(v, &pos);
  } catch (const std::exception&) {
    throw FormatError("key '" + key + "': not an unsigned integer: " + v);
  }
  if (pos != v.size()) throw FormatError("key '" + key + "': not an unsigned integer: " + v);
  return i;
}

std::string unquote(std::string v) {
  if (v.size() >= 2 && v.front() == '"' && v.back() == '"') v = v.substr(1, v.size() - 2);
  return v;
}

std::string fmt(double d) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", d);
  return buf;
}

using Setter = std::function<void(Scenario&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> m = {
      {"scenario_id", [](Scenario& s, const std::string&, const std::string& v) { s.scenario_id = unquote(v); }},
      {"n_aps", [](Scenario& s, const std::string& k, const std::string& v) { s.n_aps = static_cast<int>(to_int(k, v)); }},
      {"m_users", [](Scenario& s, const std::string& k, const std::string& v) { s.m_users = static_cast<int>(to_int(k, v)); }},
      {"area_side_m", [](Scenario& s, const std::string& k, const std::string& v) { s.area_side_m = to_double(k, v); }},
      {"lambda", [](Scenario& s, const std::string& k, const std::string& v) { s.lambda = to_double(k, v); }},
      {"k_total", [](Scenario& s, const std::string& k, const std::string& v) { s.k_total = static_cast<int>(to_int(k, v)); }},
      {"k_pilot", [](Scenario& s, const std::string& k, const std::string& v) { s.k_pilot = static_cast<int>(to_int(k, v)); }},
      {"subcarrier_khz", [](Scenario& s, const std::string& k, const std::string& v) { s.subcarrier_khz = to_double(k, v); }},
      {"nf_db", [](Scenario& s, const std::string& k, const std::string& v) { s.nf_db = to_double(k, v); }},
      {"temperature_k", [](Scenario& s, const std::string& k, const std::string& v) { s.temperature_k = to_double(k, v); }},
      {"shadowing_std_db", [](Scenario& s, const std::string& k, const std::string& v) { s.shadowing_std_db = to_double(k, v); }},
      {"tx_power_dbm_sweep",
       [](Scenario& s, const std::string& k, const std::string& v) {
         s.tx_power_dbm_sweep.clear();
         for (const auto& item : split_list(v)) s.tx_power_dbm_sweep.push_back(to_double(k, item));
       }},
      {"tx_power_dbm",
       [](Scenario& s, const std::string& k, const std::string& v) { s.tx_power_dbm_sweep = {to_double(k, v)}; }},
      {"t_max", [](Scenario& s, const std::string& k, const std::string& v) { s.t_max = static_cast<int>(to_int(k, v)); }},
      {"eta", [](Scenario& s, const std::string& k, const std::string& v) { s.eta = to_double(k, v); }},
      {"receivers", [](Scenario& s, const std::string&, const std::string& v) { s.receivers = split_list(v); }},
      {"trials", [](Scenario& s, const std::string& k, const std::string& v) { s.trials = static_cast<int>(to_int(k, v)); }},
      {"master_seed", [](Scenario& s, const std::string& k, const std::string& v) { s.master_seed = to_u64(k, v); }},
      {"pilot_file", [](Scenario& s, const std::string&, const std::string& v) { s.pilot_file = unquote(v); }},
      {"pilot_seed", [](Scenario& s, const std::string& k, const std::string& v) { s.pilot_seed = to_u64(k, v); }},
      {"csidco_iterations",
       [](Scenario& s, const std::string& k, const std::string& v) { s.csidco_iterations = static_cast<int>(to_int(k, v)); }},
      {"projection_iterations",
       [](Scenario& s, const std::string& k, const std::string& v) { s.projection_iterations = static_cast<int>(to_int(k, v)); }},
  };
  return m;
}

}  // namespace

const std::vector<std::string>& known_receivers() {
  static const std::vector<std::string> r = {"bigabp", "zf_mmvamp", "gabp_mmvamp", "genie_gabp",
                                             "mmv_amp", "mns",       "genie_mmse"};
  return r;
}

void Scenario::validate() const {
  auto fail = [](const std::string& what) { throw DomainError("scenario: " + what); };
  if (scenario_id.empty() || scenario_id.find_first_of(",\n\"") != std::string::npos)
    fail("scenario_id must be non-empty and free of commas, quotes and newlines");
  if (n_aps < 1) fail("n_aps must be >= 1");
  if (m_users < 2) fail("m_users must be >= 2");
  if (!(area_side_m > 0.0)) fail("area_side_m must be positive");
  if (!(lambda > 0.0 && lambda <= 1.0)) fail("lambda must lie in (0, 1]");
  if (k_pilot < 1) fail("k_pilot must be >= 1");
  if (k_pilot >= k_total) fail("k_pilot must be smaller than k_total");
  if (k_pilot >= m_users) fail("k_pilot must be smaller than m_users");
  if (m_users > k_pilot * k_pilot) fail("m_users must not exceed k_pilot^2");
  if (!(subcarrier_khz > 0.0)) fail("subcarrier_khz must be positive");
  if (!(temperature_k > 0.0)) fail("temperature_k must be positive");
  if (!(shadowing_std_db >= 0.0)) fail("shadowing_std_db must be non-negative");
  if (tx_power_dbm_sweep.empty()) fail("tx_power_dbm_sweep must not be empty");
  for (double p : tx_power_dbm_sweep)
    if (!std::isfinite(p)) fail("transmit powers must be finite");
  if (t_max < 1) fail("t_max must be >= 1");
  if (!(eta > 0.0 && eta <= 1.0)) fail("eta must lie in (0, 1]");
  if (receivers.empty()) fail("receivers must not be empty");
  for (const auto& r : receivers)
    if (std::find(known_receivers().begin(), known_receivers().end(), r) == known_receivers().end())
      fail("unknown receiver '" + r + "'");
  if (trials < 1) fail("trials must be >= 1");
  if (csidco_iterations < 0 || projection_iterations < 0) fail("pilot design iteration counts must be non-negative");
}

std::string Scenario::to_config() const {
  std::ostringstream os;
  auto list = [](const auto& v, auto render) {
    std::string s = "[";
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? ", " : "") + render(v[i]);
    return s + "]";
  };
  os << "scenario_id = " << scenario_id << "\n"
     << "n_aps = " << n_aps << "\n"
     << "m_users = " << m_users << "\n"
     << "area_side_m = " << fmt(area_side_m) << "\n"
     << "lambda = " << fmt(lambda) << "\n"
     << "k_total = " << k_total << "\n"
     << "k_pilot = " << k_pilot << "\n"
     << "subcarrier_khz = " << fmt(subcarrier_khz) << "\n"
     << "nf_db = " << fmt(nf_db) << "\n"
     << "temperature_k = " << fmt(temperature_k) << "\n"
     << "shadowing_std_db = " << fmt(shadowing_std_db) << "\n"
     << "tx_power_dbm_sweep = " << list(tx_power_dbm_sweep, fmt) << "\n"
     << "t_max = " << t_max << "\n"
     << "eta = " << fmt(eta) << "\n"
     << "receivers = " << list(receivers, [](const std::string& s) { return s; }) << "\n"
     << "trials = " << trials << "\n"
     << "master_seed = " << master_seed << "\n";
  if (!pilot_file.empty()) os << "pilot_file = " << pilot_file << "\n";
  os << "pilot_seed = " << pilot_seed << "\n"
     << "csidco_iterations = " << csidco_iterations << "\n"
     << "projection_iterations = " << projection_iterations << "\n";
  return os.str();
}

Scenario parse_scenario(const std::string& text) {
  Scenario s;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) throw FormatError("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    if (value.empty()) throw FormatError("line " + std::to_string(lineno) + ": empty value for '" + key + "'");
    it->second(s, key, value);
  }
  try {
    s.validate();
  } catch (const DomainError& e) {
    throw FormatError(e.what());
  }
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open config " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  Scenario s = parse_scenario(ss.str());
  // Relative pilot paths are taken relative to the config file.
  if (!s.pilot_file.empty() && std::filesystem::path(s.pilot_file).is_relative())
    s.pilot_file = (path.parent_path() / s.pilot_file).string();
  return s;
}

}  // namespace gfree

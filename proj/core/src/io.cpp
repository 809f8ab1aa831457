#include "diqkd/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "diqkd/errors.hpp"

namespace diqkd::io {
namespace {

using nlohmann::json;
using nlohmann::ordered_json;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

template <class T>
T parse_number(const std::string& s, int line, const char* what) {
  std::istringstream is(s);
  T v{};
  is >> v;
  if (s.empty() || !is || !is.eof()) {
    throw DataError("line " + std::to_string(line) + ": bad " + what + " '" + s + "'");
  }
  return v;
}

constexpr double kDeg = std::numbers::pi / 180.0;

}  // namespace

std::vector<CountRecord> read_counts_csv(std::istream& in) {
  std::string line;
  int lineno = 0;
  bool header = false;
  while (!header && std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::string h;
    for (const auto& c : split(line)) h += (h.empty() ? "" : ",") + c;
    if (h != kCountHeader) {
      throw DataError("count CSV header must be '" + std::string(kCountHeader) + "'");
    }
    header = true;
  }
  if (!header) throw DataError("count CSV is empty");

  std::vector<CountRecord> records;
  std::vector<std::array<bool, kSettings>> seen;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto f = split(line);
    if (f.size() != 8) {
      throw DataError("line " + std::to_string(lineno) + ": expected 8 fields, got " +
                      std::to_string(f.size()));
    }
    const int fiber = parse_number<int>(f[0], lineno, "fiber_m");
    const double u = parse_number<double>(f[1], lineno, "mean_photon");
    const int x = parse_number<int>(f[2], lineno, "x");
    const int y = parse_number<int>(f[3], lineno, "y");
    if (x < 1 || x > kInputsA || y < 1 || y > kInputsB) {
      throw DataError("line " + std::to_string(lineno) + ": setting (" + f[2] + "," + f[3] +
                      ") out of range");
    }
    std::array<std::int64_t, 4> n{};
    // Columns n11, n10, n01, n00 map to outcome indices 3, 2, 1, 0.
    for (int k = 0; k < 4; ++k) {
      const auto v = parse_number<std::int64_t>(f[4 + k], lineno, "count");
      if (v < 0) throw DataError("line " + std::to_string(lineno) + ": negative count");
      n[3 - k] = v;
    }
    auto it = std::find_if(records.begin(), records.end(),
                           [&](const CountRecord& r) { return r.fiber_m == fiber; });
    if (it == records.end()) {
      records.push_back({fiber, u, {}});
      seen.emplace_back();
      it = records.end() - 1;
    }
    const auto idx = it - records.begin();
    if (std::abs(it->mean_photon - u) > 1e-12) {
      throw DataError("line " + std::to_string(lineno) + ": mean_photon differs within fiber " +
                      std::to_string(fiber));
    }
    const int s = setting_index(x - 1, y - 1);
    if (seen[idx][s]) {
      throw DataError("line " + std::to_string(lineno) + ": duplicate setting " +
                      setting_label(x - 1, y - 1));
    }
    seen[idx][s] = true;
    it->counts.counts[s] = n;
  }
  if (records.empty()) throw DataError("count CSV has no data rows");
  for (std::size_t r = 0; r < records.size(); ++r) {
    for (int s = 0; s < kSettings; ++s) {
      if (!seen[r][s]) {
        throw DataError("fiber " + std::to_string(records[r].fiber_m) + " lacks setting " +
                        setting_label(s / kInputsB, s % kInputsB));
      }
    }
  }
  return records;
}

std::vector<CountRecord> read_counts_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  return read_counts_csv(in);
}

void write_counts_csv(std::ostream& out, const std::vector<CountRecord>& records) {
  out << kCountHeader << '\n';
  for (const auto& r : records) {
    for (int x = 0; x < kInputsA; ++x) {
      for (int y = 0; y < kInputsB; ++y) {
        const auto& n = r.counts.counts[setting_index(x, y)];
        out << r.fiber_m << ',' << r.mean_photon << ',' << x + 1 << ',' << y + 1 << ',' << n[3]
            << ',' << n[2] << ',' << n[1] << ',' << n[0] << '\n';
      }
    }
  }
}

const CountRecord& select_fiber(const std::vector<CountRecord>& records, int fiber_m) {
  for (const auto& r : records) {
    if (r.fiber_m == fiber_m) return r;
  }
  throw DataError("no counts for fiber length " + std::to_string(fiber_m));
}

std::string probability_key(int a, int b, int x, int y) {
  return "P(" + std::to_string(a) + "," + std::to_string(b) + "|" + std::to_string(x + 1) + "," +
         std::to_string(y + 1) + ")";
}

namespace {

ordered_json behavior_json(const Behavior& b) {
  ordered_json j;
  for (int x = 0; x < kInputsA; ++x) {
    for (int y = 0; y < kInputsB; ++y) {
      for (int a = 0; a < 2; ++a) {
        for (int bb = 0; bb < 2; ++bb) j[probability_key(a, bb, x, y)] = b(a, bb, x, y);
      }
    }
  }
  return j;
}

ordered_json table_json(const Behavior::Table& t) {
  ordered_json j;
  for (int x = 0; x < kInputsA; ++x) {
    for (int y = 0; y < kInputsB; ++y) {
      for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) j[probability_key(a, b, x, y)] = t[Behavior::flat_index(a, b, x, y)];
      }
    }
  }
  return j;
}

ordered_json certificate_json(const BellFunctional& g) {
  ordered_json j;
  j["alpha"] = g.alpha;
  j["lambda"] = table_json(g.lambda);
  j["collins_gisin"] = {{"beta", g.beta}, {"gamma", g.gamma}};
  return j;
}

ordered_json model_json(const SpdcParams& p) {
  std::vector<double> a, b;
  for (double v : p.angles_a) a.push_back(v / kDeg);
  for (double v : p.angles_b) b.push_back(v / kDeg);
  return {{"r", p.r},
          {"visibility", p.visibility},
          {"eta_a", p.eta_a},
          {"eta_b", p.eta_b},
          {"dark_count", p.dark_count},
          {"mean_photon", p.mean_photon},
          {"angles_a_deg", a},
          {"angles_b_deg", b},
          {"max_pairs", p.max_pairs}};
}

ordered_json params_json(const PreprocessParams& p) {
  return {{"p", p.keep_prob}, {"p_N", p.flip_prob}};
}

json parse(const std::string& text, bool config) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    const std::string msg = std::string("invalid JSON: ") + e.what();
    if (config) throw ConfigError(msg);
    throw DataError(msg);
  }
}

}  // namespace

std::string behavior_to_json(const Behavior& b) {
  ordered_json j;
  j["behavior"] = behavior_json(b);
  j["no_signaling_residual"] = no_signaling_residual(b);
  return j.dump(2);
}

Behavior behavior_from_json(const std::string& text) {
  json j = parse(text, false);
  if (j.is_object() && j.contains("behavior")) j = j["behavior"];
  if (!j.is_object()) throw DataError("behavior JSON must be an object");
  Behavior::Table t{};
  for (int x = 0; x < kInputsA; ++x) {
    for (int y = 0; y < kInputsB; ++y) {
      for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) {
          const std::string key = probability_key(a, b, x, y);
          if (!j.contains(key) || !j[key].is_number()) {
            throw DataError("behavior JSON lacks numeric entry " + key);
          }
          t[Behavior::flat_index(a, b, x, y)] = j[key].get<double>();
        }
      }
    }
  }
  return Behavior::from_table(t);
}

SpdcParams spdc_params_from_json(const std::string& text) {
  const json j = parse(text, true);
  if (!j.is_object()) throw ConfigError("model JSON must be an object");
  auto number = [&](const char* name) {
    if (!j.contains(name)) throw ConfigError(std::string("missing field '") + name + "'");
    if (!j[name].is_number()) throw ConfigError(std::string("field '") + name + "' must be a number");
    return j[name].get<double>();
  };
  auto angles = [&](const char* name, std::size_t n) {
    if (!j.contains(name)) throw ConfigError(std::string("missing field '") + name + "'");
    const json& v = j[name];
    if (!v.is_array() || v.size() != n) {
      throw ConfigError(std::string("field '") + name + "' must hold " + std::to_string(n) +
                        " angles");
    }
    std::vector<double> out;
    for (const auto& e : v) {
      if (!e.is_number()) throw ConfigError(std::string("field '") + name + "' must be numeric");
      out.push_back(e.get<double>() * kDeg);
    }
    return out;
  };
  SpdcParams p;
  p.r = number("r");
  p.visibility = number("visibility");
  p.eta_a = number("eta_a");
  p.eta_b = number("eta_b");
  p.dark_count = number("dark_count");
  p.mean_photon = number("mean_photon");
  const auto a = angles("angles_a_deg", kInputsA);
  const auto b = angles("angles_b_deg", kInputsB);
  std::copy(a.begin(), a.end(), p.angles_a.begin());
  std::copy(b.begin(), b.end(), p.angles_b.begin());
  if (j.contains("max_pairs")) {
    if (!j["max_pairs"].is_number_integer()) throw ConfigError("field 'max_pairs' must be an integer");
    p.max_pairs = j["max_pairs"].get<int>();
  }
  p.validate();
  return p;
}

std::string spdc_params_to_json(const SpdcParams& p) { return model_json(p).dump(2); }

std::string projection_to_json(const ProjectionResult& r) {
  ordered_json j;
  j["raw"] = behavior_json(r.raw);
  j["projected"] = behavior_json(r.projected);
  j["distance"] = r.distance;
  j["solver_status"] = sdp::to_string(r.status);
  j["iterations"] = r.iterations;
  j["no_signaling_residual"] = no_signaling_residual(r.projected);
  return j.dump(2);
}

std::string certificate_to_json(const BellFunctional& g) { return certificate_json(g).dump(2); }

std::string report_to_json(const KeyRateReport& r) {
  const EntropyBoundResult& e = r.entropy;
  ordered_json nodes = ordered_json::array();
  for (const auto& n : e.nodes) {
    nodes.push_back({{"t", n.t},
                     {"weight", n.weight},
                     {"alpha", n.alpha},
                     {"coefficient", n.coefficient},
                     {"value", std::isnan(n.value) ? ordered_json(nullptr) : ordered_json(n.value)},
                     {"primal", n.primal},
                     {"status", sdp::to_string(n.status)},
                     {"iterations", n.iterations}});
  }
  ordered_json j;
  j["source"] = r.source;
  j["rate"] = r.rate;
  j["positive"] = r.positive;
  j["p_v"] = r.p_v;
  j["entropy_bound"] = e.bound;
  j["ec_cost"] = r.ec_cost;
  j["f_e"] = r.f_e;
  j["params"] = params_json(r.params);
  if (r.model) j["model"] = model_json(*r.model);
  j["stats"] = {{"tilde_p", r.stats.tilde_p}, {"hat_p", r.stats.hat_p}};
  j["bound"] = {{"value", e.bound},
                {"c_m", e.c_m},
                {"final_term", e.final_term},
                {"status", sdp::to_string(e.status)},
                {"basis_size", e.basis_size},
                {"moment_count", e.moment_count},
                {"configuration", e.configuration},
                {"nodes", nodes}};
  j["certificate"] = certificate_json(e.dual);
  j["confidence"] = {{"lambda_max", r.lambda_max},
                     {"epsilon", r.epsilon},
                     {"rounds", r.rounds},
                     {"delta", r.delta}};
  j["configuration"] = r.configuration;
  j["fingerprint"] = r.fingerprint;
  return j.dump(2);
}

namespace {

ordered_json point_json(const SweepPoint& p) {
  return {{"eta", p.eta},
          {"rate", p.rate},
          {"params", params_json(p.best.params)},
          {"model", model_json(p.best.model)}};
}

}  // namespace

std::string sweep_to_json(const SweepResult& s) {
  ordered_json j;
  ordered_json grid = ordered_json::array(), bis = ordered_json::array();
  for (const auto& p : s.grid) grid.push_back(point_json(p));
  for (const auto& p : s.bisection) bis.push_back(point_json(p));
  j["grid"] = grid;
  j["bisection"] = bis;
  j["threshold"] = s.threshold ? ordered_json(*s.threshold) : ordered_json(nullptr);
  j["fingerprint"] = s.fingerprint;
  return j.dump(2);
}

void write_sweep_csv(std::ostream& out, const SweepResult& s) {
  std::vector<SweepPoint> all = s.grid;
  all.insert(all.end(), s.bisection.begin(), s.bisection.end());
  std::stable_sort(all.begin(), all.end(),
                   [](const SweepPoint& a, const SweepPoint& b) { return a.eta < b.eta; });
  out << "eta,rate\n";
  out.precision(10);
  for (const auto& p : all) out << p.eta << ',' << p.rate << '\n';
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  out << content;
  if (!content.empty() && content.back() != '\n') out << '\n';
}

}  // namespace diqkd::io

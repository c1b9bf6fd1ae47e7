#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <system_error>

#include <nlohmann/json.hpp>

#include "analytic.hpp"
#include "cavity.hpp"
#include "errors.hpp"
#include "fit.hpp"
#include "network.hpp"
#include "service.hpp"
#include "tail.hpp"

namespace jsq {

using json = nlohmann::ordered_json;

/// Shortest decimal that reads back to the same double.
inline std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
  double x = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), x);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw ConfigError("malformed number '" + std::string(s) + "'");
  return x;
}

// ---- tail CSV: k,p,ci_low,ci_high -----------------------------------------

inline constexpr std::string_view kTailCsvHeader = "k,p,ci_low,ci_high";

inline std::string tail_csv(const TailRows& rows) {
  std::string out(kTailCsvHeader);
  out += '\n';
  for (std::size_t i = 0; i < rows.k.size(); ++i) {
    out += std::to_string(rows.k[i]);
    for (double v : {rows.p[i], rows.ci_low[i], rows.ci_high[i]}) {
      out += ',';
      out += format_double(v);
    }
    out += '\n';
  }
  return out;
}

inline std::string tail_csv(const TailEstimate& est) { return tail_csv(TailRows::from(est)); }

inline TailRows parse_tail_csv(std::string_view text) {
  TailRows rows;
  std::size_t pos = 0;
  bool header = true;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (header) {
      if (line != kTailCsvHeader) throw ConfigError("tail CSV must start with header '" + std::string(kTailCsvHeader) + "'");
      header = false;
      continue;
    }
    std::string_view fields[4];
    std::size_t f = 0, start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
      if (i == line.size() || line[i] == ',') {
        if (f >= 4) throw ConfigError("tail CSV row has more than 4 fields");
        fields[f++] = line.substr(start, i - start);
        start = i + 1;
      }
    }
    if (f != 4) throw ConfigError("tail CSV row must have 4 fields");
    const double k = parse_double(fields[0]);
    if (!(k >= 0.0) || std::floor(k) != k) throw ConfigError("tail CSV level must be a nonnegative integer");
    rows.k.push_back(static_cast<std::size_t>(k));
    rows.p.push_back(parse_double(fields[1]));
    rows.ci_low.push_back(parse_double(fields[2]));
    rows.ci_high.push_back(parse_double(fields[3]));
  }
  if (header) throw ConfigError("tail CSV is empty");
  return rows;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SimulationError("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw SimulationError("cannot open '" + path + "' for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw SimulationError("write to '" + path + "' failed");
}

// ---- service spec ----------------------------------------------------------

inline json to_json(const ServiceSpec& spec) {
  json j;
  j["kind"] = std::string(to_string(spec.kind()));
  if (auto b = spec.beta()) j["beta"] = *b;
  return j;
}

inline ServiceSpec service_from_json(const json& j) {
  if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string())
    throw ConfigError("service must be an object with a string 'kind'");
  for (const auto& [key, _] : j.items())
    if (key != "kind" && key != "beta") throw ConfigError("unknown service field '" + key + "'");
  std::optional<double> beta;
  if (j.contains("beta")) {
    if (!j["beta"].is_number()) throw ConfigError("service beta must be a number");
    beta = j["beta"].get<double>();
  }
  return make_spec(parse_service_kind(j["kind"].get<std::string>()), beta);
}

// ---- reports ---------------------------------------------------------------

inline json to_json(const TailEstimate& e) {
  json j;
  j["method"] = std::string(to_string(e.method));
  j["measurement_time"] = e.measurement_time;
  j["isotonic_applied"] = e.isotonic_applied;
  j["p"] = e.p;
  j["half_width"] = e.hw;
  return j;
}

inline json to_json(const FixedPointReport& r) {
  json j;
  j["converged"] = r.converged;
  j["iterations"] = r.iterations;
  j["cycles_per_iteration"] = r.cycles_per_iter;
  j["distances"] = r.distances;
  j["max_level_visited"] = r.max_level_visited;
  j["env"] = r.env.values();
  j["estimate"] = to_json(r.estimate);
  return j;
}

inline json to_json(const TailFit& f) {
  json j;
  j["model"] = std::string(to_string(f.model));
  j["slope"] = f.slope;
  j["intercept"] = f.intercept;
  j["r2"] = f.r2;
  j["slope_se"] = f.slope_se;
  j["k_lo"] = f.k_lo;
  j["k_hi"] = f.k_hi;
  j["levels"] = f.levels;
  j["weights"] = f.weights;
  return j;
}

inline json to_json(const analytic::RegimeReport& r) {
  json j;
  j["D"] = r.D;
  j["beta"] = r.beta;
  j["regime"] = std::string(analytic::to_string(r.regime));
  j["exponent"] = r.exponent ? json(*r.exponent) : json(nullptr);
  if (r.c1) j["c1"] = *r.c1;
  if (r.c2) j["c2"] = *r.c2;
  if (!r.note.empty()) j["note"] = r.note;
  return j;
}

inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

}  // namespace jsq

#pragma once

// CSV (RFC 4180: CRLF records, quoted fields when needed), DOT and JSON
// emitters for runs and reports.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <iterator>
#include <ostream>
#include <string>
#include <type_traits>
#include <vector>

#include <json.hpp>

#include "acm/acm_engine.hpp"
#include "acm/analysis.hpp"
#include "acm/height_recursion.hpp"
#include "acm/time_delay_graph.hpp"

namespace acm {

using Json = nlohmann::ordered_json;

class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& out) : out_(out) {}

  template <typename... Ts>
  void row(const Ts&... fields) {
    bool first = true;
    ((write_field(to_field(fields), first)), ...);
    out_ << "\r\n";
  }

  void row(const std::vector<std::string>& fields) {
    bool first = true;
    for (const auto& f : fields) write_field(f, first);
    out_ << "\r\n";
  }

  static std::string quote(const std::string& f) {
    if (f.find_first_of(",\"\r\n") == std::string::npos) return f;
    std::string q = "\"";
    for (const char c : f) {
      if (c == '"') q += '"';
      q += c;
    }
    return q + "\"";
  }

 private:
  static std::string to_field(const std::string& s) { return s; }
  static std::string to_field(const char* s) { return s; }
  static std::string to_field(double v) { return format_double(v); }
  template <typename I>
    requires std::is_integral_v<I>
  static std::string to_field(I v) { return std::to_string(v); }

  void write_field(const std::string& f, bool& first) {
    if (!first) out_ << ',';
    first = false;
    out_ << quote(f);
  }

 public:
  // Shortest representation that round-trips; locale independent.
  static std::string format_double(double v) {
    char buf[32];
    for (int prec = 6; prec <= 17; ++prec) {
      std::snprintf(buf, sizeof buf, "%.*g", prec, v);
      if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
  }

 private:
  std::ostream& out_;
};

// One row per edge: ids and marks of both endpoints.
inline void write_edges_csv(std::ostream& out, const ProcessState& state) {
  CsvWriter csv(out);
  csv.row("src", "dst", "mark_src", "mark_dst");
  for (const auto& [u, v] : state.edges()) csv.row(u, v, state.mark(u), state.mark(v));
}

inline void write_series_csv(std::ostream& out, const ProcessState& state) {
  CsvWriter csv(out);
  csv.row("t", "leaves", "max_depth");
  for (Time t = 0; t <= state.time(); ++t) csv.row(t, state.leaf_count(t), state.max_depth(t));
}

inline void write_regeneration_csv(std::ostream& out, const RegenerationReport& rep) {
  CsvWriter csv(out);
  csv.row("time", "gap", "certified");
  for (std::size_t i = 0; i < rep.times.size(); ++i)
    csv.row(rep.times[i], i == 0 ? std::string() : std::to_string(rep.gaps[i - 1]), 1);
  for (const auto t : rep.candidates) csv.row(t, std::string(), 0);
}

inline void write_height_csv(std::ostream& out, const HeightSeries& series) {
  CsvWriter csv(out);
  csv.row("t", "height");
  for (Time t = 0; t <= series.horizon; ++t) csv.row(t, series.X[static_cast<std::size_t>(t)]);
}

inline void write_confirmed_csv(std::ostream& out, const ProcessState& state, const ConfirmationReport& rep) {
  CsvWriter csv(out);
  csv.row("vertex", "mark", "exact", "certified");
  VertexSet all;
  std::set_union(rep.confirmed_exact.begin(), rep.confirmed_exact.end(), rep.confirmed_anchor.begin(),
                 rep.confirmed_anchor.end(), std::back_inserter(all));
  for (const auto v : all)
    csv.row(v, state.mark(v), std::binary_search(rep.confirmed_exact.begin(), rep.confirmed_exact.end(), v) ? 1 : 0,
            std::binary_search(rep.confirmed_anchor.begin(), rep.confirmed_anchor.end(), v) ? 1 : 0);
}

inline void write_drift_csv(std::ostream& out, const DriftReport& rep) {
  CsvWriter csv(out);
  csv.row("level", "count", "mean_increment");
  for (const auto& [level, l] : rep.levels) csv.row(level, l.count, l.mean());
}

struct DotOptions {
  VertexSet confirmed;        // filled red
  VertexSet certified;        // outlined in bold
  bool highlight_leaves = true;
  std::string name = "acm";
};

// Edges drawn from the new vertex to its targets; vertices labelled by mark.
inline void write_dot(std::ostream& out, const ProcessState& state, const DotOptions& opt = {}) {
  out << "digraph " << opt.name << " {\n";
  out << "  rankdir=RL;\n  node [shape=circle, fontsize=8, width=0.25, fixedsize=true];\n";
  const Time T = state.time();
  for (VertexId v = 0; v < state.vertex_count(); ++v) {
    out << "  v" << v << " [label=\"" << state.mark(v) << "\"";
    if (std::binary_search(opt.confirmed.begin(), opt.confirmed.end(), v))
      out << ", style=filled, fillcolor=\"#d62728\", fontcolor=white, confirmed=true";
    else if (opt.highlight_leaves && state.is_leaf_at(v, T))
      out << ", style=filled, fillcolor=\"#aec7e8\"";
    if (std::binary_search(opt.certified.begin(), opt.certified.end(), v)) out << ", penwidth=2.5, certified=true";
    if (v == state.root()) out << ", shape=doublecircle";
    out << "];\n";
  }
  for (const auto& [u, v] : state.edges()) out << "  v" << u << " -> v" << v << ";\n";
  out << "}\n";
}

inline Json to_json(const stats::MeanCI& ci) {
  Json j;
  j["mean"] = ci.mean;
  j["half_width"] = std::isfinite(ci.half_width) ? Json(ci.half_width) : Json(nullptr);
  j["n"] = ci.n;
  return j;
}

inline Json to_json(const GapSummary& s) {
  Json j;
  j["count"] = s.count;
  j["mean"] = s.mean;
  j["variance"] = s.variance;
  j["lag1_autocorrelation"] = s.lag1_autocorrelation;
  j["lag1_standard_error"] = s.lag1_standard_error;
  return j;
}

inline Json to_json(const RegenerationReport& rep) {
  Json j;
  j["seed"] = rep.seed;
  j["horizon"] = rep.horizon;
  j["r"] = rep.r;
  j["censor_margin"] = rep.censor_margin;
  j["certified"] = rep.times.size();
  j["candidates"] = rep.candidates.size();
  j["density"] = rep.density();
  if (rep.times.size() >= 2) j["gaps"] = to_json(gap_statistics(rep));
  return j;
}

inline Json to_json(const DriftReport& rep) {
  Json j;
  j["pairs"] = rep.pairs;
  j["hypothesis_holds"] = rep.hypothesis_holds;
  Json bands = Json::array();
  for (const auto& [lo, ci] : rep.dyadic_bands()) {
    Json b = to_json(ci);
    b["level_min"] = lo;
    b["level_max"] = 2 * lo - 1;
    bands.push_back(b);
  }
  j["bands"] = bands;
  Json levels = Json::array();
  for (const auto& [level, l] : rep.levels) levels.push_back(Json{{"level", level}, {"count", l.count}, {"mean", l.mean()}});
  j["levels"] = levels;
  return j;
}

inline Json to_json(const CommutingReport& rep) {
  Json j;
  j["horizon"] = rep.horizon;
  Json entries = Json::array();
  for (const auto& e : rep.entries)
    entries.push_back(Json{{"j", e.j},
                           {"equality_horizon", e.equality_horizon},
                           {"coupling_bound", e.coupling_bound},
                           {"distance", e.distance}});
  j["entries"] = entries;
  j["horizons_dominate_bounds"] = rep.horizons_dominate_bounds();
  j["horizons_non_decreasing"] = rep.horizons_non_decreasing();
  j["distances_non_increasing"] = rep.distances_non_increasing();
  return j;
}

inline Json to_json(const PhaseSweepReport& rep) {
  Json j;
  j["classification_rule"] = "artifact convention: diverging if exponent > 0.3 and no single-leaf hits, "
                             "recurrent if hits > 0 and exponent <= 0.3";
  Json pts = Json::array();
  for (const auto& p : rep.points)
    pts.push_back(Json{{"alpha", p.alpha},
                       {"exponent", p.exponent},
                       {"hits", p.hits},
                       {"final_mean_leaves", p.final_mean_leaves},
                       {"regime", to_string(p.regime)}});
  j["points"] = pts;
  j["monotone"] = rep.monotone();
  const auto [lo, hi] = rep.transition_window();
  j["window"] = Json{{"largest_diverging", lo ? Json(*lo) : Json(nullptr)},
                     {"smallest_recurrent", hi ? Json(*hi) : Json(nullptr)}};
  return j;
}

}  // namespace acm

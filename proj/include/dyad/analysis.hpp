#pragma once

// Behavioural and interaction metrics over recorded trials: sample entropy
// of heading, binned entropy of inter-agent distance, and DTW between the
// two agents' paths.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dyad/entropy.hpp"
#include "dyad/trial.hpp"
#include "dyad/vec2.hpp"

namespace dyad::analysis {

struct SampleEntropy {
  double value = 0.0;  // +inf when degenerate
  bool degenerate = false;
  std::size_t matches_m = 0;       // B
  std::size_t matches_m_plus = 0;  // A
};

inline double mean(std::span<const double> s) {
  double sum = 0.0;
  for (double v : s) sum += v;
  return sum / static_cast<double>(s.size());
}

// Sample (n - 1) standard deviation.
inline double sample_sd(std::span<const double> s) {
  if (s.size() < 2) return 0.0;
  const double mu = mean(s);
  double acc = 0.0;
  for (double v : s) acc += (v - mu) * (v - mu);
  return std::sqrt(acc / static_cast<double>(s.size() - 1));
}

/// SampEn(m, r) = -ln(A / B). Both counts range over the same n - m
/// templates, self-matches excluded, Chebyshev distance <= r.
inline SampleEntropy sample_entropy(std::span<const double> s, std::size_t m, double r) {
  if (m == 0) throw std::invalid_argument("sample_entropy: embedding length must be positive");
  if (s.size() <= m + 1) throw std::invalid_argument("sample_entropy: series too short for embedding length");
  if (!(r >= 0.0)) throw std::invalid_argument("sample_entropy: tolerance must be non-negative");

  const std::size_t templates = s.size() - m;
  SampleEntropy out;
  for (std::size_t i = 0; i + 1 < templates; ++i) {
    for (std::size_t j = i + 1; j < templates; ++j) {
      std::size_t k = 0;
      while (k < m && std::abs(s[i + k] - s[j + k]) <= r) ++k;
      if (k < m) continue;
      ++out.matches_m;
      if (std::abs(s[i + m] - s[j + m]) <= r) ++out.matches_m_plus;
    }
  }
  if (out.matches_m == 0 || out.matches_m_plus == 0) {
    out.degenerate = true;
    out.value = std::numeric_limits<double>::infinity();
  } else {
    out.value = -std::log(static_cast<double>(out.matches_m_plus) / static_cast<double>(out.matches_m));
  }
  return out;
}

// Tolerance given as a fraction of the series' sample SD.
inline SampleEntropy sample_entropy_relative(std::span<const double> s, std::size_t m = 2, double r_factor = 0.2) {
  return sample_entropy(s, m, r_factor * sample_sd(s));
}

/// Cumulative heading: consecutive differences folded into (-pi, pi].
inline std::vector<double> unwrap(std::span<const double> wrapped) {
  std::vector<double> out;
  out.reserve(wrapped.size());
  for (std::size_t i = 0; i < wrapped.size(); ++i) {
    if (i == 0) {
      out.push_back(wrapped[0]);
      continue;
    }
    double d = std::remainder(wrapped[i] - wrapped[i - 1], 2.0 * std::numbers::pi);
    if (d <= -std::numbers::pi) d += 2.0 * std::numbers::pi;
    out.push_back(out.back() + d);
  }
  return out;
}

inline std::vector<double> heading_series(const experiments::TrialTrace& trace, std::size_t agent) {
  if (agent >= trace.agents.size()) throw std::out_of_range("heading_series: no agent " + std::to_string(agent));
  std::vector<double> raw;
  raw.reserve(trace.agents[agent].steps.size());
  for (const auto& s : trace.agents[agent].steps) raw.push_back(s.heading);
  return unwrap(raw);
}

inline std::vector<double> subsample(std::span<const double> s, std::size_t every) {
  if (every == 0) throw std::invalid_argument("subsample: stride must be positive");
  std::vector<double> out;
  out.reserve(s.size() / every + 1);
  for (std::size_t i = 0; i < s.size(); i += every) out.push_back(s[i]);
  return out;
}

inline std::vector<Vec2> centers(const experiments::AgentTrack& track) {
  std::vector<Vec2> out;
  out.reserve(track.steps.size());
  for (const auto& s : track.steps) out.push_back(s.center);
  return out;
}

/// Normalized entropy of the per-step centre distance, binned into `bins`
/// equal bins over [0, cap]. Distances at or beyond `cap` land in the last bin.
inline double distance_entropy(std::span<const Vec2> a, std::span<const Vec2> b, std::size_t bins = 100,
                               double cap = 100.0) {
  if (a.size() != b.size()) throw std::invalid_argument("distance_entropy: traces differ in length");
  if (bins < 2 || !(cap > 0.0)) throw std::invalid_argument("distance_entropy: need >= 2 bins and cap > 0");
  if (a.empty()) return 0.0;
  std::vector<std::size_t> counts(bins, 0);
  for (std::size_t t = 0; t < a.size(); ++t) {
    const double d = distance(a[t], b[t]);
    const auto i = static_cast<std::size_t>(std::clamp(d / cap, 0.0, 1.0) * static_cast<double>(bins));
    ++counts[std::min(i, bins - 1)];
  }
  const double total = static_cast<double>(a.size());
  double h = 0.0;
  for (std::size_t c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / total;
    h -= p * std::log(p);
  }
  return h / std::log(static_cast<double>(bins));
}

/// Classic DTW, Euclidean local cost, both ends pinned, no window.
inline double dtw_distance(std::span<const Vec2> a, std::span<const Vec2> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("dtw_distance: empty series");
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> prev(b.size() + 1, inf), cur(b.size() + 1, inf);
  prev[0] = 0.0;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = inf;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const double best = std::min({prev[j], cur[j - 1], prev[j - 1]});
      cur[j] = distance(a[i - 1], b[j - 1]) + best;
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

struct AnalysisSettings {
  std::size_t sampen_m = 2;
  double sampen_r_factor = 0.2;
  std::size_t heading_stride = 10;
  std::size_t distance_bins = 100;
  double distance_cap = 100.0;
  std::size_t burn_in = 0;
};

// One row per (run, trial) for the live agent (agent 0). Pair metrics are
// NaN when the trial has no partner.
struct MetricRow {
  std::string run_id;
  std::string config_hash;
  std::string condition;
  std::size_t trial = 0;
  std::size_t agent = 0;
  double neural_entropy = 0.0;
  double heading_sampen = 0.0;
  double distance_entropy = std::numeric_limits<double>::quiet_NaN();
  double dtw = std::numeric_limits<double>::quiet_NaN();
};

inline std::vector<MetricRow> compute_metrics(const std::string& run_id, const std::string& config_hash,
                                              std::span<const experiments::TrialTrace> traces,
                                              const AnalysisSettings& settings = {}) {
  std::vector<MetricRow> rows;
  for (const auto& trace : traces) {
    if (trace.agents.empty()) continue;
    const auto& live = trace.agents[0];
    MetricRow row;
    row.run_id = run_id;
    row.config_hash = config_hash;
    row.condition = std::string(experiments::to_string(trace.condition));
    row.trial = trace.trial_index;

    entropy::Histogram3D h;
    for (std::size_t t = settings.burn_in; t < live.steps.size(); ++t) h.accumulate(live.steps[t].neural);
    row.neural_entropy = entropy::normalized_entropy(h).value;

    const auto heading = subsample(heading_series(trace, 0), settings.heading_stride);
    row.heading_sampen = sample_entropy_relative(heading, settings.sampen_m, settings.sampen_r_factor).value;

    if (trace.agents.size() > 1) {
      const auto a = centers(live);
      const auto b = centers(trace.agents[1]);
      row.distance_entropy = distance_entropy(a, b, settings.distance_bins, settings.distance_cap);
      row.dtw = dtw_distance(a, b);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

struct Descriptive {
  std::size_t n = 0;
  double mean = 0.0;
  double median = 0.0;
  double sd = 0.0;  // population SD (divides by n)
};

// Non-finite values are left out.
inline Descriptive describe(std::vector<double> values) {
  std::erase_if(values, [](double v) { return !std::isfinite(v); });
  Descriptive d;
  d.n = values.size();
  if (values.empty()) {
    d.mean = d.median = d.sd = std::numeric_limits<double>::quiet_NaN();
    return d;
  }
  d.mean = mean(values);
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  d.median = values.size() % 2 ? values[mid] : (values[mid - 1] + values[mid]) / 2.0;
  double acc = 0.0;
  for (double v : values) acc += (v - d.mean) * (v - d.mean);
  d.sd = std::sqrt(acc / static_cast<double>(values.size()));
  return d;
}

struct MetricSummary {
  std::string metric;
  Descriptive stats;
};

struct SummaryRow {
  std::string condition;
  std::size_t rows = 0;
  std::vector<MetricSummary> metrics;  // in metric_columns() order
};

inline const std::vector<std::pair<std::string, double MetricRow::*>>& metric_columns() {
  static const std::vector<std::pair<std::string, double MetricRow::*>> cols = {
      {"neural_entropy", &MetricRow::neural_entropy},
      {"heading_sampen", &MetricRow::heading_sampen},
      {"distance_entropy", &MetricRow::distance_entropy},
      {"dtw", &MetricRow::dtw},
  };
  return cols;
}

/// One row of descriptive statistics per condition, conditions in name order.
inline std::vector<SummaryRow> summarize(std::span<const MetricRow> rows) {
  std::map<std::string, std::vector<const MetricRow*>> groups;
  for (const auto& r : rows) groups[r.condition].push_back(&r);
  std::vector<SummaryRow> out;
  for (const auto& [condition, members] : groups) {
    SummaryRow row{condition, members.size(), {}};
    for (const auto& [name, field] : metric_columns()) {
      std::vector<double> values;
      for (const auto* r : members) values.push_back(r->*field);
      row.metrics.push_back({name, describe(std::move(values))});
    }
    out.push_back(std::move(row));
  }
  return out;
}

}  // namespace dyad::analysis

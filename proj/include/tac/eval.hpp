#pragma once

// Metrics and report aggregation.

#include <array>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "tac/core.hpp"

namespace tac::eval {

/// Fraction of losses strictly above the bound.
double violation_rate(std::span<const double> losses, double bound);

struct ClassificationMetrics {
  std::array<double, kNumClasses> precision{};
  std::array<double, kNumClasses> recall{};
  std::array<double, kNumClasses> f1{};
  std::array<int, kNumClasses> support{};
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  double accuracy = 0.0;
};

/// Confusion-matrix metrics; any 0/0 ratio is 0. Macro averages run over
/// all classes.
ClassificationMetrics classification_metrics(std::span<const int> predictions, std::span<const int> labels);

struct Quartiles {
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
};

/// Linear interpolation between order statistics at position q * (n - 1).
double quantile(std::span<const double> values, double q);
/// Needs at least 4 values.
Quartiles quartiles(std::span<const double> values);
/// Per level cg; each list needs at least 4 values.
std::map<int, Quartiles> cce_quartiles(const std::map<int, std::vector<double>>& per_level);

/// Canonical sample encoding: clamp to [0, 1], scale to [0, 65535], 16-bit LE.
std::vector<unsigned char> encode_samples_u16(std::span<const float> samples);
/// Raw byte length / zlib (deflate, level 9) byte length.
double lossless_cg(std::span<const float> samples);

struct LosslessSummary {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation; 0 for a single segment
  std::size_t n = 0;
};
LosslessSummary lossless_baseline_cg(std::span<const Segment> segments);

/// Spearman rank correlation with average ranks for ties. Needs >= 2
/// points; 0 when either ranking is constant.
double spearman(std::span<const double> x, std::span<const double> y);

struct EvalReport {
  std::string policy;
  double bound = 0.0;
  std::size_t n_segments = 0;
  double avg_cg = 0.0;
  double effective_loss = 0.0;
  double violation_rate = 0.0;
  std::size_t n_fallback = 0;
  ClassificationMetrics classification;
  double peak_f1 = 0.0;
  std::map<int, Quartiles> cce_quartiles;
};

nlohmann::json to_json(const EvalReport& r);
void write_report_json(const std::string& path, const EvalReport& r);
/// bound, policy, avg_cg, effective_loss, violation_rate, n_fallback
void write_sweep_csv(const std::string& path, std::span<const EvalReport> rows);

}  // namespace tac::eval

#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "haste/tensor_store.hpp"

namespace haste::eval {

/// Product-moment correlation; throws on constant input.
double pearson(std::span<const double> x, std::span<const double> y);

/// Kendall tau-b, O(n log n). Throws when either vector is entirely tied.
double kendall_tau(std::span<const double> x, std::span<const double> y);

/// Weighted tau with additive hyperbolic weights 1/(r_i+1) + 1/(r_j+1),
/// r the 0-based descending rank in x. Ties in x are rejected; ties in y
/// are tie-corrected as in tau-b, so perfect agreement gives 1.
double weighted_kendall_tau(std::span<const double> x, std::span<const double> y);

enum class Coefficient { pearson, kendall, weighted_kendall };

std::string to_string(Coefficient c);  // "pearson" | "kendall" | "wkendall"
Coefficient parse_coefficient(const std::string& s);
double correlate(Coefficient c, std::span<const double> scores, std::span<const double> accuracy);

struct ExperimentRecord {
  std::string candidate;
  std::string metric;
  double score = 0.0;
  double accuracy = 0.0;
};

std::vector<ExperimentRecord> to_records(const std::vector<ScoreRow>& rows);
std::vector<ScoreRow> to_score_rows(const std::vector<ExperimentRecord>& records);

inline constexpr double kBaselineEpsilon = 1e-12;

struct MetricCorrelation {
  std::string metric;
  double coefficient = 0.0;
  std::optional<std::string> baseline;
  std::optional<double> improvement_pct;  // absent when |baseline| <= kBaselineEpsilon
};

struct CorrelationReport {
  Coefficient coefficient = Coefficient::pearson;
  std::vector<MetricCorrelation> metrics;  // sorted by metric name
  std::size_t candidates = 0;

  const MetricCorrelation& at(const std::string& metric) const;
};

/// 100 * (modified - baseline) / |baseline|.
std::optional<double> relative_improvement(double modified, double baseline);

/// Pairs each metric named "haste-<method>-<base>" or "bucket-<k>-<base>"
/// with "<base>" when that metric is present.
std::map<std::string, std::string> default_baseline_pairs(const std::vector<std::string>& metrics);

/// Scores are taken per candidate; every metric must cover every candidate.
CorrelationReport evaluate(const std::vector<ExperimentRecord>& records, Coefficient coefficient,
                           const std::map<std::string, std::string>& baseline_pairs);

/// Aggregate improvement across several experiments (datasets).
struct ImprovementSummary {
  std::string metric;
  std::string baseline;
  std::optional<double> mean_of_improvements;  // average of per-dataset percentages
  std::optional<double> improvement_of_means;  // percentage between averaged coefficients
  std::size_t datasets = 0;
};

std::vector<ImprovementSummary> summarize(const std::vector<CorrelationReport>& reports);

Json to_json(const CorrelationReport& r);
Json to_json(const std::vector<ImprovementSummary>& s);
std::string to_text(const CorrelationReport& r);

}  // namespace haste::eval

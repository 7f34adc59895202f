#pragma once

#include <optional>
#include <string>
#include <vector>

#include "haste/hardness.hpp"
#include "haste/tensor_store.hpp"

namespace haste::metrics {

/// Empirical joint over (target label y, source label z) built from soft
/// source predictions.
struct EmpiricalJoint {
  Matrix joint;         // [|Y|, |Z|]
  Vector marginal_z;    // column sums of joint
  Matrix conditional;   // P(y | z); columns with zero support are left at 0
  std::vector<bool> zero_support;
};

struct MetricScore {
  std::string metric;
  double value = 0.0;
  std::size_t subset_size = 0;
  std::size_t total_n = 0;
  Json params = Json::object();
};

using Subset = std::optional<SubsetIndex>;

enum class MetricKind { leep, nce, gbc };
enum class NceMode { hard, soft };

std::string to_string(MetricKind k);
std::string to_string(NceMode m);
MetricKind parse_metric_kind(const std::string& s);
NceMode parse_nce_mode(const std::string& s);

EmpiricalJoint empirical_joint(const PredictionMatrix& preds, const LabelVector& labels, const Subset& subset = {});

MetricScore leep(const PredictionMatrix& preds, const LabelVector& labels, const Subset& subset = {});

/// argmax_z f(x_i)_z per selected row; ties go to the lowest class index.
std::vector<int> dummy_labels(const PredictionMatrix& preds, const Subset& subset = {});

MetricScore nce(const PredictionMatrix& preds, const LabelVector& labels, const Subset& subset = {},
                NceMode mode = NceMode::hard);

struct GbcOptions {
  CovarianceMode mode = CovarianceMode::spherical;
  double ridge = hardness::kDefaultRidge;
};

/// Bhattacharyya distance between two Gaussians of the same kind.
double bhattacharyya_distance(const hardness::ClassGaussian& a, const hardness::ClassGaussian& b);

/// -sum over unordered class pairs of exp(-BD). Only classes present in the
/// subset take part.
MetricScore gbc(const Matrix& features, const LabelVector& labels, const Subset& subset = {}, GbcOptions opts = {});

/// Inputs to a single-model metric.
struct MetricInputs {
  const PredictionMatrix* predictions = nullptr;
  const LabelVector* labels = nullptr;
  const Matrix* features = nullptr;  // GBC only
  GbcOptions gbc;
  NceMode nce_mode = NceMode::hard;
};

MetricScore evaluate_metric(MetricKind kind, const MetricInputs& in, const Subset& subset = {});

/// The metric evaluated on the `fraction` hardest samples of `h`.
MetricScore haste_score(MetricKind kind, const MetricInputs& in, const hardness::HardnessVector& h,
                        double fraction = hardness::kDefaultFraction);

/// Sum of member LEEP scores; each member may use its own subset.
MetricScore ms_leep(const std::vector<PredictionMatrix>& member_preds, const LabelVector& labels,
                    const std::vector<Subset>& member_subsets);

/// Ascending union of indices.
SubsetIndex union_subsets(const std::vector<SubsetIndex>& subsets);

/// Mean over samples of log of the member-averaged mixture probabilities.
MetricScore e_leep(const std::vector<PredictionMatrix>& member_preds, const LabelVector& labels,
                   const Subset& subset = {});

namespace detail {

/// Per selected row: sum_z P(y_i | z) f(x_i)_z, with the joint built on the
/// same rows. Clamped to at most 1.
std::vector<double> mixture_probabilities(const PredictionMatrix& preds, const LabelVector& labels,
                                          const std::vector<std::size_t>& rows);

/// (1/n) sum_i log((1/K) sum_m q_m(i)); throws on a zero average.
double average_log_mixture(const std::vector<std::vector<double>>& member_q);

/// Mean log with -inf on a zero entry instead of throwing.
double mean_log(const std::vector<double>& p);

/// Soft-conditional NCE; -inf when some P(y_i | z_i) is zero.
double soft_nce_value(const PredictionMatrix& preds, const LabelVector& labels, const std::vector<std::size_t>& rows);

}  // namespace detail

}  // namespace haste::metrics

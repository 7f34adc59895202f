#pragma once

#include <optional>
#include <string>
#include <vector>

#include "haste/metrics.hpp"
#include "haste/tensor_store.hpp"

namespace haste::bounds {

inline constexpr double kDefaultTol = 1e-8;
inline constexpr int kDefaultMaxIter = 500;
inline constexpr double kSlackTolerance = 1e-9;

/// Re-trained head k(y|x) = sum_z Q(y|z) f(x)_z fitted by maximum likelihood.
struct HeadFit {
  Matrix q;                          // [|Y|, |Z|], columns sum to one
  double log_likelihood = 0.0;       // average over the fitted rows
  std::vector<double> history;       // initial value first, one entry per accepted update
  int iterations = 0;                // EM updates evaluated
  bool converged = false;
};

/// EM started from the empirical conditional used by LEEP, so the initial
/// likelihood is the LEEP value on the same rows. An update whose gain is
/// below `tol` is not applied and ends the fit.
HeadFit fit_optimal_head(const PredictionMatrix& preds, const LabelVector& labels, const metrics::Subset& subset = {},
                         double tol = kDefaultTol, int max_iter = kDefaultMaxIter);

/// Average log-likelihood of `labels` on `rows` under a fitted head.
double head_log_likelihood(const Matrix& q, const PredictionMatrix& preds, const LabelVector& labels,
                           const std::vector<std::size_t>& rows);

/// Predicted target class argmax_y sum_z Q(y|z) f(x)_z.
int head_predict(const Matrix& q, const PredictionMatrix& preds, std::size_t row);

struct Slack {
  std::string name;
  double value = 0.0;
  bool asserted = true;  // a negative asserted slack is a violation
};

struct BoundReport {
  double haste_leep = 0.0;
  std::optional<double> lower_bound;       // may be -inf
  std::optional<double> upper_bound_hard;
  std::optional<double> upper_bound_full;
  std::vector<Slack> slacks;
  std::vector<std::string> violations;
  int em_iterations = 0;
  bool em_converged = true;
};

/// HASTE-LEEP <= l_hard (asserted); l_hard <= l_full (reported only).
BoundReport lemma1_report(const PredictionMatrix& preds, const LabelVector& labels, const SubsetIndex& hard,
                          double tol = kDefaultTol, int max_iter = kDefaultMaxIter);

/// HASTE-LEEP >= soft NCE + mean log f(x_i)_{z_i} (asserted).
BoundReport lemma2_report(const PredictionMatrix& preds, const LabelVector& labels, const SubsetIndex& hard);

/// Both lemmas merged into one report.
BoundReport bound_report(const PredictionMatrix& preds, const LabelVector& labels, const SubsetIndex& hard,
                         double tol = kDefaultTol, int max_iter = kDefaultMaxIter);

/// The Lemma-2 right-hand side with hard-count NCE in place of the soft one.
double hard_count_lower_bound(const PredictionMatrix& preds, const LabelVector& labels, const SubsetIndex& hard);

Json to_json(const BoundReport& r);

}  // namespace haste::bounds

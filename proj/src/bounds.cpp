#include "haste/bounds.hpp"

#include <cmath>
#include <limits>

namespace haste::bounds {

namespace {

Matrix initial_head(const PredictionMatrix& preds, const LabelVector& labels, const std::vector<std::size_t>& rows) {
  const auto subset = SubsetIndex{rows, preds.n()};
  const auto joint = metrics::empirical_joint(preds, labels, subset);
  Matrix q = joint.conditional;
  // Columns without support never contribute; keep them stochastic anyway.
  for (Eigen::Index z = 0; z < q.cols(); ++z) {
    if (joint.zero_support[static_cast<std::size_t>(z)]) q.col(z).setConstant(1.0 / static_cast<double>(q.rows()));
  }
  return q;
}

void add_slack(BoundReport& r, std::string name, double value, bool asserted) {
  if (asserted && value < -kSlackTolerance) r.violations.push_back(name);
  r.slacks.push_back({std::move(name), value, asserted});
}

double haste_leep_value(const PredictionMatrix& preds, const LabelVector& labels, const SubsetIndex& hard) {
  return metrics::leep(preds, labels, hard).value;
}

Json number_or_inf(double v) {
  if (std::isfinite(v)) return v;
  return v < 0 ? "-inf" : "inf";
}

}  // namespace

double head_log_likelihood(const Matrix& q, const PredictionMatrix& preds, const LabelVector& labels,
                           const std::vector<std::size_t>& rows) {
  // Same arithmetic as metrics::detail::mixture_probabilities so the EM
  // starting point reproduces LEEP bit for bit.
  std::vector<double> p;
  p.reserve(rows.size());
  for (auto i : rows) {
    const auto r = static_cast<Eigen::Index>(i);
    const Eigen::Index y = labels[i];
    double mix = 0.0;
    for (Eigen::Index z = 0; z < preds.rows.cols(); ++z) {
      if (preds.rows(r, z) == 0.0) continue;
      mix += q(y, z) * preds.rows(r, z);
    }
    p.push_back(std::min(mix, 1.0));
  }
  return metrics::detail::mean_log(p);
}

int head_predict(const Matrix& q, const PredictionMatrix& preds, std::size_t row) {
  const Vector mix = q * preds.rows.row(static_cast<Eigen::Index>(row)).transpose();
  Eigen::Index best = 0;
  for (Eigen::Index y = 1; y < mix.size(); ++y)
    if (mix(y) > mix(best)) best = y;
  return static_cast<int>(best);
}

HeadFit fit_optimal_head(const PredictionMatrix& preds, const LabelVector& labels, const metrics::Subset& subset,
                         double tol, int max_iter) {
  if (preds.n() != labels.size()) throw Error("predictions and labels disagree on n");
  if (!(tol > 0.0)) throw Error("EM tolerance must be positive");
  const auto rows = resolve_rows(subset, preds.n());
  if (rows.empty()) throw Error("empty subset");

  HeadFit fit;
  fit.q = initial_head(preds, labels, rows);
  fit.log_likelihood = head_log_likelihood(fit.q, preds, labels, rows);
  if (!std::isfinite(fit.log_likelihood)) throw Error("degenerate sample: zero mixture probability at initialization");
  fit.history.push_back(fit.log_likelihood);

  const auto ny = fit.q.rows();
  const auto nz = fit.q.cols();
  Matrix mass(ny, nz);
  Vector resp(nz);
  while (fit.iterations < max_iter) {
    // E-step: r_i(z) proportional to Q(y_i|z) f_i(z); M-step: Q(y|z) from the
    // responsibilities of samples labelled y.
    mass.setZero();
    for (auto i : rows) {
      const auto r = static_cast<Eigen::Index>(i);
      const Eigen::Index y = labels[i];
      double norm = 0.0;
      for (Eigen::Index z = 0; z < nz; ++z) {
        resp(z) = fit.q(y, z) * preds.rows(r, z);
        norm += resp(z);
      }
      mass.row(y) += resp.transpose() / norm;
    }
    Matrix next = fit.q;
    for (Eigen::Index z = 0; z < nz; ++z) {
      const double col = mass.col(z).sum();
      if (col > 0.0) next.col(z) = mass.col(z) / col;
    }
    ++fit.iterations;
    const double ll = head_log_likelihood(next, preds, labels, rows);
    const double gain = ll - fit.log_likelihood;
    if (!(gain >= tol)) {
      fit.converged = true;
      break;
    }
    fit.q = std::move(next);
    fit.log_likelihood = ll;
    fit.history.push_back(ll);
  }
  return fit;
}

BoundReport lemma1_report(const PredictionMatrix& preds, const LabelVector& labels, const SubsetIndex& hard,
                          double tol, int max_iter) {
  BoundReport r;
  r.haste_leep = haste_leep_value(preds, labels, hard);
  const auto fit_hard = fit_optimal_head(preds, labels, hard, tol, max_iter);
  const auto fit_full = fit_optimal_head(preds, labels, std::nullopt, tol, max_iter);
  r.upper_bound_hard = fit_hard.log_likelihood;
  r.upper_bound_full = fit_full.log_likelihood;
  r.em_iterations = fit_hard.iterations + fit_full.iterations;
  r.em_converged = fit_hard.converged && fit_full.converged;
  add_slack(r, "upper_hard_minus_haste_leep", *r.upper_bound_hard - r.haste_leep, true);
  add_slack(r, "upper_full_minus_upper_hard", *r.upper_bound_full - *r.upper_bound_hard, false);
  return r;
}

BoundReport lemma2_report(const PredictionMatrix& preds, const LabelVector& labels, const SubsetIndex& hard) {
  BoundReport r;
  r.haste_leep = haste_leep_value(preds, labels, hard);
  const auto rows = resolve_rows(hard, preds.n());
  const double soft_nce = metrics::detail::soft_nce_value(preds, labels, rows);
  const auto z = metrics::dummy_labels(preds, hard);
  std::vector<double> fz;
  for (std::size_t k = 0; k < rows.size(); ++k) fz.push_back(preds.rows(static_cast<Eigen::Index>(rows[k]), z[k]));
  const double source_ll = metrics::detail::mean_log(fz);
  r.lower_bound = soft_nce + source_ll;
  // A -inf bound holds trivially.
  const double slack =
      std::isfinite(*r.lower_bound) ? r.haste_leep - *r.lower_bound : std::numeric_limits<double>::infinity();
  add_slack(r, "haste_leep_minus_lower", slack, true);
  return r;
}

BoundReport bound_report(const PredictionMatrix& preds, const LabelVector& labels, const SubsetIndex& hard, double tol,
                         int max_iter) {
  auto r = lemma1_report(preds, labels, hard, tol, max_iter);
  auto l2 = lemma2_report(preds, labels, hard);
  r.lower_bound = l2.lower_bound;
  r.slacks.insert(r.slacks.end(), l2.slacks.begin(), l2.slacks.end());
  r.violations.insert(r.violations.end(), l2.violations.begin(), l2.violations.end());
  return r;
}

double hard_count_lower_bound(const PredictionMatrix& preds, const LabelVector& labels, const SubsetIndex& hard) {
  const double hard_nce = metrics::nce(preds, labels, hard, metrics::NceMode::hard).value;
  const auto rows = resolve_rows(hard, preds.n());
  const auto z = metrics::dummy_labels(preds, hard);
  std::vector<double> fz;
  for (std::size_t k = 0; k < rows.size(); ++k) fz.push_back(preds.rows(static_cast<Eigen::Index>(rows[k]), z[k]));
  return hard_nce + metrics::detail::mean_log(fz);
}

Json to_json(const BoundReport& r) {
  Json j;
  j["haste_leep"] = r.haste_leep;
  j["lower_bound"] = r.lower_bound ? number_or_inf(*r.lower_bound) : Json(nullptr);
  j["upper_hard"] = r.upper_bound_hard ? Json(*r.upper_bound_hard) : Json(nullptr);
  j["upper_full"] = r.upper_bound_full ? Json(*r.upper_bound_full) : Json(nullptr);
  Json slacks = Json::object();
  for (const auto& s : r.slacks) slacks[s.name] = number_or_inf(s.value);
  j["slacks"] = slacks;
  j["violations"] = r.violations;
  j["em"] = {{"iters", r.em_iterations}, {"converged", r.em_converged}};
  return j;
}

}  // namespace haste::bounds

#include "haste/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace haste::metrics {

std::string to_string(MetricKind k) {
  switch (k) {
    case MetricKind::leep: return "leep";
    case MetricKind::nce: return "nce";
    case MetricKind::gbc: return "gbc";
  }
  return "?";
}

std::string to_string(NceMode m) { return m == NceMode::hard ? "hard" : "soft"; }

MetricKind parse_metric_kind(const std::string& s) {
  if (s == "leep") return MetricKind::leep;
  if (s == "nce") return MetricKind::nce;
  if (s == "gbc") return MetricKind::gbc;
  throw Error("unknown metric '" + s + "'");
}

NceMode parse_nce_mode(const std::string& s) {
  if (s == "hard") return NceMode::hard;
  if (s == "soft") return NceMode::soft;
  throw Error("unknown NCE mode '" + s + "'");
}

namespace {

void check_aligned(const PredictionMatrix& preds, const LabelVector& labels) {
  if (preds.n() != labels.size()) {
    throw Error("predictions have " + std::to_string(preds.n()) + " rows but labels have " +
                std::to_string(labels.size()));
  }
}

std::vector<std::size_t> selected_rows(const Subset& subset, std::size_t n) {
  auto rows = resolve_rows(subset, n);
  if (rows.empty()) throw Error("empty subset");
  return rows;
}

EmpiricalJoint joint_on_rows(const PredictionMatrix& preds, const LabelVector& labels,
                             const std::vector<std::size_t>& rows) {
  const auto ny = static_cast<Eigen::Index>(labels.num_classes);
  const auto nz = static_cast<Eigen::Index>(preds.num_source_classes());
  EmpiricalJoint j{Matrix::Zero(ny, nz), Vector::Zero(nz), Matrix::Zero(ny, nz), std::vector<bool>(nz, false)};
  const double inv_n = 1.0 / static_cast<double>(rows.size());
  for (auto i : rows) {
    const auto r = static_cast<Eigen::Index>(i);
    const Eigen::Index y = labels[i];
    for (Eigen::Index z = 0; z < nz; ++z) j.joint(y, z) += preds.rows(r, z) * inv_n;
  }
  for (Eigen::Index z = 0; z < nz; ++z) {
    double pz = 0.0;
    for (Eigen::Index y = 0; y < ny; ++y) pz += j.joint(y, z);
    j.marginal_z(z) = pz;
    if (pz > 0.0) {
      for (Eigen::Index y = 0; y < ny; ++y) j.conditional(y, z) = j.joint(y, z) / pz;
    } else {
      j.zero_support[static_cast<std::size_t>(z)] = true;
    }
  }
  return j;
}

int argmax_row(const Matrix& m, Eigen::Index row) {
  Eigen::Index best = 0;
  for (Eigen::Index z = 1; z < m.cols(); ++z)
    if (m(row, z) > m(row, best)) best = z;
  return static_cast<int>(best);
}

MetricScore make_score(std::string name, double value, std::size_t subset_size, std::size_t total_n,
                       Json params = Json::object()) {
  return MetricScore{std::move(name), value, subset_size, total_n, std::move(params)};
}

double strict_mean_log(const std::vector<double>& p, const std::vector<std::size_t>& rows, const char* what) {
  double sum = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (!(p[k] > 0.0)) throw Error(std::string("zero ") + what + " for sample " + std::to_string(rows[k]));
    sum += std::log(p[k]);
  }
  return sum / static_cast<double>(p.size());
}

}  // namespace

EmpiricalJoint empirical_joint(const PredictionMatrix& preds, const LabelVector& labels, const Subset& subset) {
  check_aligned(preds, labels);
  return joint_on_rows(preds, labels, selected_rows(subset, preds.n()));
}

namespace detail {

std::vector<double> mixture_probabilities(const PredictionMatrix& preds, const LabelVector& labels,
                                          const std::vector<std::size_t>& rows) {
  const auto j = joint_on_rows(preds, labels, rows);
  std::vector<double> q;
  q.reserve(rows.size());
  for (auto i : rows) {
    const auto r = static_cast<Eigen::Index>(i);
    const Eigen::Index y = labels[i];
    double mix = 0.0;
    for (Eigen::Index z = 0; z < preds.rows.cols(); ++z) {
      if (j.zero_support[static_cast<std::size_t>(z)]) continue;
      mix += j.conditional(y, z) * preds.rows(r, z);
    }
    q.push_back(std::min(mix, 1.0));
  }
  return q;
}

double average_log_mixture(const std::vector<std::vector<double>>& member_q) {
  if (member_q.empty()) throw Error("no ensemble members");
  const std::size_t n = member_q.front().size();
  if (n == 0) throw Error("empty subset");
  const double inv_k = 1.0 / static_cast<double>(member_q.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double avg = 0.0;
    for (const auto& q : member_q) {
      if (q.size() != n) throw Error("ensemble members disagree on subset size");
      avg += q[i];
    }
    avg = std::min(avg * inv_k, 1.0);
    if (!(avg > 0.0)) throw Error("zero averaged probability for sample " + std::to_string(i));
    sum += std::log(avg);
  }
  return sum / static_cast<double>(n);
}

double mean_log(const std::vector<double>& p) {
  double sum = 0.0;
  for (double v : p) {
    if (!(v > 0.0)) return -std::numeric_limits<double>::infinity();
    sum += std::log(v);
  }
  return sum / static_cast<double>(p.size());
}

double soft_nce_value(const PredictionMatrix& preds, const LabelVector& labels, const std::vector<std::size_t>& rows) {
  const auto j = joint_on_rows(preds, labels, rows);
  std::vector<double> p;
  p.reserve(rows.size());
  for (auto i : rows) {
    const int z = argmax_row(preds.rows, static_cast<Eigen::Index>(i));
    p.push_back(j.zero_support[static_cast<std::size_t>(z)] ? 0.0 : j.conditional(labels[i], z));
  }
  return mean_log(p);
}

}  // namespace detail

MetricScore leep(const PredictionMatrix& preds, const LabelVector& labels, const Subset& subset) {
  check_aligned(preds, labels);
  const auto rows = selected_rows(subset, preds.n());
  const auto q = detail::mixture_probabilities(preds, labels, rows);
  return make_score("leep", strict_mean_log(q, rows, "mixture probability"), rows.size(), preds.n());
}

std::vector<int> dummy_labels(const PredictionMatrix& preds, const Subset& subset) {
  std::vector<int> z;
  for (auto i : resolve_rows(subset, preds.n())) z.push_back(argmax_row(preds.rows, static_cast<Eigen::Index>(i)));
  return z;
}

MetricScore nce(const PredictionMatrix& preds, const LabelVector& labels, const Subset& subset, NceMode mode) {
  check_aligned(preds, labels);
  const auto rows = selected_rows(subset, preds.n());
  Json params = {{"mode", to_string(mode)}};
  if (mode == NceMode::soft) {
    const double v = detail::soft_nce_value(preds, labels, rows);
    if (!std::isfinite(v)) throw Error("zero conditional probability in soft NCE");
    return make_score("nce", v, rows.size(), preds.n(), std::move(params));
  }

  const auto ny = static_cast<std::size_t>(labels.num_classes);
  const auto nz = preds.num_source_classes();
  std::vector<double> pair_count(ny * nz, 0.0);
  std::vector<double> z_count(nz, 0.0);
  std::vector<int> z_of(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const int z = argmax_row(preds.rows, static_cast<Eigen::Index>(rows[k]));
    z_of[k] = z;
    pair_count[static_cast<std::size_t>(labels[rows[k]]) * nz + static_cast<std::size_t>(z)] += 1.0;
    z_count[static_cast<std::size_t>(z)] += 1.0;
  }
  std::vector<double> p(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto z = static_cast<std::size_t>(z_of[k]);
    p[k] = pair_count[static_cast<std::size_t>(labels[rows[k]]) * nz + z] / z_count[z];
  }
  return make_score("nce", strict_mean_log(p, rows, "conditional probability"), rows.size(), preds.n(),
                    std::move(params));
}

namespace {

double log_det(const Eigen::LLT<Matrix>& llt) {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

Eigen::LLT<Matrix> checked_llt(const Matrix& m, const std::string& what) {
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success || !(llt.matrixLLT().diagonal().minCoeff() > 0.0)) {
    throw Error("non-PD covariance (" + what + ")");
  }
  return llt;
}

}  // namespace

double bhattacharyya_distance(const hardness::ClassGaussian& a, const hardness::ClassGaussian& b) {
  if (a.mean.size() != b.mean.size() || a.mode != b.mode) throw Error("incompatible gaussians");
  const Vector diff = a.mean - b.mean;
  if (a.mode == CovarianceMode::spherical) {
    const double d = static_cast<double>(a.mean.size());
    const double avg = 0.5 * (a.variance + b.variance);
    return diff.squaredNorm() / (8.0 * avg) +
           0.5 * d * (std::log(avg) - 0.5 * (std::log(a.variance) + std::log(b.variance)));
  }
  const Matrix avg = 0.5 * (a.covariance + b.covariance);
  const auto llt_avg = checked_llt(avg, "pair average");
  const auto llt_a = checked_llt(a.covariance, "class " + std::to_string(a.class_id));
  const auto llt_b = checked_llt(b.covariance, "class " + std::to_string(b.class_id));
  const double mahal = diff.dot(llt_avg.solve(diff));
  return mahal / 8.0 + 0.5 * (log_det(llt_avg) - 0.5 * (log_det(llt_a) + log_det(llt_b)));
}

MetricScore gbc(const Matrix& features, const LabelVector& labels, const Subset& subset, GbcOptions opts) {
  if (static_cast<std::size_t>(features.rows()) != labels.size()) {
    throw Error("features have " + std::to_string(features.rows()) + " rows but labels have " +
                std::to_string(labels.size()));
  }
  const auto rows = selected_rows(subset, labels.size());

  std::map<int, int> compact;
  for (auto i : rows) compact.emplace(labels[i], 0);
  if (compact.size() < 2) throw Error("GBC needs at least 2 classes in the subset, found " + std::to_string(compact.size()));
  int next = 0;
  for (auto& [cls, idx] : compact) idx = next++;

  Matrix sub(static_cast<Eigen::Index>(rows.size()), features.cols());
  std::vector<int> sub_labels(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    sub.row(static_cast<Eigen::Index>(k)) = features.row(static_cast<Eigen::Index>(rows[k]));
    sub_labels[k] = compact.at(labels[rows[k]]);
  }
  const auto gaussians =
      hardness::class_gaussians(sub, make_label_vector(std::move(sub_labels), next), opts.mode, opts.ridge);

  double sum = 0.0;
  for (std::size_t a = 0; a < gaussians.size(); ++a)
    for (std::size_t b = a + 1; b < gaussians.size(); ++b) sum += std::exp(-bhattacharyya_distance(gaussians[a], gaussians[b]));
  Json params = {{"covariance", to_string(opts.mode)}, {"ridge", opts.ridge}, {"classes", next}};
  return make_score("gbc", -sum, rows.size(), labels.size(), std::move(params));
}

MetricScore evaluate_metric(MetricKind kind, const MetricInputs& in, const Subset& subset) {
  if (!in.labels) throw Error("metric inputs lack labels");
  switch (kind) {
    case MetricKind::leep:
      if (!in.predictions) throw Error("LEEP needs predictions");
      return leep(*in.predictions, *in.labels, subset);
    case MetricKind::nce:
      if (!in.predictions) throw Error("NCE needs predictions");
      return nce(*in.predictions, *in.labels, subset, in.nce_mode);
    case MetricKind::gbc:
      if (!in.features) throw Error("GBC needs features");
      return gbc(*in.features, *in.labels, subset, in.gbc);
  }
  throw Error("unknown metric");
}

MetricScore haste_score(MetricKind kind, const MetricInputs& in, const hardness::HardnessVector& h, double fraction) {
  const auto hard = hardness::select_hard_subset(h, fraction);
  auto score = evaluate_metric(kind, in, hard);
  score.metric = "haste-" + to_string(h.method) + "-" + score.metric;
  score.params["hardness_method"] = to_string(h.method);
  score.params["fraction"] = fraction;
  return score;
}

MetricScore ms_leep(const std::vector<PredictionMatrix>& member_preds, const LabelVector& labels,
                    const std::vector<Subset>& member_subsets) {
  if (member_preds.empty()) throw Error("no ensemble members");
  if (!member_subsets.empty() && member_subsets.size() != member_preds.size()) {
    throw Error("member alignment mismatch: " + std::to_string(member_preds.size()) + " members but " +
                std::to_string(member_subsets.size()) + " subsets");
  }
  double total = 0.0;
  std::size_t rows = 0;
  for (std::size_t m = 0; m < member_preds.size(); ++m) {
    if (member_preds[m].n() != labels.size()) throw Error("member alignment mismatch at member " + std::to_string(m));
    const auto s = leep(member_preds[m], labels, member_subsets.empty() ? Subset{} : member_subsets[m]);
    total += s.value;
    rows += s.subset_size;
  }
  return make_score("ms-leep", total, rows, labels.size(), {{"members", member_preds.size()}});
}

SubsetIndex union_subsets(const std::vector<SubsetIndex>& subsets) {
  if (subsets.empty()) throw Error("no subsets");
  const std::size_t n = subsets.front().source_n;
  std::vector<char> in(n, 0);
  for (const auto& s : subsets) {
    if (s.source_n != n) throw Error("source_n mismatch in subset union");
    for (auto i : make_subset(s.indices, n).indices) in[i] = 1;
  }
  SubsetIndex out{{}, n};
  for (std::size_t i = 0; i < n; ++i)
    if (in[i]) out.indices.push_back(i);
  return out;
}

MetricScore e_leep(const std::vector<PredictionMatrix>& member_preds, const LabelVector& labels, const Subset& subset) {
  if (member_preds.empty()) throw Error("no ensemble members");
  const auto rows = selected_rows(subset, labels.size());
  std::vector<std::vector<double>> q;
  for (std::size_t m = 0; m < member_preds.size(); ++m) {
    if (member_preds[m].n() != labels.size()) throw Error("member alignment mismatch at member " + std::to_string(m));
    q.push_back(detail::mixture_probabilities(member_preds[m], labels, rows));
  }
  return make_score("e-leep", detail::average_log_mixture(q), rows.size(), labels.size(),
                    {{"members", member_preds.size()}, {"member_weight", "1/K"}});
}

}  // namespace haste::metrics

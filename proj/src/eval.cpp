#include "haste/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>

namespace haste::eval {

namespace {

void check_lengths(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error("correlation inputs differ in length");
  if (x.size() < 2) throw Error("correlation needs at least 2 points");
}

double clamp_unit(double v) { return std::clamp(v, -1.0, 1.0); }

// Counts pairs tied within runs of equal keys in an ordered sequence.
template <typename It, typename Eq>
long long tied_pairs(It first, It last, Eq eq) {
  long long total = 0;
  while (first != last) {
    It run = first;
    long long len = 0;
    while (run != last && eq(*run, *first)) {
      ++run;
      ++len;
    }
    total += len * (len - 1) / 2;
    first = run;
  }
  return total;
}

// Stable merge sort of `v` that returns the number of inversions.
long long merge_count(std::vector<double>& v, std::vector<double>& buf, std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  long long swaps = merge_count(v, buf, lo, mid) + merge_count(v, buf, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      swaps += static_cast<long long>(mid - i);
      buf[k++] = v[j++];
    } else {
      buf[k++] = v[i++];
    }
  }
  while (i < mid) buf[k++] = v[i++];
  while (j < hi) buf[k++] = v[j++];
  std::copy(buf.begin() + static_cast<std::ptrdiff_t>(lo), buf.begin() + static_cast<std::ptrdiff_t>(hi),
            v.begin() + static_cast<std::ptrdiff_t>(lo));
  return swaps;
}

int sign(double v) { return (v > 0) - (v < 0); }

}  // namespace

double pearson(std::span<const double> x, std::span<const double> y) {
  check_lengths(x, y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) throw Error("constant input: Pearson coefficient undefined");
  return clamp_unit(sxy / std::sqrt(sxx * syy));
}

double kendall_tau(std::span<const double> x, std::span<const double> y) {
  check_lengths(x, y);
  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return x[a] < x[b] || (x[a] == x[b] && y[a] < y[b]);
  });

  const long long pairs = static_cast<long long>(n) * static_cast<long long>(n - 1) / 2;
  const long long x_ties = tied_pairs(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] == x[b]; });
  const long long joint_ties = tied_pairs(order.begin(), order.end(),
                                          [&](std::size_t a, std::size_t b) { return x[a] == x[b] && y[a] == y[b]; });

  std::vector<double> ys(n), buf(n);
  for (std::size_t k = 0; k < n; ++k) ys[k] = y[order[k]];
  const long long swaps = merge_count(ys, buf, 0, n);
  const long long y_ties = tied_pairs(ys.begin(), ys.end(), [](double a, double b) { return a == b; });

  if (x_ties == pairs || y_ties == pairs) throw Error("all-tied input: Kendall tau undefined");
  const long long net = pairs - x_ties - y_ties + joint_ties - 2 * swaps;  // concordant - discordant
  return clamp_unit(static_cast<double>(net) /
                    std::sqrt(static_cast<double>(pairs - x_ties) * static_cast<double>(pairs - y_ties)));
}

double weighted_kendall_tau(std::span<const double> x, std::span<const double> y) {
  check_lengths(x, y);
  const std::size_t n = x.size();
  std::vector<std::size_t> by_x(n);
  std::iota(by_x.begin(), by_x.end(), std::size_t{0});
  std::sort(by_x.begin(), by_x.end(), [&](std::size_t a, std::size_t b) { return x[a] > x[b]; });
  for (std::size_t k = 1; k < n; ++k) {
    if (x[by_x[k]] == x[by_x[k - 1]]) throw Error("ties in the reference vector are not supported by weighted Kendall tau");
  }

  // Walking in rank order, every x difference has a known sign.
  double agree = 0.0, total = 0.0, total_y = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      const double w = 1.0 / static_cast<double>(a + 1) + 1.0 / static_cast<double>(b + 1);
      const int sy = sign(y[by_x[a]] - y[by_x[b]]);
      agree += w * sy;
      total += w;
      if (sy != 0) total_y += w;
    }
  }
  if (!(total_y > 0.0)) throw Error("all-tied input: weighted Kendall tau undefined");
  return clamp_unit(agree / std::sqrt(total * total_y));
}

std::string to_string(Coefficient c) {
  switch (c) {
    case Coefficient::pearson: return "pearson";
    case Coefficient::kendall: return "kendall";
    case Coefficient::weighted_kendall: return "wkendall";
  }
  return "?";
}

Coefficient parse_coefficient(const std::string& s) {
  if (s == "pearson") return Coefficient::pearson;
  if (s == "kendall") return Coefficient::kendall;
  if (s == "wkendall") return Coefficient::weighted_kendall;
  throw Error("unknown correlation coefficient '" + s + "'");
}

double correlate(Coefficient c, std::span<const double> scores, std::span<const double> accuracy) {
  switch (c) {
    case Coefficient::pearson: return pearson(scores, accuracy);
    case Coefficient::kendall: return kendall_tau(scores, accuracy);
    case Coefficient::weighted_kendall: return weighted_kendall_tau(scores, accuracy);
  }
  throw Error("unknown coefficient");
}

std::vector<ExperimentRecord> to_records(const std::vector<ScoreRow>& rows) {
  std::vector<ExperimentRecord> out;
  for (const auto& r : rows) {
    if (!r.accuracy) throw Error("missing accuracy for candidate '" + r.candidate + "', metric '" + r.metric + "'");
    out.push_back({r.candidate, r.metric, r.score, *r.accuracy});
  }
  return out;
}

std::vector<ScoreRow> to_score_rows(const std::vector<ExperimentRecord>& records) {
  std::vector<ScoreRow> out;
  for (const auto& r : records) out.push_back({r.candidate, r.metric, r.score, r.accuracy});
  return out;
}

const MetricCorrelation& CorrelationReport::at(const std::string& metric) const {
  for (const auto& m : metrics)
    if (m.metric == metric) return m;
  throw Error("metric '" + metric + "' not in report");
}

std::optional<double> relative_improvement(double modified, double baseline) {
  if (!(std::abs(baseline) > kBaselineEpsilon)) return std::nullopt;
  return 100.0 * (modified - baseline) / std::abs(baseline);
}

std::map<std::string, std::string> default_baseline_pairs(const std::vector<std::string>& metrics) {
  const std::set<std::string> present(metrics.begin(), metrics.end());
  std::map<std::string, std::string> pairs;
  for (const auto& m : present) {
    for (const char* prefix : {"haste-", "bucket-"}) {
      if (m.rfind(prefix, 0) != 0) continue;
      const auto rest = m.substr(std::string(prefix).size());
      const auto dash = rest.find('-');
      if (dash == std::string::npos) continue;
      const auto base = rest.substr(dash + 1);
      if (present.count(base)) pairs[m] = base;
    }
  }
  return pairs;
}

CorrelationReport evaluate(const std::vector<ExperimentRecord>& records, Coefficient coefficient,
                           const std::map<std::string, std::string>& baseline_pairs) {
  // metric -> candidate -> (score, accuracy); std::map fixes the ordering.
  std::map<std::string, std::map<std::string, std::pair<double, double>>> table;
  for (const auto& r : records) {
    if (!std::isfinite(r.score) || !std::isfinite(r.accuracy)) throw Error("non-finite record for '" + r.candidate + "'");
    if (!table[r.metric].emplace(r.candidate, std::make_pair(r.score, r.accuracy)).second) {
      throw Error("duplicate record for candidate '" + r.candidate + "', metric '" + r.metric + "'");
    }
  }
  if (table.empty()) throw Error("no records");

  std::set<std::string> candidates;
  for (const auto& [metric, rows] : table)
    for (const auto& [cand, v] : rows) candidates.insert(cand);
  for (const auto& [metric, rows] : table) {
    if (rows.size() != candidates.size()) throw Error("ragged record set: metric '" + metric + "' misses candidates");
  }
  if (candidates.size() < 2) throw Error("evaluation needs at least 2 candidates");

  CorrelationReport report{coefficient, {}, candidates.size()};
  for (const auto& [metric, rows] : table) {
    std::vector<double> s, a;
    for (const auto& [cand, v] : rows) {
      s.push_back(v.first);
      a.push_back(v.second);
    }
    report.metrics.push_back({metric, correlate(coefficient, s, a), std::nullopt, std::nullopt});
  }
  for (const auto& [modified, base] : baseline_pairs) {
    if (!table.count(modified)) throw Error("unknown metric in baseline pairing: '" + modified + "'");
    if (!table.count(base)) throw Error("unknown baseline metric '" + base + "'");
  }
  for (auto& m : report.metrics) {
    auto it = baseline_pairs.find(m.metric);
    if (it == baseline_pairs.end()) continue;
    m.baseline = it->second;
    m.improvement_pct = relative_improvement(m.coefficient, report.at(it->second).coefficient);
  }
  return report;
}

std::vector<ImprovementSummary> summarize(const std::vector<CorrelationReport>& reports) {
  struct Acc {
    double sum_mod = 0, sum_base = 0, sum_pct = 0;
    std::size_t count = 0, pct_count = 0;
  };
  std::map<std::pair<std::string, std::string>, Acc> acc;
  for (const auto& r : reports) {
    for (const auto& m : r.metrics) {
      if (!m.baseline) continue;
      auto& a = acc[{m.metric, *m.baseline}];
      a.sum_mod += m.coefficient;
      a.sum_base += r.at(*m.baseline).coefficient;
      ++a.count;
      if (m.improvement_pct) {
        a.sum_pct += *m.improvement_pct;
        ++a.pct_count;
      }
    }
  }
  std::vector<ImprovementSummary> out;
  for (const auto& [key, a] : acc) {
    ImprovementSummary s{key.first, key.second, std::nullopt, std::nullopt, a.count};
    if (a.pct_count == a.count) s.mean_of_improvements = a.sum_pct / static_cast<double>(a.pct_count);
    s.improvement_of_means = relative_improvement(a.sum_mod / a.count, a.sum_base / a.count);
    out.push_back(s);
  }
  return out;
}

namespace {

Json optional_number(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

}  // namespace

Json to_json(const CorrelationReport& r) {
  Json j;
  j["coefficient"] = to_string(r.coefficient);
  if (r.coefficient == Coefficient::weighted_kendall) j["weighting"] = "additive hyperbolic";
  j["candidates"] = r.candidates;
  j["metrics"] = Json::array();
  for (const auto& m : r.metrics) {
    j["metrics"].push_back({{"metric", m.metric},
                            {"coefficient", m.coefficient},
                            {"baseline", m.baseline ? Json(*m.baseline) : Json(nullptr)},
                            {"improvement_pct", optional_number(m.improvement_pct)}});
  }
  return j;
}

Json to_json(const std::vector<ImprovementSummary>& summaries) {
  Json j = Json::array();
  for (const auto& s : summaries) {
    j.push_back({{"metric", s.metric},
                 {"baseline", s.baseline},
                 {"datasets", s.datasets},
                 {"mean_of_improvements_pct", optional_number(s.mean_of_improvements)},
                 {"improvement_of_mean_coefficients_pct", optional_number(s.improvement_of_means)}});
  }
  return j;
}

std::string to_text(const CorrelationReport& r) {
  std::ostringstream out;
  out << "# coefficient: " << to_string(r.coefficient);
  if (r.coefficient == Coefficient::weighted_kendall) out << " (additive hyperbolic weighting)";
  out << "\n# candidates: " << r.candidates << "\n";
  std::size_t w = 6;
  for (const auto& m : r.metrics) w = std::max(w, m.metric.size());
  out << std::left << std::setw(static_cast<int>(w)) << "metric" << "  " << std::right << std::setw(12) << "coef"
      << "  " << std::left << std::setw(static_cast<int>(w)) << "baseline" << "  " << std::right << std::setw(12)
      << "improve_%" << "\n";
  out << std::fixed << std::setprecision(4);
  for (const auto& m : r.metrics) {
    out << std::left << std::setw(static_cast<int>(w)) << m.metric << "  " << std::right << std::setw(12)
        << m.coefficient << "  " << std::left << std::setw(static_cast<int>(w)) << m.baseline.value_or("-") << "  "
        << std::right << std::setw(12);
    if (m.improvement_pct) {
      out << *m.improvement_pct;
    } else {
      out << (m.baseline ? "undefined" : "-");
    }
    out << "\n";
  }
  return out.str();
}

}  // namespace haste::eval

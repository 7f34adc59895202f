#include <gtest/gtest.h>

#include <random>

#include "haste/eval.hpp"
#include "oracle.hpp"

using namespace haste;
using namespace haste::eval;

namespace {

std::vector<ExperimentRecord> records(const std::vector<std::string>& metrics, const std::vector<std::vector<double>>& scores,
                                      const std::vector<double>& acc) {
  std::vector<ExperimentRecord> out;
  for (std::size_t c = 0; c < acc.size(); ++c)
    for (std::size_t m = 0; m < metrics.size(); ++m)
      out.push_back({"c" + std::to_string(c), metrics[m], scores[m][c], acc[c]});
  return out;
}

}  // namespace

TEST(Eval, WorkedCoefficients) {
  const std::vector<double> a{1, 2, 3, 4}, b{1, 3, 2, 4};
  EXPECT_NEAR(pearson(a, b), 0.8, 1e-15);
  const std::vector<double> x{1, 2, 3}, y{1, 3, 2};
  EXPECT_NEAR(kendall_tau(x, y), 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(weighted_kendall_tau({{3, 2, 1}}, {{3, 1, 2}}), 6.0 / 11.0, 1e-15);
  EXPECT_NEAR(weighted_kendall_tau(a, a), 1.0, 1e-15);
  const std::vector<double> rev{4, 3, 2, 1};
  EXPECT_NEAR(weighted_kendall_tau(a, rev), -1.0, 1e-15);
  EXPECT_NEAR(kendall_tau(a, rev), -1.0, 1e-15);
}

TEST(Eval, DegenerateInputsThrow) {
  const std::vector<double> c{1, 1, 1}, x{1, 2, 3};
  EXPECT_THROW(pearson(c, x), Error);
  EXPECT_THROW(kendall_tau(c, x), Error);
  EXPECT_THROW(weighted_kendall_tau({{1, 1, 2}}, x), Error);
  EXPECT_THROW(pearson(x, {{1.0, 2.0}}), Error);
}

TEST(Eval, CoefficientsMatchOraclesWithTies) {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> small(0, 5);
  std::normal_distribution<double> g;
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 5 + static_cast<std::size_t>(t) * 3;
    std::vector<double> x(n), y(n), u(n), v(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = small(rng);
      y[i] = small(rng);
      u[i] = g(rng);
      v[i] = u[i] + g(rng);
    }
    EXPECT_NEAR(kendall_tau(x, y), oracle::kendall(x, y), 1e-12);
    EXPECT_NEAR(kendall_tau(u, v), oracle::kendall(u, v), 1e-12);
    EXPECT_NEAR(pearson(u, v), oracle::pearson(u, v), 1e-12);
  }
}

TEST(Eval, RelativeImprovement) {
  EXPECT_NEAR(*relative_improvement(0.6, 0.5), 20.0, 1e-12);
  EXPECT_NEAR(*relative_improvement(0.1, -0.5), 120.0, 1e-12);
  EXPECT_FALSE(relative_improvement(0.3, 0.0).has_value());
}

TEST(Eval, DefaultPairsAndEvaluate) {
  const auto pairs = default_baseline_pairs({"leep", "haste-cs-leep", "bucket-2-leep", "haste-ca-nce", "gbc"});
  EXPECT_EQ(pairs.at("haste-cs-leep"), "leep");
  EXPECT_EQ(pairs.at("bucket-2-leep"), "leep");
  EXPECT_EQ(pairs.count("haste-ca-nce"), 0u);

  const std::vector<double> acc{0.1, 0.2, 0.3, 0.4};
  const auto recs = records({"leep", "haste-cs-leep"}, {{1, 3, 2, 4}, {1, 2, 3, 4}}, acc);
  const auto r = evaluate(recs, Coefficient::pearson, default_baseline_pairs({"leep", "haste-cs-leep"}));
  EXPECT_EQ(r.candidates, 4u);
  EXPECT_NEAR(r.at("leep").coefficient, 0.8, 1e-12);
  EXPECT_NEAR(r.at("haste-cs-leep").coefficient, 1.0, 1e-12);
  EXPECT_NEAR(*r.at("haste-cs-leep").improvement_pct, 25.0, 1e-9);
  EXPECT_FALSE(r.at("leep").baseline.has_value());
  EXPECT_THROW(r.at("nce"), Error);

  auto ragged = recs;
  ragged.pop_back();
  EXPECT_THROW(evaluate(ragged, Coefficient::pearson, {}), Error);
  auto dup = recs;
  dup.push_back(recs.front());
  EXPECT_THROW(evaluate(dup, Coefficient::pearson, {}), Error);
  EXPECT_THROW(evaluate(recs, Coefficient::pearson, {{"haste-cs-leep", "logme"}}), Error);
  EXPECT_THROW(evaluate(records({"leep"}, {{1}}, {0.5}), Coefficient::pearson, {}), Error);

  const auto text = to_text(evaluate(recs, Coefficient::weighted_kendall, {}));
  EXPECT_NE(text.find("wkendall"), std::string::npos);
}

TEST(Eval, SummaryReportsBothAverages) {
  const std::vector<double> acc{0.1, 0.2, 0.3, 0.4};
  const auto pairs = default_baseline_pairs({"leep", "haste-cs-leep"});
  const auto r1 = evaluate(records({"leep", "haste-cs-leep"}, {{1, 3, 2, 4}, {1, 2, 3, 4}}, acc), Coefficient::pearson, pairs);
  const auto r2 = evaluate(records({"leep", "haste-cs-leep"}, {{4, 3, 2, 1}, {1, 3, 2, 4}}, acc), Coefficient::pearson, pairs);
  const auto s = summarize({r1, r2});
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s[0].metric, "haste-cs-leep");
  EXPECT_EQ(s[0].datasets, 2u);
  // Per-dataset: +25% and (0.8 - (-1)) / 1 = +180%.
  EXPECT_NEAR(*s[0].mean_of_improvements, 102.5, 1e-9);
  // Means: 0.9 vs -0.1.
  EXPECT_NEAR(*s[0].improvement_of_means, 1000.0, 1e-9);
  EXPECT_EQ(to_json(s).size(), 1u);
}

TEST(Eval, ScoreRowConversion) {
  std::vector<ScoreRow> rows = {{"a", "leep", -0.5, 0.7}};
  const auto r = to_records(rows);
  EXPECT_EQ(r[0].accuracy, 0.7);
  EXPECT_EQ(to_score_rows(r)[0].score, -0.5);
  rows.push_back({"b", "leep", -0.4, std::nullopt});
  EXPECT_THROW(to_records(rows), Error);
}

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "haste/metrics.hpp"

using namespace haste;
using namespace haste::metrics;

TEST(Metrics, TwoSampleWorkedValues) {
  const auto in = fixtures::two_sample();
  const auto j = empirical_joint(in.preds, in.labels);
  EXPECT_NEAR(j.marginal_z(0), 0.55, 1e-15);
  EXPECT_NEAR(j.marginal_z(1), 0.45, 1e-15);
  EXPECT_NEAR(j.conditional(0, 0), 0.4 / 0.55, 1e-15);
  EXPECT_NEAR(j.conditional(1, 1), 0.35 / 0.45, 1e-15);

  // Both mixtures equal 0.8 * 0.4/0.55 + 0.2 * 0.1/0.45.
  const double q = 0.8 * 0.4 / 0.55 + 0.2 * 0.1 / 0.45;
  EXPECT_NEAR(leep(in.preds, in.labels).value, std::log(q), 1e-14);
  EXPECT_NEAR(leep(in.preds, in.labels).value, -0.4681, 2e-4);

  EXPECT_DOUBLE_EQ(nce(in.preds, in.labels).value, 0.0);
  const double soft = 0.5 * (std::log(0.4 / 0.55) + std::log(0.35 / 0.45));
  EXPECT_NEAR(nce(in.preds, in.labels, {}, NceMode::soft).value, soft, 1e-14);
  EXPECT_EQ(dummy_labels(in.preds), (std::vector<int>{0, 1}));
}

TEST(Metrics, MatchesOracles) {
  std::mt19937_64 rng(21);
  for (int t = 0; t < 30; ++t) {
    const std::size_t n = 20 + static_cast<std::size_t>(t) * 5;
    const int ny = 2 + t % 4;
    const std::size_t nz = 2 + static_cast<std::size_t>(t) % 5;
    const auto in = fixtures::random_instance(rng, n, ny, nz);
    const auto all = fixtures::iota(n);
    const auto some = fixtures::random_rows(rng, n, n / 2);
    const auto sub = make_subset(some, n);

    EXPECT_NEAR(leep(in.preds, in.labels).value, oracle::leep(in.rows, in.labels.labels, ny, all), 1e-12);
    EXPECT_NEAR(leep(in.preds, in.labels, sub).value, oracle::leep(in.rows, in.labels.labels, ny, some), 1e-12);
    EXPECT_NEAR(nce(in.preds, in.labels, sub).value, oracle::nce_hard(in.rows, in.labels.labels, ny, some), 1e-12);
    EXPECT_NEAR(nce(in.preds, in.labels, sub, NceMode::soft).value,
                oracle::nce_soft(in.rows, in.labels.labels, ny, some), 1e-12);
  }
}

TEST(Metrics, EnsemblesMatchOracles) {
  std::mt19937_64 rng(8);
  const std::size_t n = 60;
  const auto a = fixtures::random_instance(rng, n, 3, 4);
  auto b_preds = make_prediction_matrix(fixtures::random_softmax(rng, n, 6));
  const auto rows_b = fixtures::to_rows(b_preds.rows);
  const auto sa = fixtures::random_rows(rng, n, 20);
  const auto sb = fixtures::random_rows(rng, n, 25);

  const auto ms = ms_leep({a.preds, b_preds}, a.labels, {make_subset(sa, n), make_subset(sb, n)});
  EXPECT_NEAR(ms.value, oracle::leep(a.rows, a.labels.labels, 3, sa) + oracle::leep(rows_b, a.labels.labels, 3, sb), 1e-12);
  EXPECT_EQ(ms.metric, "ms-leep");

  const auto u = union_subsets({make_subset(sa, n), make_subset(sb, n)});
  EXPECT_TRUE(std::is_sorted(u.indices.begin(), u.indices.end()));
  const auto e = e_leep({a.preds, b_preds}, a.labels, u);
  EXPECT_NEAR(e.value, oracle::e_leep({a.rows, rows_b}, a.labels.labels, 3, u.indices), 1e-12);

  // One member reduces to plain LEEP.
  EXPECT_NEAR(e_leep({a.preds}, a.labels).value, leep(a.preds, a.labels).value, 1e-15);
  EXPECT_THROW(ms_leep({a.preds, b_preds}, a.labels, {std::nullopt}), Error);
}

TEST(Metrics, GbcWorkedValue) {
  Matrix x(4, 1);
  x << -1, 1, 1, 3;
  const auto labels = make_label_vector({0, 0, 1, 1}, 2);
  const auto s = gbc(x, labels);
  EXPECT_NEAR(s.value, -std::exp(-0.5), 1e-15);
  EXPECT_NEAR(s.value, -0.6065, 5e-5);
  EXPECT_NEAR(gbc(x, labels, {}, {CovarianceMode::full, 1e-6}).value, -std::exp(-0.5 / (1.0 + 1e-6)), 1e-12);
}

TEST(Metrics, GbcMatchesOracle) {
  std::mt19937_64 rng(33);
  for (int t = 0; t < 20; ++t) {
    const std::size_t n = 80, d = 2 + static_cast<std::size_t>(t % 3);
    const int ny = 2 + t % 3;
    auto x = fixtures::random_gaussian(rng, n, d);
    const auto y = fixtures::random_labels(rng, n, ny);
    for (std::size_t i = 0; i < n; ++i) x(static_cast<Eigen::Index>(i), 0) += 1.5 * y[i];
    const auto labels = make_label_vector(y, ny);
    const auto rows = fixtures::to_rows(x);
    const auto some = fixtures::random_rows(rng, n, 50);
    for (bool full : {false, true}) {
      const GbcOptions o{full ? CovarianceMode::full : CovarianceMode::spherical, 1e-3};
      EXPECT_NEAR(gbc(x, labels, {}, o).value, oracle::gbc(rows, y, fixtures::iota(n), full, 1e-3), 1e-9);
      EXPECT_NEAR(gbc(x, labels, make_subset(some, n), o).value, oracle::gbc(rows, y, some, full, 1e-3), 1e-9);
    }
  }
}

TEST(Metrics, GbcUsesOnlyClassesPresentInSubset) {
  Matrix x(6, 1);
  x << 0, 1, 5, 6, 10, 11;
  const auto labels = make_label_vector({0, 0, 1, 1, 2, 2}, 3);
  const auto s = gbc(x, labels, make_subset({0, 1, 4, 5}, 6));
  EXPECT_EQ(s.params["classes"], 2);
  EXPECT_THROW(gbc(x, labels, make_subset({0, 1}, 6)), Error);
}

TEST(Metrics, HasteScoreNamesAndParams) {
  std::mt19937_64 rng(4);
  const auto in = fixtures::random_instance(rng, 50, 3, 4);
  hardness::HardnessVector h{std::vector<double>(50), HardnessMethod::class_agnostic};
  for (std::size_t i = 0; i < 50; ++i) h.scores[i] = static_cast<double>((i * 7) % 50);
  MetricInputs mi;
  mi.predictions = &in.preds;
  mi.labels = &in.labels;
  const auto s = haste_score(MetricKind::leep, mi, h, 0.2);
  EXPECT_EQ(s.metric, "haste-ca-leep");
  EXPECT_EQ(s.subset_size, 10u);
  EXPECT_EQ(s.total_n, 50u);
  EXPECT_EQ(s.params["hardness_method"], "ca");
  EXPECT_NEAR(s.value, leep(in.preds, in.labels, hardness::select_hard_subset(h, 0.2)).value, 0.0);
  mi.labels = nullptr;
  EXPECT_THROW(evaluate_metric(MetricKind::leep, mi), Error);
}

TEST(Metrics, ParsersRejectUnknownNames) {
  EXPECT_EQ(parse_metric_kind("gbc"), MetricKind::gbc);
  EXPECT_EQ(parse_nce_mode("soft"), NceMode::soft);
  EXPECT_THROW(parse_metric_kind("logme"), Error);
  EXPECT_THROW(parse_nce_mode("medium"), Error);
}

TEST(Metrics, ZeroSupportColumnIsHarmless) {
  Matrix m(3, 3);
  m << 0.7, 0.3, 0.0, 0.2, 0.8, 0.0, 0.5, 0.5, 0.0;
  const auto p = make_prediction_matrix(m);
  const auto l = make_label_vector({0, 1, 1}, 2);
  const auto j = empirical_joint(p, l);
  EXPECT_TRUE(j.zero_support[2]);
  EXPECT_FALSE(j.zero_support[0]);
  EXPECT_NEAR(leep(p, l).value, oracle::leep(fixtures::to_rows(p.rows), l.labels, 2, fixtures::iota(3)), 1e-14);
}

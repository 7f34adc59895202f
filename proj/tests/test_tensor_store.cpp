#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <limits>

#include "fixtures.hpp"
#include "haste/tensor_store.hpp"

using namespace haste;
namespace fs = std::filesystem;

namespace {

template <class F>
std::string error_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

Manifest simple_manifest(const fs::path& dir, std::size_t n, std::size_t d) {
  std::mt19937_64 rng(3);
  write_tensor(dir / "l0.hste", to_tensor(fixtures::random_gaussian(rng, n, d)));
  write_tensor(dir / "l1.hste", to_tensor(fixtures::random_gaussian(rng, n, d + 1)));
  write_tensor(dir / "p.hste", to_tensor(fixtures::random_softmax(rng, n, 3)));
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<int>(i % 2);
  write_labels(dir / "labels.csv", make_label_vector(y, 2));
  Manifest m;
  m.n = n;
  m.layers = {{"l0", "l0.hste", d}, {"l1", "l1.hste", d + 1}};
  m.labels = "labels.csv";
  m.predictions = "p.hste";
  write_manifest(dir / "manifest.json", m);
  return m;
}

}  // namespace

TEST(TensorStore, RoundTripIsBitExact) {
  const auto dir = fixtures::temp_dir("ts_roundtrip");
  const Tensor t = make_tensor({2, 3}, {1.5f, -0.0f, 3.25e-7f, 1e30f, -2.0f, 0.1f});
  write_tensor(dir / "t.hste", t);
  const Tensor back = read_tensor(dir / "t.hste");
  EXPECT_EQ(back, t);
  EXPECT_EQ(std::signbit(back.data[1]), true);
  write_tensor(dir / "t2.hste", back);
  EXPECT_EQ(fixtures::slurp(dir / "t.hste"), fixtures::slurp(dir / "t2.hste"));
}

TEST(TensorStore, ScalarVectorLayout) {
  // 12-byte header, one u64 dim, one f32.
  const auto dir = fixtures::temp_dir("ts_layout");
  write_tensor(dir / "one.hste", make_tensor({1}, {1.0f}));
  const std::string bytes = fixtures::slurp(dir / "one.hste");
  ASSERT_EQ(bytes.size(), 24u);
  EXPECT_EQ(bytes.substr(0, 4), "HSTE");
  EXPECT_EQ(static_cast<unsigned char>(bytes[4]), 1);
  EXPECT_EQ(bytes[8], 0);
  EXPECT_EQ(bytes[9], 1);
  EXPECT_EQ(static_cast<unsigned char>(bytes[12]), 1);
  float v;
  std::memcpy(&v, bytes.data() + 20, 4);
  EXPECT_EQ(v, 1.0f);
}

TEST(TensorStore, RejectsMalformedFiles) {
  const auto dir = fixtures::temp_dir("ts_bad");
  write_tensor(dir / "ok.hste", make_tensor({2}, {1.0f, 2.0f}));
  std::string good = fixtures::slurp(dir / "ok.hste");

  auto with = [&](std::string s, const char* name) {
    fixtures::spit(dir / name, s);
    return error_of([&] { read_tensor(dir / name); });
  };
  std::string s = good;
  s[0] = 'X';
  EXPECT_NE(with(s, "magic.hste").find("bad magic"), std::string::npos);
  s = good;
  s[4] = 2;
  EXPECT_NE(with(s, "ver.hste").find("unsupported version"), std::string::npos);
  s = good;
  s[8] = 1;
  EXPECT_NE(with(s, "dtype.hste").find("unsupported dtype"), std::string::npos);
  EXPECT_NE(with(good.substr(0, good.size() - 1), "short.hste").find("payload size mismatch"), std::string::npos);
  EXPECT_NE(with(good.substr(0, 6), "hdr.hste").find("truncated header"), std::string::npos);

  s = good;
  const float nan = std::numeric_limits<float>::quiet_NaN();
  std::memcpy(s.data() + 20, &nan, 4);
  EXPECT_NE(with(s, "nan.hste").find("non-finite element at flat index 0"), std::string::npos);

  EXPECT_NE(error_of([] { make_tensor({2, 2}, {1.0f}); }).find("does not match"), std::string::npos);
  EXPECT_NE(error_of([] { make_tensor({0}, {}); }).find("zero dimension"), std::string::npos);
}

TEST(TensorStore, PredictionValidation) {
  Matrix good(2, 2);
  good << 0.5, 0.5, 0.2, 0.8 + 5e-6;
  const auto p = make_prediction_matrix(good);
  EXPECT_NEAR(p.rows.row(1).sum(), 1.0, 1e-15);

  Matrix off = good;
  off(0, 0) = 0.6;
  EXPECT_NE(error_of([&] { make_prediction_matrix(off); }).find("prediction row 0 sums to"), std::string::npos);
  Matrix neg = good;
  neg(0, 0) = -0.1;
  neg(0, 1) = 1.1;
  EXPECT_NE(error_of([&] { make_prediction_matrix(neg); }).find("outside [0, 1]"), std::string::npos);
}

TEST(TensorStore, LabelsAndSubsets) {
  EXPECT_NE(error_of([] { make_label_vector({0, 3}, 3); }).find("label out of range"), std::string::npos);
  EXPECT_NE(error_of([] { make_subset({1, 1}, 3); }).find("duplicate subset index"), std::string::npos);
  EXPECT_NE(error_of([] { make_subset({3}, 3); }).find("out of range"), std::string::npos);

  const auto dir = fixtures::temp_dir("ts_labels");
  fixtures::spit(dir / "shuffled.csv", "index,label\n2,1\n0,0\n1,2\n");
  const auto l = read_labels(dir / "shuffled.csv");
  EXPECT_EQ(l.labels, (std::vector<int>{0, 2, 1}));
  EXPECT_EQ(l.num_classes, 3);
  fixtures::spit(dir / "gap.csv", "index,label\n0,0\n2,1\n");
  EXPECT_NE(error_of([&] { read_labels(dir / "gap.csv"); }).find("index gap at 1"), std::string::npos);
  fixtures::spit(dir / "dup.csv", "index,label\n0,0\n0,1\n");
  EXPECT_NE(error_of([&] { read_labels(dir / "dup.csv"); }).find("duplicate index"), std::string::npos);
  fixtures::spit(dir / "hdr.csv", "i,label\n0,0\n");
  EXPECT_NE(error_of([&] { read_labels(dir / "hdr.csv"); }).find("header"), std::string::npos);
  EXPECT_NE(error_of([&] { read_labels(dir / "shuffled.csv", 2); }).find("label out of range"), std::string::npos);

  SubsetFile sf{make_subset({4, 1}, 6), "cs", {{"fraction", 0.2}}};
  write_subset(dir / "s.json", sf);
  const auto back = read_subset(dir / "s.json");
  EXPECT_EQ(back.subset, sf.subset);
  EXPECT_EQ(back.method, "cs");
  fixtures::spit(dir / "bad.json", R"({"source_n": 3, "indices": [0], "method": "magic"})");
  EXPECT_NE(error_of([&] { read_subset(dir / "bad.json"); }).find("unknown subset method"), std::string::npos);
}

TEST(TensorStore, ManifestLoadsAndCrossChecks) {
  const auto dir = fixtures::temp_dir("ts_manifest");
  simple_manifest(dir, 6, 4);
  const auto d = load_dataset(dir / "manifest.json");
  EXPECT_EQ(d.embeddings.n, 6u);
  EXPECT_EQ(d.embeddings.layers.size(), 2u);
  EXPECT_EQ(d.embeddings.final_layer().name, "l1");
  ASSERT_TRUE(d.predictions && d.labels);
  EXPECT_EQ(d.labels->num_classes, 2);

  auto j = read_json(dir / "manifest.json");
  j["n"] = 7;
  write_json(dir / "m_n.json", j);
  EXPECT_NE(error_of([&] { load_dataset(dir / "m_n.json"); }).find("row-count mismatch"), std::string::npos);

  j = read_json(dir / "manifest.json");
  j["layers"][0]["dim"] = 5;
  write_json(dir / "m_dim.json", j);
  EXPECT_NE(error_of([&] { load_dataset(dir / "m_dim.json"); }).find("declares dim"), std::string::npos);

  j = read_json(dir / "manifest.json");
  j["layers"][1]["name"] = "l0";
  write_json(dir / "m_dup.json", j);
  EXPECT_NE(error_of([&] { load_dataset(dir / "m_dup.json"); }).find("duplicate layer name"), std::string::npos);

  j = read_json(dir / "manifest.json");
  j["layers"][0]["file"] = "missing.hste";
  write_json(dir / "m_missing.json", j);
  EXPECT_NE(error_of([&] { load_dataset(dir / "m_missing.json"); }).find("cannot open"), std::string::npos);

  j = read_json(dir / "manifest.json");
  j["num_classes"] = 4;
  write_json(dir / "m_nc.json", j);
  EXPECT_EQ(load_dataset(dir / "m_nc.json").labels->num_classes, 4);

  fixtures::spit(dir / "other.csv", "index,label\n0,1\n1,1\n2,1\n3,1\n4,1\n5,0\n");
  EXPECT_EQ(load_dataset(dir / "manifest.json", dir / "other.csv").labels->labels[0], 1);
  fixtures::spit(dir / "short.csv", "index,label\n0,1\n");
  EXPECT_NE(error_of([&] { load_dataset(dir / "manifest.json", dir / "short.csv"); }).find("row-count mismatch"),
            std::string::npos);
}

TEST(TensorStore, ScoresRoundTrip) {
  const auto dir = fixtures::temp_dir("ts_scores");
  std::vector<ScoreRow> rows = {{"a", "leep", -0.1234567890123, 0.5}, {"b", "nce", 0.1, std::nullopt}};
  write_scores(dir / "s.csv", rows);
  const auto back = read_scores(dir / "s.csv");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].score, rows[0].score);
  EXPECT_EQ(back[0].accuracy, rows[0].accuracy);
  EXPECT_FALSE(back[1].accuracy.has_value());
  EXPECT_EQ(format_double(0.1), "0.1");
}

#pragma once

#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>

#include "haste/tensor_store.hpp"
#include "oracle.hpp"

namespace fixtures {

using haste::Matrix;

struct Instance {
  haste::PredictionMatrix preds;
  haste::LabelVector labels;
  oracle::Rows rows;  // same predictions as nested vectors
};

inline oracle::Rows to_rows(const Matrix& m) {
  oracle::Rows r(static_cast<std::size_t>(m.rows()), std::vector<double>(static_cast<std::size_t>(m.cols())));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) r[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = m(i, j);
  return r;
}

inline Matrix to_matrix(const oracle::Rows& r) {
  Matrix m(static_cast<Eigen::Index>(r.size()), static_cast<Eigen::Index>(r.front().size()));
  for (std::size_t i = 0; i < r.size(); ++i)
    for (std::size_t j = 0; j < r[i].size(); ++j) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = r[i][j];
  return m;
}

// Softmax rows of Gaussian logits; `sharp` scales the logits.
inline Matrix random_softmax(std::mt19937_64& rng, std::size_t n, std::size_t nz, double sharp = 2.0) {
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(nz));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < m.cols(); ++j) s += (m(i, j) = std::exp(sharp * g(rng)));
    m.row(i) /= s;
  }
  return m;
}

inline std::vector<int> random_labels(std::mt19937_64& rng, std::size_t n, int ny) {
  std::uniform_int_distribution<int> u(0, ny - 1);
  std::vector<int> y(n);
  for (auto& v : y) v = u(rng);
  // Every class present keeps per-class statistics defined.
  for (int c = 0; c < ny && static_cast<std::size_t>(c) < n; ++c) y[static_cast<std::size_t>(c)] = c;
  return y;
}

inline Instance random_instance(std::mt19937_64& rng, std::size_t n, int ny, std::size_t nz) {
  auto p = haste::make_prediction_matrix(random_softmax(rng, n, nz, std::uniform_real_distribution<double>(0.5, 3.0)(rng)));
  auto rows = to_rows(p.rows);
  return {std::move(p), haste::make_label_vector(random_labels(rng, n, ny), ny), std::move(rows)};
}

inline Matrix random_gaussian(std::mt19937_64& rng, std::size_t n, std::size_t d, double offset = 0.0) {
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = g(rng) + offset;
  return m;
}

inline std::vector<std::size_t> random_rows(std::mt19937_64& rng, std::size_t n, std::size_t k) {
  std::vector<std::size_t> all(n);
  for (std::size_t i = 0; i < n; ++i) all[i] = i;
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(k);
  std::sort(all.begin(), all.end());
  return all;
}

inline std::vector<std::size_t> iota(std::size_t n) {
  std::vector<std::size_t> r(n);
  for (std::size_t i = 0; i < n; ++i) r[i] = i;
  return r;
}

// Fresh, empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("haste_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void spit(const std::filesystem::path& p, const std::string& s) {
  std::ofstream(p, std::ios::binary) << s;
}

// The two-sample instance: y = (0, 1), f1 = (0.8, 0.2), f2 = (0.3, 0.7).
inline Instance two_sample() {
  Matrix m(2, 2);
  m << 0.8, 0.2, 0.3, 0.7;
  auto p = haste::make_prediction_matrix(m);
  auto rows = to_rows(p.rows);
  return {std::move(p), haste::make_label_vector({0, 1}, 2), std::move(rows)};
}

}  // namespace fixtures

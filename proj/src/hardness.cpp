#include "haste/hardness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <thread>

#include "haste/detail/random.hpp"

namespace haste {

std::string to_string(HardnessMethod m) { return m == HardnessMethod::class_agnostic ? "ca" : "cs"; }
std::string to_string(CovarianceMode m) { return m == CovarianceMode::full ? "full" : "spherical"; }

HardnessMethod parse_hardness_method(const std::string& s) {
  if (s == "ca") return HardnessMethod::class_agnostic;
  if (s == "cs") return HardnessMethod::class_specific;
  throw Error("unknown hardness method '" + s + "'");
}

CovarianceMode parse_covariance_mode(const std::string& s) {
  if (s == "full") return CovarianceMode::full;
  if (s == "spherical") return CovarianceMode::spherical;
  throw Error("unknown covariance mode '" + s + "'");
}

unsigned default_thread_count() {
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("HASTE_THREADS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v >= 1) return std::min<unsigned>(hw, static_cast<unsigned>(v));
  }
  return hw;
}

namespace hardness {

namespace {

void check_schema(const EmbeddingSet& source, const EmbeddingSet& target) {
  if (source.layers.size() != target.layers.size()) throw Error("layer-schema mismatch: layer counts differ");
  for (std::size_t l = 0; l < source.layers.size(); ++l) {
    const auto& a = source.layers[l];
    const auto& b = target.layers[l];
    if (a.name != b.name) throw Error("layer-schema mismatch: '" + a.name + "' vs '" + b.name + "'");
    if (a.block.cols() != b.block.cols()) throw Error("layer-schema mismatch: width of '" + a.name + "' differs");
  }
}

// Similarity of source row i to target row j; layers summed in order.
double pair_similarity(const EmbeddingSet& source, const EmbeddingSet& target, Eigen::Index i, Eigen::Index j) {
  double sum = 0.0;
  for (std::size_t l = 0; l < source.layers.size(); ++l) {
    sum += source.layers[l].block.row(i).dot(target.layers[l].block.row(j));
  }
  return sum / static_cast<double>(source.layers.size());
}

// Runs fn(j) for every target column, columns split into contiguous chunks.
template <typename Fn>
void for_each_column(std::size_t n, unsigned threads, Fn fn) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (threads == 1) {
    for (std::size_t j = 0; j < n; ++j) fn(j);
    return;
  }
  std::vector<std::thread> pool;
  const std::size_t chunk = (n + threads - 1) / threads;
  for (unsigned t = 0; t < threads; ++t) {
    const std::size_t lo = t * chunk;
    const std::size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (std::size_t j = lo; j < hi; ++j) fn(j);
    });
  }
  for (auto& th : pool) th.join();
}

std::size_t rounded_count(double fraction, std::size_t n) {
  return static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
}

}  // namespace

EmbeddingSet normalize_per_layer(const EmbeddingSet& e) {
  EmbeddingSet out = e;
  for (auto& layer : out.layers) {
    for (Eigen::Index i = 0; i < layer.block.rows(); ++i) {
      const double norm = layer.block.row(i).norm();
      if (!(norm > kZeroNorm)) {
        throw Error("zero-norm embedding at sample " + std::to_string(i) + " in layer '" + layer.name + "'");
      }
      layer.block.row(i) /= norm;
    }
  }
  return out;
}

SimilarityMatrix similarity_matrix(const EmbeddingSet& source, const EmbeddingSet& target, unsigned threads) {
  check_schema(source, target);
  const auto m = static_cast<Eigen::Index>(source.n);
  SimilarityMatrix s{Matrix(m, static_cast<Eigen::Index>(target.n))};
  for_each_column(target.n, threads, [&](std::size_t j) {
    const auto col = static_cast<Eigen::Index>(j);
    for (Eigen::Index i = 0; i < m; ++i) s.values(i, col) = pair_similarity(source, target, i, col);
  });
  return s;
}

HardnessVector hardness_class_agnostic(const SimilarityMatrix& s) {
  HardnessVector h{std::vector<double>(static_cast<std::size_t>(s.values.cols())), HardnessMethod::class_agnostic};
  if (s.values.rows() == 0) throw Error("similarity matrix has no source rows");
  for (Eigen::Index j = 0; j < s.values.cols(); ++j) {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < s.values.rows(); ++i) sum += s.values(i, j);
    h.scores[static_cast<std::size_t>(j)] = 1.0 - sum / static_cast<double>(s.values.rows());
  }
  return h;
}

HardnessVector hardness_class_agnostic(const EmbeddingSet& source, const EmbeddingSet& target, unsigned threads) {
  check_schema(source, target);
  if (source.n == 0) throw Error("similarity matrix has no source rows");
  HardnessVector h{std::vector<double>(target.n), HardnessMethod::class_agnostic};
  const auto m = static_cast<Eigen::Index>(source.n);
  for_each_column(target.n, threads, [&](std::size_t j) {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) sum += pair_similarity(source, target, i, static_cast<Eigen::Index>(j));
    h.scores[j] = 1.0 - sum / static_cast<double>(m);
  });
  return h;
}

SubsetIndex subsample_source(const LabelVector& labels, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw Error("source fraction must be in (0, 1]");
  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(labels.num_classes));
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[static_cast<std::size_t>(labels[i])].push_back(i);

  detail::Rng rng(seed);
  std::vector<std::size_t> chosen;
  for (auto& members : by_class) {
    if (members.empty()) continue;
    // The small slack keeps products such as 0.3 * 10 from rounding up to 4.
    const double want = fraction * static_cast<double>(members.size());
    const auto k = std::min(members.size(), static_cast<std::size_t>(std::ceil(want - 1e-9)));
    auto picked = detail::sample_without_replacement(members, k, rng);
    chosen.insert(chosen.end(), picked.begin(), picked.end());
  }
  std::sort(chosen.begin(), chosen.end());
  return SubsetIndex{std::move(chosen), labels.size()};
}

std::vector<ClassGaussian> class_gaussians(const Matrix& features, const LabelVector& labels, CovarianceMode mode,
                                           double ridge) {
  if (static_cast<std::size_t>(features.rows()) != labels.size()) {
    throw Error("features have " + std::to_string(features.rows()) + " rows but labels have " +
                std::to_string(labels.size()));
  }
  if (features.cols() < 1) throw Error("features have zero width");
  if (!(ridge >= 0.0)) throw Error("ridge must be non-negative");
  const Eigen::Index d = features.cols();
  const auto k = static_cast<std::size_t>(labels.num_classes);

  std::vector<ClassGaussian> out(k);
  for (std::size_t c = 0; c < k; ++c) {
    out[c].class_id = static_cast<int>(c);
    out[c].mean = Vector::Zero(d);
    out[c].mode = mode;
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto& g = out[static_cast<std::size_t>(labels[i])];
    g.mean += features.row(static_cast<Eigen::Index>(i)).transpose();
    ++g.count;
  }
  for (auto& g : out) {
    if (g.count == 0) throw Error("class " + std::to_string(g.class_id) + " has no samples");
    g.mean /= static_cast<double>(g.count);
    g.covariance = Matrix::Zero(d, d);
  }
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto& g = out[static_cast<std::size_t>(labels[i])];
    const Vector diff = features.row(static_cast<Eigen::Index>(i)).transpose() - g.mean;
    g.covariance.noalias() += diff * diff.transpose();
  }
  for (auto& g : out) {
    g.covariance /= static_cast<double>(g.count);
    const double mean_eigenvalue = g.covariance.trace() / static_cast<double>(d);
    if (mode == CovarianceMode::full) {
      // A zero-spread class still needs a strictly positive shift.
      g.covariance.diagonal().array() += ridge * std::max(mean_eigenvalue, kVarianceFloor);
    } else {
      g.variance = std::max(mean_eigenvalue, kVarianceFloor);
      g.covariance = Matrix::Identity(d, d) * g.variance;
    }
  }
  return out;
}

namespace {

struct Factorized {
  const ClassGaussian* g = nullptr;
  Eigen::LLT<Matrix> llt;
};

Factorized factorize(const ClassGaussian& g) {
  Factorized f{&g, {}};
  if (g.mode == CovarianceMode::spherical) {
    if (!(g.variance > 0.0)) throw Error("non-PD covariance for class " + std::to_string(g.class_id));
    return f;
  }
  f.llt.compute(g.covariance);
  if (f.llt.info() != Eigen::Success || !(f.llt.matrixL().toDenseMatrix().diagonal().minCoeff() > 0.0)) {
    throw Error("non-PD covariance for class " + std::to_string(g.class_id));
  }
  return f;
}

double squared_distance(const Factorized& f, const Vector& x) {
  const Vector diff = x - f.g->mean;
  if (f.g->mode == CovarianceMode::spherical) return diff.squaredNorm() / f.g->variance;
  const Vector y = f.llt.matrixL().solve(diff);
  return y.squaredNorm();
}

}  // namespace

double mahalanobis(const ClassGaussian& g, const Vector& x) {
  if (x.size() != g.mean.size()) throw Error("dimension mismatch in Mahalanobis distance");
  return std::sqrt(squared_distance(factorize(g), x));
}

HardnessVector hardness_class_specific(const Matrix& features, const LabelVector& labels,
                                       const std::vector<ClassGaussian>& gaussians) {
  if (static_cast<std::size_t>(features.rows()) != labels.size()) throw Error("features and labels disagree on n");
  std::vector<Factorized> factors(static_cast<std::size_t>(labels.num_classes));
  for (const auto& g : gaussians) {
    if (g.class_id < 0 || g.class_id >= labels.num_classes) throw Error("gaussian class id out of range");
    if (g.mean.size() != features.cols()) throw Error("gaussian dimension does not match features");
    factors[static_cast<std::size_t>(g.class_id)] = factorize(g);
  }
  HardnessVector h{std::vector<double>(labels.size()), HardnessMethod::class_specific};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto& f = factors[static_cast<std::size_t>(labels[i])];
    if (!f.g) throw Error("no gaussian for class " + std::to_string(labels[i]));
    h.scores[i] = std::sqrt(squared_distance(f, features.row(static_cast<Eigen::Index>(i)).transpose()));
  }
  return h;
}

std::vector<std::size_t> hardness_order(const HardnessVector& h) {
  std::vector<std::size_t> order(h.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return h.scores[a] > h.scores[b]; });
  return order;
}

SubsetIndex select_hard_subset(const HardnessVector& h, double fraction) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw Error("fraction must be in (0, 1]");
  if (h.size() == 0) throw Error("empty hardness vector");
  const std::size_t k = std::clamp<std::size_t>(rounded_count(fraction, h.size()), 1, h.size());
  auto order = hardness_order(h);
  order.resize(k);
  return SubsetIndex{std::move(order), h.size()};
}

std::vector<SubsetIndex> bucketize(const HardnessVector& h, int num_buckets) {
  if (num_buckets < 1) throw Error("bucket count must be at least 1");
  const std::size_t n = h.size();
  const auto b = static_cast<std::size_t>(num_buckets);
  if (b > n) throw Error("bucket count " + std::to_string(b) + " exceeds sample count " + std::to_string(n));
  const auto order = hardness_order(h);
  std::vector<SubsetIndex> buckets;
  std::size_t pos = 0;
  for (std::size_t k = 0; k < b; ++k) {
    const std::size_t size = n / b + (k < n % b ? 1 : 0);
    buckets.push_back(SubsetIndex{{order.begin() + static_cast<std::ptrdiff_t>(pos),
                                   order.begin() + static_cast<std::ptrdiff_t>(pos + size)},
                                  n});
    pos += size;
  }
  return buckets;
}

SubsetIndex augment_with_easy(const SubsetIndex& hard, const HardnessVector& h, double easy_fraction,
                              std::uint64_t seed) {
  if (!(easy_fraction >= 0.0 && easy_fraction <= 1.0)) throw Error("easy fraction must be in [0, 1]");
  const std::size_t n = h.size();
  const SubsetIndex base = make_subset(hard.indices, n);
  std::vector<char> taken(n, 0);
  for (auto i : base.indices) taken[i] = 1;
  std::vector<std::size_t> complement;
  for (std::size_t i = 0; i < n; ++i)
    if (!taken[i]) complement.push_back(i);

  const std::size_t extra = rounded_count(easy_fraction, n);
  if (extra > complement.size()) {
    throw Error("cannot add " + std::to_string(extra) + " easy samples: only " + std::to_string(complement.size()) +
                " outside the hard subset");
  }
  detail::Rng rng(seed);
  auto drawn = detail::sample_without_replacement(std::move(complement), extra, rng);
  SubsetIndex out = base;
  out.indices.insert(out.indices.end(), drawn.begin(), drawn.end());
  return out;
}

}  // namespace hardness
}  // namespace haste

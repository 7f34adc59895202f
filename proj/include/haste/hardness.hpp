#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "haste/tensor_store.hpp"

namespace haste {

enum class HardnessMethod { class_agnostic, class_specific };
enum class CovarianceMode { full, spherical };

std::string to_string(HardnessMethod m);  // "ca" | "cs"
std::string to_string(CovarianceMode m);  // "full" | "spherical"
HardnessMethod parse_hardness_method(const std::string& s);
CovarianceMode parse_covariance_mode(const std::string& s);

/// Number of worker threads implied by HASTE_THREADS (or hardware concurrency).
unsigned default_thread_count();

namespace hardness {

/// S(i, j): layer-averaged cosine similarity of source row i and target row j.
struct SimilarityMatrix {
  Matrix values;  // [M, N]
};

struct HardnessVector {
  std::vector<double> scores;
  HardnessMethod method = HardnessMethod::class_agnostic;

  std::size_t size() const { return scores.size(); }
};

/// A per-class Gaussian. In spherical mode `covariance` holds variance * I.
struct ClassGaussian {
  int class_id = 0;
  Vector mean;
  Matrix covariance;
  double variance = 0.0;  // spherical mode only
  CovarianceMode mode = CovarianceMode::full;
  std::size_t count = 0;
};

inline constexpr double kZeroNorm = 1e-12;
inline constexpr double kDefaultRidge = 1e-6;
inline constexpr double kVarianceFloor = 1e-12;
inline constexpr double kDefaultFraction = 0.2;

/// Scales every row of every layer to unit L2 norm.
EmbeddingSet normalize_per_layer(const EmbeddingSet& e);

/// Expects normalized inputs with matching layer schemas. Every entry is a
/// fixed-order sum, so the result does not depend on `threads`.
SimilarityMatrix similarity_matrix(const EmbeddingSet& source, const EmbeddingSet& target, unsigned threads = 1);

/// H_j = 1 - mean_i S(i, j).
HardnessVector hardness_class_agnostic(const SimilarityMatrix& s);

/// Same values as hardness_class_agnostic(similarity_matrix(...)) without
/// materialising the M x N matrix.
HardnessVector hardness_class_agnostic(const EmbeddingSet& source, const EmbeddingSet& target, unsigned threads = 1);

/// Per-class uniform sample of ceil(fraction * N_c) rows, returned ascending.
SubsetIndex subsample_source(const LabelVector& labels, double fraction, std::uint64_t seed);

/// Moment estimates with the biased 1/N_c covariance. Full mode adds
/// ridge * (tr / d) * I; spherical mode keeps the mean per-dimension variance.
std::vector<ClassGaussian> class_gaussians(const Matrix& features, const LabelVector& labels, CovarianceMode mode,
                                           double ridge = kDefaultRidge);

double mahalanobis(const ClassGaussian& g, const Vector& x);

HardnessVector hardness_class_specific(const Matrix& features, const LabelVector& labels,
                                       const std::vector<ClassGaussian>& gaussians);

/// Indices sorted by descending hardness, ties by ascending index.
std::vector<std::size_t> hardness_order(const HardnessVector& h);

SubsetIndex select_hard_subset(const HardnessVector& h, double fraction = kDefaultFraction);

/// Bucket 1 (front) is the hardest; sizes differ by at most one with the
/// larger buckets first.
std::vector<SubsetIndex> bucketize(const HardnessVector& h, int num_buckets);

/// Appends round(easy_fraction * N) uniformly drawn samples from outside `hard`.
SubsetIndex augment_with_easy(const SubsetIndex& hard, const HardnessVector& h, double easy_fraction,
                              std::uint64_t seed);

}  // namespace hardness
}  // namespace haste

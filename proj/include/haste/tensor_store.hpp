#pragma once

// On-disk formats shared by every stage of the toolkit.
//
// HSTE tensor file (all integers little-endian):
//    magic     "HSTE"  (4 bytes)
//    version   u32 = 1
//    dtype     u8  = 0 (f32)
//    ndim      u8
//    reserved  u16 = 0
//    dims      ndim x u64
//    payload   row-major f32
//
// Embedding manifest (JSON, paths relative to the manifest):
//    {"n": int, "layers": [{"name": str, "file": str, "dim": int}],
//     "labels": str|null, "predictions": str|null}
//
// Labels CSV: header `index,label`. Subset JSON:
//    {"source_n": int, "indices": [...], "method": "ca"|"cs"|"bucket"|"manual", "params": {...}}
// Scores CSV: header `candidate,metric,score,accuracy`.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace haste {

/// Raised for any invalid input data or failed IO. The message names the
/// offending file and row where one is known.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Json = nlohmann::json;

enum class DType : std::uint8_t { f32 = 0 };

struct Tensor {
  DType dtype = DType::f32;
  std::vector<std::uint64_t> shape;
  std::vector<float> data;

  std::size_t element_count() const;

  friend bool operator==(const Tensor& a, const Tensor& b);
};

/// Builds a tensor and validates shape/element-count agreement and finiteness.
Tensor make_tensor(std::vector<std::uint64_t> shape, std::vector<float> data);

void write_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor read_tensor(const std::filesystem::path& path);

/// Narrowing copy f64 -> f32 for storage.
Tensor to_tensor(const Matrix& m);
Tensor to_tensor(const std::vector<double>& v);
/// Widening copy of a 2-d tensor.
Matrix to_matrix(const Tensor& t);

struct Layer {
  std::string name;
  Matrix block;  // [n, d]
};

struct EmbeddingSet {
  std::vector<Layer> layers;
  std::size_t n = 0;
  std::vector<std::string> sample_ids;

  const Layer& layer(const std::string& name) const;
  const Layer& final_layer() const { return layers.back(); }
};

/// Checks layer count, unique names, shared leading dimension, finiteness.
EmbeddingSet make_embedding_set(std::vector<Layer> layers, std::vector<std::string> sample_ids = {});

struct PredictionMatrix {
  Matrix rows;  // [n, |Z|]
  std::vector<std::string> class_names;

  std::size_t n() const { return static_cast<std::size_t>(rows.rows()); }
  std::size_t num_source_classes() const { return static_cast<std::size_t>(rows.cols()); }
};

inline constexpr double kRowSumTolerance = 1e-5;

/// Validates entries in [0,1] and row sums within kRowSumTolerance, then
/// rescales every row to sum to one in double precision.
PredictionMatrix make_prediction_matrix(Matrix rows, std::vector<std::string> class_names = {});

struct LabelVector {
  std::vector<int> labels;
  int num_classes = 0;

  std::size_t size() const { return labels.size(); }
  int operator[](std::size_t i) const { return labels[i]; }
};

LabelVector make_label_vector(std::vector<int> labels, int num_classes);

struct SubsetIndex {
  std::vector<std::size_t> indices;
  std::size_t source_n = 0;

  std::size_t size() const { return indices.size(); }
  bool empty() const { return indices.empty(); }
  friend bool operator==(const SubsetIndex&, const SubsetIndex&) = default;
};

/// Checks distinctness and range.
SubsetIndex make_subset(std::vector<std::size_t> indices, std::size_t source_n);
SubsetIndex full_subset(std::size_t n);

/// Row indices selected by an optional subset; every row when absent.
std::vector<std::size_t> resolve_rows(const std::optional<SubsetIndex>& subset, std::size_t n);

/// When num_classes is absent it is inferred as max(label) + 1.
LabelVector read_labels(const std::filesystem::path& path, std::optional<int> num_classes = std::nullopt);
void write_labels(const std::filesystem::path& path, const LabelVector& labels);

PredictionMatrix read_predictions(const std::filesystem::path& path);

struct ManifestLayer {
  std::string name;
  std::string file;
  std::uint64_t dim = 0;
};

struct Manifest {
  std::filesystem::path path;  // location of the manifest itself
  std::uint64_t n = 0;
  std::vector<ManifestLayer> layers;
  std::optional<std::string> labels;
  std::optional<std::string> predictions;
  std::optional<int> num_classes;

  std::filesystem::path resolve(const std::string& relative) const;
};

Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const Manifest& m);

EmbeddingSet read_embedding_set(const std::filesystem::path& manifest_path);

/// Everything a manifest references, loaded and cross-checked for row count.
struct Dataset {
  Manifest manifest;
  EmbeddingSet embeddings;
  std::optional<PredictionMatrix> predictions;
  std::optional<LabelVector> labels;
};

Dataset load_dataset(const std::filesystem::path& manifest_path,
                     const std::optional<std::filesystem::path>& labels_override = std::nullopt);

struct SubsetFile {
  SubsetIndex subset;
  std::string method = "manual";
  Json params = Json::object();
};

void write_subset(const std::filesystem::path& path, const SubsetFile& s);
SubsetFile read_subset(const std::filesystem::path& path);

struct ScoreRow {
  std::string candidate;
  std::string metric;
  double score = 0.0;
  std::optional<double> accuracy;
};

inline constexpr const char* kScoresHeader = "candidate,metric,score,accuracy";

std::string format_score_row(const ScoreRow& row);
void write_scores(const std::filesystem::path& path, const std::vector<ScoreRow>& rows);
std::vector<ScoreRow> read_scores(const std::filesystem::path& path);

/// Shortest decimal form that round-trips to the same double.
std::string format_double(double v);

/// Writes JSON with 2-space indent and a trailing newline.
void write_json(const std::filesystem::path& path, const Json& j);
Json read_json(const std::filesystem::path& path);

}  // namespace haste

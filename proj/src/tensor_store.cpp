#include "haste/tensor_store.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>

namespace haste {

namespace fs = std::filesystem;

namespace {

constexpr std::array<char, 4> kMagic = {'H', 'S', 'T', 'E'};
constexpr std::uint32_t kVersion = 1;
constexpr std::size_t kHeaderBytes = 12;

template <typename T>
void put_le(std::string& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xFFu));
  }
}

template <typename T>
T get_le(const unsigned char* p) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return static_cast<T>(v);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed: " + path.string());
}

std::string shape_string(const std::vector<std::uint64_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

void check_finite(const std::vector<float>& data, const std::string& context) {
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!std::isfinite(data[i])) {
      throw Error(context + "non-finite element at flat index " + std::to_string(i));
    }
  }
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

long long parse_int(const std::string& s, const std::string& context) {
  long long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw Error(context + "expected integer, got '" + s + "'");
  }
  return v;
}

double parse_double(const std::string& s, const std::string& context) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) {
    throw Error(context + "expected number, got '" + s + "'");
  }
  if (!std::isfinite(v)) throw Error(context + "non-finite value");
  return v;
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::string text = read_file(path);
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
    start = end + 1;
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

}  // namespace

std::size_t Tensor::element_count() const {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         [](std::size_t a, std::uint64_t b) { return a * static_cast<std::size_t>(b); });
}

bool operator==(const Tensor& a, const Tensor& b) {
  if (a.dtype != b.dtype || a.shape != b.shape || a.data.size() != b.data.size()) return false;
  return std::memcmp(a.data.data(), b.data.data(), a.data.size() * sizeof(float)) == 0;
}

Tensor make_tensor(std::vector<std::uint64_t> shape, std::vector<float> data) {
  if (shape.empty() || shape.size() > 255) throw Error("tensor rank must be in [1, 255]");
  for (auto d : shape) {
    if (d < 1) throw Error("tensor shape " + shape_string(shape) + " has a zero dimension");
  }
  Tensor t{DType::f32, std::move(shape), std::move(data)};
  if (t.element_count() != t.data.size()) {
    throw Error("tensor shape " + shape_string(t.shape) + " does not match " + std::to_string(t.data.size()) +
                " elements");
  }
  check_finite(t.data, "");
  return t;
}

void write_tensor(const fs::path& path, const Tensor& t) {
  if (t.dtype != DType::f32) throw Error("unsupported dtype");
  // Re-validate; a Tensor may have been assembled by hand.
  make_tensor(t.shape, t.data);

  std::string bytes;
  bytes.reserve(kHeaderBytes + 8 * t.shape.size() + 4 * t.data.size());
  bytes.append(kMagic.data(), kMagic.size());
  put_le<std::uint32_t>(bytes, kVersion);
  put_le<std::uint8_t>(bytes, static_cast<std::uint8_t>(t.dtype));
  put_le<std::uint8_t>(bytes, static_cast<std::uint8_t>(t.shape.size()));
  put_le<std::uint16_t>(bytes, 0);
  for (auto d : t.shape) put_le<std::uint64_t>(bytes, d);
  for (float f : t.data) put_le<std::uint32_t>(bytes, std::bit_cast<std::uint32_t>(f));
  write_file(path, bytes);
}

Tensor read_tensor(const fs::path& path) {
  const std::string ctx = path.string() + ": ";
  const std::string bytes = read_file(path);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < kHeaderBytes) throw Error(ctx + "truncated header");
  if (std::memcmp(p, kMagic.data(), 4) != 0) throw Error(ctx + "bad magic");
  if (get_le<std::uint32_t>(p + 4) != kVersion) throw Error(ctx + "unsupported version");
  if (p[8] != static_cast<unsigned char>(DType::f32)) throw Error(ctx + "unsupported dtype");
  const std::size_t ndim = p[9];
  if (get_le<std::uint16_t>(p + 10) != 0) throw Error(ctx + "reserved field not zero");
  if (ndim == 0) throw Error(ctx + "zero-rank tensor");
  if (bytes.size() < kHeaderBytes + 8 * ndim) throw Error(ctx + "truncated shape");

  std::vector<std::uint64_t> shape(ndim);
  std::size_t count = 1;
  for (std::size_t i = 0; i < ndim; ++i) {
    shape[i] = get_le<std::uint64_t>(p + kHeaderBytes + 8 * i);
    if (shape[i] < 1) throw Error(ctx + "zero dimension in shape " + shape_string(shape));
    count *= static_cast<std::size_t>(shape[i]);
  }
  const std::size_t offset = kHeaderBytes + 8 * ndim;
  if (bytes.size() != offset + 4 * count) {
    throw Error(ctx + "payload size mismatch for shape " + shape_string(shape));
  }
  std::vector<float> data(count);
  for (std::size_t i = 0; i < count; ++i) {
    data[i] = std::bit_cast<float>(get_le<std::uint32_t>(p + offset + 4 * i));
  }
  check_finite(data, ctx);
  return Tensor{DType::f32, std::move(shape), std::move(data)};
}

Tensor to_tensor(const Matrix& m) {
  std::vector<float> data(static_cast<std::size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) data[static_cast<std::size_t>(i * m.cols() + j)] = static_cast<float>(m(i, j));
  return make_tensor({static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())}, std::move(data));
}

Tensor to_tensor(const std::vector<double>& v) {
  std::vector<float> data(v.begin(), v.end());
  return make_tensor({static_cast<std::uint64_t>(v.size())}, std::move(data));
}

Matrix to_matrix(const Tensor& t) {
  if (t.shape.size() != 2) throw Error("expected a 2-d tensor, got shape " + shape_string(t.shape));
  Matrix m(static_cast<Eigen::Index>(t.shape[0]), static_cast<Eigen::Index>(t.shape[1]));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = t.data[static_cast<std::size_t>(i * m.cols() + j)];
  return m;
}

const Layer& EmbeddingSet::layer(const std::string& name) const {
  for (const auto& l : layers)
    if (l.name == name) return l;
  throw Error("no layer named '" + name + "'");
}

EmbeddingSet make_embedding_set(std::vector<Layer> layers, std::vector<std::string> sample_ids) {
  if (layers.empty()) throw Error("no layers");
  std::set<std::string> names;
  const auto n = static_cast<std::size_t>(layers.front().block.rows());
  for (const auto& l : layers) {
    if (!names.insert(l.name).second) throw Error("duplicate layer name '" + l.name + "'");
    if (static_cast<std::size_t>(l.block.rows()) != n) {
      throw Error("row-count mismatch: layer '" + l.name + "' has " + std::to_string(l.block.rows()) +
                  " rows, expected " + std::to_string(n));
    }
    if (l.block.cols() < 1) throw Error("layer '" + l.name + "' has zero width");
    if (!l.block.allFinite()) throw Error("layer '" + l.name + "' has a non-finite element");
  }
  if (!sample_ids.empty() && sample_ids.size() != n) throw Error("sample id count does not match row count");
  return EmbeddingSet{std::move(layers), n, std::move(sample_ids)};
}

PredictionMatrix make_prediction_matrix(Matrix rows, std::vector<std::string> class_names) {
  if (rows.rows() < 1 || rows.cols() < 1) throw Error("empty prediction matrix");
  if (!class_names.empty() && class_names.size() != static_cast<std::size_t>(rows.cols())) {
    throw Error("class name count does not match prediction width");
  }
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    double sum = 0.0;
    for (Eigen::Index z = 0; z < rows.cols(); ++z) {
      const double p = rows(i, z);
      // An entry may overshoot 1 by the same slack a row sum is allowed.
      if (!std::isfinite(p) || p < 0.0 || p > 1.0 + kRowSumTolerance) {
        throw Error("prediction row " + std::to_string(i) + ": entry outside [0, 1]");
      }
      sum += p;
    }
    if (std::abs(sum - 1.0) > kRowSumTolerance) {
      throw Error("prediction row " + std::to_string(i) + " sums to " + format_double(sum));
    }
    rows.row(i) /= sum;
  }
  return PredictionMatrix{std::move(rows), std::move(class_names)};
}

LabelVector make_label_vector(std::vector<int> labels, int num_classes) {
  if (num_classes < 1) throw Error("num_classes must be positive");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= num_classes) {
      throw Error("label out of range at row " + std::to_string(i) + ": " + std::to_string(labels[i]));
    }
  }
  return LabelVector{std::move(labels), num_classes};
}

SubsetIndex make_subset(std::vector<std::size_t> indices, std::size_t source_n) {
  std::vector<char> seen(source_n, 0);
  for (auto i : indices) {
    if (i >= source_n) throw Error("subset index " + std::to_string(i) + " out of range for n=" + std::to_string(source_n));
    if (seen[i]) throw Error("duplicate subset index " + std::to_string(i));
    seen[i] = 1;
  }
  return SubsetIndex{std::move(indices), source_n};
}

SubsetIndex full_subset(std::size_t n) {
  SubsetIndex s{std::vector<std::size_t>(n), n};
  std::iota(s.indices.begin(), s.indices.end(), std::size_t{0});
  return s;
}

std::vector<std::size_t> resolve_rows(const std::optional<SubsetIndex>& subset, std::size_t n) {
  if (!subset) return full_subset(n).indices;
  if (subset->source_n != n) {
    throw Error("subset was built for n=" + std::to_string(subset->source_n) + " but data has n=" + std::to_string(n));
  }
  return make_subset(subset->indices, n).indices;
}

LabelVector read_labels(const fs::path& path, std::optional<int> num_classes) {
  const auto lines = read_lines(path);
  const std::string ctx = path.string() + ": ";
  if (lines.empty() || lines.front() != "index,label") throw Error(ctx + "expected header 'index,label'");
  std::vector<std::pair<long long, long long>> rows;
  rows.reserve(lines.size() - 1);
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const std::string rctx = ctx + "line " + std::to_string(r + 1) + ": ";
    auto cols = split_csv_line(lines[r]);
    if (cols.size() != 2) throw Error(rctx + "expected 2 columns");
    rows.emplace_back(parse_int(cols[0], rctx), parse_int(cols[1], rctx));
  }
  std::stable_sort(rows.begin(), rows.end(), [](auto& a, auto& b) { return a.first < b.first; });
  std::vector<int> labels;
  labels.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].first < static_cast<long long>(i)) throw Error(ctx + "duplicate index " + std::to_string(rows[i].first));
    if (rows[i].first > static_cast<long long>(i)) throw Error(ctx + "index gap at " + std::to_string(i));
    if (rows[i].second < 0) throw Error(ctx + "label out of range at index " + std::to_string(i));
    labels.push_back(static_cast<int>(rows[i].second));
  }
  int k = num_classes.value_or(labels.empty() ? 1 : *std::max_element(labels.begin(), labels.end()) + 1);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= k) throw Error(ctx + "label out of range at index " + std::to_string(i));
  }
  return make_label_vector(std::move(labels), k);
}

void write_labels(const fs::path& path, const LabelVector& labels) {
  std::string out = "index,label\n";
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out += std::to_string(i) + "," + std::to_string(labels[i]) + "\n";
  }
  write_file(path, out);
}

PredictionMatrix read_predictions(const fs::path& path) {
  try {
    return make_prediction_matrix(to_matrix(read_tensor(path)));
  } catch (const Error& e) {
    const std::string msg = e.what();
    if (msg.rfind(path.string(), 0) == 0) throw;
    throw Error(path.string() + ": " + msg);
  }
}

fs::path Manifest::resolve(const std::string& relative) const { return path.parent_path() / relative; }

Manifest read_manifest(const fs::path& path) {
  const Json j = read_json(path);
  const std::string ctx = path.string() + ": ";
  Manifest m;
  m.path = path;
  try {
    m.n = j.at("n").get<std::uint64_t>();
    for (const auto& l : j.at("layers")) {
      m.layers.push_back({l.at("name").get<std::string>(), l.at("file").get<std::string>(), l.at("dim").get<std::uint64_t>()});
    }
    if (j.contains("labels") && !j["labels"].is_null()) m.labels = j["labels"].get<std::string>();
    if (j.contains("predictions") && !j["predictions"].is_null()) m.predictions = j["predictions"].get<std::string>();
    if (j.contains("num_classes") && !j["num_classes"].is_null()) m.num_classes = j["num_classes"].get<int>();
  } catch (const Json::exception& e) {
    throw Error(ctx + "malformed manifest: " + e.what());
  }
  return m;
}

void write_manifest(const fs::path& path, const Manifest& m) {
  Json j;
  j["n"] = m.n;
  j["layers"] = Json::array();
  for (const auto& l : m.layers) j["layers"].push_back({{"name", l.name}, {"file", l.file}, {"dim", l.dim}});
  j["labels"] = m.labels ? Json(*m.labels) : Json(nullptr);
  j["predictions"] = m.predictions ? Json(*m.predictions) : Json(nullptr);
  if (m.num_classes) j["num_classes"] = *m.num_classes;
  write_json(path, j);
}

namespace {

EmbeddingSet load_layers(const Manifest& m) {
  const std::string ctx = m.path.string() + ": ";
  if (m.layers.empty()) throw Error(ctx + "no layers");
  std::vector<Layer> layers;
  for (const auto& ml : m.layers) {
    Matrix block = to_matrix(read_tensor(m.resolve(ml.file)));
    if (static_cast<std::uint64_t>(block.cols()) != ml.dim) {
      throw Error(ctx + "layer '" + ml.name + "' declares dim " + std::to_string(ml.dim) + " but file has " +
                  std::to_string(block.cols()));
    }
    layers.push_back({ml.name, std::move(block)});
  }
  EmbeddingSet e;
  try {
    e = make_embedding_set(std::move(layers));
  } catch (const Error& err) {
    throw Error(ctx + err.what());
  }
  if (e.n != m.n) {
    throw Error(ctx + "row-count mismatch: manifest says n=" + std::to_string(m.n) + ", layers have " + std::to_string(e.n));
  }
  return e;
}

}  // namespace

EmbeddingSet read_embedding_set(const fs::path& manifest_path) { return load_layers(read_manifest(manifest_path)); }

Dataset load_dataset(const fs::path& manifest_path, const std::optional<fs::path>& labels_override) {
  Dataset d;
  d.manifest = read_manifest(manifest_path);
  d.embeddings = load_layers(d.manifest);
  const std::string ctx = manifest_path.string() + ": ";
  if (d.manifest.predictions) {
    d.predictions = read_predictions(d.manifest.resolve(*d.manifest.predictions));
    if (d.predictions->n() != d.embeddings.n) throw Error(ctx + "row-count mismatch between predictions and layers");
  }
  std::optional<fs::path> labels_path = labels_override;
  if (!labels_path && d.manifest.labels) labels_path = d.manifest.resolve(*d.manifest.labels);
  if (labels_path) {
    d.labels = read_labels(*labels_path, d.manifest.num_classes);
    if (d.labels->size() != d.embeddings.n) throw Error(ctx + "row-count mismatch between labels and layers");
  }
  return d;
}

void write_subset(const fs::path& path, const SubsetFile& s) {
  Json j;
  j["source_n"] = s.subset.source_n;
  j["indices"] = s.subset.indices;
  j["method"] = s.method;
  j["params"] = s.params;
  write_json(path, j);
}

SubsetFile read_subset(const fs::path& path) {
  const Json j = read_json(path);
  SubsetFile s;
  try {
    const auto n = j.at("source_n").get<std::size_t>();
    s.subset = make_subset(j.at("indices").get<std::vector<std::size_t>>(), n);
    s.method = j.value("method", std::string("manual"));
    if (j.contains("params")) s.params = j["params"];
  } catch (const Json::exception& e) {
    throw Error(path.string() + ": malformed subset: " + e.what());
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
  static const std::set<std::string> methods = {"ca", "cs", "bucket", "manual"};
  if (!methods.count(s.method)) throw Error(path.string() + ": unknown subset method '" + s.method + "'");
  return s;
}

std::string format_double(double v) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

std::string format_score_row(const ScoreRow& row) {
  std::string s = row.candidate + "," + row.metric + "," + format_double(row.score) + ",";
  if (row.accuracy) s += format_double(*row.accuracy);
  return s;
}

void write_scores(const fs::path& path, const std::vector<ScoreRow>& rows) {
  std::string out = std::string(kScoresHeader) + "\n";
  for (const auto& r : rows) out += format_score_row(r) + "\n";
  write_file(path, out);
}

std::vector<ScoreRow> read_scores(const fs::path& path) {
  const auto lines = read_lines(path);
  const std::string ctx = path.string() + ": ";
  if (lines.empty() || lines.front() != kScoresHeader) throw Error(ctx + "expected header '" + kScoresHeader + "'");
  std::vector<ScoreRow> rows;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    const std::string rctx = ctx + "line " + std::to_string(r + 1) + ": ";
    auto cols = split_csv_line(lines[r]);
    if (cols.size() != 4) throw Error(rctx + "expected 4 columns");
    ScoreRow row{cols[0], cols[1], parse_double(cols[2], rctx), std::nullopt};
    if (!cols[3].empty()) row.accuracy = parse_double(cols[3], rctx);
    rows.push_back(std::move(row));
  }
  return rows;
}

void write_json(const fs::path& path, const Json& j) { write_file(path, j.dump(2) + "\n"); }

Json read_json(const fs::path& path) {
  try {
    return Json::parse(read_file(path));
  } catch (const Json::exception& e) {
    throw Error(path.string() + ": invalid JSON: " + e.what());
  }
}

}  // namespace haste

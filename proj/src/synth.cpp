#include "haste/synth.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>

#include "haste/bounds.hpp"
#include "haste/detail/random.hpp"
#include "haste/metrics.hpp"

namespace haste::synth {

namespace fs = std::filesystem;

namespace {

detail::Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream)};
  return detail::Rng(seq);
}

// Box-Muller on the portable uniform source.
double standard_normal(detail::Rng& rng) {
  double u1;
  do {
    u1 = detail::uniform_unit(rng);
  } while (u1 <= 0.0);
  const double u2 = detail::uniform_unit(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

double uniform(detail::Rng& rng, double lo, double hi) { return lo + (hi - lo) * detail::uniform_unit(rng); }

struct Split {
  std::vector<int> labels;
  std::vector<bool> hard;
  Matrix base;  // raw features, one row per sample
};

Split draw_split(const SynthConfig& c, const Matrix& means, std::size_t n, double contamination, detail::Rng& rng) {
  Split s{std::vector<int>(n), std::vector<bool>(n), Matrix(static_cast<Eigen::Index>(n), c.feature_dim)};
  for (std::size_t i = 0; i < n; ++i) {
    s.labels[i] = static_cast<int>(detail::uniform_below(rng, static_cast<std::uint64_t>(c.num_classes)));
    s.hard[i] = detail::uniform_unit(rng) < contamination;
    const double spread = s.hard[i] ? c.hard_spread : 1.0;
    for (int k = 0; k < c.feature_dim; ++k) {
      s.base(static_cast<Eigen::Index>(i), k) = means(s.labels[i], k) + spread * standard_normal(rng);
    }
  }
  return s;
}

// Layer l of the hardness model: A_l x + b_l with a large common offset.
struct LayerMaps {
  std::vector<Matrix> weights;
  std::vector<Vector> offsets;
};

LayerMaps draw_layer_maps(const SynthConfig& c, detail::Rng& rng) {
  LayerMaps maps;
  for (int l = 0; l < c.num_layers; ++l) {
    Matrix a = Matrix::Identity(c.feature_dim, c.feature_dim);
    if (l > 0) {
      for (int i = 0; i < c.feature_dim; ++i)
        for (int j = 0; j < c.feature_dim; ++j) a(i, j) += 0.3 * standard_normal(rng);
    }
    Vector b(c.feature_dim);
    for (int k = 0; k < c.feature_dim; ++k) b(k) = 3.0 * c.separation * (1.0 + 0.2 * standard_normal(rng));
    maps.weights.push_back(std::move(a));
    maps.offsets.push_back(std::move(b));
  }
  return maps;
}

EmbeddingSet embed(const LayerMaps& maps, const Matrix& base) {
  std::vector<Layer> layers;
  for (std::size_t l = 0; l < maps.weights.size(); ++l) {
    Matrix block = base * maps.weights[l].transpose();
    block.rowwise() += maps.offsets[l].transpose();
    // Round through f32 so in-memory values equal what a reader sees on disk.
    block = block.cast<float>().cast<double>();
    layers.push_back({"block" + std::to_string(l + 1), std::move(block)});
  }
  return make_embedding_set(std::move(layers));
}

PredictionMatrix draw_predictions(const SynthConfig& c, const std::vector<int>& labels, const std::vector<bool>& hard,
                                  const std::vector<int>& mapping, double noise, double easy_conf, detail::Rng& rng) {
  const auto nz = static_cast<Eigen::Index>(c.source_classes);
  Matrix p(static_cast<Eigen::Index>(labels.size()), nz);
  std::vector<double> logits(static_cast<std::size_t>(nz));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    for (auto& v : logits) v = uniform(rng, 0.0, c.logit_jitter);
    int target = mapping[static_cast<std::size_t>(labels[i])];
    double conf = easy_conf;
    if (hard[i]) {
      conf = c.hard_confidence;
      if (detail::uniform_unit(rng) < noise) {
        const auto shift = 1 + detail::uniform_below(rng, static_cast<std::uint64_t>(nz - 1));
        target = static_cast<int>((static_cast<std::uint64_t>(target) + shift) % static_cast<std::uint64_t>(nz));
      }
    }
    logits[static_cast<std::size_t>(target)] += conf;
    double norm = 0.0;
    for (auto& v : logits) {
      v = std::exp(v);
      norm += v;
    }
    for (Eigen::Index z = 0; z < nz; ++z) {
      p(static_cast<Eigen::Index>(i), z) = static_cast<double>(static_cast<float>(logits[static_cast<std::size_t>(z)] / norm));
    }
  }
  return make_prediction_matrix(std::move(p));
}

double held_out_accuracy(const PredictionMatrix& train, const LabelVector& train_labels, const PredictionMatrix& test,
                         const LabelVector& test_labels) {
  const auto head = bounds::fit_optimal_head(train, train_labels);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < test.n(); ++i) correct += bounds::head_predict(head.q, test, i) == test_labels[i];
  return static_cast<double>(correct) / static_cast<double>(test.n());
}

std::string candidate_name(std::size_t m) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "cand%02zu", m);
  return buf;
}

}  // namespace

Json to_json(const SynthConfig& c) {
  return Json{{"num_classes", c.num_classes},
              {"source_classes", c.source_classes},
              {"feature_dim", c.feature_dim},
              {"num_layers", c.num_layers},
              {"n_train", c.n_train},
              {"n_test", c.n_test},
              {"n_source", c.n_source},
              {"contamination", c.contamination},
              {"separation", c.separation},
              {"hard_spread", c.hard_spread},
              {"noise_levels", c.noise_levels},
              {"easy_confidence_min", c.easy_confidence_min},
              {"easy_confidence_max", c.easy_confidence_max},
              {"hard_confidence", c.hard_confidence},
              {"logit_jitter", c.logit_jitter},
              {"fraction", c.fraction},
              {"buckets", c.buckets}};
}

SynthConfig synth_config_from_json(const Json& j) {
  SynthConfig c;
  try {
    c.num_classes = j.value("num_classes", c.num_classes);
    c.source_classes = j.value("source_classes", c.source_classes);
    c.feature_dim = j.value("feature_dim", c.feature_dim);
    c.num_layers = j.value("num_layers", c.num_layers);
    c.n_train = j.value("n_train", c.n_train);
    c.n_test = j.value("n_test", c.n_test);
    c.n_source = j.value("n_source", c.n_source);
    c.contamination = j.value("contamination", c.contamination);
    c.separation = j.value("separation", c.separation);
    c.hard_spread = j.value("hard_spread", c.hard_spread);
    c.noise_levels = j.value("noise_levels", c.noise_levels);
    c.easy_confidence_min = j.value("easy_confidence_min", c.easy_confidence_min);
    c.easy_confidence_max = j.value("easy_confidence_max", c.easy_confidence_max);
    c.hard_confidence = j.value("hard_confidence", c.hard_confidence);
    c.logit_jitter = j.value("logit_jitter", c.logit_jitter);
    c.fraction = j.value("fraction", c.fraction);
    c.buckets = j.value("buckets", c.buckets);
  } catch (const Json::exception& e) {
    throw Error(std::string("malformed synth config: ") + e.what());
  }
  return c;
}

void validate(const SynthConfig& c) {
  if (!(c.contamination >= 0.0 && c.contamination <= 1.0)) throw Error("infeasible config: contamination must be in [0, 1]");
  if (c.num_classes < 2) throw Error("infeasible config: need at least 2 classes");
  if (c.source_classes < c.num_classes) throw Error("infeasible config: source_classes must be >= num_classes");
  if (c.feature_dim < 1 || c.num_layers < 1) throw Error("infeasible config: feature_dim and num_layers must be >= 1");
  if (c.n_train < 2 || c.n_test < 1 || c.n_source < 1) throw Error("infeasible config: split sizes too small");
  if (c.noise_levels.size() < 2) throw Error("infeasible config: need at least 2 candidates");
  for (double v : c.noise_levels)
    if (!(v >= 0.0 && v <= 1.0)) throw Error("infeasible config: noise levels must be in [0, 1]");
  if (!(c.easy_confidence_min <= c.easy_confidence_max)) throw Error("infeasible config: confidence range inverted");
  if (!(c.fraction > 0.0 && c.fraction <= 1.0)) throw Error("infeasible config: fraction must be in (0, 1]");
  if (c.buckets < 1 || static_cast<std::size_t>(c.buckets) > c.n_train) throw Error("infeasible config: bad bucket count");
}

SynthExperiment synth_experiment(const SynthConfig& config, std::uint64_t seed) {
  validate(config);
  SynthExperiment e;
  e.config = config;
  e.seed = seed;

  auto rng = make_rng(seed, 0);
  Matrix means(config.num_classes, config.feature_dim);
  for (Eigen::Index i = 0; i < means.rows(); ++i)
    for (Eigen::Index k = 0; k < means.cols(); ++k) means(i, k) = config.separation * standard_normal(rng);
  const auto maps = draw_layer_maps(config, rng);

  auto train = draw_split(config, means, config.n_train, config.contamination, rng);
  auto test = draw_split(config, means, config.n_test, config.contamination, rng);
  auto source = draw_split(config, means, config.n_source, 0.0, rng);

  e.target = embed(maps, train.base);
  e.train_labels = make_label_vector(train.labels, config.num_classes);
  e.test_labels = make_label_vector(test.labels, config.num_classes);
  e.train_hard = train.hard;
  e.test_hard = test.hard;
  e.source = embed(maps, source.base);
  e.source_labels = make_label_vector(source.labels, config.num_classes);

  const auto& cs_features = e.target.final_layer().block;
  e.cs_hardness = hardness::hardness_class_specific(
      cs_features, e.train_labels, hardness::class_gaussians(cs_features, e.train_labels, CovarianceMode::full));
  e.ca_hardness = hardness::hardness_class_agnostic(hardness::normalize_per_layer(e.source),
                                                    hardness::normalize_per_layer(e.target));

  std::vector<int> pool(static_cast<std::size_t>(config.source_classes));
  std::iota(pool.begin(), pool.end(), 0);
  for (std::size_t m = 0; m < config.noise_levels.size(); ++m) {
    auto crng = make_rng(seed, m + 1);
    SynthCandidate cand;
    cand.name = candidate_name(m);
    cand.noise = config.noise_levels[m];
    cand.easy_confidence = uniform(crng, config.easy_confidence_min, config.easy_confidence_max);
    const auto mapping = detail::sample_without_replacement(pool, static_cast<std::size_t>(config.num_classes), crng);
    cand.train = draw_predictions(config, train.labels, train.hard, mapping, cand.noise, cand.easy_confidence, crng);
    cand.test = draw_predictions(config, test.labels, test.hard, mapping, cand.noise, cand.easy_confidence, crng);
    cand.accuracy = held_out_accuracy(cand.train, e.train_labels, cand.test, e.test_labels);
    e.candidates.push_back(std::move(cand));
  }

  const auto buckets = hardness::bucketize(e.cs_hardness, config.buckets);
  for (const auto& cand : e.candidates) {
    metrics::MetricInputs in;
    in.predictions = &cand.train;
    in.labels = &e.train_labels;
    in.features = &cand.train.rows;
    auto push = [&](const metrics::MetricScore& s) {
      e.records.push_back({cand.name, s.metric, s.value, cand.accuracy});
    };
    for (auto kind : {metrics::MetricKind::leep, metrics::MetricKind::nce, metrics::MetricKind::gbc}) {
      push(metrics::evaluate_metric(kind, in));
      push(metrics::haste_score(kind, in, e.cs_hardness, config.fraction));
      push(metrics::haste_score(kind, in, e.ca_hardness, config.fraction));
    }
    for (std::size_t b = 0; b < buckets.size(); ++b) {
      auto s = metrics::leep(cand.train, e.train_labels, buckets[b]);
      s.metric = "bucket-" + std::to_string(b + 1) + "-leep";
      push(s);
    }
  }
  return e;
}

void write_synth_experiment(const fs::path& dir, const SynthExperiment& e) {
  fs::create_directories(dir / "target");
  fs::create_directories(dir / "source");

  Manifest target_manifest;
  target_manifest.path = dir / "target" / "manifest.json";
  target_manifest.n = e.target.n;
  target_manifest.labels = "labels.csv";
  target_manifest.num_classes = e.train_labels.num_classes;
  for (const auto& l : e.target.layers) {
    write_tensor(dir / "target" / (l.name + ".hste"), to_tensor(l.block));
    target_manifest.layers.push_back({l.name, l.name + ".hste", static_cast<std::uint64_t>(l.block.cols())});
  }
  write_labels(dir / "target" / "labels.csv", e.train_labels);
  write_labels(dir / "target" / "test_labels.csv", e.test_labels);
  write_manifest(target_manifest.path, target_manifest);

  Manifest source_manifest = target_manifest;
  source_manifest.path = dir / "source" / "manifest.json";
  source_manifest.n = e.source.n;
  source_manifest.layers.clear();
  for (const auto& l : e.source.layers) {
    write_tensor(dir / "source" / (l.name + ".hste"), to_tensor(l.block));
    source_manifest.layers.push_back({l.name, l.name + ".hste", static_cast<std::uint64_t>(l.block.cols())});
  }
  write_labels(dir / "source" / "labels.csv", e.source_labels);
  write_manifest(source_manifest.path, source_manifest);

  std::string accuracies = "candidate,accuracy\n";
  for (const auto& c : e.candidates) {
    const auto cdir = dir / "candidates" / c.name;
    fs::create_directories(cdir);
    write_tensor(cdir / "predictions.hste", to_tensor(c.train.rows));
    write_tensor(cdir / "test_predictions.hste", to_tensor(c.test.rows));
    Manifest m = target_manifest;
    m.path = cdir / "manifest.json";
    for (auto& l : m.layers) l.file = "../../target/" + l.file;
    m.labels = "../../target/labels.csv";
    m.predictions = "predictions.hste";
    write_manifest(m.path, m);
    accuracies += c.name + "," + format_double(c.accuracy) + "\n";
  }
  {
    std::FILE* f = std::fopen((dir / "accuracies.csv").c_str(), "wb");
    if (!f) throw Error("cannot open " + (dir / "accuracies.csv").string());
    std::fwrite(accuracies.data(), 1, accuracies.size(), f);
    std::fclose(f);
  }
  write_tensor(dir / "hardness_cs.hste", to_tensor(e.cs_hardness.scores));
  write_json(dir / "hardness_cs.json", {{"method", "cs"}, {"params", {{"covariance", "full"}, {"ridge", hardness::kDefaultRidge}}}});
  write_tensor(dir / "hardness_ca.hste", to_tensor(e.ca_hardness.scores));
  write_json(dir / "hardness_ca.json", {{"method", "ca"}, {"params", {{"source_fraction", 1.0}}}});
  write_scores(dir / "scores.csv", eval::to_score_rows(e.records));
  write_json(dir / "synth_config.json", {{"seed", e.seed}, {"config", to_json(e.config)}});
}

}  // namespace haste::synth

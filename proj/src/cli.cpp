#include "haste/cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <map>
#include <optional>

#include "haste/bounds.hpp"
#include "haste/eval.hpp"
#include "haste/hardness.hpp"
#include "haste/metrics.hpp"
#include "haste/synth.hpp"
#include "haste/tensor_store.hpp"

namespace haste::cli {

namespace fs = std::filesystem;

namespace {

struct Options {
  std::vector<std::string> manifests;
  std::string source_manifest;
  std::string labels;
  std::string metric = "leep";
  std::string hardness_method;
  std::string hardness_file;
  double fraction = hardness::kDefaultFraction;
  int buckets = 5;
  std::vector<std::string> subsets;
  double easy_fraction = 0.0;
  std::uint64_t seed = 0;
  std::string cov;
  double ridge = hardness::kDefaultRidge;
  std::string coef = "pearson";
  std::string out;
  std::string layer;
  std::string nce_mode = "hard";
  double source_fraction = 1.0;
  std::string candidate;
  std::optional<double> accuracy;
  double tol = bounds::kDefaultTol;
  int max_iter = bounds::kDefaultMaxIter;
  std::vector<std::string> scores;
  std::vector<std::string> baselines;
  std::string config;
};

// Hardness or subset selection shared by score, ensemble-score and bounds.
struct SubsetChoice {
  std::optional<SubsetIndex> subset;
  std::string prefix;  // prepended to the metric name
  Json params = Json::object();
};

std::optional<fs::path> labels_override(const Options& o) {
  if (o.labels.empty()) return std::nullopt;
  return fs::path(o.labels);
}

std::string candidate_of(const Options& o, const fs::path& manifest) {
  if (!o.candidate.empty()) return o.candidate;
  if (manifest.stem() == "manifest" && manifest.has_parent_path() && !manifest.parent_path().filename().empty()) {
    return manifest.parent_path().filename().string();
  }
  return manifest.stem().string();
}

const Matrix& feature_block(const Dataset& d, const std::string& layer) {
  if (layer.empty()) return d.embeddings.final_layer().block;
  if (layer == "predictions") {
    if (!d.predictions) throw Error(d.manifest.path.string() + ": manifest has no predictions");
    return d.predictions->rows;
  }
  return d.embeddings.layer(layer).block;
}

const LabelVector& need_labels(const Dataset& d) {
  if (!d.labels) throw Error(d.manifest.path.string() + ": no labels (manifest field or --labels)");
  return *d.labels;
}

const PredictionMatrix& need_predictions(const Dataset& d) {
  if (!d.predictions) throw Error(d.manifest.path.string() + ": manifest has no predictions");
  return *d.predictions;
}

hardness::HardnessVector compute_hardness(const Options& o, const Dataset& target, Json& params) {
  const auto method = parse_hardness_method(o.hardness_method);
  if (method == HardnessMethod::class_specific) {
    const auto mode = o.cov.empty() || o.metric == "gbc" ? CovarianceMode::full : parse_covariance_mode(o.cov);
    const Matrix& f = feature_block(target, o.layer);
    const auto& labels = need_labels(target);
    params["layer"] = o.layer.empty() ? target.embeddings.final_layer().name : o.layer;
    params["covariance"] = to_string(mode);
    params["ridge"] = o.ridge;
    return hardness::hardness_class_specific(f, labels, hardness::class_gaussians(f, labels, mode, o.ridge));
  }
  if (o.source_manifest.empty()) throw Error("--hardness-method ca needs --source-manifest");
  Dataset source = load_dataset(o.source_manifest);
  EmbeddingSet src = source.embeddings;
  if (o.source_fraction < 1.0) {
    const auto keep = hardness::subsample_source(need_labels(source), o.source_fraction, o.seed);
    std::vector<Layer> layers;
    for (const auto& l : src.layers) {
      Matrix block(static_cast<Eigen::Index>(keep.size()), l.block.cols());
      for (std::size_t k = 0; k < keep.size(); ++k) block.row(static_cast<Eigen::Index>(k)) = l.block.row(static_cast<Eigen::Index>(keep.indices[k]));
      layers.push_back({l.name, std::move(block)});
    }
    src = make_embedding_set(std::move(layers));
  }
  params["source_fraction"] = o.source_fraction;
  params["source_rows"] = src.n;
  params["seed"] = o.seed;
  return hardness::hardness_class_agnostic(hardness::normalize_per_layer(src),
                                           hardness::normalize_per_layer(target.embeddings), default_thread_count());
}

std::string hardness_sidecar_method(const fs::path& hste) {
  fs::path sidecar = hste;
  sidecar.replace_extension(".json");
  if (!fs::exists(sidecar)) return "manual";
  const Json j = read_json(sidecar);
  const std::string m = j.value("method", std::string("manual"));
  return (m == "ca" || m == "cs") ? m : "manual";
}

hardness::HardnessVector read_hardness(const fs::path& path) {
  const Tensor t = read_tensor(path);
  if (t.shape.size() != 1) throw Error(path.string() + ": hardness tensor must be 1-d");
  const auto method = hardness_sidecar_method(path);
  hardness::HardnessVector h{{t.data.begin(), t.data.end()},
                             method == "ca" ? HardnessMethod::class_agnostic : HardnessMethod::class_specific};
  return h;
}

SubsetIndex hard_subset_with_easy(const Options& o, const hardness::HardnessVector& h) {
  auto s = hardness::select_hard_subset(h, o.fraction);
  if (o.easy_fraction > 0.0) s = hardness::augment_with_easy(s, h, o.easy_fraction, o.seed);
  return s;
}

std::string subset_prefix(const SubsetFile& f) {
  if (f.method == "ca" || f.method == "cs") return "haste-" + f.method + "-";
  if (f.method == "bucket" && f.params.contains("bucket")) return "bucket-" + f.params["bucket"].dump() + "-";
  return "subset-";
}

SubsetChoice choose_subset(const Options& o, const Dataset& target, std::size_t member) {
  SubsetChoice c;
  if (!o.subsets.empty()) {
    const auto& path = o.subsets.size() == 1 ? o.subsets.front() : o.subsets.at(member);
    const auto f = read_subset(path);
    c.subset = f.subset;
    c.prefix = subset_prefix(f);
    c.params = {{"subset_file", path}, {"subset_method", f.method}};
    return c;
  }
  if (!o.hardness_file.empty()) {
    const auto h = read_hardness(o.hardness_file);
    c.subset = hard_subset_with_easy(o, h);
    c.prefix = "haste-" + to_string(h.method) + "-";
    c.params = {{"hardness_file", o.hardness_file}, {"fraction", o.fraction}};
  } else if (!o.hardness_method.empty()) {
    Json hp = Json::object();
    const auto h = compute_hardness(o, target, hp);
    c.subset = hard_subset_with_easy(o, h);
    c.prefix = "haste-" + o.hardness_method + "-";
    c.params = {{"hardness_method", o.hardness_method}, {"fraction", o.fraction}, {"hardness", hp}};
  } else {
    return c;
  }
  if (o.easy_fraction > 0.0) {
    c.params["easy_fraction"] = o.easy_fraction;
    c.params["seed"] = o.seed;
  }
  return c;
}

Json score_json(const metrics::MetricScore& s) {
  return {{"metric", s.metric}, {"value", s.value}, {"subset_size", s.subset_size}, {"total_n", s.total_n}, {"params", s.params}};
}

// Every option of the subcommand with its parsed or default value.
Json resolved_config(const CLI::App& sub) {
  Json opts = Json::object();
  for (const CLI::Option* opt : sub.get_options()) {
    const std::string name = opt->get_single_name();
    if (name == "help" || name.empty()) continue;
    if (opt->count() > 0) {
      const auto res = opt->results();
      opts[name] = opt->get_expected_max() > 1 ? Json(res) : Json(res.back());
    } else if (!opt->get_default_str().empty()) {
      opts[name] = opt->get_default_str();
    } else {
      opts[name] = nullptr;
    }
  }
  return {{"subcommand", sub.get_name()}, {"options", opts}, {"threads", default_thread_count()}};
}

void write_config(const fs::path& dir, const CLI::App& sub) {
  fs::create_directories(dir);
  write_json(dir / "config.json", resolved_config(sub));
}

fs::path output_dir(const Options& o) {
  if (o.out.empty()) throw Error("--out is required");
  fs::create_directories(o.out);
  return o.out;
}

int cmd_hardness(const Options& o, const CLI::App& sub, std::ostream& out) {
  if (o.manifests.size() != 1) throw Error("hardness takes exactly one --manifest");
  const auto target = load_dataset(o.manifests.front(), labels_override(o));
  Options opts = o;
  if (opts.hardness_method.empty()) opts.hardness_method = "cs";
  Json params = Json::object();
  const auto h = compute_hardness(opts, target, params);
  const auto dir = output_dir(o);
  write_tensor(dir / "hardness.hste", to_tensor(h.scores));
  write_json(dir / "hardness.json", {{"method", to_string(h.method)}, {"params", params}});
  write_config(dir, sub);
  out << "wrote " << (dir / "hardness.hste").string() << " (" << h.size() << " samples, method " << to_string(h.method)
      << ")\n";
  return kExitOk;
}

int cmd_subset(const Options& o, const CLI::App& sub, std::ostream& out) {
  if (o.hardness_file.empty()) throw Error("subset needs --hardness");
  if (o.out.empty()) throw Error("--out is required");
  const auto h = read_hardness(o.hardness_file);
  SubsetFile f;
  f.subset = hard_subset_with_easy(o, h);
  f.method = hardness_sidecar_method(o.hardness_file);
  f.params = {{"fraction", o.fraction}, {"hardness_file", o.hardness_file}};
  if (o.easy_fraction > 0.0) {
    f.params["easy_fraction"] = o.easy_fraction;
    f.params["seed"] = o.seed;
  }
  const fs::path path(o.out);
  const fs::path dir = path.has_parent_path() ? path.parent_path() : fs::path(".");
  fs::create_directories(dir);
  write_subset(path, f);
  write_config(dir, sub);
  out << "wrote " << path.string() << " (" << f.subset.size() << " of " << f.subset.source_n << " samples)\n";
  return kExitOk;
}

int cmd_bucket(const Options& o, const CLI::App& sub, std::ostream& out) {
  if (o.hardness_file.empty()) throw Error("bucket needs --hardness");
  const auto h = read_hardness(o.hardness_file);
  const auto buckets = hardness::bucketize(h, o.buckets);
  const auto dir = output_dir(o);
  for (std::size_t b = 0; b < buckets.size(); ++b) {
    SubsetFile f{buckets[b], "bucket",
                 {{"bucket", b + 1}, {"buckets", o.buckets}, {"hardness_file", o.hardness_file},
                  {"hardness_method", hardness_sidecar_method(o.hardness_file)}}};
    write_subset(dir / ("bucket_" + std::to_string(b + 1) + ".json"), f);
  }
  write_config(dir, sub);
  out << "wrote " << buckets.size() << " buckets to " << dir.string() << "\n";
  return kExitOk;
}

void emit_score(const Options& o, const CLI::App& sub, std::ostream& out, const ScoreRow& row, const Json& report) {
  out << format_score_row(row) << "\n";
  if (o.out.empty()) return;
  const auto dir = output_dir(o);
  write_scores(dir / "scores.csv", {row});
  write_json(dir / "report.json", report);
  write_config(dir, sub);
}

int cmd_score(const Options& o, const CLI::App& sub, std::ostream& out) {
  if (o.manifests.size() != 1) throw Error("score takes exactly one --manifest");
  const fs::path manifest = o.manifests.front();
  const auto d = load_dataset(manifest, labels_override(o));
  const auto kind = metrics::parse_metric_kind(o.metric);

  metrics::MetricInputs in;
  in.labels = &need_labels(d);
  if (kind != metrics::MetricKind::gbc) in.predictions = &need_predictions(d);
  if (kind == metrics::MetricKind::gbc) {
    in.features = &feature_block(d, o.layer);
    in.gbc.mode = o.cov.empty() ? CovarianceMode::spherical : parse_covariance_mode(o.cov);
    in.gbc.ridge = o.ridge;
  }
  in.nce_mode = metrics::parse_nce_mode(o.nce_mode);

  const auto choice = choose_subset(o, d, 0);
  auto s = metrics::evaluate_metric(kind, in, choice.subset);
  s.metric = choice.prefix + s.metric;
  for (auto& [k, v] : choice.params.items()) s.params[k] = v;
  if (kind == metrics::MetricKind::gbc) s.params["features"] = o.layer.empty() ? d.embeddings.final_layer().name : o.layer;

  const ScoreRow row{candidate_of(o, manifest), s.metric, s.value, o.accuracy};
  emit_score(o, sub, out, row, score_json(s));
  return kExitOk;
}

int cmd_ensemble(const Options& o, const CLI::App& sub, std::ostream& out) {
  if (o.manifests.empty()) throw Error("ensemble-score needs at least one --manifest");
  if (o.subsets.size() > 1 && o.subsets.size() != o.manifests.size()) {
    throw Error("member alignment mismatch: give one --subset or one per --manifest");
  }
  std::vector<PredictionMatrix> preds;
  std::vector<metrics::Subset> subsets;
  std::optional<LabelVector> labels;
  std::string prefix;
  for (std::size_t m = 0; m < o.manifests.size(); ++m) {
    const auto d = load_dataset(o.manifests[m], labels_override(o));
    const auto& l = need_labels(d);
    if (labels && labels->labels != l.labels) throw Error("member alignment mismatch: labels differ for " + o.manifests[m]);
    if (!labels) labels = l;
    preds.push_back(need_predictions(d));
    auto choice = choose_subset(o, d, m);
    subsets.push_back(choice.subset);
    prefix = choice.prefix;
  }

  metrics::MetricScore s;
  if (o.metric == "ms-leep") {
    s = metrics::ms_leep(preds, *labels, subsets);
  } else if (o.metric == "e-leep") {
    metrics::Subset common;
    if (subsets.front()) {
      std::vector<SubsetIndex> all;
      for (const auto& x : subsets) all.push_back(*x);
      common = metrics::union_subsets(all);
    }
    s = metrics::e_leep(preds, *labels, common);
  } else {
    throw Error("ensemble-score supports --metric ms-leep or e-leep, got '" + o.metric + "'");
  }
  s.metric = prefix + s.metric;
  const std::string candidate = o.candidate.empty() ? "ensemble" : o.candidate;
  emit_score(o, sub, out, ScoreRow{candidate, s.metric, s.value, o.accuracy}, score_json(s));
  return kExitOk;
}

std::string csv_number(const std::optional<double>& v) {
  if (!v) return "";
  if (std::isinf(*v)) return *v < 0 ? "-inf" : "inf";
  return format_double(*v);
}

int cmd_bounds(const Options& o, const CLI::App& sub, std::ostream& out) {
  if (o.manifests.empty()) throw Error("bounds needs at least one --manifest");
  Json all = Json::array();
  std::string table = "candidate,haste_leep,lower_bound,upper_hard,upper_full,violations\n";
  std::size_t violations = 0;
  for (std::size_t m = 0; m < o.manifests.size(); ++m) {
    const auto d = load_dataset(o.manifests[m], labels_override(o));
    const auto& preds = need_predictions(d);
    const auto& labels = need_labels(d);
    const auto choice = choose_subset(o, d, m);
    const SubsetIndex hard = choice.subset.value_or(full_subset(preds.n()));
    const auto r = bounds::bound_report(preds, labels, hard, o.tol, o.max_iter);
    const std::string name = o.manifests.size() == 1 ? candidate_of(o, o.manifests[m]) : candidate_of(Options{}, o.manifests[m]);
    Json j = bounds::to_json(r);
    j["candidate"] = name;
    j["subset_size"] = hard.size();
    all.push_back(j);
    std::string v;
    for (const auto& s : r.violations) v += (v.empty() ? "" : ";") + s;
    table += name + "," + format_double(r.haste_leep) + "," + csv_number(r.lower_bound) + "," +
             csv_number(r.upper_bound_hard) + "," + csv_number(r.upper_bound_full) + "," + v + "\n";
    violations += r.violations.size();
  }
  out << table;
  if (!o.out.empty()) {
    const auto dir = output_dir(o);
    write_json(dir / "bounds.json", all.size() == 1 ? all.front() : all);
    std::ofstream(dir / "bounds.csv", std::ios::binary) << table;
    write_config(dir, sub);
  }
  if (violations) out << "violations: " << violations << "\n";
  return kExitOk;
}

int cmd_eval(const Options& o, const CLI::App& sub, std::ostream& out) {
  if (o.scores.empty()) throw Error("eval needs at least one --scores file");
  const auto coef = eval::parse_coefficient(o.coef);
  std::map<std::string, std::string> explicit_pairs;
  for (const auto& b : o.baselines) {
    const auto eq = b.find('=');
    if (eq == std::string::npos) throw Error("--baseline expects MODIFIED=BASE, got '" + b + "'");
    explicit_pairs[b.substr(0, eq)] = b.substr(eq + 1);
  }
  std::vector<eval::CorrelationReport> reports;
  Json jreports = Json::array();
  std::string text;
  for (const auto& path : o.scores) {
    const auto records = eval::to_records(read_scores(path));
    std::vector<std::string> names;
    for (const auto& r : records) names.push_back(r.metric);
    const auto pairs = explicit_pairs.empty() ? eval::default_baseline_pairs(names) : explicit_pairs;
    reports.push_back(eval::evaluate(records, coef, pairs));
    jreports.push_back({{"scores", path}, {"report", eval::to_json(reports.back())}});
    text += "# scores: " + path + "\n" + eval::to_text(reports.back()) + "\n";
  }
  const auto summary = eval::summarize(reports);
  out << text;
  if (!o.out.empty()) {
    const auto dir = output_dir(o);
    write_json(dir / "report.json", {{"reports", jreports}, {"summary", eval::to_json(summary)}});
    std::ofstream(dir / "report.txt", std::ios::binary) << text;
    write_config(dir, sub);
  }
  return kExitOk;
}

int cmd_synth(const Options& o, const CLI::App& sub, std::ostream& out) {
  synth::SynthConfig cfg;
  if (!o.config.empty()) cfg = synth::synth_config_from_json(read_json(o.config));
  const auto e = synth::synth_experiment(cfg, o.seed);
  const auto dir = output_dir(o);
  synth::write_synth_experiment(dir, e);
  write_config(dir, sub);
  out << "wrote synthetic experiment with " << e.candidates.size() << " candidates to " << dir.string() << "\n";
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"haste: transferability estimation on hard target subsets", "haste"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();
  Options o;

  const CLI::Validator fraction_check(
      [](std::string& v) {
        double f = 0.0;
        if (!CLI::detail::lexical_cast(v, f)) return "value " + v + " is not a number";
        return f > 0.0 && f <= 1.0 ? std::string() : "value " + v + " not in (0, 1]";
      },
      "FLOAT in (0, 1]");
  const auto unit_check = CLI::Range(0.0, 1.0);
  auto add_manifest = [&](CLI::App* s, bool many) {
    auto* opt = s->add_option("--manifest", o.manifests, many ? "Target manifest (repeat per member)" : "Target manifest");
    opt->required();
    if (!many) opt->expected(1);
  };
  auto add_subset_selection = [&](CLI::App* s) {
    s->add_option("--subset", o.subsets, "Subset JSON to evaluate on (repeat per member)");
    s->add_option("--hardness", o.hardness_file, "Hardness tensor to select the hard subset from");
    s->add_option("--hardness-method", o.hardness_method, "Compute hardness in-process")->check(CLI::IsMember({"ca", "cs"}));
    s->add_option("--fraction", o.fraction, "Hard-subset fraction")->check(fraction_check);
    s->add_option("--easy-fraction", o.easy_fraction, "Share of easy samples added stochastically")->check(unit_check);
    s->add_option("--seed", o.seed, "Seed for stochastic steps");
    s->add_option("--source-manifest", o.source_manifest, "Source manifest for class-agnostic hardness");
    s->add_option("--source-fraction", o.source_fraction, "Per-class source subsampling fraction")->check(fraction_check);
    s->add_option("--layer", o.layer, "Feature layer for class-specific hardness / GBC ('predictions' for softmax)");
    s->add_option("--ridge", o.ridge, "Covariance ridge (relative to mean eigenvalue)");
    s->add_option("--labels", o.labels, "Labels CSV overriding the manifest");
  };

  auto* hard = app.add_subcommand("hardness", "Per-sample hardness scores");
  add_manifest(hard, false);
  hard->add_option("--hardness-method", o.hardness_method, "ca | cs")->check(CLI::IsMember({"ca", "cs"}))->default_str("cs");
  hard->add_option("--source-manifest", o.source_manifest, "Source manifest for class-agnostic hardness");
  hard->add_option("--source-fraction", o.source_fraction, "Per-class source subsampling fraction")->check(fraction_check);
  hard->add_option("--seed", o.seed, "Seed for source subsampling");
  hard->add_option("--layer", o.layer, "Feature layer for class-specific hardness");
  hard->add_option("--cov", o.cov, "Covariance for class-specific hardness")->check(CLI::IsMember({"full", "spherical"}))->default_str("full");
  hard->add_option("--ridge", o.ridge, "Covariance ridge");
  hard->add_option("--labels", o.labels, "Labels CSV overriding the manifest");
  hard->add_option("--out", o.out, "Output directory")->required();

  auto* subset = app.add_subcommand("subset", "Select the hard subset from a hardness tensor");
  subset->add_option("--hardness", o.hardness_file, "Hardness tensor")->required();
  subset->add_option("--fraction", o.fraction, "Hard-subset fraction")->check(fraction_check);
  subset->add_option("--easy-fraction", o.easy_fraction, "Share of easy samples added stochastically")->check(unit_check);
  subset->add_option("--seed", o.seed, "Seed for easy-sample augmentation");
  subset->add_option("--out", o.out, "Output subset JSON")->required();

  auto* bucket = app.add_subcommand("bucket", "Split samples into hardness buckets");
  bucket->add_option("--hardness", o.hardness_file, "Hardness tensor")->required();
  bucket->add_option("--buckets", o.buckets, "Number of buckets")->check(CLI::PositiveNumber);
  bucket->add_option("--out", o.out, "Output directory")->required();

  auto* score = app.add_subcommand("score", "Score one candidate with a transferability metric");
  add_manifest(score, false);
  score->add_option("--metric", o.metric, "Metric")->check(CLI::IsMember({"leep", "nce", "gbc"}));
  add_subset_selection(score);
  score->add_option("--cov", o.cov, "GBC covariance")->check(CLI::IsMember({"full", "spherical"}))->default_str("spherical");
  score->add_option("--nce-mode", o.nce_mode, "NCE conditional")->check(CLI::IsMember({"hard", "soft"}));
  score->add_option("--candidate", o.candidate, "Candidate name in the scores row");
  score->add_option("--accuracy", o.accuracy, "Known transfer accuracy for the scores row");
  score->add_option("--out", o.out, "Output directory");

  auto* ens = app.add_subcommand("ensemble-score", "Score an ensemble of candidates");
  add_manifest(ens, true);
  ens->add_option("--metric", o.metric, "Ensemble metric")->check(CLI::IsMember({"ms-leep", "e-leep"}))->default_str("ms-leep");
  add_subset_selection(ens);
  ens->add_option("--candidate", o.candidate, "Ensemble name in the scores row");
  ens->add_option("--accuracy", o.accuracy, "Known transfer accuracy for the scores row");
  ens->add_option("--out", o.out, "Output directory");

  auto* bnd = app.add_subcommand("bounds", "Check the HASTE-LEEP bounds per candidate");
  add_manifest(bnd, true);
  add_subset_selection(bnd);
  bnd->add_option("--tol", o.tol, "EM gain tolerance")->check(CLI::PositiveNumber);
  bnd->add_option("--max-iter", o.max_iter, "EM iteration cap")->check(CLI::NonNegativeNumber);
  bnd->add_option("--candidate", o.candidate, "Name for a single-manifest run");
  bnd->add_option("--out", o.out, "Output directory");

  auto* ev = app.add_subcommand("eval", "Correlate scores with transfer accuracies");
  ev->add_option("--scores", o.scores, "Scores CSV (repeat per dataset)")->required();
  ev->add_option("--coef", o.coef, "Correlation coefficient")->check(CLI::IsMember({"pearson", "kendall", "wkendall"}));
  ev->add_option("--baseline", o.baselines, "MODIFIED=BASE pairing (default: by metric name)");
  ev->add_option("--out", o.out, "Output directory");

  auto* syn = app.add_subcommand("synth", "Generate a synthetic model-selection experiment");
  syn->add_option("--config", o.config, "Generator config JSON");
  syn->add_option("--seed", o.seed, "Generator seed");
  syn->add_option("--out", o.out, "Output directory")->required();

  std::vector<std::string> args(argv.begin() + (argv.empty() ? 0 : 1), argv.end());
  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    const CLI::App* sub = app.get_subcommands().front();
    const std::string name = sub->get_name();
    if (name == "hardness") return cmd_hardness(o, *sub, out);
    if (name == "subset") return cmd_subset(o, *sub, out);
    if (name == "bucket") return cmd_bucket(o, *sub, out);
    if (name == "score") return cmd_score(o, *sub, out);
    if (name == "ensemble-score") return cmd_ensemble(o, *sub, out);
    if (name == "bounds") return cmd_bounds(o, *sub, out);
    if (name == "eval") return cmd_eval(o, *sub, out);
    if (name == "synth") return cmd_synth(o, *sub, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace haste::cli

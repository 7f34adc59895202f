#pragma once

// Seeded stand-in for a model-selection experiment: a Gaussian-mixture target
// set with a contaminated "hard" subpopulation, a pool of candidate source
// models whose softmax outputs differ in quality, and a ground-truth transfer
// accuracy per candidate from a re-fitted head on a held-out split.
//
// Candidates differ in two independent ways: their error rate on the hard
// subpopulation (which drives accuracy) and their confidence on easy samples
// (which moves likelihood-based scores without changing accuracy).

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "haste/eval.hpp"
#include "haste/hardness.hpp"
#include "haste/tensor_store.hpp"

namespace haste::synth {

struct SynthConfig {
  int num_classes = 5;
  int source_classes = 8;
  int feature_dim = 8;
  int num_layers = 2;
  std::size_t n_train = 500;
  std::size_t n_test = 500;
  std::size_t n_source = 200;
  double contamination = 0.3;   // share of samples drawn from the hard subpopulation
  double separation = 4.0;      // scale of the class means
  double hard_spread = 3.0;     // std-dev multiplier for hard samples
  std::vector<double> noise_levels = {0.0, 0.09, 0.18, 0.27, 0.36, 0.45, 0.54, 0.63, 0.72, 0.8};
  double easy_confidence_min = 1.0;
  double easy_confidence_max = 5.0;
  double hard_confidence = 2.0;
  double logit_jitter = 0.5;
  double fraction = hardness::kDefaultFraction;
  int buckets = 5;
};

Json to_json(const SynthConfig& c);
/// Missing keys keep their defaults.
SynthConfig synth_config_from_json(const Json& j);

/// Throws haste::Error on an infeasible configuration.
void validate(const SynthConfig& c);

struct SynthCandidate {
  std::string name;
  double noise = 0.0;
  double easy_confidence = 0.0;
  PredictionMatrix train;
  PredictionMatrix test;
  double accuracy = 0.0;
};

struct SynthExperiment {
  SynthConfig config;
  std::uint64_t seed = 0;
  EmbeddingSet target;          // train split
  LabelVector train_labels;
  LabelVector test_labels;
  std::vector<bool> train_hard;  // ground-truth hard membership
  std::vector<bool> test_hard;
  EmbeddingSet source;
  LabelVector source_labels;
  std::vector<SynthCandidate> candidates;
  hardness::HardnessVector cs_hardness;
  hardness::HardnessVector ca_hardness;
  std::vector<eval::ExperimentRecord> records;
};

/// Metrics recorded per candidate: baseline leep/nce/gbc, their HASTE variants
/// for both hardness methods, and bucket-<k>-leep for every bucket. GBC is
/// computed on the candidate's softmax outputs.
SynthExperiment synth_experiment(const SynthConfig& config, std::uint64_t seed);

/// Lays the experiment out as manifests, tensors, labels and score tables.
void write_synth_experiment(const std::filesystem::path& dir, const SynthExperiment& e);

}  // namespace haste::synth

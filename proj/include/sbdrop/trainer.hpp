#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sbdrop/data.hpp"
#include "sbdrop/dropout.hpp"
#include "sbdrop/models.hpp"
#include "sbdrop/optim.hpp"

namespace sbdrop::train {

// One row of per-epoch telemetry. norm_w and norm_x refer to the layer fed
// by the instrumented dropout site: the weight vector and data matrix for
// the linear model, the classifier weights and pooled feature batches for
// the text CNN. norm_x_mask is 0 for the standard variant.
struct MetricsRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double test_loss = 0.0;
  std::optional<double> test_accuracy;  // classification only
  double norm_w = 0.0;
  double norm_x_batch_mean = 0.0;
  double ratio_w_over_x = 0.0;
  double norm_x_mask = 0.0;
};

enum class OptimizerKind { sgd, adam };

struct TrainSettings {
  dropout::DropoutSpec spec;      // variant, keep_prob (linear), granularity, inference
  double keep_prob_input = 1.0;   // text cnn input site (p1)
  double keep_prob_hidden = 0.5;  // text cnn hidden site (p2)
  OptimizerKind optimizer = OptimizerKind::sgd;
  double learning_rate = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  double init_scale = 1.0;
  bool with_bias = false;
  TextCnnConfig cnn;  // vocab/classes filled from the dataset by the trainer
};

struct TrainingDivergence : std::runtime_error {
  TrainingDivergence(std::string run, std::size_t epoch, double loss);
  std::string run_label;
  std::size_t epoch;
  double loss;
};

// Sampled-dropout training loops: fresh masks on every training forward,
// minibatches visited in a fixed order, everything reproducible from
// (dataset, settings.seed). learning_rate == 0 runs with updates skipped.
// Throws TrainingDivergence when a loss turns non-finite.
std::vector<MetricsRecord> train_linear(const data::RegressionData& ds,
                                        const TrainSettings& settings);
std::vector<MetricsRecord> train_text_cnn(const data::TextData& ds,
                                          const TrainSettings& settings);

struct CompareSettings {
  TrainSettings train;  // variant is overridden per arm
  std::uint64_t data_seed = 0;
  std::size_t n_per_split = 200;
  std::size_t dim = 8;
  double rho = 0.95;
  double noise_sigma = 0.1;
  bool decorrelate_test = true;
  // How the self-balanced arm evaluates on the test split.
  dropout::Inference sb_inference = dropout::Inference::expectation;
};

struct ComparePair {
  std::uint64_t seed = 0;
  double standard_loss = 0.0;
  double self_balanced_loss = 0.0;
};

struct CompareResult {
  double mean_standard = 0.0;
  double mean_self_balanced = 0.0;
  double mean_paired_diff = 0.0;  // self_balanced - standard
  double win_rate = 0.0;          // fraction of seeds where sb < standard, ties 0.5
  std::vector<ComparePair> pairs;
};

// Matched runs of both variants on correlated-train / decorrelated-test
// regression across n_seeds paired seeds. Requires n_seeds >= 2.
CompareResult compare_generalization(const CompareSettings& settings,
                                     std::size_t n_seeds);

}  // namespace sbdrop::train

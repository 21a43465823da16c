#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sbdrop/dropout.hpp"
#include "sbdrop/trainer.hpp"

namespace sbdrop::cli {

enum class Task { verify, train, sweep, mc_check, compare };

enum class ModelKind { linear, text_cnn };

enum class DatasetKind { correlated_regression, synthetic_text, tsv_file };

struct DatasetConfig {
  DatasetKind kind = DatasetKind::correlated_regression;
  std::uint64_t seed = 1;
  std::size_t n_per_split = 200;
  std::size_t dim = 8;             // regression
  std::size_t vocab_size = 60;     // synthetic text
  std::size_t seq_len = 8;         // synthetic text
  double rho = 0.95;
  double noise_sigma = 0.1;
  bool decorrelate_test = true;
  std::string train_path;  // tsv_file
  std::string test_path;   // tsv_file
};

struct OptimizerConfig {
  train::OptimizerKind kind = train::OptimizerKind::sgd;
  double learning_rate = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct SweepConfig {
  std::vector<double> keep_prob;         // linear sweeps
  std::vector<double> keep_prob_input;   // text_cnn p1 grid
  std::vector<double> keep_prob_hidden;  // text_cnn p2 grid
};

struct McConfig {
  std::size_t samples = 100000;
  std::size_t instance_rows = 4;  // N of the sampled instance
};

struct CompareConfig {
  std::size_t n_seeds = 20;
};

// Fully validated experiment description. Construction is only possible
// through parse_config / defaults, which reject unknown keys and enforce
// every range constraint before any computation runs.
struct ExperimentConfig {
  Task task = Task::train;
  ModelKind model = ModelKind::linear;
  dropout::DropoutSpec dropout;          // keep_prob doubles as p for linear
  double keep_prob_input = 1.0;          // text_cnn p1
  double keep_prob_hidden = 0.5;         // text_cnn p2
  DatasetConfig dataset;
  OptimizerConfig optimizer;
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  std::uint64_t train_seed = 7;
  double init_scale = 1.0;
  bool with_bias = false;
  std::string out_dir = "out";
  SweepConfig sweep;
  McConfig mc;
  CompareConfig compare;
};

// Thrown for syntax errors, constraint violations and unknown keys; the
// message names the offending key and constraint.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Parses and validates a UTF-8 JSON document. Missing fields take the
// documented defaults; unknown keys are rejected. default_task applies when
// the document has no "task" entry.
ExperimentConfig parse_config(const std::string& json_text, Task default_task);

// Serializes with every default filled in; parse_config(to_json_text(c))
// reproduces c exactly.
std::string to_json_text(const ExperimentConfig& config);

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b);

std::string task_name(Task t);

// Settings the trainer consumes, assembled from a validated config.
train::TrainSettings to_train_settings(const ExperimentConfig& config);

}  // namespace sbdrop::cli

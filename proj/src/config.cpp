#include "sbdrop/config.hpp"

#include <json.hpp>

#include <set>
#include <sstream>

namespace sbdrop::cli {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& message) { throw ConfigError(message); }

void reject_unknown_keys(const json& obj, const std::string& path,
                         const std::set<std::string>& allowed) {
  for (const auto& [key, _] : obj.items()) {
    if (!allowed.contains(key)) {
      fail(path.empty() ? key + ": unknown key" : path + "." + key + ": unknown key");
    }
  }
}

std::string joined(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

double get_double(const json& obj, const std::string& path,
                  const std::string& key, double fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number()) fail(joined(path, key) + ": must be a number");
  return obj[key].get<double>();
}

std::uint64_t get_u64(const json& obj, const std::string& path,
                      const std::string& key, std::uint64_t fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number_unsigned()) {
    fail(joined(path, key) + ": must be a nonnegative integer");
  }
  return obj[key].get<std::uint64_t>();
}

std::size_t get_size(const json& obj, const std::string& path,
                     const std::string& key, std::size_t fallback) {
  return static_cast<std::size_t>(get_u64(obj, path, key, fallback));
}

bool get_bool(const json& obj, const std::string& path, const std::string& key,
              bool fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_boolean()) fail(joined(path, key) + ": must be a boolean");
  return obj[key].get<bool>();
}

std::string get_string(const json& obj, const std::string& path,
                       const std::string& key, const std::string& fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_string()) fail(joined(path, key) + ": must be a string");
  return obj[key].get<std::string>();
}

double keep_prob_field(const json& obj, const std::string& path,
                       const std::string& key, double fallback) {
  const double p = get_double(obj, path, key, fallback);
  if (!(p > 0.0 && p <= 1.0)) {
    fail(joined(path, key) + ": must be in (0, 1], got " + std::to_string(p));
  }
  return p;
}

Task parse_task(const std::string& s) {
  if (s == "verify") return Task::verify;
  if (s == "train") return Task::train;
  if (s == "sweep") return Task::sweep;
  if (s == "mc_check") return Task::mc_check;
  if (s == "compare") return Task::compare;
  fail("task: must be one of verify|train|sweep|mc_check|compare, got '" + s + "'");
}

ModelKind parse_model(const std::string& s) {
  if (s == "linear") return ModelKind::linear;
  if (s == "text_cnn") return ModelKind::text_cnn;
  fail("model: must be linear|text_cnn, got '" + s + "'");
}

DatasetKind parse_dataset_kind(const std::string& s) {
  if (s == "correlated_regression") return DatasetKind::correlated_regression;
  if (s == "synthetic_text") return DatasetKind::synthetic_text;
  if (s == "tsv_file") return DatasetKind::tsv_file;
  fail("dataset.kind: must be correlated_regression|synthetic_text|tsv_file, got '" +
       s + "'");
}

dropout::Variant parse_variant(const std::string& s) {
  if (s == "standard") return dropout::Variant::standard;
  if (s == "self_balanced") return dropout::Variant::self_balanced;
  fail("dropout.variant: must be standard|self_balanced, got '" + s + "'");
}

dropout::Granularity parse_granularity(const std::string& s) {
  if (s == "shared_scalar") return dropout::Granularity::shared_scalar;
  if (s == "per_feature") return dropout::Granularity::per_feature;
  if (s == "token_vector") return dropout::Granularity::token_vector;
  fail("dropout.granularity: must be shared_scalar|per_feature|token_vector, got '" +
       s + "'");
}

dropout::Inference parse_inference(const std::string& s) {
  if (s == "passthrough") return dropout::Inference::passthrough;
  if (s == "expectation") return dropout::Inference::expectation;
  fail("dropout.inference_mode: must be passthrough|expectation, got '" + s + "'");
}

train::OptimizerKind parse_optimizer(const std::string& s) {
  if (s == "sgd") return train::OptimizerKind::sgd;
  if (s == "adam") return train::OptimizerKind::adam;
  fail("optimizer.name: must be sgd|adam, got '" + s + "'");
}

std::vector<double> get_prob_grid(const json& obj, const std::string& path,
                                  const std::string& key) {
  if (!obj.contains(key)) return {};
  if (!obj[key].is_array()) fail(joined(path, key) + ": must be an array");
  std::vector<double> grid;
  for (const auto& v : obj[key]) {
    if (!v.is_number()) fail(joined(path, key) + ": entries must be numbers");
    const double p = v.get<double>();
    if (!(p > 0.0 && p <= 1.0)) {
      fail(joined(path, key) + ": entries must be in (0, 1], got " +
           std::to_string(p));
    }
    grid.push_back(p);
  }
  return grid;
}

const char* variant_name(dropout::Variant v) {
  return v == dropout::Variant::standard ? "standard" : "self_balanced";
}

const char* granularity_name(dropout::Granularity g) {
  switch (g) {
    case dropout::Granularity::shared_scalar: return "shared_scalar";
    case dropout::Granularity::per_feature: return "per_feature";
    default: return "token_vector";
  }
}

const char* inference_name(dropout::Inference i) {
  return i == dropout::Inference::passthrough ? "passthrough" : "expectation";
}

const char* model_name(ModelKind m) {
  return m == ModelKind::linear ? "linear" : "text_cnn";
}

const char* dataset_kind_name(DatasetKind k) {
  switch (k) {
    case DatasetKind::correlated_regression: return "correlated_regression";
    case DatasetKind::synthetic_text: return "synthetic_text";
    default: return "tsv_file";
  }
}

const char* optimizer_name(train::OptimizerKind k) {
  return k == train::OptimizerKind::sgd ? "sgd" : "adam";
}

}  // namespace

std::string task_name(Task t) {
  switch (t) {
    case Task::verify: return "verify";
    case Task::train: return "train";
    case Task::sweep: return "sweep";
    case Task::mc_check: return "mc_check";
    default: return "compare";
  }
}

ExperimentConfig parse_config(const std::string& json_text, Task default_task) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    fail(std::string("JSON syntax error: ") + e.what());
  }
  if (!doc.is_object()) fail("config: top level must be a JSON object");

  reject_unknown_keys(doc, "",
                      {"task", "model", "dropout", "dataset", "optimizer",
                       "epochs", "batch_size", "seed", "init_scale",
                       "with_bias", "out_dir", "sweep", "mc", "compare"});

  ExperimentConfig cfg;
  cfg.task = doc.contains("task")
                 ? parse_task(get_string(doc, "", "task", ""))
                 : default_task;
  cfg.model = parse_model(get_string(doc, "", "model", "linear"));

  if (doc.contains("dropout")) {
    const json& d = doc["dropout"];
    if (!d.is_object()) fail("dropout: must be an object");
    reject_unknown_keys(d, "dropout",
                        {"variant", "keep_prob", "keep_prob_input",
                         "keep_prob_hidden", "granularity", "inference_mode"});
    cfg.dropout.variant =
        parse_variant(get_string(d, "dropout", "variant", "standard"));
    cfg.dropout.keep_prob = keep_prob_field(d, "dropout", "keep_prob", 0.5);
    cfg.keep_prob_input = keep_prob_field(d, "dropout", "keep_prob_input", 1.0);
    cfg.keep_prob_hidden =
        keep_prob_field(d, "dropout", "keep_prob_hidden", 0.5);
    cfg.dropout.granularity = parse_granularity(
        get_string(d, "dropout", "granularity", "per_feature"));
    cfg.dropout.inference = parse_inference(
        get_string(d, "dropout", "inference_mode", "passthrough"));
  }

  if (doc.contains("dataset")) {
    const json& d = doc["dataset"];
    if (!d.is_object()) fail("dataset: must be an object");
    reject_unknown_keys(d, "dataset",
                        {"kind", "seed", "n_per_split", "dim", "vocab_size",
                         "seq_len", "rho", "noise_sigma", "decorrelate_test",
                         "train_path", "test_path"});
    cfg.dataset.kind =
        parse_dataset_kind(get_string(d, "dataset", "kind",
                                      "correlated_regression"));
    cfg.dataset.seed = get_u64(d, "dataset", "seed", 1);
    cfg.dataset.n_per_split = get_size(d, "dataset", "n_per_split", 200);
    cfg.dataset.dim = get_size(d, "dataset", "dim", 8);
    cfg.dataset.vocab_size = get_size(d, "dataset", "vocab_size", 60);
    cfg.dataset.seq_len = get_size(d, "dataset", "seq_len", 8);
    cfg.dataset.rho = get_double(d, "dataset", "rho", 0.95);
    cfg.dataset.noise_sigma = get_double(d, "dataset", "noise_sigma", 0.1);
    cfg.dataset.decorrelate_test =
        get_bool(d, "dataset", "decorrelate_test", true);
    cfg.dataset.train_path = get_string(d, "dataset", "train_path", "");
    cfg.dataset.test_path = get_string(d, "dataset", "test_path", "");

    if (!(cfg.dataset.rho >= 0.0 && cfg.dataset.rho <= 1.0)) {
      fail("dataset.rho: must be in [0, 1], got " +
           std::to_string(cfg.dataset.rho));
    }
    if (cfg.dataset.noise_sigma < 0.0) {
      fail("dataset.noise_sigma: must be nonnegative, got " +
           std::to_string(cfg.dataset.noise_sigma));
    }
    if (cfg.dataset.n_per_split == 0) fail("dataset.n_per_split: must be >= 1");
    if (cfg.dataset.kind == DatasetKind::correlated_regression &&
        (cfg.dataset.dim == 0 || cfg.dataset.dim % 2 != 0)) {
      fail("dataset.dim: must be even and positive, got " +
           std::to_string(cfg.dataset.dim));
    }
    if (cfg.dataset.kind == DatasetKind::synthetic_text) {
      if (cfg.dataset.vocab_size < 8) {
        fail("dataset.vocab_size: must be >= 8, got " +
             std::to_string(cfg.dataset.vocab_size));
      }
      if (cfg.dataset.seq_len < 3) {
        fail("dataset.seq_len: must be >= 3, got " +
             std::to_string(cfg.dataset.seq_len));
      }
    }
    if (cfg.dataset.kind == DatasetKind::tsv_file &&
        cfg.dataset.train_path.empty()) {
      fail("dataset.train_path: required for kind tsv_file");
    }
  }

  if (doc.contains("optimizer")) {
    const json& o = doc["optimizer"];
    if (!o.is_object()) fail("optimizer: must be an object");
    reject_unknown_keys(o, "optimizer",
                        {"name", "learning_rate", "beta1", "beta2", "eps"});
    cfg.optimizer.kind =
        parse_optimizer(get_string(o, "optimizer", "name", "sgd"));
    cfg.optimizer.learning_rate =
        get_double(o, "optimizer", "learning_rate", 0.05);
    cfg.optimizer.beta1 = get_double(o, "optimizer", "beta1", 0.9);
    cfg.optimizer.beta2 = get_double(o, "optimizer", "beta2", 0.999);
    cfg.optimizer.eps = get_double(o, "optimizer", "eps", 1e-8);
    if (cfg.optimizer.learning_rate < 0.0) {
      fail("optimizer.learning_rate: must be nonnegative, got " +
           std::to_string(cfg.optimizer.learning_rate));
    }
    if (!(cfg.optimizer.beta1 >= 0.0 && cfg.optimizer.beta1 < 1.0) ||
        !(cfg.optimizer.beta2 >= 0.0 && cfg.optimizer.beta2 < 1.0)) {
      fail("optimizer.beta1/beta2: must be in [0, 1)");
    }
    if (!(cfg.optimizer.eps > 0.0)) fail("optimizer.eps: must be positive");
  }

  cfg.epochs = get_size(doc, "", "epochs", 30);
  if (cfg.epochs < 1) fail("epochs: must be >= 1");
  cfg.batch_size = get_size(doc, "", "batch_size", 32);
  if (cfg.batch_size < 1) fail("batch_size: must be >= 1");
  cfg.train_seed = get_u64(doc, "", "seed", 7);
  cfg.init_scale = get_double(doc, "", "init_scale", 1.0);
  if (!(cfg.init_scale >= 0.0)) fail("init_scale: must be nonnegative");
  cfg.with_bias = get_bool(doc, "", "with_bias", false);
  cfg.out_dir = get_string(doc, "", "out_dir", "out");

  if (doc.contains("sweep")) {
    const json& s = doc["sweep"];
    if (!s.is_object()) fail("sweep: must be an object");
    reject_unknown_keys(s, "sweep",
                        {"keep_prob", "keep_prob_input", "keep_prob_hidden"});
    cfg.sweep.keep_prob = get_prob_grid(s, "sweep", "keep_prob");
    cfg.sweep.keep_prob_input = get_prob_grid(s, "sweep", "keep_prob_input");
    cfg.sweep.keep_prob_hidden = get_prob_grid(s, "sweep", "keep_prob_hidden");
  }

  if (doc.contains("mc")) {
    const json& m = doc["mc"];
    if (!m.is_object()) fail("mc: must be an object");
    reject_unknown_keys(m, "mc", {"samples", "instance_rows"});
    cfg.mc.samples = get_size(m, "mc", "samples", 100000);
    if (cfg.mc.samples < 1000) fail("mc.samples: must be >= 1000");
    cfg.mc.instance_rows = get_size(m, "mc", "instance_rows", 4);
    if (cfg.mc.instance_rows < 1) fail("mc.instance_rows: must be >= 1");
  }

  if (doc.contains("compare")) {
    const json& c = doc["compare"];
    if (!c.is_object()) fail("compare: must be an object");
    reject_unknown_keys(c, "compare", {"n_seeds"});
    cfg.compare.n_seeds = get_size(c, "compare", "n_seeds", 20);
    if (cfg.compare.n_seeds < 2) fail("compare.n_seeds: must be >= 2");
  }

  if (cfg.task == Task::sweep) {
    const bool has_linear_grid = !cfg.sweep.keep_prob.empty();
    const bool has_cnn_grid = !cfg.sweep.keep_prob_input.empty() &&
                              !cfg.sweep.keep_prob_hidden.empty();
    if (cfg.model == ModelKind::linear && !has_linear_grid) {
      fail("sweep.keep_prob: a nonempty grid is required for linear sweeps");
    }
    if (cfg.model == ModelKind::text_cnn && !has_cnn_grid) {
      fail("sweep.keep_prob_input/keep_prob_hidden: nonempty grids are "
           "required for text_cnn sweeps");
    }
  }
  if (cfg.model == ModelKind::text_cnn &&
      cfg.dataset.kind == DatasetKind::correlated_regression) {
    fail("dataset.kind: text_cnn needs synthetic_text or tsv_file data");
  }
  if (cfg.model == ModelKind::linear &&
      cfg.dataset.kind != DatasetKind::correlated_regression) {
    fail("dataset.kind: linear model needs correlated_regression data");
  }
  return cfg;
}

std::string to_json_text(const ExperimentConfig& c) {
  json doc;
  doc["task"] = task_name(c.task);
  doc["model"] = model_name(c.model);
  doc["dropout"] = {
      {"variant", variant_name(c.dropout.variant)},
      {"keep_prob", c.dropout.keep_prob},
      {"keep_prob_input", c.keep_prob_input},
      {"keep_prob_hidden", c.keep_prob_hidden},
      {"granularity", granularity_name(c.dropout.granularity)},
      {"inference_mode", inference_name(c.dropout.inference)},
  };
  doc["dataset"] = {
      {"kind", dataset_kind_name(c.dataset.kind)},
      {"seed", c.dataset.seed},
      {"n_per_split", c.dataset.n_per_split},
      {"dim", c.dataset.dim},
      {"vocab_size", c.dataset.vocab_size},
      {"seq_len", c.dataset.seq_len},
      {"rho", c.dataset.rho},
      {"noise_sigma", c.dataset.noise_sigma},
      {"decorrelate_test", c.dataset.decorrelate_test},
      {"train_path", c.dataset.train_path},
      {"test_path", c.dataset.test_path},
  };
  doc["optimizer"] = {
      {"name", optimizer_name(c.optimizer.kind)},
      {"learning_rate", c.optimizer.learning_rate},
      {"beta1", c.optimizer.beta1},
      {"beta2", c.optimizer.beta2},
      {"eps", c.optimizer.eps},
  };
  doc["epochs"] = c.epochs;
  doc["batch_size"] = c.batch_size;
  doc["seed"] = c.train_seed;
  doc["init_scale"] = c.init_scale;
  doc["with_bias"] = c.with_bias;
  doc["out_dir"] = c.out_dir;
  doc["sweep"] = {
      {"keep_prob", c.sweep.keep_prob},
      {"keep_prob_input", c.sweep.keep_prob_input},
      {"keep_prob_hidden", c.sweep.keep_prob_hidden},
  };
  doc["mc"] = {{"samples", c.mc.samples}, {"instance_rows", c.mc.instance_rows}};
  doc["compare"] = {{"n_seeds", c.compare.n_seeds}};
  return doc.dump(2) + "\n";
}

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
  return to_json_text(a) == to_json_text(b);
}

train::TrainSettings to_train_settings(const ExperimentConfig& c) {
  train::TrainSettings s;
  s.spec = c.dropout;
  s.keep_prob_input = c.keep_prob_input;
  s.keep_prob_hidden = c.keep_prob_hidden;
  s.optimizer = c.optimizer.kind;
  s.learning_rate = c.optimizer.learning_rate;
  s.beta1 = c.optimizer.beta1;
  s.beta2 = c.optimizer.beta2;
  s.adam_eps = c.optimizer.eps;
  s.epochs = c.epochs;
  s.batch_size = c.batch_size;
  s.seed = c.train_seed;
  s.init_scale = c.init_scale;
  s.with_bias = c.with_bias;
  return s;
}

}  // namespace sbdrop::cli

#include "sbdrop/trainer.hpp"

#include <cmath>
#include <stdexcept>

namespace sbdrop::train {

namespace {

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end) {
  const std::size_t d = x.dim(1);
  Tensor out = Tensor::zeros({end - begin, d});
  for (std::size_t i = begin; i < end; ++i) {
    for (std::size_t j = 0; j < d; ++j) out.at(i - begin, j) = x.at(i, j);
  }
  return out;
}

Tensor slice_vec(const Tensor& y, std::size_t begin, std::size_t end) {
  Tensor out = Tensor::zeros({end - begin});
  for (std::size_t i = begin; i < end; ++i) out[i - begin] = y[i];
  return out;
}

void check_finite_or_throw(const char* run, std::size_t epoch, double loss) {
  if (!std::isfinite(loss)) throw TrainingDivergence(run, epoch, loss);
}

class Stepper {
 public:
  Stepper(const TrainSettings& s, std::span<const ag::NodePtr> params)
      : settings_(s) {
    if (settings_.optimizer == OptimizerKind::adam) {
      adam_ = AdamState::init(params);
    }
  }

  void step(std::span<const ag::NodePtr> params) {
    if (settings_.learning_rate == 0.0) return;  // frozen run
    if (settings_.optimizer == OptimizerKind::adam) {
      AdamConfig cfg;
      cfg.learning_rate = settings_.learning_rate;
      cfg.beta1 = settings_.beta1;
      cfg.beta2 = settings_.beta2;
      cfg.eps = settings_.adam_eps;
      adam_step(adam_, params, cfg);
    } else {
      sgd_step(params, settings_.learning_rate);
    }
  }

 private:
  const TrainSettings& settings_;
  AdamState adam_;
};

void zero_params(std::span<const ag::NodePtr> params) {
  for (const auto& p : params) ag::zero_grad(p);
}

}  // namespace

TrainingDivergence::TrainingDivergence(std::string run, std::size_t epoch_,
                                       double loss_)
    : std::runtime_error("training diverged in " + run + " at epoch " +
                         std::to_string(epoch_) + " (loss=" +
                         std::to_string(loss_) + ")"),
      run_label(std::move(run)), epoch(epoch_), loss(loss_) {}

std::vector<MetricsRecord> train_linear(const data::RegressionData& ds,
                                        const TrainSettings& settings) {
  if (settings.epochs < 1) {
    throw std::invalid_argument("epochs must be >= 1");
  }
  settings.spec.validate();
  const std::size_t n = ds.x_train.dim(0);
  const std::size_t dim = ds.x_train.dim(1);
  const std::size_t batch = std::min(std::max<std::size_t>(settings.batch_size, 1), n);
  const bool sb = settings.spec.variant == dropout::Variant::self_balanced;

  Rng root(settings.seed);
  Rng init_rng = root.split();
  Rng train_rng = root.split();

  LinearModel model =
      LinearModel::init(dim, init_rng, settings.init_scale, settings.with_bias);
  dropout::MaskParam mask =
      dropout::MaskParam::make(settings.spec.granularity, dim);

  std::vector<ag::NodePtr> params = model.params();
  if (sb) params.push_back(mask.values);
  Stepper stepper(settings, params);

  auto apply_dropout = [&](const ag::NodePtr& x, bool training) {
    if (sb) {
      return dropout::self_balanced_forward(x, mask, settings.spec.keep_prob,
                                            train_rng, training, settings.spec);
    }
    return dropout::standard_dropout_forward(x, settings.spec.keep_prob,
                                             train_rng, training);
  };

  const ag::NodePtr x_test = ag::constant(ds.x_test);
  const ag::NodePtr y_test = ag::constant(ds.y_test);

  std::vector<MetricsRecord> records;
  for (std::size_t epoch = 1; epoch <= settings.epochs; ++epoch) {
    double train_loss = 0.0;
    double norm_x_acc = 0.0;
    std::size_t n_batches = 0;
    for (std::size_t begin = 0; begin < n; begin += batch) {
      const std::size_t end = std::min(begin + batch, n);
      Tensor xb = slice_rows(ds.x_train, begin, end);
      norm_x_acc += frobenius_norm(xb);
      ++n_batches;

      ag::NodePtr x_node = ag::constant(std::move(xb));
      ag::NodePtr dropped = apply_dropout(x_node, /*training=*/true);
      ag::NodePtr pred = model.predict(dropped);
      ag::NodePtr loss =
          ag::mse(pred, ag::constant(slice_vec(ds.y_train, begin, end)));
      ag::backward(loss);
      stepper.step(params);
      zero_params(params);
      train_loss += loss->value[0] * static_cast<double>(end - begin) /
                    static_cast<double>(n);
    }

    ag::NodePtr test_pred = model.predict(apply_dropout(x_test, false));
    const double test_loss = ag::mse(test_pred, y_test)->value[0];

    MetricsRecord rec;
    rec.epoch = epoch;
    rec.train_loss = train_loss;
    rec.test_loss = test_loss;
    rec.norm_w = model.weight_norm();
    rec.norm_x_batch_mean = norm_x_acc / static_cast<double>(n_batches);
    rec.ratio_w_over_x = rec.norm_w / rec.norm_x_batch_mean;
    rec.norm_x_mask = sb ? mask.norm() : 0.0;
    records.push_back(rec);

    check_finite_or_throw("linear", epoch, train_loss);
    check_finite_or_throw("linear", epoch, test_loss);
  }
  return records;
}

std::vector<MetricsRecord> train_text_cnn(const data::TextData& ds,
                                          const TrainSettings& settings) {
  if (settings.epochs < 1) {
    throw std::invalid_argument("epochs must be >= 1");
  }
  settings.spec.validate();
  const std::size_t n = ds.x_train.size();
  if (n == 0) throw std::invalid_argument("empty training split");
  const std::size_t batch = std::min(std::max<std::size_t>(settings.batch_size, 1), n);
  const bool sb = settings.spec.variant == dropout::Variant::self_balanced;

  Rng root(settings.seed);
  Rng init_rng = root.split();
  Rng train_rng = root.split();

  TextCnnConfig cfg = settings.cnn;
  cfg.vocab_size = ds.vocab_size;
  cfg.num_classes = ds.num_classes;
  TextCnnModel model = TextCnnModel::init(cfg, settings.spec, init_rng);

  std::vector<ag::NodePtr> params = model.params();
  Stepper stepper(settings, params);

  std::vector<MetricsRecord> records;
  for (std::size_t epoch = 1; epoch <= settings.epochs; ++epoch) {
    double train_loss = 0.0;
    double norm_x_acc = 0.0;
    std::size_t n_batches = 0;
    for (std::size_t begin = 0; begin < n; begin += batch) {
      const std::size_t end = std::min(begin + batch, n);
      const double inv_b = 1.0 / static_cast<double>(end - begin);
      Tensor pooled_stack = Tensor::zeros({end - begin, cfg.filters});
      for (std::size_t i = begin; i < end; ++i) {
        auto fwd = model.forward(ds.x_train[i], settings.keep_prob_input,
                                 settings.keep_prob_hidden, train_rng,
                                 /*training=*/true);
        ag::NodePtr loss =
            ag::softmax_cross_entropy(fwd.logits, {ds.y_train[i]});
        train_loss += loss->value[0] / static_cast<double>(n);
        for (std::size_t j = 0; j < cfg.filters; ++j) {
          pooled_stack.at(i - begin, j) = fwd.pooled_clean->value[j];
        }
        ag::backward(ag::scale(loss, inv_b));
      }
      stepper.step(params);
      zero_params(params);
      norm_x_acc += frobenius_norm(pooled_stack);
      ++n_batches;
    }

    double test_loss = 0.0;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < ds.x_test.size(); ++i) {
      auto fwd = model.forward(ds.x_test[i], settings.keep_prob_input,
                               settings.keep_prob_hidden, train_rng,
                               /*training=*/false);
      test_loss += ag::softmax_cross_entropy(fwd.logits, {ds.y_test[i]})
                       ->value[0] /
                   static_cast<double>(ds.x_test.size());
      const Tensor& logits = fwd.logits->value;
      std::size_t best = 0;
      for (std::size_t c = 1; c < cfg.num_classes; ++c) {
        if (logits[c] > logits[best]) best = c;
      }
      if (static_cast<int>(best) == ds.y_test[i]) ++correct;
    }

    MetricsRecord rec;
    rec.epoch = epoch;
    rec.train_loss = train_loss;
    rec.test_loss = test_loss;
    rec.test_accuracy =
        static_cast<double>(correct) / static_cast<double>(ds.x_test.size());
    rec.norm_w = model.classifier_norm();
    rec.norm_x_batch_mean = norm_x_acc / static_cast<double>(n_batches);
    rec.ratio_w_over_x = rec.norm_w / rec.norm_x_batch_mean;
    rec.norm_x_mask = sb ? model.hidden_mask.norm() : 0.0;
    records.push_back(rec);

    check_finite_or_throw("text_cnn", epoch, train_loss);
    check_finite_or_throw("text_cnn", epoch, test_loss);
  }
  return records;
}

CompareResult compare_generalization(const CompareSettings& settings,
                                     std::size_t n_seeds) {
  if (n_seeds < 2) {
    throw std::invalid_argument("compare_generalization needs >= 2 seeds, got " +
                                std::to_string(n_seeds));
  }
  CompareResult result;
  double wins = 0.0;
  for (std::size_t k = 0; k < n_seeds; ++k) {
    const std::uint64_t seed = settings.data_seed + k;
    const auto ds = data::generate_correlated_regression(
        seed, settings.n_per_split, settings.dim, settings.rho,
        settings.noise_sigma, settings.decorrelate_test);

    TrainSettings arm = settings.train;
    arm.seed = settings.train.seed + k;

    arm.spec.variant = dropout::Variant::standard;
    double std_loss;
    try {
      std_loss = train_linear(ds, arm).back().test_loss;
    } catch (const TrainingDivergence& e) {
      throw TrainingDivergence("standard arm, seed " + std::to_string(seed),
                               e.epoch, e.loss);
    }

    arm.spec.variant = dropout::Variant::self_balanced;
    arm.spec.inference = settings.sb_inference;
    double sb_loss;
    try {
      sb_loss = train_linear(ds, arm).back().test_loss;
    } catch (const TrainingDivergence& e) {
      throw TrainingDivergence("self_balanced arm, seed " + std::to_string(seed),
                               e.epoch, e.loss);
    }

    result.pairs.push_back({seed, std_loss, sb_loss});
    result.mean_standard += std_loss / static_cast<double>(n_seeds);
    result.mean_self_balanced += sb_loss / static_cast<double>(n_seeds);
    if (sb_loss < std_loss) {
      wins += 1.0;
    } else if (sb_loss == std_loss) {
      wins += 0.5;
    }
  }
  result.mean_paired_diff = result.mean_self_balanced - result.mean_standard;
  result.win_rate = wins / static_cast<double>(n_seeds);
  return result;
}

}  // namespace sbdrop::train

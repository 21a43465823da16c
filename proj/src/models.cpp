#include "sbdrop/models.hpp"

#include <stdexcept>
#include <string>

namespace sbdrop::train {

namespace {

Tensor random_tensor(Rng& rng, std::vector<std::size_t> shape, double scale) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = scale * rng.next_normal();
  return t;
}

}  // namespace

LinearModel LinearModel::init(std::size_t dim, Rng& rng, double init_scale,
                              bool with_bias) {
  LinearModel m;
  m.w = ag::param(random_tensor(rng, {dim, 1}, init_scale));
  if (with_bias) m.bias = ag::param(Tensor::scalar(0.0));
  return m;
}

ag::NodePtr LinearModel::predict(const ag::NodePtr& x) const {
  const std::size_t n = x->value.dim(0);
  ag::NodePtr pred = ag::reshape(ag::matmul(x, w), {n});
  if (bias) pred = ag::add(pred, bias);
  return pred;
}

std::vector<ag::NodePtr> LinearModel::params() const {
  std::vector<ag::NodePtr> ps{w};
  if (bias) ps.push_back(bias);
  return ps;
}

double LinearModel::weight_norm() const { return frobenius_norm(w->value); }

TextCnnModel TextCnnModel::init(const TextCnnConfig& cfg,
                                const dropout::DropoutSpec& spec, Rng& rng) {
  if (cfg.vocab_size == 0) {
    throw std::invalid_argument("text cnn needs a positive vocab_size");
  }
  if (cfg.window < 1) {
    throw std::invalid_argument("text cnn window must be >= 1");
  }
  TextCnnModel m;
  m.cfg = cfg;
  m.spec = spec;
  m.embedding = ag::param(random_tensor(
      rng, {cfg.vocab_size, cfg.embed_dim}, cfg.embed_init_scale));
  for (std::size_t k = 0; k < cfg.window; ++k) {
    m.conv_w.push_back(ag::param(random_tensor(
        rng, {cfg.embed_dim, cfg.filters}, cfg.weight_init_scale)));
  }
  m.conv_b = ag::param(Tensor::zeros({1, cfg.filters}));
  m.fc_w = ag::param(random_tensor(rng, {cfg.filters, cfg.num_classes},
                                   cfg.weight_init_scale));
  m.fc_b = ag::param(Tensor::zeros({1, cfg.num_classes}));
  m.input_mask =
      dropout::MaskParam::make(dropout::Granularity::token_vector,
                               cfg.embed_dim);
  m.hidden_mask = dropout::MaskParam::make(spec.granularity, cfg.filters);
  return m;
}

TextCnnModel::Forward TextCnnModel::forward(const std::vector<int>& tokens,
                                            double p_input, double p_hidden,
                                            Rng& rng, bool training) const {
  const std::size_t t = tokens.size();
  if (t < cfg.window) {
    throw std::invalid_argument("sequence of length " + std::to_string(t) +
                                " shorter than window " +
                                std::to_string(cfg.window));
  }
  ag::NodePtr x = ag::lookup_rows(embedding, tokens);  // [T x d]

  if (spec.variant == dropout::Variant::self_balanced) {
    dropout::DropoutSpec input_spec = spec;
    input_spec.granularity = dropout::Granularity::token_vector;
    input_spec.keep_prob = p_input;
    x = dropout::self_balanced_forward(x, input_mask, p_input, rng, training,
                                       input_spec);
  } else {
    x = dropout::standard_dropout_forward(x, p_input, rng, training);
  }

  // windowed convolution as a sum of shifted matmuls
  const std::size_t steps = t - cfg.window + 1;
  ag::NodePtr feat;
  for (std::size_t k = 0; k < cfg.window; ++k) {
    Tensor shift = Tensor::zeros({steps, t});
    for (std::size_t s = 0; s < steps; ++s) shift.at(s, s + k) = 1.0;
    ag::NodePtr term = ag::matmul(ag::matmul(ag::constant(std::move(shift)), x),
                                  conv_w[k]);
    feat = feat ? ag::add(feat, term) : term;
  }
  feat = ag::add(feat, ag::matmul(ag::constant(Tensor::ones({steps, 1})),
                                  conv_b));
  feat = ag::relu(feat);

  Forward out;
  out.pooled_clean = ag::max_over_axis(feat, 0);  // [F]

  ag::NodePtr pooled = out.pooled_clean;
  if (spec.variant == dropout::Variant::self_balanced) {
    dropout::DropoutSpec hidden_spec = spec;
    hidden_spec.keep_prob = p_hidden;
    pooled = dropout::self_balanced_forward(pooled, hidden_mask, p_hidden, rng,
                                            training, hidden_spec);
  } else {
    pooled = dropout::standard_dropout_forward(pooled, p_hidden, rng, training);
  }

  out.logits = ag::add(ag::matmul(ag::reshape(pooled, {1, cfg.filters}), fc_w),
                       fc_b);
  return out;
}

std::vector<ag::NodePtr> TextCnnModel::params() const {
  std::vector<ag::NodePtr> ps{embedding};
  ps.insert(ps.end(), conv_w.begin(), conv_w.end());
  ps.push_back(conv_b);
  ps.push_back(fc_w);
  ps.push_back(fc_b);
  if (spec.variant == dropout::Variant::self_balanced) {
    ps.push_back(input_mask.values);
    ps.push_back(hidden_mask.values);
  }
  return ps;
}

double TextCnnModel::classifier_norm() const {
  return frobenius_norm(fc_w->value);
}

}  // namespace sbdrop::train

#pragma once

#include <cstddef>
#include <vector>

#include "sbdrop/autograd.hpp"
#include "sbdrop/dropout.hpp"
#include "sbdrop/rng.hpp"

namespace sbdrop::train {

struct LinearModel {
  ag::NodePtr w;     // [D x 1]
  ag::NodePtr bias;  // rank-0; null when disabled

  static LinearModel init(std::size_t dim, Rng& rng, double init_scale,
                          bool with_bias);

  // [N x D] -> [N]
  ag::NodePtr predict(const ag::NodePtr& x) const;
  std::vector<ag::NodePtr> params() const;
  double weight_norm() const;
};

struct TextCnnConfig {
  std::size_t vocab_size = 0;
  std::size_t num_classes = 2;
  std::size_t embed_dim = 16;
  std::size_t window = 3;
  std::size_t filters = 8;
  double embed_init_scale = 0.1;
  double weight_init_scale = 0.5;
};

// Word embeddings, one convolution window, max-over-time pooling, and a
// linear classifier. Two dropout sites: on the embedding rows before the
// convolution (token_vector mask, keep prob p_input) and on the pooled
// features before the classifier (value mask, keep prob p_hidden).
struct TextCnnModel {
  TextCnnConfig cfg;
  dropout::DropoutSpec spec;        // variant + value-mode granularity + inference
  ag::NodePtr embedding;            // [V x d]
  std::vector<ag::NodePtr> conv_w;  // window x [d x F]
  ag::NodePtr conv_b;               // [1 x F]
  ag::NodePtr fc_w;                 // [F x C]
  ag::NodePtr fc_b;                 // [1 x C]
  dropout::MaskParam input_mask;    // [d]
  dropout::MaskParam hidden_mask;   // granularity-shaped over F

  static TextCnnModel init(const TextCnnConfig& cfg,
                           const dropout::DropoutSpec& spec, Rng& rng);

  struct Forward {
    ag::NodePtr logits;        // [1 x C]
    ag::NodePtr pooled_clean;  // [F], before the hidden dropout site
  };
  Forward forward(const std::vector<int>& tokens, double p_input,
                  double p_hidden, Rng& rng, bool training) const;

  std::vector<ag::NodePtr> params() const;
  double classifier_norm() const;
};

}  // namespace sbdrop::train

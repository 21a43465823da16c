#pragma once

#include <cstddef>

#include "sbdrop/autograd.hpp"
#include "sbdrop/rng.hpp"

namespace sbdrop::dropout {

enum class Variant { standard, self_balanced };

// shared_scalar: one trainable value for every unit.
// per_feature:   one trainable value per feature dimension.
// token_vector:  one trainable vector replacing whole rows of a
//                (tokens x embedding) input.
enum class Granularity { shared_scalar, per_feature, token_vector };

// How a self-balanced layer behaves at inference: pass the input through
// unchanged, or return its training-time expectation p*x + (1-p)*m.
enum class Inference { passthrough, expectation };

struct DropoutSpec {
  Variant variant = Variant::standard;
  double keep_prob = 0.5;
  Granularity granularity = Granularity::per_feature;
  Inference inference = Inference::passthrough;

  void validate() const;  // keep_prob in (0, 1]
};

// The trainable replacement values. Shape [] for shared_scalar, [D] for
// per_feature, [embed_dim] for token_vector. Initialized to zero, where a
// self-balanced layer coincides with unscaled standard dropout.
struct MaskParam {
  ag::NodePtr values;

  static MaskParam make(Granularity granularity, std::size_t feature_dim);
  double norm() const;
};

// Inverted dropout: training keeps units with probability p and scales them
// by 1/p; inference is the identity. p == 1 bypasses sampling entirely and
// returns x.
ag::NodePtr standard_dropout_forward(const ag::NodePtr& x, double p, Rng& rng,
                                     bool training);

// Replacement dropout: kept units pass through, dropped units are replaced
// by the trainable mask, no rescaling. token_vector granularity replaces
// whole rows atomically. Fresh Bernoulli draws on every training call;
// p == 1 bypasses sampling and returns x.
ag::NodePtr self_balanced_forward(const ag::NodePtr& x, const MaskParam& mask,
                                  double p, Rng& rng, bool training,
                                  const DropoutSpec& spec);

}  // namespace sbdrop::dropout

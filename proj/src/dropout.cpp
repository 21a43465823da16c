#include "sbdrop/dropout.hpp"

#include <stdexcept>
#include <string>

namespace sbdrop::dropout {

namespace {

void check_keep_prob(double p) {
  if (!(p > 0.0 && p <= 1.0)) {
    throw std::invalid_argument("keep_prob must be in (0, 1], got " +
                                std::to_string(p));
  }
}

std::size_t feature_dim_of(const Tensor& x) {
  if (x.rank() == 0) {
    throw std::invalid_argument("dropout: input must have at least rank 1");
  }
  return x.dim(x.rank() - 1);
}

// Mask values broadcast to x's shape, as a graph over the mask parameter so
// gradients reach every replaced position.
ag::NodePtr broadcast_mask(const ag::NodePtr& x, const MaskParam& mask,
                           Granularity granularity) {
  const Tensor& xv = x->value;
  const std::size_t d = feature_dim_of(xv);
  switch (granularity) {
    case Granularity::shared_scalar:
      return ag::mul(ag::constant(Tensor::ones(xv.shape())), mask.values);
    case Granularity::per_feature:
    case Granularity::token_vector: {
      if (mask.values->value.size() != d) {
        throw std::invalid_argument(
            "dropout: mask of shape " + mask.values->value.shape_string() +
            " does not match feature dimension " + std::to_string(d) +
            " of input " + xv.shape_string());
      }
      if (xv.rank() == 1) return mask.values;
      const std::size_t rows = xv.dim(0);
      return ag::matmul(ag::constant(Tensor::ones({rows, 1})),
                        ag::reshape(mask.values, {1, d}));
    }
  }
  throw std::logic_error("dropout: unreachable granularity");
}

}  // namespace

void DropoutSpec::validate() const { check_keep_prob(keep_prob); }

MaskParam MaskParam::make(Granularity granularity, std::size_t feature_dim) {
  switch (granularity) {
    case Granularity::shared_scalar:
      return {ag::param(Tensor::scalar(0.0))};
    case Granularity::per_feature:
    case Granularity::token_vector:
      return {ag::param(Tensor::zeros({feature_dim}))};
  }
  throw std::logic_error("dropout: unreachable granularity");
}

double MaskParam::norm() const { return frobenius_norm(values->value); }

ag::NodePtr standard_dropout_forward(const ag::NodePtr& x, double p, Rng& rng,
                                     bool training) {
  check_keep_prob(p);
  if (!training || p == 1.0) return x;
  Tensor gate = bernoulli_mask(rng, x->value.shape(), p);
  return ag::mul(x, ag::constant(mul(gate, 1.0 / p)));
}

ag::NodePtr self_balanced_forward(const ag::NodePtr& x, const MaskParam& mask,
                                  double p, Rng& rng, bool training,
                                  const DropoutSpec& spec) {
  check_keep_prob(p);
  const Tensor& xv = x->value;
  if (spec.granularity == Granularity::token_vector && xv.rank() != 2) {
    throw std::invalid_argument(
        "dropout: token_vector granularity needs a (tokens x embedding) "
        "input, got " + xv.shape_string());
  }
  if (spec.granularity == Granularity::shared_scalar &&
      mask.values->value.size() != 1) {
    throw std::invalid_argument("dropout: shared_scalar mask must hold one value, got " +
                                mask.values->value.shape_string());
  }

  if (!training) {
    if (spec.inference == Inference::passthrough || p == 1.0) return x;
    ag::NodePtr m_full = broadcast_mask(x, mask, spec.granularity);
    return ag::add(ag::scale(x, p), ag::scale(m_full, 1.0 - p));
  }
  if (p == 1.0) return x;

  // keep gate: per entry for value granularities, per row for token_vector
  Tensor keep;
  if (spec.granularity == Granularity::token_vector) {
    const std::size_t rows = xv.dim(0), d = xv.dim(1);
    Tensor row_gate = bernoulli_mask(rng, {rows}, p);
    keep = Tensor::zeros({rows, d});
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t j = 0; j < d; ++j) keep.at(i, j) = row_gate[i];
    }
  } else {
    keep = bernoulli_mask(rng, xv.shape(), p);
  }
  Tensor replace = Tensor::ones(keep.shape());
  for (std::size_t i = 0; i < keep.size(); ++i) replace[i] -= keep[i];

  ag::NodePtr m_full = broadcast_mask(x, mask, spec.granularity);
  return ag::add(ag::mul(x, ag::constant(std::move(keep))),
                 ag::mul(m_full, ag::constant(std::move(replace))));
}

}  // namespace sbdrop::dropout

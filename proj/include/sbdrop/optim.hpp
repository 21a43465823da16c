#pragma once

#include <span>
#include <vector>

#include "sbdrop/autograd.hpp"

namespace sbdrop::train {

// In-place w := w - lr * grad over each param node. Throws on lr <= 0.
void sgd_step(std::span<const ag::NodePtr> params, double learning_rate);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  long step = 0;

  static AdamState init(std::span<const ag::NodePtr> params);
};

// Standard moment-estimate recursion with bias correction.
void adam_step(AdamState& state, std::span<const ag::NodePtr> params,
               const AdamConfig& cfg);

}  // namespace sbdrop::train

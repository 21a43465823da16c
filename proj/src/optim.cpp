#include "sbdrop/optim.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace sbdrop::train {

void sgd_step(std::span<const ag::NodePtr> params, double learning_rate) {
  if (!(learning_rate > 0.0)) {
    throw std::invalid_argument("sgd_step: learning rate must be positive, got " +
                                std::to_string(learning_rate));
  }
  for (const auto& p : params) {
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      p->value[i] -= learning_rate * p->grad[i];
    }
  }
}

AdamState AdamState::init(std::span<const ag::NodePtr> params) {
  AdamState s;
  for (const auto& p : params) {
    s.m.push_back(Tensor::zeros(p->value.shape()));
    s.v.push_back(Tensor::zeros(p->value.shape()));
  }
  return s;
}

void adam_step(AdamState& state, std::span<const ag::NodePtr> params,
               const AdamConfig& cfg) {
  if (!(cfg.learning_rate > 0.0)) {
    throw std::invalid_argument("adam_step: learning rate must be positive, got " +
                                std::to_string(cfg.learning_rate));
  }
  if (state.m.size() != params.size()) {
    throw std::invalid_argument("adam_step: state initialized for " +
                                std::to_string(state.m.size()) +
                                " params, got " + std::to_string(params.size()));
  }
  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, state.step);
  const double bc2 = 1.0 - std::pow(cfg.beta2, state.step);
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto& p = params[k];
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double g = p->grad[i];
      state.m[k][i] = cfg.beta1 * state.m[k][i] + (1.0 - cfg.beta1) * g;
      state.v[k][i] = cfg.beta2 * state.v[k][i] + (1.0 - cfg.beta2) * g * g;
      const double mhat = state.m[k][i] / bc1;
      const double vhat = state.v[k][i] / bc2;
      p->value[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.eps);
    }
  }
}

}  // namespace sbdrop::train

#pragma once

#include <cstddef>

#include "sbdrop/rng.hpp"
#include "sbdrop/tensor.hpp"

namespace sbdrop::cf {

enum class Variant { standard, self_balanced };

// The linear-regression setting every closed form and oracle operates on:
// data X [N x D], labels y [N], weights w [D], keep probability p, and mask
// values m (rank-0 scalar, or [D] with one value per feature).
struct RegressionInstance {
  Tensor x;
  Tensor y;
  Tensor w;
  double keep_prob = 1.0;
  Tensor mask = Tensor::scalar(0.0);

  std::size_t rows() const { return x.dim(0); }
  std::size_t cols() const { return x.dim(1); }
  bool scalar_mask() const { return mask.size() == 1 && mask.rank() == 0; }
  double mask_at(std::size_t j) const {
    return scalar_mask() ? mask[0] : mask[j];
  }
  void validate() const;
};

// ||y - Xw||^2
double data_fit(const RegressionInstance& inst);

// The dropout penalty ((1-p)/p) * sum_ij (x_ij w_j)^2. Requires p > 0.
double standard_regularizer(const RegressionInstance& inst);

// Expected inverted-dropout objective: data_fit + standard_regularizer.
double expected_objective_standard(const RegressionInstance& inst);

// Componentwise penalty gradient 2((1-p)/p) sum_i x_ij^2 w_j.
Tensor grad_regularizer_standard(const RegressionInstance& inst);

// Exact expectation of the replacement-dropout objective:
// ||y - (pX + (1-p)M)w||^2 + p(1-p) sum_ij (x_ij - m_j)^2 w_j^2,
// where M broadcasts the mask over rows.
double expected_objective_sb_exact(const RegressionInstance& inst);

struct SbGradients {
  Tensor grad_w;        // of expected_objective_sb_exact
  Tensor grad_m;        // of expected_objective_sb_exact, mask's shape
  Tensor grad_w_paper;  // 2p(1-p) sum_i (x_ij + m_j)^2 w_j, penalty term only
};
SbGradients grad_sb(const RegressionInstance& inst);

// The published three-term decomposition
//   ||y - pXw||^2 + ||y - (1-p) M w||^2 + p(1-p) sum_ij (x_ij + m)^2 w_j^2
// evaluated verbatim for a scalar mask, together with its measured gap
// against the exact expectation. The gap is reported, never assumed zero.
struct DecompositionReport {
  double exact_expectation = 0.0;
  double closed_form_value = 0.0;
  double data_fit_term = 0.0;
  double q_term = 0.0;
  double regularizer_term = 0.0;
  double abs_gap = 0.0;
  double rel_gap = 0.0;  // abs_gap / max(1, |exact|)
};
DecompositionReport expected_objective_sb_paper(const RegressionInstance& inst);

// Brute-force ground truth: probability-weighted objective summed over all
// 2^(N*D) keep/drop matrices. Requires N*D <= 24. The standard variant
// zeroes dropped entries and scales kept ones by 1/p; the self-balanced
// variant substitutes mask values without scaling. Accepts p = 0 for the
// self-balanced variant (every entry replaced).
double enumerate_expectation(const RegressionInstance& inst, Variant variant);

constexpr std::size_t kEnumerationCellLimit = 24;

struct McEstimate {
  double mean = 0.0;
  double std_error = 0.0;
};

// Sample mean of the objective under `samples` independent mask draws, with
// the standard error of the mean. Requires samples >= 1000.
McEstimate monte_carlo_expectation(const RegressionInstance& inst,
                                   Variant variant, std::size_t samples,
                                   Rng& rng);

// |reference - value| / max(1, |reference|)
double relative_gap(double reference, double value);

}  // namespace sbdrop::cf

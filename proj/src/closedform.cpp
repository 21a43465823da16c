#include "sbdrop/closedform.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace sbdrop::cf {

namespace {

void require_positive_keep(const RegressionInstance& inst) {
  if (inst.keep_prob == 0.0) {
    throw std::invalid_argument(
        "standard variant requires keep_prob > 0 (kept units are scaled by 1/p)");
  }
}

// Neumaier compensated summation; the enumeration adds up to ~17M terms and
// the comparisons run at 1e-9 relative.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v)) {
      comp_ += (sum_ - t) + v;
    } else {
      comp_ += (v - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace

void RegressionInstance::validate() const {
  if (x.rank() != 2) {
    throw std::invalid_argument("instance: X must be rank-2, got " +
                                x.shape_string());
  }
  if (y.rank() != 1 || y.size() != rows()) {
    throw std::invalid_argument("instance: y of shape " + y.shape_string() +
                                " does not match X " + x.shape_string());
  }
  if (w.rank() != 1 || w.size() != cols()) {
    throw std::invalid_argument("instance: w of shape " + w.shape_string() +
                                " does not match X " + x.shape_string());
  }
  if (!(keep_prob >= 0.0 && keep_prob <= 1.0)) {
    throw std::invalid_argument("instance: keep_prob must be in [0, 1], got " +
                                std::to_string(keep_prob));
  }
  if (!scalar_mask() && !(mask.rank() == 1 && mask.size() == cols())) {
    throw std::invalid_argument("instance: mask of shape " +
                                mask.shape_string() +
                                " must be scalar or match D of X " +
                                x.shape_string());
  }
  if (!x.all_finite() || !y.all_finite() || !w.all_finite() ||
      !mask.all_finite()) {
    throw std::invalid_argument("instance: non-finite values");
  }
}

double data_fit(const RegressionInstance& inst) {
  inst.validate();
  double acc = 0.0;
  for (std::size_t i = 0; i < inst.rows(); ++i) {
    double pred = 0.0;
    for (std::size_t j = 0; j < inst.cols(); ++j) {
      pred += inst.x.at(i, j) * inst.w[j];
    }
    const double r = inst.y[i] - pred;
    acc += r * r;
  }
  return acc;
}

double standard_regularizer(const RegressionInstance& inst) {
  inst.validate();
  require_positive_keep(inst);
  const double c = (1.0 - inst.keep_prob) / inst.keep_prob;
  double acc = 0.0;
  for (std::size_t i = 0; i < inst.rows(); ++i) {
    for (std::size_t j = 0; j < inst.cols(); ++j) {
      const double t = inst.x.at(i, j) * inst.w[j];
      acc += t * t;
    }
  }
  return c * acc;
}

double expected_objective_standard(const RegressionInstance& inst) {
  return data_fit(inst) + standard_regularizer(inst);
}

Tensor grad_regularizer_standard(const RegressionInstance& inst) {
  inst.validate();
  require_positive_keep(inst);
  const double c = (1.0 - inst.keep_prob) / inst.keep_prob;
  Tensor g = Tensor::zeros({inst.cols()});
  for (std::size_t j = 0; j < inst.cols(); ++j) {
    double sq = 0.0;
    for (std::size_t i = 0; i < inst.rows(); ++i) {
      sq += inst.x.at(i, j) * inst.x.at(i, j);
    }
    g[j] = 2.0 * c * sq * inst.w[j];
  }
  return g;
}

double expected_objective_sb_exact(const RegressionInstance& inst) {
  inst.validate();
  const double p = inst.keep_prob, q = 1.0 - p;
  double mean_term = 0.0;
  double var_term = 0.0;
  for (std::size_t i = 0; i < inst.rows(); ++i) {
    double pred = 0.0;
    for (std::size_t j = 0; j < inst.cols(); ++j) {
      const double xm = p * inst.x.at(i, j) + q * inst.mask_at(j);
      pred += xm * inst.w[j];
      const double d = inst.x.at(i, j) - inst.mask_at(j);
      var_term += p * q * d * d * inst.w[j] * inst.w[j];
    }
    const double r = inst.y[i] - pred;
    mean_term += r * r;
  }
  return mean_term + var_term;
}

SbGradients grad_sb(const RegressionInstance& inst) {
  inst.validate();
  const double p = inst.keep_prob, q = 1.0 - p;
  const std::size_t n = inst.rows(), d = inst.cols();

  // residuals of the mean term, r_i = y_i - sum_j (p x_ij + q m_j) w_j
  std::vector<double> resid(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double pred = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      pred += (p * inst.x.at(i, j) + q * inst.mask_at(j)) * inst.w[j];
    }
    resid[i] = inst.y[i] - pred;
  }

  SbGradients out;
  out.grad_w = Tensor::zeros({d});
  out.grad_w_paper = Tensor::zeros({d});
  out.grad_m = Tensor::zeros(inst.mask.shape());

  for (std::size_t j = 0; j < d; ++j) {
    double mean_part = 0.0;
    double var_part = 0.0;
    double paper_part = 0.0;
    double m_mean_part = 0.0;
    double m_var_part = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double a = p * inst.x.at(i, j) + q * inst.mask_at(j);
      mean_part += -2.0 * a * resid[i];
      const double dev = inst.x.at(i, j) - inst.mask_at(j);
      var_part += 2.0 * p * q * dev * dev * inst.w[j];
      const double s = inst.x.at(i, j) + inst.mask_at(j);
      paper_part += 2.0 * p * q * s * s * inst.w[j];
      m_mean_part += -2.0 * q * inst.w[j] * resid[i];
      m_var_part += -2.0 * p * q * dev * inst.w[j] * inst.w[j];
    }
    out.grad_w[j] = mean_part + var_part;
    out.grad_w_paper[j] = paper_part;
    const double gm = m_mean_part + m_var_part;
    if (inst.scalar_mask()) {
      out.grad_m[0] += gm;
    } else {
      out.grad_m[j] = gm;
    }
  }
  return out;
}

DecompositionReport expected_objective_sb_paper(const RegressionInstance& inst) {
  inst.validate();
  if (!inst.scalar_mask()) {
    throw std::invalid_argument(
        "published decomposition is defined for a scalar mask, got " +
        inst.mask.shape_string());
  }
  const double p = inst.keep_prob, q = 1.0 - p;
  const double m = inst.mask[0];
  const std::size_t n = inst.rows(), d = inst.cols();

  DecompositionReport rep;

  double wsum = 0.0;
  for (std::size_t j = 0; j < d; ++j) wsum += inst.w[j];

  for (std::size_t i = 0; i < n; ++i) {
    double pred = 0.0;
    for (std::size_t j = 0; j < d; ++j) pred += p * inst.x.at(i, j) * inst.w[j];
    const double r1 = inst.y[i] - pred;
    rep.data_fit_term += r1 * r1;
    const double r2 = inst.y[i] - q * m * wsum;
    rep.q_term += r2 * r2;
    for (std::size_t j = 0; j < d; ++j) {
      const double s = inst.x.at(i, j) + m;
      rep.regularizer_term += p * q * s * s * inst.w[j] * inst.w[j];
    }
  }
  rep.closed_form_value = rep.data_fit_term + rep.q_term + rep.regularizer_term;
  rep.exact_expectation = inst.rows() * inst.cols() <= kEnumerationCellLimit
                              ? enumerate_expectation(inst, Variant::self_balanced)
                              : expected_objective_sb_exact(inst);
  rep.abs_gap = std::abs(rep.exact_expectation - rep.closed_form_value);
  rep.rel_gap = relative_gap(rep.exact_expectation, rep.closed_form_value);
  return rep;
}

double enumerate_expectation(const RegressionInstance& inst, Variant variant) {
  inst.validate();
  const std::size_t cells = inst.rows() * inst.cols();
  if (cells > kEnumerationCellLimit) {
    throw std::invalid_argument(
        "enumeration over 2^" + std::to_string(cells) +
        " masks exceeds the N*D <= " + std::to_string(kEnumerationCellLimit) +
        " cap");
  }
  if (variant == Variant::standard) require_positive_keep(inst);

  const double p = inst.keep_prob, q = 1.0 - p;
  const std::size_t n = inst.rows(), d = inst.cols();

  // pow tables over kept/dropped counts; pow(0,0) == 1 covers the p=0 and
  // p=1 boundaries exactly
  std::vector<double> pow_p(cells + 1), pow_q(cells + 1);
  for (std::size_t k = 0; k <= cells; ++k) {
    pow_p[k] = std::pow(p, static_cast<double>(k));
    pow_q[k] = std::pow(q, static_cast<double>(k));
  }

  CompensatedSum total;
  const std::uint64_t mask_count = 1ULL << cells;
  for (std::uint64_t bits = 0; bits < mask_count; ++bits) {
    const int kept = std::popcount(bits);
    const double weight =
        pow_p[static_cast<std::size_t>(kept)] *
        pow_q[cells - static_cast<std::size_t>(kept)];
    if (weight == 0.0) continue;
    double objective = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double pred = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const bool keep = (bits >> (i * d + j)) & 1ULL;
        double xt;
        if (variant == Variant::standard) {
          xt = keep ? inst.x.at(i, j) / p : 0.0;
        } else {
          xt = keep ? inst.x.at(i, j) : inst.mask_at(j);
        }
        pred += xt * inst.w[j];
      }
      const double r = inst.y[i] - pred;
      objective += r * r;
    }
    total.add(weight * objective);
  }
  return total.value();
}

McEstimate monte_carlo_expectation(const RegressionInstance& inst,
                                   Variant variant, std::size_t samples,
                                   Rng& rng) {
  inst.validate();
  if (samples < 1000) {
    throw std::invalid_argument("monte_carlo_expectation needs >= 1000 samples, got " +
                                std::to_string(samples));
  }
  if (variant == Variant::standard) require_positive_keep(inst);

  const double p = inst.keep_prob;
  const std::size_t n = inst.rows(), d = inst.cols();

  // Welford running moments
  double mean = 0.0, m2 = 0.0;
  for (std::size_t s = 0; s < samples; ++s) {
    double objective = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double pred = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const bool keep = rng.next_double() < p;
        double xt;
        if (variant == Variant::standard) {
          xt = keep ? inst.x.at(i, j) / p : 0.0;
        } else {
          xt = keep ? inst.x.at(i, j) : inst.mask_at(j);
        }
        pred += xt * inst.w[j];
      }
      const double r = inst.y[i] - pred;
      objective += r * r;
    }
    const double delta = objective - mean;
    mean += delta / static_cast<double>(s + 1);
    m2 += delta * (objective - mean);
  }
  McEstimate est;
  est.mean = mean;
  const double var = m2 / static_cast<double>(samples - 1);
  est.std_error = std::sqrt(var / static_cast<double>(samples));
  return est;
}

double relative_gap(double reference, double value) {
  return std::abs(reference - value) / std::max(1.0, std::abs(reference));
}

}  // namespace sbdrop::cf

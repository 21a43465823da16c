#include "sbdrop/tensor.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <utility>

namespace sbdrop {

namespace {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) {
    if (d == 0) {
      throw std::invalid_argument("tensor shape has a zero dimension");
    }
    n *= d;
  }
  return n;
}

[[noreturn]] void throw_shape_mismatch(const char* op, const Tensor& a,
                                       const Tensor& b) {
  throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                              a.shape_string() + " vs " + b.shape_string());
}

}  // namespace

Tensor::Tensor() : shape_{}, data_{0.0} {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> values)
    : shape_(std::move(shape)), data_(std::move(values)) {}

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
  const std::size_t n = shape_product(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::ones(std::vector<std::size_t> shape) {
  return full(std::move(shape), 1.0);
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value) {
  const std::size_t n = shape_product(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double value) { return Tensor({}, {value}); }

Tensor Tensor::from_flat(std::vector<std::size_t> shape,
                         std::vector<double> values) {
  const std::size_t n = shape_product(shape);
  if (n != values.size()) {
    throw std::invalid_argument(
        "from_flat: shape holds " + std::to_string(n) + " values, got " +
        std::to_string(values.size()));
  }
  return Tensor(std::move(shape), std::move(values));
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t = zeros({n, n});
  for (std::size_t i = 0; i < n; ++i) t.at(i, i) = 1.0;
  return t;
}

Tensor Tensor::vec(std::initializer_list<double> values) {
  return Tensor({values.size()}, std::vector<double>(values));
}

Tensor Tensor::matrix(
    std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> flat;
  flat.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) {
      throw std::invalid_argument("matrix: ragged initializer rows");
    }
    flat.insert(flat.end(), row.begin(), row.end());
  }
  return Tensor({r, c}, std::move(flat));
}

double& Tensor::at(std::size_t row, std::size_t col) {
  return data_[row * shape_[1] + col];
}

double Tensor::at(std::size_t row, std::size_t col) const {
  return data_[row * shape_[1] + col];
}

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::string Tensor::shape_string() const {
  if (shape_.empty()) return "[scalar]";
  std::string s = "[";
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape_[i]);
  }
  s += "]";
  return s;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2) {
    throw std::invalid_argument("matmul: expects rank-2 operands, got " +
                                a.shape_string() + " and " + b.shape_string());
  }
  if (a.dim(1) != b.dim(0)) {
    throw std::invalid_argument("matmul: inner dimensions disagree: " +
                                a.shape_string() + " vs " + b.shape_string());
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor out = Tensor::zeros({m, n});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t t = 0; t < k; ++t) {
      const double av = a.at(i, t);
      if (av == 0.0) continue;
      for (std::size_t j = 0; j < n; ++j) {
        out.at(i, j) += av * b.at(t, j);
      }
    }
  }
  return out;
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) {
    throw std::invalid_argument("transpose: expects rank-2, got " +
                                a.shape_string());
  }
  Tensor out = Tensor::zeros({a.dim(1), a.dim(0)});
  for (std::size_t i = 0; i < a.dim(0); ++i) {
    for (std::size_t j = 0; j < a.dim(1); ++j) {
      out.at(j, i) = a.at(i, j);
    }
  }
  return out;
}

namespace {

template <typename F>
Tensor zip(const char* op, const Tensor& a, const Tensor& b, F f) {
  if (!a.same_shape(b)) throw_shape_mismatch(op, a, b);
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(a[i], b[i]);
  return out;
}

template <typename F>
Tensor map(const Tensor& a, F f) {
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(a[i]);
  return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return zip("add", a, b, [](double x, double y) { return x + y; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return zip("sub", a, b, [](double x, double y) { return x - y; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return zip("mul", a, b, [](double x, double y) { return x * y; });
}

Tensor add(const Tensor& a, double b) {
  return map(a, [b](double x) { return x + b; });
}

Tensor sub(const Tensor& a, double b) {
  return map(a, [b](double x) { return x - b; });
}

Tensor mul(const Tensor& a, double b) {
  return map(a, [b](double x) { return x * b; });
}

Tensor scale(const Tensor& a, double c) { return mul(a, c); }

Tensor square(const Tensor& a) {
  return map(a, [](double x) { return x * x; });
}

double frobenius_norm(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v * v;
  return std::sqrt(s);
}

double sum(const Tensor& a) {
  return std::accumulate(a.data().begin(), a.data().end(), 0.0);
}

Tensor bernoulli_mask(Rng& rng, std::vector<std::size_t> shape,
                      double keep_prob) {
  if (!(keep_prob >= 0.0 && keep_prob <= 1.0)) {
    throw std::invalid_argument("bernoulli_mask: keep_prob must be in [0, 1], got " +
                                std::to_string(keep_prob));
  }
  Tensor out = Tensor::zeros(std::move(shape));
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = rng.next_double() < keep_prob ? 1.0 : 0.0;
  }
  return out;
}

}  // namespace sbdrop

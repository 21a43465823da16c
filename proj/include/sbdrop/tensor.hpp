#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include "sbdrop/rng.hpp"

namespace sbdrop {

// Dense row-major tensor of doubles with an explicit shape. Rank 0 is a
// scalar: empty shape, one element. Kernels treat tensors as immutable
// values and return fresh results.
class Tensor {
 public:
  // Rank-0 zero.
  Tensor();

  static Tensor zeros(std::vector<std::size_t> shape);
  static Tensor ones(std::vector<std::size_t> shape);
  static Tensor full(std::vector<std::size_t> shape, double value);
  static Tensor scalar(double value);
  static Tensor from_flat(std::vector<std::size_t> shape,
                          std::vector<double> values);
  static Tensor identity(std::size_t n);
  static Tensor vec(std::initializer_list<double> values);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  bool is_scalar() const { return data_.size() == 1; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t row, std::size_t col);
  double at(std::size_t row, std::size_t col) const;

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;
  std::string shape_string() const;  // e.g. "[2x3]", "[scalar]"

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Tensor(std::vector<std::size_t> shape, std::vector<double> values);

  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

// Kernels. All are pure; shape errors throw std::invalid_argument naming
// the offending shapes.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, double b);
Tensor sub(const Tensor& a, double b);
Tensor mul(const Tensor& a, double b);
Tensor scale(const Tensor& a, double c);
Tensor square(const Tensor& a);

double frobenius_norm(const Tensor& a);
double sum(const Tensor& a);

// Each entry is 1 with probability keep_prob, independently; consumes one
// rng draw per entry. keep_prob outside [0, 1] throws.
Tensor bernoulli_mask(Rng& rng, std::vector<std::size_t> shape,
                      double keep_prob);

}  // namespace sbdrop

// SPDX-License-Identifier: Apache-2.0
//
// Dense float64 tensors, a named parameter store and the handful of
// differentiable primitives the summarization model is built from.

#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace attnsum {

/// Row-major dense tensor of doubles. Rank 1 and 2 are the common cases.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);

  static Tensor vector(std::size_t n) { return Tensor({n}); }
  static Tensor matrix(std::size_t rows, std::size_t cols) { return Tensor({rows, cols}); }
  static Tensor from(std::vector<std::size_t> shape, std::vector<double> data);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t rows() const;
  std::size_t cols() const;

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::span<double> row(std::size_t r);
  std::span<const double> row(std::size_t r) const;

  void fill(double v);
  bool all_finite() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

/// Named trainable tensors with a gradient accumulator of identical shape
/// for each. Iteration order is insertion order.
class ParamStore {
 public:
  Tensor& add(const std::string& name, Tensor init);

  bool contains(const std::string& name) const { return index_.contains(name); }
  Tensor& value(const std::string& name);
  const Tensor& value(const std::string& name) const;
  Tensor& grad(const std::string& name);
  const Tensor& grad(const std::string& name) const;

  const std::vector<std::string>& names() const { return names_; }
  std::size_t parameter_count() const;
  void zero_grads();

  /// Copy of this store with the same names and shapes, values and grads
  /// zeroed. Used as a private gradient sink.
  ParamStore zeros_like() const;

 private:
  std::size_t slot(const std::string& name) const;

  std::vector<std::string> names_;
  std::vector<Tensor> values_;
  std::vector<Tensor> grads_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// exp(v - max v) / sum. Throws NumericError on empty or non-finite input.
std::vector<double> softmax(std::span<const double> v);
std::vector<double> log_softmax(std::span<const double> v);
double log_sum_exp(std::span<const double> v);

/// out = W x + b. `b` may be empty (no bias).
void affine(const Tensor& W, std::span<const double> x, std::span<const double> b,
            std::span<double> out);
std::vector<double> affine(const Tensor& W, std::span<const double> x,
                           std::span<const double> b);

/// Accumulates dW += dy x^T, db += dy, dx += W^T dy. Empty db/dx are skipped.
void affine_backward(const Tensor& W, std::span<const double> x, std::span<const double> dy,
                     Tensor& dW, std::span<double> db, std::span<double> dx);

std::vector<double> tanh_elem(std::span<const double> v);
/// Given y = tanh(v) and upstream dy, returns dy * (1 - y^2).
std::vector<double> tanh_backward(std::span<const double> y, std::span<const double> dy);

using LossFn = std::function<double(const ParamStore&)>;

/// Central-difference gradient of `loss` at `params`. The estimate for each
/// parameter lands in the returned store's grad(name); values are copies of
/// `params`. `params` is perturbed in place and restored bit-exactly.
ParamStore finite_diff_grad(const LossFn& loss, ParamStore& params, double eps = 1e-5);

}  // namespace attnsum

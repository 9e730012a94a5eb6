// SPDX-License-Identifier: Apache-2.0

#include "attnsum/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "attnsum/errors.hpp"

namespace attnsum {

namespace {

std::size_t product(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

void require_finite(std::span<const double> v, const char* what) {
  if (v.empty()) throw NumericError(std::string(what) + ": empty input");
  for (double x : v) {
    if (!std::isfinite(x)) throw NumericError(std::string(what) + ": non-finite input");
  }
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape, double fill) : shape_(std::move(shape)) {
  for (std::size_t d : shape_) {
    if (d == 0) throw std::invalid_argument("Tensor: zero dimension");
  }
  data_.assign(product(shape_), fill);
}

Tensor Tensor::from(std::vector<std::size_t> shape, std::vector<double> data) {
  Tensor t(std::move(shape));
  if (data.size() != t.size()) throw std::invalid_argument("Tensor::from: data/shape mismatch");
  t.data_ = std::move(data);
  return t;
}

std::size_t Tensor::rows() const {
  if (shape_.empty()) return 0;
  return shape_[0];
}

std::size_t Tensor::cols() const {
  if (shape_.size() < 2) return 1;
  return shape_[1];
}

std::span<double> Tensor::row(std::size_t r) {
  return std::span<double>(data_).subspan(r * cols(), cols());
}

std::span<const double> Tensor::row(std::size_t r) const {
  return std::span<const double>(data_).subspan(r * cols(), cols());
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

Tensor& ParamStore::add(const std::string& name, Tensor init) {
  if (index_.contains(name)) throw std::invalid_argument("ParamStore: duplicate name " + name);
  index_.emplace(name, names_.size());
  names_.push_back(name);
  Tensor zero(init.shape());
  values_.push_back(std::move(init));
  grads_.push_back(std::move(zero));
  return values_.back();
}

std::size_t ParamStore::slot(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("ParamStore: no parameter " + name);
  return it->second;
}

Tensor& ParamStore::value(const std::string& name) { return values_[slot(name)]; }
const Tensor& ParamStore::value(const std::string& name) const { return values_[slot(name)]; }
Tensor& ParamStore::grad(const std::string& name) { return grads_[slot(name)]; }
const Tensor& ParamStore::grad(const std::string& name) const { return grads_[slot(name)]; }

std::size_t ParamStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : values_) n += t.size();
  return n;
}

void ParamStore::zero_grads() {
  for (auto& g : grads_) g.fill(0.0);
}

ParamStore ParamStore::zeros_like() const {
  ParamStore out;
  for (std::size_t i = 0; i < names_.size(); ++i) out.add(names_[i], Tensor(values_[i].shape()));
  return out;
}

double log_sum_exp(std::span<const double> v) {
  require_finite(v, "log_sum_exp");
  const double m = *std::max_element(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

std::vector<double> softmax(std::span<const double> v) {
  require_finite(v, "softmax");
  const double m = *std::max_element(v.begin(), v.end());
  std::vector<double> out(v.size());
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp(v[i] - m);
    s += out[i];
  }
  for (double& x : out) x /= s;
  return out;
}

std::vector<double> log_softmax(std::span<const double> v) {
  const double lse = log_sum_exp(v);
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] - lse;
  return out;
}

void affine(const Tensor& W, std::span<const double> x, std::span<const double> b,
            std::span<double> out) {
  if (W.rank() != 2 || W.cols() != x.size() || W.rows() != out.size() ||
      (!b.empty() && b.size() != W.rows())) {
    throw std::invalid_argument("affine: shape mismatch");
  }
  const std::size_t n = W.cols();
  const double* w = W.data().data();
  for (std::size_t r = 0; r < W.rows(); ++r) {
    double acc = b.empty() ? 0.0 : b[r];
    const double* wr = w + r * n;
    for (std::size_t c = 0; c < n; ++c) acc += wr[c] * x[c];
    out[r] = acc;
  }
}

std::vector<double> affine(const Tensor& W, std::span<const double> x, std::span<const double> b) {
  std::vector<double> out(W.rank() == 2 ? W.rows() : 0);
  affine(W, x, b, out);
  return out;
}

void affine_backward(const Tensor& W, std::span<const double> x, std::span<const double> dy,
                     Tensor& dW, std::span<double> db, std::span<double> dx) {
  if (W.rank() != 2 || W.cols() != x.size() || W.rows() != dy.size() ||
      dW.shape() != W.shape() || (!db.empty() && db.size() != dy.size()) ||
      (!dx.empty() && dx.size() != x.size())) {
    throw std::invalid_argument("affine_backward: shape mismatch");
  }
  const std::size_t n = W.cols();
  const double* w = W.data().data();
  double* dw = dW.data().data();
  for (std::size_t r = 0; r < W.rows(); ++r) {
    const double g = dy[r];
    if (!db.empty()) db[r] += g;
    if (g == 0.0) continue;
    double* dwr = dw + r * n;
    for (std::size_t c = 0; c < n; ++c) dwr[c] += g * x[c];
    if (!dx.empty()) {
      const double* wr = w + r * n;
      for (std::size_t c = 0; c < n; ++c) dx[c] += g * wr[c];
    }
  }
}

std::vector<double> tanh_elem(std::span<const double> v) {
  std::vector<double> out(v.size());
  std::transform(v.begin(), v.end(), out.begin(), [](double x) { return std::tanh(x); });
  return out;
}

std::vector<double> tanh_backward(std::span<const double> y, std::span<const double> dy) {
  if (y.size() != dy.size()) throw std::invalid_argument("tanh_backward: shape mismatch");
  std::vector<double> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) out[i] = dy[i] * (1.0 - y[i] * y[i]);
  return out;
}

ParamStore finite_diff_grad(const LossFn& loss, ParamStore& params, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("finite_diff_grad: eps must be positive");
  ParamStore out;
  for (const auto& name : params.names()) out.add(name, params.value(name));
  for (const auto& name : params.names()) {
    Tensor& p = params.value(name);
    Tensor& g = out.grad(name);
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double saved = p[i];
      p[i] = saved + eps;
      const double up = loss(params);
      p[i] = saved - eps;
      const double down = loss(params);
      p[i] = saved;
      g[i] = (up - down) / (2.0 * eps);
    }
  }
  return out;
}

}  // namespace attnsum

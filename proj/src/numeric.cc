// Copyright 2026 The gradst Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "gradst/numeric.h"

#include <algorithm>
#include <cmath>
#include <string>

namespace gradst {

Mat::Mat(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Mat::Mat(std::size_t rows, std::size_t cols, Vec data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw InvalidInput("Mat: data length " + std::to_string(data_.size()) +
                       " does not match " + std::to_string(rows_) + "x" +
                       std::to_string(cols_));
  }
}

void Mat::set_zero() { std::fill(data_.begin(), data_.end(), 0.0); }

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InvalidInput("dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

Vec matvec(const Mat& m, std::span<const double> x) {
  if (x.size() != m.cols()) throw InvalidInput("matvec: shape mismatch");
  Vec y(m.rows(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double* row = m.row(r).data();
    double s = 0.0;
    for (std::size_t c = 0; c < m.cols(); ++c) s += row[c] * x[c];
    y[r] = s;
  }
  return y;
}

Vec matvec_transposed(const Mat& m, std::span<const double> x) {
  if (x.size() != m.rows()) {
    throw InvalidInput("matvec_transposed: shape mismatch");
  }
  Vec y(m.cols(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double xr = x[r];
    if (xr == 0.0) continue;
    const double* row = m.row(r).data();
    for (std::size_t c = 0; c < m.cols(); ++c) y[c] += row[c] * xr;
  }
  return y;
}

void add_outer(Mat& m, std::span<const double> a, std::span<const double> b,
               double scale) {
  if (a.size() != m.rows() || b.size() != m.cols()) {
    throw InvalidInput("add_outer: shape mismatch");
  }
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double ar = scale * a[r];
    if (ar == 0.0) continue;
    double* row = m.row(r).data();
    for (std::size_t c = 0; c < m.cols(); ++c) row[c] += ar * b[c];
  }
}

void axpy(double scale, std::span<const double> x, std::span<double> y) {
  if (x.size() != y.size()) throw InvalidInput("axpy: length mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += scale * x[i];
}

Vec mean_rows(const Mat& m) {
  Vec out(m.cols(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r) axpy(1.0, m.row(r), out);
  if (m.rows() > 0) {
    for (double& v : out) v /= static_cast<double>(m.rows());
  }
  return out;
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(),
                     [](double x) { return std::isfinite(x); });
}

Vec softmax(std::span<const double> logits) {
  if (logits.empty()) throw InvalidInput("softmax: empty input");
  if (!all_finite(logits)) throw InvalidInput("softmax: non-finite logit");
  const double top = *std::max_element(logits.begin(), logits.end());
  Vec out(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - top);
    total += out[i];
  }
  for (double& v : out) v /= total;
  return out;
}

Vec softmax_backward(std::span<const double> probs,
                     std::span<const double> grad_probs) {
  const double weighted = dot(probs, grad_probs);
  Vec out(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) {
    out[i] = probs[i] * (grad_probs[i] - weighted);
  }
  return out;
}

double sigmoid(double x) {
  if (!std::isfinite(x)) throw InvalidInput("sigmoid: non-finite input");
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw InvalidInput("cosine: length mismatch");
  const double nu = norm(u);
  const double nv = norm(v);
  if (nu == 0.0 || nv == 0.0) {
    throw DegenerateInput("cosine: zero-norm vector");
  }
  return std::clamp(dot(u, v) / (nu * nv), -1.0, 1.0);
}

CosineGrad cosine_with_grad(std::span<const double> u,
                            std::span<const double> v) {
  if (u.size() != v.size()) throw InvalidInput("cosine: length mismatch");
  const double nu = norm(u);
  const double nv = norm(v);
  if (nu == 0.0 || nv == 0.0) {
    throw DegenerateInput("cosine: zero-norm vector");
  }
  CosineGrad g;
  g.value = dot(u, v) / (nu * nv);
  g.du.resize(u.size());
  g.dv.resize(v.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    g.du[i] = v[i] / (nu * nv) - g.value * u[i] / (nu * nu);
    g.dv[i] = u[i] / (nu * nv) - g.value * v[i] / (nv * nv);
  }
  return g;
}

double cross_entropy(std::span<const double> probs, std::size_t target) {
  if (target >= probs.size()) {
    throw InvalidInput("cross_entropy: target index " +
                       std::to_string(target) + " out of range");
  }
  return -std::log(std::max(probs[target], kProbFloor));
}

double binary_cross_entropy(std::span<const double> scores,
                            std::span<const std::uint8_t> targets) {
  if (scores.size() != targets.size()) {
    throw InvalidInput("binary_cross_entropy: length mismatch");
  }
  if (scores.empty()) throw InvalidInput("binary_cross_entropy: empty input");
  double total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double s = std::clamp(scores[i], kProbFloor, 1.0 - kProbFloor);
    total -= targets[i] ? std::log(s) : std::log(1.0 - s);
  }
  return total / static_cast<double>(scores.size());
}

Vec gaussian_sample(Rng& rng, std::size_t dim, double variance) {
  if (!(variance >= 0.0)) {
    throw InvalidInput("gaussian_sample: negative variance");
  }
  Vec out(dim, 0.0);
  if (variance == 0.0) return out;
  const double sd = std::sqrt(variance);
  for (double& v : out) v = sd * rng.normal();
  return out;
}

Vec finite_difference_grad(const ScalarFn& f, std::span<const double> x,
                           double eps) {
  if (!(eps >= 1e-7 && eps <= 1e-3)) {
    throw InvalidInput("finite_difference_grad: eps outside [1e-7, 1e-3]");
  }
  Vec probe(x.begin(), x.end());
  Vec grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = probe[i];
    probe[i] = saved + eps;
    const double up = f(probe);
    probe[i] = saved - eps;
    const double down = f(probe);
    probe[i] = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw InvalidInput("finite_difference_grad: non-finite evaluation at " +
                         std::to_string(i));
    }
    grad[i] = (up - down) / (2.0 * eps);
  }
  return grad;
}

double relative_error(std::span<const double> a, std::span<const double> b,
                      double floor) {
  if (a.size() != b.size()) {
    throw InvalidInput("relative_error: length mismatch");
  }
  double diff = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff += (a[i] - b[i]) * (a[i] - b[i]);
  }
  const double scale = std::max({norm(a), norm(b), floor});
  return std::sqrt(diff) / scale;
}

}  // namespace gradst

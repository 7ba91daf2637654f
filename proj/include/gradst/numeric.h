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

// Dense 64-bit kernel shared by every model in the project. Gradients are
// derived by hand; finite_difference_grad is the oracle they are checked
// against.

#ifndef GRADST_NUMERIC_H_
#define GRADST_NUMERIC_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "gradst/rng.h"

namespace gradst {

using Vec = std::vector<double>;

class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Raised for inputs a formula is undefined on, e.g. a zero-norm vector in a
// cosine. Callers must not turn this into a silent zero score.
class DegenerateInput : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

inline constexpr double kProbFloor = 1e-12;

// Row-major matrix.
class Mat {
 public:
  Mat() = default;
  Mat(std::size_t rows, std::size_t cols, double fill = 0.0);
  Mat(std::size_t rows, std::size_t cols, Vec data);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) {
    return data_[r * cols_ + c];
  }
  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }

  std::span<double> row(std::size_t r) {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> flat() { return data_; }
  std::span<const double> flat() const { return data_; }
  const Vec& data() const { return data_; }

  void set_zero();

  bool operator==(const Mat&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  Vec data_;
};

double dot(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> a);
// y = m x
Vec matvec(const Mat& m, std::span<const double> x);
// y = m^T x
Vec matvec_transposed(const Mat& m, std::span<const double> x);
// m += scale * a b^T
void add_outer(Mat& m, std::span<const double> a, std::span<const double> b,
               double scale = 1.0);
// y += scale * x
void axpy(double scale, std::span<const double> x, std::span<double> y);
Vec mean_rows(const Mat& m);

bool all_finite(std::span<const double> v);

// Max-subtracted softmax. Throws InvalidInput on empty or non-finite input.
Vec softmax(std::span<const double> logits);
// Jacobian-vector product of softmax: given p = softmax(z) and dL/dp,
// returns dL/dz.
Vec softmax_backward(std::span<const double> probs,
                     std::span<const double> grad_probs);

double sigmoid(double x);

// Throws DegenerateInput when either vector has zero norm.
double cosine(std::span<const double> u, std::span<const double> v);

struct CosineGrad {
  double value = 0.0;
  Vec du;
  Vec dv;
};
CosineGrad cosine_with_grad(std::span<const double> u,
                            std::span<const double> v);

// -ln(max(probs[target], 1e-12)).
double cross_entropy(std::span<const double> probs, std::size_t target);

// Mean over dimensions of -[t ln s + (1-t) ln(1-s)] with s clamped to
// [1e-12, 1 - 1e-12].
double binary_cross_entropy(std::span<const double> scores,
                            std::span<const std::uint8_t> targets);

// dim i.i.d. draws from N(0, variance).
Vec gaussian_sample(Rng& rng, std::size_t dim, double variance);

using ScalarFn = std::function<double(std::span<const double>)>;

// Central differences, one coordinate at a time. eps must lie in
// [1e-7, 1e-3].
Vec finite_difference_grad(const ScalarFn& f, std::span<const double> x,
                           double eps);

// ||a - b|| / max(||a||, ||b||, floor). Used to compare an analytic
// gradient against finite differences as a whole vector.
double relative_error(std::span<const double> a, std::span<const double> b,
                      double floor = 1e-300);

}  // namespace gradst

#endif  // GRADST_NUMERIC_H_

// Copyright (c) 2026 SDPN-DR Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SDPN_NUMERICS_H_
#define SDPN_NUMERICS_H_

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace sdpn {

using RealVector = std::vector<double>;

// Column-norm floor for the normalized covariance and L2 normalization.
inline constexpr double kColumnEpsilon = 1e-12;
// Distance floor used when two embeddings coincide.
inline constexpr double kDuplicateEpsilon = 1e-12;

// Dense row-major double matrix. A default-constructed matrix is empty
// (0 x 0); every sized matrix has rows >= 1 and cols >= 1.
class RealMatrix {
 public:
  RealMatrix() = default;
  RealMatrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  RealMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static RealMatrix FromRows(const std::vector<RealVector>& rows);
  static RealMatrix Identity(std::size_t dim);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) {
    return data_[r * cols_ + c];
  }
  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }

  std::span<double> Row(std::size_t r) {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<const double> Row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  const std::vector<double>& values() const { return data_; }

  bool SameShape(const RealMatrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  bool AllFinite() const;

  RealMatrix Transpose() const;
  // this += scale * other
  void AddScaled(const RealMatrix& other, double scale);
  void Scale(double factor);
  void SetZero();

  bool operator==(const RealMatrix& other) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

double Dot(std::span<const double> a, std::span<const double> b);
double Norm(std::span<const double> v);

struct CovarianceOptions {
  // Replace column norms below kColumnEpsilon by the floor instead of
  // failing with ZeroVarianceColumn. Used on the training path.
  bool floor_zero_columns = false;
  // Subtract the batch mean of every column first. The default is the
  // raw second-moment form.
  bool centered = false;
};

// C_ij = sum_b z_bi z_bj / (|z_i| |z_j|), computed along the batch (row)
// dimension. The result is exactly symmetric.
RealMatrix NormalizedCovariance(const RealMatrix& batch,
                                const CovarianceOptions& options = {});

// Gradient of a scalar L(C) with respect to the batch, given dL/dC.
// grad_c is treated as a full d x d matrix (no symmetry assumed).
RealMatrix NormalizedCovarianceBackward(const RealMatrix& batch,
                                        const RealMatrix& grad_c,
                                        const CovarianceOptions& options = {});

// sqrt(sum_ij m_ij^2), diagonal included.
double FrobeniusNorm(const RealMatrix& m);

struct Neighbor {
  std::size_t index = 0;
  double distance = 0.0;
};

// Nearest other row of `batch` to row u (ties go to the lower index).
Neighbor NearestNeighbor(const RealMatrix& batch, std::size_t u);

// min_{v != u} |x_u - x_v|. Throws DuplicateEmbedding when the minimum is
// below kDuplicateEpsilon.
double PairwiseMinDistance(const RealMatrix& batch, std::size_t u);

RealVector Softmax(std::span<const double> logits, double temperature);
RealVector L2Normalize(std::span<const double> v);

// Central differences (f(x + h e_ij) - f(x - h e_ij)) / 2h for every entry.
RealMatrix FiniteDiffGradient(
    const std::function<double(const RealMatrix&)>& f, const RealMatrix& at,
    double step);

// max_ij |a_ij - b_ij| / max(|a_ij|, |b_ij|, floor). The floor keeps
// entries whose true value is zero from dividing FD noise by ~0.
double MaxRelativeError(const RealMatrix& analytic, const RealMatrix& numeric,
                        double floor = 1e-6);

}  // namespace sdpn

#endif  // SDPN_NUMERICS_H_

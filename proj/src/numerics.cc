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

#include "sdpn/numerics.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "sdpn/error.h"

namespace sdpn {

RealMatrix::RealMatrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {
  if (rows == 0 || cols == 0) {
    Fail(ErrorCode::kShapeMismatch, "matrix dimensions must be positive");
  }
}

RealMatrix::RealMatrix(std::size_t rows, std::size_t cols,
                       std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (rows == 0 || cols == 0 || data_.size() != rows * cols) {
    Fail(ErrorCode::kShapeMismatch,
         "data length " + std::to_string(data_.size()) + " does not match " +
             std::to_string(rows) + "x" + std::to_string(cols));
  }
}

RealMatrix RealMatrix::FromRows(const std::vector<RealVector>& rows) {
  if (rows.empty() || rows[0].empty()) {
    Fail(ErrorCode::kShapeMismatch, "FromRows needs a non-empty row list");
  }
  RealMatrix m(rows.size(), rows[0].size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != m.cols()) {
      Fail(ErrorCode::kShapeMismatch, "ragged rows");
    }
    std::copy(rows[r].begin(), rows[r].end(), m.Row(r).begin());
  }
  return m;
}

RealMatrix RealMatrix::Identity(std::size_t dim) {
  RealMatrix m(dim, dim);
  for (std::size_t i = 0; i < dim; ++i) m(i, i) = 1.0;
  return m;
}

bool RealMatrix::AllFinite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double x) { return std::isfinite(x); });
}

RealMatrix RealMatrix::Transpose() const {
  RealMatrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

void RealMatrix::AddScaled(const RealMatrix& other, double scale) {
  if (!SameShape(other)) {
    Fail(ErrorCode::kShapeMismatch, "AddScaled shape mismatch");
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += scale * other.data_[i];
}

void RealMatrix::Scale(double factor) {
  for (double& x : data_) x *= factor;
}

void RealMatrix::SetZero() { std::fill(data_.begin(), data_.end(), 0.0); }

double Dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    Fail(ErrorCode::kShapeMismatch, "dot product length mismatch");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double Norm(std::span<const double> v) { return std::sqrt(Dot(v, v)); }

namespace {

struct NormalizedColumns {
  RealMatrix unit;                  // n x d, columns scaled by 1 / norm
  std::vector<double> norm;         // effective (possibly floored) norms
  std::vector<bool> floored;
};

NormalizedColumns NormalizeColumns(const RealMatrix& batch,
                                   const CovarianceOptions& options) {
  if (batch.rows() < 2) {
    Fail(ErrorCode::kBatchTooSmall,
         "normalized covariance needs at least 2 rows");
  }
  const std::size_t n = batch.rows(), d = batch.cols();
  RealMatrix z = batch;
  if (options.centered) {
    for (std::size_t j = 0; j < d; ++j) {
      double mean = 0.0;
      for (std::size_t b = 0; b < n; ++b) mean += z(b, j);
      mean /= static_cast<double>(n);
      for (std::size_t b = 0; b < n; ++b) z(b, j) -= mean;
    }
  }
  NormalizedColumns out{std::move(z), std::vector<double>(d),
                        std::vector<bool>(d, false)};
  for (std::size_t j = 0; j < d; ++j) {
    double ss = 0.0;
    for (std::size_t b = 0; b < n; ++b) ss += out.unit(b, j) * out.unit(b, j);
    double norm = std::sqrt(ss);
    if (norm < kColumnEpsilon) {
      if (!options.floor_zero_columns) {
        Fail(ErrorCode::kZeroVarianceColumn,
             "column " + std::to_string(j) + " has norm " +
                 std::to_string(norm));
      }
      norm = kColumnEpsilon;
      out.floored[j] = true;
    }
    out.norm[j] = norm;
    for (std::size_t b = 0; b < n; ++b) out.unit(b, j) /= norm;
  }
  return out;
}

}  // namespace

RealMatrix NormalizedCovariance(const RealMatrix& batch,
                                const CovarianceOptions& options) {
  const NormalizedColumns cols = NormalizeColumns(batch, options);
  const std::size_t n = batch.rows(), d = batch.cols();
  RealMatrix c(d, d);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = i; j < d; ++j) {
      double s = 0.0;
      for (std::size_t b = 0; b < n; ++b) s += cols.unit(b, i) * cols.unit(b, j);
      c(i, j) = s;
      c(j, i) = s;
    }
  }
  return c;
}

RealMatrix NormalizedCovarianceBackward(const RealMatrix& batch,
                                        const RealMatrix& grad_c,
                                        const CovarianceOptions& options) {
  const std::size_t n = batch.rows(), d = batch.cols();
  if (grad_c.rows() != d || grad_c.cols() != d) {
    Fail(ErrorCode::kShapeMismatch, "grad_c must be d x d");
  }
  const NormalizedColumns cols = NormalizeColumns(batch, options);
  const RealMatrix& y = cols.unit;

  // C = Y^T Y  =>  dL/dY = Y (G + G^T).
  RealMatrix g_sym(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) g_sym(i, j) = grad_c(i, j) + grad_c(j, i);
  RealMatrix grad_y(n, d);
  for (std::size_t b = 0; b < n; ++b) {
    for (std::size_t k = 0; k < d; ++k) {
      const double ybk = y(b, k);
      if (ybk == 0.0) continue;
      for (std::size_t j = 0; j < d; ++j) grad_y(b, j) += ybk * g_sym(k, j);
    }
  }

  // y_j = z_j / |z_j|  =>  dz_j = (dy_j - y_j <y_j, dy_j>) / |z_j|.
  RealMatrix grad_z(n, d);
  for (std::size_t j = 0; j < d; ++j) {
    double proj = 0.0;
    if (!cols.floored[j]) {
      for (std::size_t b = 0; b < n; ++b) proj += y(b, j) * grad_y(b, j);
    }
    for (std::size_t b = 0; b < n; ++b) {
      grad_z(b, j) = (grad_y(b, j) - y(b, j) * proj) / cols.norm[j];
    }
  }
  if (options.centered) {
    for (std::size_t j = 0; j < d; ++j) {
      double mean = 0.0;
      for (std::size_t b = 0; b < n; ++b) mean += grad_z(b, j);
      mean /= static_cast<double>(n);
      for (std::size_t b = 0; b < n; ++b) grad_z(b, j) -= mean;
    }
  }
  return grad_z;
}

double FrobeniusNorm(const RealMatrix& m) {
  double s = 0.0;
  for (double x : m.data()) s += x * x;
  return std::sqrt(s);
}

Neighbor NearestNeighbor(const RealMatrix& batch, std::size_t u) {
  if (batch.rows() < 2) {
    Fail(ErrorCode::kBatchTooSmall, "nearest neighbor needs at least 2 rows");
  }
  if (u >= batch.rows()) {
    Fail(ErrorCode::kShapeMismatch, "row index out of range");
  }
  Neighbor best{0, std::numeric_limits<double>::infinity()};
  const auto xu = batch.Row(u);
  for (std::size_t v = 0; v < batch.rows(); ++v) {
    if (v == u) continue;
    const auto xv = batch.Row(v);
    double ss = 0.0;
    for (std::size_t k = 0; k < xu.size(); ++k) {
      const double diff = xu[k] - xv[k];
      ss += diff * diff;
    }
    const double dist = std::sqrt(ss);
    if (dist < best.distance) best = {v, dist};
  }
  return best;
}

double PairwiseMinDistance(const RealMatrix& batch, std::size_t u) {
  const Neighbor nn = NearestNeighbor(batch, u);
  if (nn.distance < kDuplicateEpsilon) {
    Fail(ErrorCode::kDuplicateEmbedding,
         "rows " + std::to_string(u) + " and " + std::to_string(nn.index) +
             " coincide");
  }
  return nn.distance;
}

RealVector Softmax(std::span<const double> logits, double temperature) {
  if (!(temperature > 0.0)) {
    Fail(ErrorCode::kNonPositiveTemperature,
         "temperature " + std::to_string(temperature));
  }
  if (logits.empty()) {
    Fail(ErrorCode::kShapeMismatch, "softmax of an empty vector");
  }
  const double max_logit = *std::max_element(logits.begin(), logits.end());
  RealVector p(logits.size());
  double total = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    p[k] = std::exp((logits[k] - max_logit) / temperature);
    total += p[k];
  }
  for (double& x : p) x /= total;
  return p;
}

RealVector L2Normalize(std::span<const double> v) {
  const double norm = Norm(v);
  if (!(norm > kColumnEpsilon)) {
    Fail(ErrorCode::kZeroVector, "cannot normalize a zero vector");
  }
  RealVector out(v.begin(), v.end());
  for (double& x : out) x /= norm;
  return out;
}

RealMatrix FiniteDiffGradient(
    const std::function<double(const RealMatrix&)>& f, const RealMatrix& at,
    double step) {
  if (!(step > 0.0)) {
    Fail(ErrorCode::kInvalidConfig, "finite difference step must be positive");
  }
  RealMatrix grad(at.rows(), at.cols());
  RealMatrix x = at;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x.data()[i];
    x.data()[i] = orig + step;
    const double plus = f(x);
    x.data()[i] = orig - step;
    const double minus = f(x);
    x.data()[i] = orig;
    grad.data()[i] = (plus - minus) / (2.0 * step);
  }
  return grad;
}

double MaxRelativeError(const RealMatrix& analytic, const RealMatrix& numeric,
                        double floor) {
  if (!analytic.SameShape(numeric)) {
    Fail(ErrorCode::kShapeMismatch, "gradient shapes differ");
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double a = analytic.data()[i], b = numeric.data()[i];
    const double denom = std::max({std::abs(a), std::abs(b), floor});
    worst = std::max(worst, std::abs(a - b) / denom);
  }
  return worst;
}

}  // namespace sdpn

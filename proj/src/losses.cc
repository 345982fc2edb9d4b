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

#include "sdpn/losses.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "sdpn/error.h"

namespace sdpn {

void LossWeights::Validate() const {
  if (!(mu >= 0.0) || !(lambda >= 0.0)) {
    Fail(ErrorCode::kInvalidConfig, "loss weights must be non-negative");
  }
}

const char* RegularizerName(RegularizerKind kind) {
  switch (kind) {
    case RegularizerKind::kNone: return "none";
    case RegularizerKind::kOffDiagonal: return "off_diagonal";
    case RegularizerKind::kFrobenius: return "frobenius";
  }
  return "none";
}

RegularizerKind ParseRegularizer(const std::string& name) {
  if (name == "none") return RegularizerKind::kNone;
  if (name == "off_diagonal") return RegularizerKind::kOffDiagonal;
  if (name == "frobenius") return RegularizerKind::kFrobenius;
  Fail(ErrorCode::kInvalidConfig, "unknown regularizer '" + name + "'");
}

double CrossEntropyValue(const RealMatrix& p_teacher,
                         const RealMatrix& p_student) {
  if (p_teacher.cols() != p_student.cols()) {
    Fail(ErrorCode::kDistributionLengthMismatch,
         std::to_string(p_teacher.cols()) + " vs " +
             std::to_string(p_student.cols()));
  }
  double total = 0.0;
  for (std::size_t g = 0; g < p_teacher.rows(); ++g) {
    for (std::size_t l = 0; l < p_student.rows(); ++l) {
      for (std::size_t k = 0; k < p_teacher.cols(); ++k) {
        total -= p_teacher(g, k) *
                 std::log(std::max(p_student(l, k), kProbabilityFloor));
      }
    }
  }
  return total;
}

LossValue CrossEntropyLoss(const RealMatrix& p_teacher,
                           const RealMatrix& student_logits,
                           double student_temperature) {
  if (p_teacher.cols() != student_logits.cols()) {
    Fail(ErrorCode::kDistributionLengthMismatch,
         std::to_string(p_teacher.cols()) + " vs " +
             std::to_string(student_logits.cols()));
  }
  const std::size_t num_local = student_logits.rows();
  const std::size_t num_global = p_teacher.rows();
  const std::size_t k_dim = p_teacher.cols();
  RealMatrix p_student(num_local, k_dim);
  for (std::size_t l = 0; l < num_local; ++l) {
    const RealVector p = Softmax(student_logits.Row(l), student_temperature);
    std::copy(p.begin(), p.end(), p_student.Row(l).begin());
  }

  LossValue out;
  out.value = CrossEntropyValue(p_teacher, p_student);
  out.gradient = RealMatrix(num_local, k_dim);
  for (std::size_t l = 0; l < num_local; ++l) {
    for (std::size_t k = 0; k < k_dim; ++k) {
      double g = 0.0;
      for (std::size_t t = 0; t < num_global; ++t) {
        g += p_student(l, k) - p_teacher(t, k);
      }
      out.gradient(l, k) = g / student_temperature;
    }
  }
  return out;
}

LossValue DiversityRegularization(const RealMatrix& batch,
                                  const DiversityOptions& options) {
  const std::size_t n = batch.rows();
  if (n < 2) {
    Fail(ErrorCode::kBatchTooSmall, "diversity regularization needs n >= 2");
  }
  const double scale =
      options.eq2_literal ? -1.0 : -1.0 / static_cast<double>(n);
  LossValue out;
  out.gradient = RealMatrix(n, batch.cols());
  double sum_log = 0.0;
  for (std::size_t u = 0; u < n; ++u) {
    const Neighbor nn = NearestNeighbor(batch, u);
    if (nn.distance < kDuplicateEpsilon) {
      sum_log += std::log(kDuplicateEpsilon);
      continue;  // floored: locally constant
    }
    sum_log += std::log(nn.distance);
    const double inv_sq = 1.0 / (nn.distance * nn.distance);
    for (std::size_t k = 0; k < batch.cols(); ++k) {
      const double g = scale * (batch(u, k) - batch(nn.index, k)) * inv_sq;
      out.gradient(u, k) += g;
      out.gradient(nn.index, k) -= g;
    }
  }
  out.value = scale * sum_log;
  return out;
}

namespace {

void CheckPair(const RealMatrix& teacher, const RealMatrix& student) {
  if (teacher.cols() != student.cols()) {
    Fail(ErrorCode::kShapeMismatch,
         "teacher and student embeddings differ in dimension");
  }
}

struct SingleRegularizer {
  double value;
  RealMatrix gradient;
};

SingleRegularizer OffDiagonalSingle(const RealMatrix& batch,
                                    const CovarianceOptions& options) {
  const RealMatrix c = NormalizedCovariance(batch, options);
  const std::size_t d = c.rows();
  RealMatrix grad_c(d, d);
  double value = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      if (i == j) continue;
      value += c(i, j) * c(i, j);
      grad_c(i, j) = 2.0 * c(i, j);
    }
  }
  return {value, NormalizedCovarianceBackward(batch, grad_c, options)};
}

SingleRegularizer FrobeniusSingle(const RealMatrix& batch,
                                  const CovarianceOptions& options) {
  const RealMatrix c = NormalizedCovariance(batch, options);
  const double norm = FrobeniusNorm(c);
  // d log|C|_F / dC = C / |C|_F^2. Off the diagonal this is FrobeniusGradWrtC
  // whenever diag(C) = 1; the diagonal term only matters for floored columns.
  RealMatrix grad_c = c;
  grad_c.Scale(1.0 / (norm * norm));
  return {std::log(norm), NormalizedCovarianceBackward(batch, grad_c, options)};
}

}  // namespace

PairLossValue OffDiagonalRegularization(const RealMatrix& teacher_batch,
                                        const RealMatrix& student_batch,
                                        const CovarianceOptions& options) {
  CheckPair(teacher_batch, student_batch);
  SingleRegularizer tea = OffDiagonalSingle(teacher_batch, options);
  SingleRegularizer stu = OffDiagonalSingle(student_batch, options);
  return {tea.value + stu.value, std::move(tea.gradient),
          std::move(stu.gradient)};
}

PairLossValue FrobeniusRegularization(const RealMatrix& teacher_batch,
                                      const RealMatrix& student_batch,
                                      const CovarianceOptions& options) {
  CheckPair(teacher_batch, student_batch);
  SingleRegularizer tea = FrobeniusSingle(teacher_batch, options);
  SingleRegularizer stu = FrobeniusSingle(student_batch, options);
  return {tea.value + stu.value, std::move(tea.gradient),
          std::move(stu.gradient)};
}

RealMatrix FrobeniusGradWrtC(const RealMatrix& c) {
  if (c.rows() != c.cols()) {
    Fail(ErrorCode::kShapeMismatch, "covariance must be square");
  }
  const std::size_t d = c.rows();
  double off_sq = 0.0;
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j)
      if (i != j) off_sq += c(i, j) * c(i, j);
  const double denom = static_cast<double>(d) + off_sq;
  RealMatrix g(d, d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j)
      if (i != j) g(i, j) = c(i, j) / denom;
  return g;
}

PairLossValue DimensionRegularization(RegularizerKind kind,
                                      const RealMatrix& teacher_batch,
                                      const RealMatrix& student_batch,
                                      const CovarianceOptions& options) {
  switch (kind) {
    case RegularizerKind::kOffDiagonal:
      return OffDiagonalRegularization(teacher_batch, student_batch, options);
    case RegularizerKind::kFrobenius:
      return FrobeniusRegularization(teacher_batch, student_batch, options);
    case RegularizerKind::kNone:
      break;
  }
  CheckPair(teacher_batch, student_batch);
  return {0.0, RealMatrix(teacher_batch.rows(), teacher_batch.cols()),
          RealMatrix(student_batch.rows(), student_batch.cols())};
}

namespace {

LossValue Combine(const LossValue& base, const LossValue& extra,
                  double weight) {
  LossValue out;
  out.value = base.value + weight * extra.value;
  if (base.gradient.empty()) {
    out.gradient = extra.gradient;
    if (!out.gradient.empty()) out.gradient.Scale(weight);
  } else {
    out.gradient = base.gradient;
    if (!extra.gradient.empty()) out.gradient.AddScaled(extra.gradient, weight);
  }
  return out;
}

}  // namespace

LossValue SdpnLoss(const LossValue& ce, const LossValue& re,
                   const LossWeights& weights) {
  weights.Validate();
  return Combine(ce, re, weights.mu);
}

LossValue TotalLoss(const LossValue& sdpn, const LossValue& dr,
                    const LossWeights& weights) {
  weights.Validate();
  return Combine(sdpn, dr, weights.lambda);
}

}  // namespace sdpn

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

#ifndef SDPN_LOSSES_H_
#define SDPN_LOSSES_H_

#include <string>

#include "sdpn/numerics.h"

namespace sdpn {

// Floor applied to probabilities inside log() for the cross-entropy.
inline constexpr double kProbabilityFloor = 1e-12;

// A scalar objective and its gradient with respect to one input. The
// gradient may be empty when the loss has no differentiable input.
struct LossValue {
  double value = 0.0;
  RealMatrix gradient;
};

// Dimension regularizers see a teacher and a student batch.
struct PairLossValue {
  double value = 0.0;
  RealMatrix teacher_gradient;
  RealMatrix student_gradient;
};

struct LossWeights {
  double mu = 0.1;       // diversity regularization weight
  double lambda = 0.05;  // dimension regularization weight

  void Validate() const;
};

enum class RegularizerKind { kNone, kOffDiagonal, kFrobenius };

const char* RegularizerName(RegularizerKind kind);
RegularizerKind ParseRegularizer(const std::string& name);

// Cross-entropy between teacher distributions and student distributions,
// summed over every (teacher row, student row) pair:
//   sum_g sum_l -sum_k p_teacher[g][k] log p_student[l][k].
// Rows are views; columns are prototypes.
double CrossEntropyValue(const RealMatrix& p_teacher,
                         const RealMatrix& p_student);

// Same objective with student distributions given as softmax(logits / tau).
// The gradient is with respect to the student logits (L x K):
//   dL/dz_l = sum_g (p_student_l - p_teacher_g) / tau.
// Teacher distributions are constants.
LossValue CrossEntropyLoss(const RealMatrix& p_teacher,
                           const RealMatrix& student_logits,
                           double student_temperature);

struct DiversityOptions {
  // Keep the printed double sum, which scales every row term by n.
  bool eq2_literal = false;
};

// -(1/n) sum_u log(min_{v != u} |x_u - x_v|) with distances floored at
// kDuplicateEpsilon. The gradient flows into each row and its nearest
// neighbour.
LossValue DiversityRegularization(const RealMatrix& batch,
                                  const DiversityOptions& options = {});

// sum_{i != j} (C^tea_ij)^2 + sum_{i != j} (C^stu_ij)^2
PairLossValue OffDiagonalRegularization(const RealMatrix& teacher_batch,
                                        const RealMatrix& student_batch,
                                        const CovarianceOptions& options = {});

// log |C^tea|_F + log |C^stu|_F
PairLossValue FrobeniusRegularization(const RealMatrix& teacher_batch,
                                      const RealMatrix& student_batch,
                                      const CovarianceOptions& options = {});

// dL_FDR/dC for a unit-diagonal C: C_ij / (D + sum_{i != j} C_ij^2) off the
// diagonal and 0 on it.
RealMatrix FrobeniusGradWrtC(const RealMatrix& c);

PairLossValue DimensionRegularization(RegularizerKind kind,
                                      const RealMatrix& teacher_batch,
                                      const RealMatrix& student_batch,
                                      const CovarianceOptions& options = {});

// ce + mu * re. Gradients are combined when both are present, which
// requires them to be taken with respect to the same input.
LossValue SdpnLoss(const LossValue& ce, const LossValue& re,
                   const LossWeights& weights);

// sdpn + lambda * dr, gradients combined the same way.
LossValue TotalLoss(const LossValue& sdpn, const LossValue& dr,
                    const LossWeights& weights);

}  // namespace sdpn

#endif  // SDPN_LOSSES_H_

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

#ifndef SDPN_TRAINER_H_
#define SDPN_TRAINER_H_

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "sdpn/data.h"
#include "sdpn/losses.h"
#include "sdpn/model.h"

namespace sdpn {

struct TrainConfig {
  int epochs = 60;
  int batch_size = 32;
  double lr_peak = 0.05;
  double lr_final = 1e-5;
  int warmup_epochs = 5;
  double momentum = 0.9;
  LossWeights weights;
  RegularizerKind regularizer = RegularizerKind::kNone;
  bool centered_covariance = false;
  bool eq2_literal = false;
  CropConfig crops;
  MaskConfig mask{1, 1, 5};
  std::uint64_t seed = 1;

  void Validate() const;
};

// Linear warm-up from 0 to lr_peak over warmup_steps, then cosine decay
// to lr_final at total_steps.
double LearningRateAt(std::int64_t step, std::int64_t total_steps,
                      std::int64_t warmup_steps, double lr_peak,
                      double lr_final);

// Teacher EMA momentum: cosine ramp from base (step 0) to final.
double EmaMomentumAt(std::int64_t step, std::int64_t total_steps, double base,
                     double final_value);

struct CollapseDiagnostics {
  double mean_abs_offdiag = 0.0;
  double embedding_std = 0.0;
  double prototype_usage_entropy = 0.0;
};

// student_global: n x d embeddings. teacher_distributions: n x K rows.
CollapseDiagnostics Diagnostics(const RealMatrix& student_global,
                                const RealMatrix& teacher_distributions);

struct ObjectiveOptions {
  LossWeights weights;
  RegularizerKind regularizer = RegularizerKind::kNone;
  CovarianceOptions covariance{true, false};
  DiversityOptions diversity;
};

struct ObjectiveTerms {
  double ce = 0.0;     // mean over batch items of the view-pair sum
  double re = 0.0;
  double dr = 0.0;
  double total = 0.0;  // ce + mu * re + lambda * dr
};

struct ObjectiveResult {
  ObjectiveTerms terms;
  Branch student_grad;
  RealMatrix prototype_grad;
  MultiViewOutput forward;
};

// Full objective on one batch with gradients for the student branch and
// the prototypes.
// Teacher parameters receive no gradient; `fixed_teacher` additionally
// pins the teacher targets (see TeacherForward).
ObjectiveResult EvaluateObjective(const TeacherStudentPair& pair,
                                  std::span<const CropSet> batch,
                                  const ObjectiveOptions& options,
                                  const TeacherOutputs* fixed_teacher = nullptr);

ObjectiveOptions ObjectiveOptionsFor(const TrainConfig& config);

struct TrainState {
  TeacherStudentPair pair;
  // SGD momentum buffers, aligned with pair.StudentParameters().
  std::vector<RealMatrix> velocity;
  int epochs_done = 0;
  std::int64_t step = 0;
};

TrainState InitTrainState(const ModelConfig& model_config);

struct EpochRecord {
  int epoch = 0;  // 1-based
  int steps = 0;
  double lr = 0.0;  // at the last step of the epoch
  ObjectiveTerms mean_terms;
  CollapseDiagnostics diagnostics;
};

using EpochCallback =
    std::function<void(const TrainState& state, const EpochRecord& record)>;

// Runs epochs state.epochs_done + 1 .. cfg.epochs, or stops after
// `stop_after_epoch` when it is positive. Every random draw of an epoch
// comes from a generator seeded by (cfg.seed, epoch), so resuming from a
// saved state reproduces an uninterrupted run bit for bit.
std::vector<EpochRecord> Train(std::span<const UnlabeledUtterance> corpus,
                               TrainState& state, const TrainConfig& cfg,
                               const EpochCallback& on_epoch_end = {},
                               int stop_after_epoch = -1);

// Collapse diagnostics over a corpus using the first len_global frames of
// each utterance.
CollapseDiagnostics CorpusDiagnostics(
    const TeacherStudentPair& pair, std::span<const UnlabeledUtterance> corpus,
    int len_global);

Checkpoint StateToCheckpoint(const TrainState& state,
                             const std::string& config_json);
TrainState StateFromCheckpoint(const Checkpoint& ckpt,
                               const ModelConfig& model_config);

}  // namespace sdpn

#endif  // SDPN_TRAINER_H_

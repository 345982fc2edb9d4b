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

#ifndef SDPN_MODEL_H_
#define SDPN_MODEL_H_

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sdpn/data.h"
#include "sdpn/numerics.h"

namespace sdpn {

struct ModelConfig {
  int feature_dim = 24;
  int encoder_hidden = 64;
  int embedding_dim = 64;
  int proj_hidden1 = 128;
  int proj_hidden2 = 128;
  int proj_dim = 32;
  int num_prototypes = 64;
  double student_temperature = 0.1;
  double teacher_temperature = 0.04;
  bool teacher_centering = true;
  double center_momentum = 0.9;
  // Teacher EMA momentum follows a cosine ramp from ema_base to ema_final.
  double ema_base = 0.996;
  double ema_final = 1.0;
  std::uint64_t init_seed = 7;

  void Validate() const;
};

// Fully connected layer y = W x + b, W is out x in, b is 1 x out.
struct Dense {
  RealMatrix weight;
  RealMatrix bias;
};

// One side of the teacher/student pair: a tanh frame encoder with
// mean + standard deviation pooling and a linear embedding layer (the
// backbone), followed by a three-layer projection head and L2
// normalization.
struct Branch {
  Dense frame;   // F -> H, tanh
  Dense embed;   // 2H -> d_emb (speaker embedding)
  Dense proj1;   // d_emb -> h1, tanh
  Dense proj2;   // h1 -> h2, tanh
  Dense proj3;   // h2 -> d_proj, then L2 normalization

  std::vector<std::pair<std::string, RealMatrix*>> NamedParameters();
  std::vector<std::pair<std::string, const RealMatrix*>> NamedParameters()
      const;
};

Branch InitBranch(const ModelConfig& config, std::uint64_t seed);
Branch ZerosLike(const Branch& branch);

// Intermediate values kept for the backward pass of one view.
struct ViewCache {
  const RealMatrix* input = nullptr;  // not owned
  RealMatrix hidden;                  // T x H, after tanh
  RealVector mean, stddev;            // H each
  RealVector pooled;                  // 2H
  RealVector embedding;               // d_emb
  RealVector act1, act2;              // projection hidden activations
  RealVector out;                     // pre-normalization projection
  double out_norm = 0.0;
  RealVector projected;               // unit norm
};

struct EmbedOutput {
  RealVector embedding;  // backbone output, used for scoring
  RealVector projected;  // unit-norm head output
};

EmbedOutput ForwardEmbed(const Branch& branch, const RealMatrix& frames,
                         ViewCache* cache = nullptr);

// Accumulates parameter gradients into `grads` given dL/dprojected.
// grad_embedding, when non-empty, adds a direct gradient on the backbone
// output.
void BackwardEmbed(const Branch& branch, const ViewCache& cache,
                   std::span<const double> grad_projected,
                   std::span<const double> grad_embedding, Branch* grads);

// softmax((C_k . projected - center_k) / temperature) over the K rows of
// `bank`. Pass an empty center to skip centering.
RealVector PrototypeDistribution(std::span<const double> projected,
                                 const RealMatrix& bank, double temperature,
                                 std::span<const double> center = {});

// Raw prototype logits C . projected.
RealVector PrototypeLogits(std::span<const double> projected,
                           const RealMatrix& bank);

struct TeacherStudentPair {
  ModelConfig config;
  Branch student;
  Branch teacher;
  RealMatrix prototypes;  // K x d_proj, rows unit norm, shared
  RealVector center;      // K, teacher centering

  std::vector<std::pair<std::string, RealMatrix*>> StudentParameters();
};

// Student initialized from config.init_seed; teacher starts as a copy;
// prototype rows are random unit vectors.
TeacherStudentPair InitPair(const ModelConfig& config);

// teacher <- m * teacher + (1 - m) * student for every parameter.
void EmaUpdate(TeacherStudentPair& pair, double momentum);

void NormalizePrototypeRows(RealMatrix& bank);

// Forward pass over a batch of crop sets. The teacher sees only global
// views; the student sees local views (for the prototype cross-entropy)
// and global views (for the covariance path).
struct MultiViewOutput {
  std::vector<RealMatrix> p_teacher;       // per item: G x K
  std::vector<RealMatrix> teacher_logits;  // per item: G x K, uncentered
  std::vector<RealMatrix> student_logits;  // per item: L x K, unscaled
  RealMatrix teacher_global;               // (B*G) x d_proj
  RealMatrix student_global;               // (B*G) x d_proj
  // Student caches: per item local views, then per item global views.
  std::vector<std::vector<ViewCache>> student_local_cache;
  std::vector<std::vector<ViewCache>> student_global_cache;
};

// Teacher-side results only. Passing them back into MultiViewForward
// holds the targets fixed while student-side parameters move.
struct TeacherOutputs {
  std::vector<RealMatrix> p_teacher;
  std::vector<RealMatrix> teacher_logits;
  RealMatrix teacher_global;
};

TeacherOutputs TeacherForward(const TeacherStudentPair& pair,
                              std::span<const CropSet> batch);

MultiViewOutput MultiViewForward(const TeacherStudentPair& pair,
                                 std::span<const CropSet> batch,
                                 const TeacherOutputs* fixed_teacher = nullptr);

// Named tensors of the pair: student/*, teacher/*, prototypes, center.
std::vector<std::pair<std::string, RealMatrix>> PairTensors(
    const TeacherStudentPair& pair);
// Overwrites the pair's tensors from a named list; shapes must match.
void LoadPairTensors(
    const std::vector<std::pair<std::string, RealMatrix>>& tensors,
    TeacherStudentPair* pair);

// Checkpoint container ("SDCK"), layout in docs/formats.md.
struct Checkpoint {
  std::string config_json;
  std::vector<std::pair<std::string, RealMatrix>> tensors;

  const RealMatrix* Find(const std::string& name) const;
};

inline constexpr std::uint16_t kCheckpointVersion = 1;

std::string EncodeCheckpoint(const Checkpoint& ckpt);
Checkpoint DecodeCheckpoint(const std::string& bytes,
                            const std::string& source);
void WriteCheckpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint ReadCheckpoint(const std::string& path);

}  // namespace sdpn

#endif  // SDPN_MODEL_H_

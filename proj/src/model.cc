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

#include "sdpn/model.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "sdpn/binary_io.h"
#include "sdpn/error.h"

namespace sdpn {

void ModelConfig::Validate() const {
  if (feature_dim < 1 || encoder_hidden < 1 || embedding_dim < 1 ||
      proj_hidden1 < 1 || proj_hidden2 < 1 || proj_dim < 1 ||
      num_prototypes < 2) {
    Fail(ErrorCode::kInvalidConfig, "model dimensions must be positive");
  }
  if (!(student_temperature > 0.0) || !(teacher_temperature > 0.0)) {
    Fail(ErrorCode::kNonPositiveTemperature, "temperatures must be positive");
  }
  if (!(center_momentum >= 0.0 && center_momentum < 1.0) ||
      !(ema_base >= 0.0 && ema_base <= ema_final && ema_final <= 1.0)) {
    Fail(ErrorCode::kInvalidConfig, "momentum values out of range");
  }
}

std::vector<std::pair<std::string, RealMatrix*>> Branch::NamedParameters() {
  return {{"frame.weight", &frame.weight}, {"frame.bias", &frame.bias},
          {"embed.weight", &embed.weight}, {"embed.bias", &embed.bias},
          {"proj1.weight", &proj1.weight}, {"proj1.bias", &proj1.bias},
          {"proj2.weight", &proj2.weight}, {"proj2.bias", &proj2.bias},
          {"proj3.weight", &proj3.weight}, {"proj3.bias", &proj3.bias}};
}

std::vector<std::pair<std::string, const RealMatrix*>>
Branch::NamedParameters() const {
  std::vector<std::pair<std::string, const RealMatrix*>> out;
  for (auto& [name, p] : const_cast<Branch*>(this)->NamedParameters())
    out.emplace_back(name, p);
  return out;
}

namespace {

Dense InitDense(std::size_t in, std::size_t out, std::mt19937_64& rng) {
  // Xavier-normal, zero bias.
  std::normal_distribution<double> gauss(
      0.0, std::sqrt(2.0 / static_cast<double>(in + out)));
  Dense d{RealMatrix(out, in), RealMatrix(1, out)};
  for (double& w : d.weight.data()) w = gauss(rng);
  return d;
}

// y = W x + b
void Affine(const Dense& layer, std::span<const double> x, RealVector* y) {
  const std::size_t out = layer.weight.rows();
  y->assign(out, 0.0);
  for (std::size_t o = 0; o < out; ++o)
    (*y)[o] = layer.bias(0, o) + Dot(layer.weight.Row(o), x);
}

// Given dL/dy for y = W x + b, accumulates dW, db and returns dL/dx.
RealVector AffineBackward(const Dense& layer, std::span<const double> x,
                          std::span<const double> grad_y, Dense* grads) {
  const std::size_t out = layer.weight.rows(), in = layer.weight.cols();
  RealVector grad_x(in, 0.0);
  for (std::size_t o = 0; o < out; ++o) {
    const double g = grad_y[o];
    if (g == 0.0) continue;
    grads->bias(0, o) += g;
    auto dw = grads->weight.Row(o);
    const auto w = layer.weight.Row(o);
    for (std::size_t i = 0; i < in; ++i) {
      dw[i] += g * x[i];
      grad_x[i] += g * w[i];
    }
  }
  return grad_x;
}

void TanhInPlace(RealVector* v) {
  for (double& x : *v) x = std::tanh(x);
}

}  // namespace

Branch InitBranch(const ModelConfig& config, std::uint64_t seed) {
  config.Validate();
  std::mt19937_64 rng(seed);
  const auto f = static_cast<std::size_t>(config.feature_dim);
  const auto h = static_cast<std::size_t>(config.encoder_hidden);
  const auto e = static_cast<std::size_t>(config.embedding_dim);
  Branch b;
  b.frame = InitDense(f, h, rng);
  b.embed = InitDense(2 * h, e, rng);
  b.proj1 = InitDense(e, static_cast<std::size_t>(config.proj_hidden1), rng);
  b.proj2 = InitDense(static_cast<std::size_t>(config.proj_hidden1),
                      static_cast<std::size_t>(config.proj_hidden2), rng);
  b.proj3 = InitDense(static_cast<std::size_t>(config.proj_hidden2),
                      static_cast<std::size_t>(config.proj_dim), rng);
  return b;
}

Branch ZerosLike(const Branch& branch) {
  Branch z = branch;
  for (auto& [name, p] : z.NamedParameters()) p->SetZero();
  return z;
}

EmbedOutput ForwardEmbed(const Branch& branch, const RealMatrix& frames,
                         ViewCache* cache) {
  const std::size_t t_len = frames.rows(), f_dim = frames.cols();
  const std::size_t h_dim = branch.frame.weight.rows();
  if (t_len < 1 || f_dim != branch.frame.weight.cols()) {
    Fail(ErrorCode::kShapeMismatch,
         "frames are " + std::to_string(t_len) + "x" + std::to_string(f_dim) +
             ", encoder expects F=" +
             std::to_string(branch.frame.weight.cols()));
  }
  ViewCache local;
  ViewCache& c = cache ? *cache : local;
  c.input = &frames;
  c.hidden = RealMatrix(t_len, h_dim);
  for (std::size_t t = 0; t < t_len; ++t) {
    const auto x = frames.Row(t);
    auto hrow = c.hidden.Row(t);
    for (std::size_t h = 0; h < h_dim; ++h) {
      hrow[h] = std::tanh(branch.frame.bias(0, h) +
                          Dot(branch.frame.weight.Row(h), x));
    }
  }
  // Statistics pooling over time (population standard deviation).
  const double inv_t = 1.0 / static_cast<double>(t_len);
  c.mean.assign(h_dim, 0.0);
  c.stddev.assign(h_dim, 0.0);
  for (std::size_t t = 0; t < t_len; ++t)
    for (std::size_t h = 0; h < h_dim; ++h) c.mean[h] += c.hidden(t, h);
  for (double& m : c.mean) m *= inv_t;
  for (std::size_t t = 0; t < t_len; ++t) {
    for (std::size_t h = 0; h < h_dim; ++h) {
      const double dev = c.hidden(t, h) - c.mean[h];
      c.stddev[h] += dev * dev;
    }
  }
  for (double& s : c.stddev) s = std::sqrt(s * inv_t);
  c.pooled = c.mean;
  c.pooled.insert(c.pooled.end(), c.stddev.begin(), c.stddev.end());

  Affine(branch.embed, c.pooled, &c.embedding);
  Affine(branch.proj1, c.embedding, &c.act1);
  TanhInPlace(&c.act1);
  Affine(branch.proj2, c.act1, &c.act2);
  TanhInPlace(&c.act2);
  Affine(branch.proj3, c.act2, &c.out);
  c.out_norm = Norm(c.out);
  c.projected = L2Normalize(c.out);
  return {c.embedding, c.projected};
}

void BackwardEmbed(const Branch& branch, const ViewCache& c,
                   std::span<const double> grad_projected,
                   std::span<const double> grad_embedding, Branch* grads) {
  const std::size_t d_proj = c.projected.size();
  if (grad_projected.size() != d_proj) {
    Fail(ErrorCode::kShapeMismatch, "grad_projected length");
  }
  // p = o / |o|  =>  do = (dp - p <p, dp>) / |o|
  const double along = Dot(c.projected, grad_projected);
  RealVector grad_out(d_proj);
  for (std::size_t k = 0; k < d_proj; ++k)
    grad_out[k] = (grad_projected[k] - c.projected[k] * along) / c.out_norm;

  RealVector g = AffineBackward(branch.proj3, c.act2, grad_out, &grads->proj3);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] *= 1.0 - c.act2[i] * c.act2[i];
  g = AffineBackward(branch.proj2, c.act1, g, &grads->proj2);
  for (std::size_t i = 0; i < g.size(); ++i) g[i] *= 1.0 - c.act1[i] * c.act1[i];
  g = AffineBackward(branch.proj1, c.embedding, g, &grads->proj1);
  if (!grad_embedding.empty()) {
    if (grad_embedding.size() != g.size()) {
      Fail(ErrorCode::kShapeMismatch, "grad_embedding length");
    }
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += grad_embedding[i];
  }
  const RealVector grad_pooled =
      AffineBackward(branch.embed, c.pooled, g, &grads->embed);

  const RealMatrix& hidden = c.hidden;
  const RealMatrix& x = *c.input;
  const std::size_t t_len = hidden.rows(), h_dim = hidden.cols();
  const std::size_t f_dim = x.cols();
  const double inv_t = 1.0 / static_cast<double>(t_len);
  RealVector std_coef(h_dim, 0.0);
  for (std::size_t h = 0; h < h_dim; ++h) {
    // The standard deviation is not differentiable at zero; treat it as
    // locally constant there.
    if (c.stddev[h] > 1e-12) std_coef[h] = grad_pooled[h_dim + h] * inv_t / c.stddev[h];
  }
  for (std::size_t t = 0; t < t_len; ++t) {
    const auto xrow = x.Row(t);
    for (std::size_t h = 0; h < h_dim; ++h) {
      const double hv = hidden(t, h);
      const double grad_h =
          grad_pooled[h] * inv_t + std_coef[h] * (hv - c.mean[h]);
      const double grad_a = grad_h * (1.0 - hv * hv);
      if (grad_a == 0.0) continue;
      grads->frame.bias(0, h) += grad_a;
      auto dw = grads->frame.weight.Row(h);
      for (std::size_t f = 0; f < f_dim; ++f) dw[f] += grad_a * xrow[f];
    }
  }
}

RealVector PrototypeLogits(std::span<const double> projected,
                           const RealMatrix& bank) {
  if (projected.size() != bank.cols()) {
    Fail(ErrorCode::kShapeMismatch, "projection and prototype dims differ");
  }
  RealVector logits(bank.rows());
  for (std::size_t k = 0; k < bank.rows(); ++k)
    logits[k] = Dot(bank.Row(k), projected);
  return logits;
}

RealVector PrototypeDistribution(std::span<const double> projected,
                                 const RealMatrix& bank, double temperature,
                                 std::span<const double> center) {
  RealVector logits = PrototypeLogits(projected, bank);
  if (!center.empty()) {
    if (center.size() != logits.size()) {
      Fail(ErrorCode::kShapeMismatch, "center length");
    }
    for (std::size_t k = 0; k < logits.size(); ++k) logits[k] -= center[k];
  }
  return Softmax(logits, temperature);
}

std::vector<std::pair<std::string, RealMatrix*>>
TeacherStudentPair::StudentParameters() {
  auto params = student.NamedParameters();
  params.emplace_back("prototypes", &prototypes);
  return params;
}

void NormalizePrototypeRows(RealMatrix& bank) {
  for (std::size_t k = 0; k < bank.rows(); ++k) {
    const RealVector unit = L2Normalize(bank.Row(k));
    std::copy(unit.begin(), unit.end(), bank.Row(k).begin());
  }
}

TeacherStudentPair InitPair(const ModelConfig& config) {
  config.Validate();
  TeacherStudentPair pair;
  pair.config = config;
  pair.student = InitBranch(config, config.init_seed);
  pair.teacher = pair.student;
  std::mt19937_64 rng(config.init_seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> gauss(0.0, 1.0);
  pair.prototypes = RealMatrix(static_cast<std::size_t>(config.num_prototypes),
                               static_cast<std::size_t>(config.proj_dim));
  for (double& x : pair.prototypes.data()) x = gauss(rng);
  NormalizePrototypeRows(pair.prototypes);
  pair.center.assign(static_cast<std::size_t>(config.num_prototypes), 0.0);
  return pair;
}

void EmaUpdate(TeacherStudentPair& pair, double momentum) {
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    Fail(ErrorCode::kInvalidConfig, "EMA momentum must be in [0, 1)");
  }
  auto teacher = pair.teacher.NamedParameters();
  auto student = pair.student.NamedParameters();
  for (std::size_t i = 0; i < teacher.size(); ++i) {
    auto t = teacher[i].second->data();
    const auto s = student[i].second->data();
    // Step form: an unchanged student leaves the teacher bit-identical.
    for (std::size_t j = 0; j < t.size(); ++j)
      t[j] = momentum == 0.0 ? s[j] : t[j] + (1.0 - momentum) * (s[j] - t[j]);
  }
}

namespace {

void CheckBatchViews(std::span<const CropSet> batch) {
  if (batch.empty()) Fail(ErrorCode::kBatchTooSmall, "empty batch");
  const std::size_t num_global = batch[0].global_views.size();
  const std::size_t num_local = batch[0].local_views.size();
  if (num_global < 1 || num_local < 1) {
    Fail(ErrorCode::kShapeMismatch,
         "need at least one global and one local view");
  }
  for (const CropSet& crops : batch) {
    if (crops.global_views.size() != num_global ||
        crops.local_views.size() != num_local) {
      Fail(ErrorCode::kShapeMismatch, "view counts differ within a batch");
    }
  }
}

}  // namespace

TeacherOutputs TeacherForward(const TeacherStudentPair& pair,
                              std::span<const CropSet> batch) {
  CheckBatchViews(batch);
  const std::size_t num_global = batch[0].global_views.size();
  const std::size_t k_dim = pair.prototypes.rows();
  const ModelConfig& cfg = pair.config;
  const std::span<const double> center =
      cfg.teacher_centering ? std::span<const double>(pair.center)
                            : std::span<const double>();
  TeacherOutputs out;
  out.teacher_global =
      RealMatrix(batch.size() * num_global, pair.prototypes.cols());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    RealMatrix p_teacher(num_global, k_dim), logits(num_global, k_dim);
    for (std::size_t g = 0; g < num_global; ++g) {
      const EmbedOutput tea = ForwardEmbed(pair.teacher, batch[b].global_views[g]);
      const RealVector raw = PrototypeLogits(tea.projected, pair.prototypes);
      std::copy(raw.begin(), raw.end(), logits.Row(g).begin());
      const RealVector p = PrototypeDistribution(
          tea.projected, pair.prototypes, cfg.teacher_temperature, center);
      std::copy(p.begin(), p.end(), p_teacher.Row(g).begin());
      std::copy(tea.projected.begin(), tea.projected.end(),
                out.teacher_global.Row(b * num_global + g).begin());
    }
    out.p_teacher.push_back(std::move(p_teacher));
    out.teacher_logits.push_back(std::move(logits));
  }
  return out;
}

MultiViewOutput MultiViewForward(const TeacherStudentPair& pair,
                                 std::span<const CropSet> batch,
                                 const TeacherOutputs* fixed_teacher) {
  CheckBatchViews(batch);
  const std::size_t num_global = batch[0].global_views.size();
  const std::size_t num_local = batch[0].local_views.size();
  const std::size_t k_dim = pair.prototypes.rows();
  const std::size_t d_proj = pair.prototypes.cols();

  MultiViewOutput out;
  {
    TeacherOutputs tea =
        fixed_teacher ? *fixed_teacher : TeacherForward(pair, batch);
    if (tea.p_teacher.size() != batch.size()) {
      Fail(ErrorCode::kShapeMismatch, "teacher outputs do not match batch");
    }
    out.p_teacher = std::move(tea.p_teacher);
    out.teacher_logits = std::move(tea.teacher_logits);
    out.teacher_global = std::move(tea.teacher_global);
  }
  out.student_global = RealMatrix(batch.size() * num_global, d_proj);
  out.student_local_cache.resize(batch.size());
  out.student_global_cache.resize(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const CropSet& crops = batch[b];
    out.student_global_cache[b].resize(num_global);
    for (std::size_t g = 0; g < num_global; ++g) {
      const EmbedOutput stu =
          ForwardEmbed(pair.student, crops.global_views[g],
                       &out.student_global_cache[b][g]);
      std::copy(stu.projected.begin(), stu.projected.end(),
                out.student_global.Row(b * num_global + g).begin());
    }
    RealMatrix s_logits(num_local, k_dim);
    out.student_local_cache[b].resize(num_local);
    for (std::size_t l = 0; l < num_local; ++l) {
      const EmbedOutput stu = ForwardEmbed(pair.student, crops.local_views[l],
                                           &out.student_local_cache[b][l]);
      const RealVector logits = PrototypeLogits(stu.projected, pair.prototypes);
      std::copy(logits.begin(), logits.end(), s_logits.Row(l).begin());
    }
    out.student_logits.push_back(std::move(s_logits));
  }
  return out;
}

std::vector<std::pair<std::string, RealMatrix>> PairTensors(
    const TeacherStudentPair& pair) {
  std::vector<std::pair<std::string, RealMatrix>> out;
  for (const auto& [name, p] : pair.student.NamedParameters())
    out.emplace_back("student/" + name, *p);
  for (const auto& [name, p] : pair.teacher.NamedParameters())
    out.emplace_back("teacher/" + name, *p);
  out.emplace_back("prototypes", pair.prototypes);
  out.emplace_back("center", RealMatrix(1, pair.center.size(), pair.center));
  return out;
}

void LoadPairTensors(
    const std::vector<std::pair<std::string, RealMatrix>>& tensors,
    TeacherStudentPair* pair) {
  auto find = [&](const std::string& name) -> const RealMatrix& {
    for (const auto& [n, m] : tensors)
      if (n == name) return m;
    Fail(ErrorCode::kMalformedFile, "checkpoint lacks tensor '" + name + "'");
  };
  auto assign = [&](const std::string& name, RealMatrix* dst) {
    const RealMatrix& src = find(name);
    if (!src.SameShape(*dst)) {
      Fail(ErrorCode::kShapeMismatch, "tensor '" + name + "' has shape " +
                                          std::to_string(src.rows()) + "x" +
                                          std::to_string(src.cols()));
    }
    *dst = src;
  };
  for (auto& [name, p] : pair->student.NamedParameters())
    assign("student/" + name, p);
  for (auto& [name, p] : pair->teacher.NamedParameters())
    assign("teacher/" + name, p);
  assign("prototypes", &pair->prototypes);
  RealMatrix center(1, pair->center.size());
  assign("center", &center);
  pair->center = center.values();
}

const RealMatrix* Checkpoint::Find(const std::string& name) const {
  for (const auto& [n, m] : tensors)
    if (n == name) return &m;
  return nullptr;
}

std::string EncodeCheckpoint(const Checkpoint& ckpt) {
  ByteWriter w;
  w.PutBytes("SDCK");
  w.PutU16(kCheckpointVersion);
  w.PutU64(Fnv1a64(ckpt.config_json));
  w.PutString(ckpt.config_json);
  w.PutU32(static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, m] : ckpt.tensors) {
    w.PutString(name);
    w.PutU32(static_cast<std::uint32_t>(m.rows()));
    w.PutU32(static_cast<std::uint32_t>(m.cols()));
    for (double x : m.data()) w.PutF64(x);
  }
  return w.bytes();
}

Checkpoint DecodeCheckpoint(const std::string& bytes,
                            const std::string& source) {
  ByteReader r(bytes, source);
  if (r.GetBytes(4) != "SDCK") r.Malformed("bad magic");
  const std::uint16_t version = r.GetU16();
  if (version != kCheckpointVersion) {
    r.Malformed("unsupported version " + std::to_string(version));
  }
  const std::uint64_t fingerprint = r.GetU64();
  Checkpoint ckpt;
  ckpt.config_json = r.GetString();
  if (Fnv1a64(ckpt.config_json) != fingerprint) {
    r.Malformed("config fingerprint mismatch");
  }
  const std::uint32_t count = r.GetU32();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.GetString();
    const std::uint32_t rows = r.GetU32(), cols = r.GetU32();
    const std::uint64_t n = static_cast<std::uint64_t>(rows) * cols;
    if (n == 0 || n * 8 > r.remaining()) r.Malformed("bad tensor '" + name + "'");
    std::vector<double> data(n);
    for (double& x : data) x = r.GetF64();
    ckpt.tensors.emplace_back(std::move(name), RealMatrix(rows, cols, std::move(data)));
  }
  if (!r.AtEnd()) r.Malformed("trailing bytes");
  return ckpt;
}

void WriteCheckpoint(const Checkpoint& ckpt, const std::string& path) {
  WriteFileAtomic(path, EncodeCheckpoint(ckpt));
}

Checkpoint ReadCheckpoint(const std::string& path) {
  return DecodeCheckpoint(ReadFileBytes(path), path);
}

}  // namespace sdpn

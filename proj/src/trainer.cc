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

#include "sdpn/trainer.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "sdpn/error.h"

namespace sdpn {

void TrainConfig::Validate() const {
  if (epochs < 0 || warmup_epochs < 0 ||
      (epochs > 0 && warmup_epochs >= epochs)) {
    Fail(ErrorCode::kInvalidConfig, "need 0 <= warmup_epochs < epochs");
  }
  if (batch_size < 2) {
    Fail(ErrorCode::kInvalidConfig, "batch_size must be >= 2");
  }
  if (!(lr_peak >= 0.0) || !(lr_final >= 0.0) || lr_final > lr_peak) {
    Fail(ErrorCode::kInvalidConfig, "need 0 <= lr_final <= lr_peak");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) {
    Fail(ErrorCode::kInvalidConfig, "momentum must be in [0, 1)");
  }
  weights.Validate();
  crops.Validate();
}

double LearningRateAt(std::int64_t step, std::int64_t total_steps,
                      std::int64_t warmup_steps, double lr_peak,
                      double lr_final) {
  if (step < warmup_steps) {
    return lr_peak * static_cast<double>(step) /
           static_cast<double>(warmup_steps);
  }
  const std::int64_t decay_steps = total_steps - warmup_steps;
  if (decay_steps <= 0) return lr_peak;
  const double progress =
      static_cast<double>(step - warmup_steps) / static_cast<double>(decay_steps);
  return lr_final + 0.5 * (lr_peak - lr_final) *
                        (1.0 + std::cos(std::numbers::pi * progress));
}

double EmaMomentumAt(std::int64_t step, std::int64_t total_steps, double base,
                     double final_value) {
  if (total_steps <= 0) return base;
  const double progress =
      static_cast<double>(step) / static_cast<double>(total_steps);
  return final_value - (final_value - base) *
                           0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

CollapseDiagnostics Diagnostics(const RealMatrix& student_global,
                                const RealMatrix& teacher_distributions) {
  if (student_global.rows() < 2) {
    Fail(ErrorCode::kBatchTooSmall, "diagnostics need n >= 2");
  }
  CollapseDiagnostics diag;
  const RealMatrix c = NormalizedCovariance(student_global, {true, false});
  const std::size_t d = c.rows();
  if (d > 1) {
    double sum = 0.0;
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j)
        if (i != j) sum += std::abs(c(i, j));
    diag.mean_abs_offdiag =
        std::min(1.0, sum / static_cast<double>(d * (d - 1)));
  }
  const std::size_t n = student_global.rows();
  double std_sum = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    double mean = 0.0;
    for (std::size_t b = 0; b < n; ++b) mean += student_global(b, j);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t b = 0; b < n; ++b) {
      const double dev = student_global(b, j) - mean;
      var += dev * dev;
    }
    std_sum += std::sqrt(var / static_cast<double>(n));
  }
  diag.embedding_std = std_sum / static_cast<double>(d);

  if (!teacher_distributions.empty()) {
    const std::size_t k_dim = teacher_distributions.cols();
    RealVector usage(k_dim, 0.0);
    for (std::size_t r = 0; r < teacher_distributions.rows(); ++r)
      for (std::size_t k = 0; k < k_dim; ++k)
        usage[k] += teacher_distributions(r, k);
    double entropy = 0.0;
    for (double u : usage) {
      const double p = u / static_cast<double>(teacher_distributions.rows());
      if (p > 0.0) entropy -= p * std::log(p);
    }
    diag.prototype_usage_entropy =
        std::clamp(entropy, 0.0, std::log(static_cast<double>(k_dim)));
  }
  return diag;
}

ObjectiveOptions ObjectiveOptionsFor(const TrainConfig& config) {
  ObjectiveOptions opts;
  opts.weights = config.weights;
  opts.regularizer = config.regularizer;
  opts.covariance = {true, config.centered_covariance};
  opts.diversity.eq2_literal = config.eq2_literal;
  return opts;
}

ObjectiveResult EvaluateObjective(const TeacherStudentPair& pair,
                                  std::span<const CropSet> batch,
                                  const ObjectiveOptions& options,
                                  const TeacherOutputs* fixed_teacher) {
  if (batch.size() < 2) {
    Fail(ErrorCode::kBatchTooSmall, "objective needs at least 2 utterances");
  }
  ObjectiveResult result;
  result.forward = MultiViewForward(pair, batch, fixed_teacher);
  const MultiViewOutput& fw = result.forward;
  result.student_grad = ZerosLike(pair.student);
  result.prototype_grad =
      RealMatrix(pair.prototypes.rows(), pair.prototypes.cols());
  const RealMatrix& bank = pair.prototypes;
  const double inv_b = 1.0 / static_cast<double>(batch.size());

  // Prototype cross-entropy, teacher globals against student locals.
  double ce_sum = 0.0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const LossValue ce = CrossEntropyLoss(fw.p_teacher[b], fw.student_logits[b],
                                          pair.config.student_temperature);
    ce_sum += ce.value;
    for (std::size_t l = 0; l < ce.gradient.rows(); ++l) {
      const ViewCache& cache = fw.student_local_cache[b][l];
      RealVector grad_proj(bank.cols(), 0.0);
      for (std::size_t k = 0; k < bank.rows(); ++k) {
        const double g = ce.gradient(l, k) * inv_b;
        if (g == 0.0) continue;
        const auto proto = bank.Row(k);
        auto proto_grad = result.prototype_grad.Row(k);
        for (std::size_t j = 0; j < bank.cols(); ++j) {
          grad_proj[j] += g * proto[j];
          proto_grad[j] += g * cache.projected[j];
        }
      }
      BackwardEmbed(pair.student, cache, grad_proj, {}, &result.student_grad);
    }
  }
  const LossValue ce{ce_sum * inv_b, {}};
  const LossValue re = DiversityRegularization(fw.student_global, options.diversity);
  const PairLossValue dr = DimensionRegularization(
      options.regularizer, fw.teacher_global, fw.student_global,
      options.covariance);

  const LossValue sdpn = SdpnLoss(ce, {re.value, {}}, options.weights);
  const LossValue total = TotalLoss(sdpn, {dr.value, {}}, options.weights);
  result.terms = {ce.value, re.value, dr.value, total.value};

  // Covariance and diversity paths act on the student global projections.
  RealMatrix grad_global = re.gradient;
  grad_global.Scale(options.weights.mu);
  grad_global.AddScaled(dr.student_gradient, options.weights.lambda);
  const std::size_t num_global = fw.student_global_cache[0].size();
  for (std::size_t b = 0; b < batch.size(); ++b) {
    for (std::size_t g = 0; g < num_global; ++g) {
      BackwardEmbed(pair.student, fw.student_global_cache[b][g],
                    grad_global.Row(b * num_global + g), {},
                    &result.student_grad);
    }
  }
  return result;
}

TrainState InitTrainState(const ModelConfig& model_config) {
  TrainState state;
  state.pair = InitPair(model_config);
  for (auto& [name, p] : state.pair.StudentParameters())
    state.velocity.emplace_back(p->rows(), p->cols());
  return state;
}

CollapseDiagnostics CorpusDiagnostics(
    const TeacherStudentPair& pair, std::span<const UnlabeledUtterance> corpus,
    int len_global) {
  const std::size_t k_dim = pair.prototypes.rows();
  RealMatrix student(corpus.size(), pair.prototypes.cols());
  RealMatrix teacher_p(corpus.size(), k_dim);
  const std::span<const double> center =
      pair.config.teacher_centering ? std::span<const double>(pair.center)
                                    : std::span<const double>();
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const RealMatrix& frames = corpus[i].frames;
    const std::size_t len =
        std::min(frames.rows(), static_cast<std::size_t>(len_global));
    const RealMatrix view = CutFrames(frames, 0, len);
    const EmbedOutput s = ForwardEmbed(pair.student, view);
    std::copy(s.projected.begin(), s.projected.end(), student.Row(i).begin());
    const EmbedOutput t = ForwardEmbed(pair.teacher, view);
    const RealVector p = PrototypeDistribution(
        t.projected, pair.prototypes, pair.config.teacher_temperature, center);
    std::copy(p.begin(), p.end(), teacher_p.Row(i).begin());
  }
  return Diagnostics(student, teacher_p);
}

namespace {

std::mt19937_64 EpochRng(std::uint64_t seed, int epoch) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch)};
  return std::mt19937_64(seq);
}

std::vector<std::vector<std::size_t>> MakeBatches(std::size_t n,
                                                  std::size_t batch_size,
                                                  std::mt19937_64& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    if (end - start < 2) break;  // a single leftover item cannot form a batch
    batches.emplace_back(order.begin() + start, order.begin() + end);
  }
  return batches;
}

std::int64_t StepsPerEpoch(std::size_t n, std::size_t batch_size) {
  std::int64_t steps = static_cast<std::int64_t>(n / batch_size);
  if (n % batch_size >= 2) ++steps;
  return steps;
}

}  // namespace

std::vector<EpochRecord> Train(std::span<const UnlabeledUtterance> corpus,
                               TrainState& state, const TrainConfig& cfg,
                               const EpochCallback& on_epoch_end,
                               int stop_after_epoch) {
  cfg.Validate();
  if (corpus.size() < 2) {
    Fail(ErrorCode::kBatchTooSmall, "training corpus needs >= 2 utterances");
  }
  const std::size_t batch_size = static_cast<std::size_t>(cfg.batch_size);
  const std::int64_t steps_per_epoch = StepsPerEpoch(corpus.size(), batch_size);
  const std::int64_t total_steps = steps_per_epoch * cfg.epochs;
  const std::int64_t warmup_steps = steps_per_epoch * cfg.warmup_epochs;
  const ObjectiveOptions objective = ObjectiveOptionsFor(cfg);
  TeacherStudentPair& pair = state.pair;
  const ModelConfig& mcfg = pair.config;

  std::vector<EpochRecord> log;
  for (int epoch = state.epochs_done + 1; epoch <= cfg.epochs; ++epoch) {
    if (stop_after_epoch > 0 && epoch > stop_after_epoch) break;
    std::mt19937_64 rng = EpochRng(cfg.seed, epoch);
    EpochRecord record;
    record.epoch = epoch;
    for (const auto& indices : MakeBatches(corpus.size(), batch_size, rng)) {
      std::vector<CropSet> batch;
      batch.reserve(indices.size());
      for (std::size_t idx : indices) {
        CropSet crops = SampleCrops(corpus[idx], cfg.crops, rng);
        for (RealMatrix& v : crops.global_views) v = SpecMask(v, cfg.mask, rng);
        for (RealMatrix& v : crops.local_views) v = SpecMask(v, cfg.mask, rng);
        batch.push_back(std::move(crops));
      }
      ObjectiveResult res = EvaluateObjective(pair, batch, objective);
      if (!std::isfinite(res.terms.total) || !res.prototype_grad.AllFinite()) {
        Fail(ErrorCode::kDivergedLoss,
             "non-finite loss at epoch " + std::to_string(epoch) + " step " +
                 std::to_string(state.step));
      }

      const double lr = LearningRateAt(state.step, total_steps, warmup_steps,
                                       cfg.lr_peak, cfg.lr_final);
      auto params = pair.StudentParameters();
      auto grads = res.student_grad.NamedParameters();
      grads.emplace_back("prototypes", &res.prototype_grad);
      for (std::size_t i = 0; i < params.size(); ++i) {
        RealMatrix& v = state.velocity[i];
        v.Scale(cfg.momentum);
        v.AddScaled(*grads[i].second, 1.0);
        if (lr > 0.0) params[i].second->AddScaled(v, -lr);
      }
      if (lr > 0.0) NormalizePrototypeRows(pair.prototypes);

      const double m =
          EmaMomentumAt(state.step, total_steps, mcfg.ema_base, mcfg.ema_final);
      if (m < 1.0) EmaUpdate(pair, m);

      if (mcfg.teacher_centering) {
        RealVector batch_center(pair.center.size(), 0.0);
        std::size_t rows = 0;
        for (const RealMatrix& logits : res.forward.teacher_logits) {
          for (std::size_t r = 0; r < logits.rows(); ++r, ++rows)
            for (std::size_t k = 0; k < logits.cols(); ++k)
              batch_center[k] += logits(r, k);
        }
        for (std::size_t k = 0; k < pair.center.size(); ++k) {
          pair.center[k] = mcfg.center_momentum * pair.center[k] +
                           (1.0 - mcfg.center_momentum) * batch_center[k] /
                               static_cast<double>(rows);
        }
      }

      record.mean_terms.ce += res.terms.ce;
      record.mean_terms.re += res.terms.re;
      record.mean_terms.dr += res.terms.dr;
      record.mean_terms.total += res.terms.total;
      record.lr = lr;
      ++record.steps;
      ++state.step;
    }
    if (record.steps > 0) {
      const double inv = 1.0 / record.steps;
      record.mean_terms.ce *= inv;
      record.mean_terms.re *= inv;
      record.mean_terms.dr *= inv;
      record.mean_terms.total *= inv;
    }
    record.diagnostics = CorpusDiagnostics(pair, corpus, cfg.crops.len_global);
    state.epochs_done = epoch;
    log.push_back(record);
    if (on_epoch_end) on_epoch_end(state, record);
  }
  return log;
}

Checkpoint StateToCheckpoint(const TrainState& state,
                             const std::string& config_json) {
  Checkpoint ckpt;
  ckpt.config_json = config_json;
  ckpt.tensors = PairTensors(state.pair);
  auto params = const_cast<TrainState&>(state).pair.StudentParameters();
  for (std::size_t i = 0; i < params.size(); ++i)
    ckpt.tensors.emplace_back("opt/" + params[i].first, state.velocity[i]);
  ckpt.tensors.emplace_back(
      "progress", RealMatrix(1, 2, {static_cast<double>(state.epochs_done),
                                    static_cast<double>(state.step)}));
  return ckpt;
}

TrainState StateFromCheckpoint(const Checkpoint& ckpt,
                               const ModelConfig& model_config) {
  TrainState state = InitTrainState(model_config);
  LoadPairTensors(ckpt.tensors, &state.pair);
  auto params = state.pair.StudentParameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const RealMatrix* v = ckpt.Find("opt/" + params[i].first);
    if (v == nullptr) continue;  // inference-only checkpoint
    if (!v->SameShape(state.velocity[i])) {
      Fail(ErrorCode::kShapeMismatch, "optimizer state for " + params[i].first);
    }
    state.velocity[i] = *v;
  }
  if (const RealMatrix* progress = ckpt.Find("progress")) {
    state.epochs_done = static_cast<int>((*progress)(0, 0));
    state.step = static_cast<std::int64_t>((*progress)(0, 1));
  }
  return state;
}

}  // namespace sdpn

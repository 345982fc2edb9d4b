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

#include <cmath>
#include <random>

#include "doctest.h"
#include "sdpn/error.h"
#include "sdpn/trainer.h"

using namespace sdpn;

namespace {

ModelConfig TinyModel() {
  ModelConfig c;
  c.feature_dim = 6;
  c.encoder_hidden = 8;
  c.embedding_dim = 6;
  c.proj_hidden1 = 10;
  c.proj_hidden2 = 10;
  c.proj_dim = 5;
  c.num_prototypes = 12;
  c.init_seed = 17;
  return c;
}

TrainConfig TinyTrain() {
  TrainConfig t;
  t.epochs = 4;
  t.batch_size = 5;
  t.lr_peak = 0.05;
  t.warmup_epochs = 1;
  t.crops = {1, 2, 30, 15};
  t.mask = {1, 1, 2};
  t.seed = 99;
  return t;
}

std::vector<UnlabeledUtterance> TinyCorpus() {
  SyntheticCorpusConfig c;
  c.num_speakers = 4;
  c.utts_per_speaker = 3;
  c.frames_per_utt = 40;
  c.feature_dim = 6;
  c.seed = 8;
  return StripLabels(GenerateSyntheticCorpus(c));
}

std::vector<CropSet> Batch(const std::vector<UnlabeledUtterance>& corpus,
                           const CropConfig& crops, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<CropSet> out;
  for (std::size_t i = 0; i < 6; ++i) out.push_back(SampleCrops(corpus[i], crops, rng));
  return out;
}

}  // namespace

TEST_CASE("learning-rate schedule") {
  CHECK(LearningRateAt(0, 100, 10, 0.5, 1e-5) == 0.0);
  CHECK(LearningRateAt(5, 100, 10, 0.5, 1e-5) == doctest::Approx(0.25));
  CHECK(LearningRateAt(10, 100, 10, 0.5, 1e-5) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(std::abs(LearningRateAt(100, 100, 10, 0.5, 1e-5) - 1e-5) < 1e-12);
  CHECK(LearningRateAt(55, 100, 10, 0.5, 1e-5) ==
        doctest::Approx(1e-5 + 0.5 * (0.5 - 1e-5)).epsilon(1e-12));
  double prev = 1.0;
  for (int s = 10; s <= 100; ++s) {
    const double lr = LearningRateAt(s, 100, 10, 0.5, 1e-5);
    CHECK(lr <= prev);
    prev = lr;
  }
}

TEST_CASE("teacher momentum schedule") {
  CHECK(EmaMomentumAt(0, 50, 0.996, 1.0) == doctest::Approx(0.996));
  CHECK(EmaMomentumAt(50, 50, 0.996, 1.0) == doctest::Approx(1.0));
  CHECK(EmaMomentumAt(25, 50, 0.996, 1.0) == doctest::Approx(0.998));
}

TEST_CASE("config validation") {
  CHECK_NOTHROW(TinyTrain().Validate());
  TrainConfig t = TinyTrain();
  t.warmup_epochs = 4;
  CHECK_THROWS_AS(t.Validate(), Error);
  t = TinyTrain();
  t.lr_final = 1.0;
  CHECK_THROWS_AS(t.Validate(), Error);
  t = TinyTrain();
  t.momentum = 1.0;
  CHECK_THROWS_AS(t.Validate(), Error);
  t = TinyTrain();
  t.batch_size = 1;
  CHECK_THROWS_AS(t.Validate(), Error);
}

TEST_CASE("diagnostics") {
  const RealMatrix orth = RealMatrix::FromRows({{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {0, 0, -1}});
  const RealMatrix uniform(4, 4, 0.25);
  const CollapseDiagnostics d = Diagnostics(orth, uniform);
  CHECK(d.mean_abs_offdiag == 0.0);
  CHECK(d.prototype_usage_entropy == doctest::Approx(std::log(4.0)));
  const RealMatrix onehot = RealMatrix::FromRows({{1, 0}, {1, 0}});
  const RealMatrix same = RealMatrix::FromRows({{1, 1}, {2, 2}});
  const CollapseDiagnostics c = Diagnostics(same, onehot);
  CHECK(c.mean_abs_offdiag == doctest::Approx(1.0));
  CHECK(c.prototype_usage_entropy == 0.0);
  // Population standard deviation per column, averaged.
  CHECK(c.embedding_std == doctest::Approx(0.5));
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  for (int t = 0; t < 20; ++t) {
    RealMatrix x(6, 4);
    for (double& v : x.data()) v = g(rng);
    const CollapseDiagnostics r = Diagnostics(x, RealMatrix(6, 3, 1.0 / 3));
    CHECK(r.mean_abs_offdiag >= 0.0);
    CHECK(r.mean_abs_offdiag <= 1.0);
    CHECK(r.prototype_usage_entropy <= std::log(3.0) + 1e-12);
  }
}

TEST_CASE("logged regularizer equals the loss-module value") {
  const auto corpus = TinyCorpus();
  const TeacherStudentPair pair = InitPair(TinyModel());
  const auto batch = Batch(corpus, TinyTrain().crops, 4);
  for (RegularizerKind kind : {RegularizerKind::kOffDiagonal, RegularizerKind::kFrobenius}) {
    ObjectiveOptions opts;
    opts.regularizer = kind;
    const ObjectiveResult r = EvaluateObjective(pair, batch, opts);
    const double direct = DimensionRegularization(kind, r.forward.teacher_global,
                                                  r.forward.student_global,
                                                  {true, false}).value;
    CHECK(std::abs(r.terms.dr - direct) <= 1e-10);
    CHECK(r.terms.total == doctest::Approx(r.terms.ce + opts.weights.mu * r.terms.re +
                                           opts.weights.lambda * r.terms.dr));
  }
}

TEST_CASE("one small step lowers the prototype cross-entropy") {
  const auto corpus = TinyCorpus();
  TeacherStudentPair pair = InitPair(TinyModel());
  const auto batch = Batch(corpus, TinyTrain().crops, 5);
  ObjectiveOptions opts;
  opts.weights = {0.0, 0.0};
  const TeacherOutputs teacher = TeacherForward(pair, batch);
  const ObjectiveResult before = EvaluateObjective(pair, batch, opts, &teacher);
  Branch grads = before.student_grad;
  auto params = pair.StudentParameters();
  auto g = grads.NamedParameters();
  g.emplace_back("prototypes", const_cast<RealMatrix*>(&before.prototype_grad));
  for (std::size_t i = 0; i < params.size(); ++i) params[i].second->AddScaled(*g[i].second, -1e-3);
  const ObjectiveResult after = EvaluateObjective(pair, batch, opts, &teacher);
  CHECK(after.terms.ce < before.terms.ce);
}

TEST_CASE("zero learning rate leaves every parameter in place") {
  const auto corpus = TinyCorpus();
  TrainConfig cfg = TinyTrain();
  cfg.lr_peak = 0.0;
  cfg.lr_final = 0.0;
  TrainState state = InitTrainState(TinyModel());
  const TeacherStudentPair initial = state.pair;
  Train(corpus, state, cfg);
  CHECK(state.pair.student.proj3.weight == initial.student.proj3.weight);
  CHECK(state.pair.teacher.frame.weight == initial.teacher.frame.weight);
  CHECK(state.pair.prototypes == initial.prototypes);
}

TEST_CASE("training touches the teacher only through the moving average") {
  const auto corpus = TinyCorpus();
  ModelConfig model = TinyModel();
  model.ema_base = 1.0;
  model.ema_final = 1.0;
  TrainState state = InitTrainState(model);
  const Branch teacher = state.pair.teacher;
  const auto log = Train(corpus, state, TinyTrain());
  CHECK(log.size() == 4);
  CHECK_FALSE(state.pair.student.frame.weight == teacher.frame.weight);
  const auto a = state.pair.teacher.NamedParameters();
  const auto b = teacher.NamedParameters();
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(*a[i].second == *b[i].second);
}

TEST_CASE("training log and invariants") {
  const auto corpus = TinyCorpus();
  TrainConfig cfg = TinyTrain();
  cfg.regularizer = RegularizerKind::kFrobenius;
  TrainState state = InitTrainState(TinyModel());
  int calls = 0;
  const auto log = Train(corpus, state, cfg,
                         [&](const TrainState& s, const EpochRecord& r) {
                           ++calls;
                           CHECK(s.epochs_done == r.epoch);
                           for (std::size_t k = 0; k < s.pair.prototypes.rows(); ++k)
                             CHECK(std::abs(Norm(s.pair.prototypes.Row(k)) - 1.0) < 1e-9);
                         });
  CHECK(calls == 4);
  // 12 utterances in batches of 5: 5, 5, 2.
  CHECK(log[0].steps == 3);
  CHECK(state.step == 12);
  for (const EpochRecord& r : log) {
    CHECK(std::isfinite(r.mean_terms.total));
    CHECK(r.mean_terms.dr >= std::log(5.0) - 1e-9);
    CHECK(r.diagnostics.mean_abs_offdiag >= 0.0);
    CHECK(r.diagnostics.mean_abs_offdiag <= 1.0);
  }
  // 12 steps, 3 of warm-up; the last logged rate is that of step 11.
  CHECK(log.back().lr == LearningRateAt(11, 12, 3, cfg.lr_peak, cfg.lr_final));
  CHECK(log.front().lr == LearningRateAt(2, 12, 3, cfg.lr_peak, cfg.lr_final));
}

TEST_CASE("training is deterministic and resumable") {
  const auto corpus = TinyCorpus();
  TrainConfig cfg = TinyTrain();
  cfg.regularizer = RegularizerKind::kOffDiagonal;

  TrainState full = InitTrainState(TinyModel());
  const auto full_log = Train(corpus, full, cfg);
  TrainState again = InitTrainState(TinyModel());
  Train(corpus, again, cfg);
  CHECK(PairTensors(full.pair) == PairTensors(again.pair));

  TrainState part = InitTrainState(TinyModel());
  Train(corpus, part, cfg, {}, 2);
  CHECK(part.epochs_done == 2);
  const Checkpoint ckpt =
      DecodeCheckpoint(EncodeCheckpoint(StateToCheckpoint(part, "{}")), "mem");
  TrainState resumed = StateFromCheckpoint(ckpt, TinyModel());
  CHECK(resumed.epochs_done == 2);
  const auto rest = Train(corpus, resumed, cfg);
  CHECK(rest.size() == 2);
  CHECK(rest.back().mean_terms.total == full_log.back().mean_terms.total);
  CHECK(PairTensors(resumed.pair) == PairTensors(full.pair));
  CHECK(EncodeCheckpoint(StateToCheckpoint(resumed, "{}")) ==
        EncodeCheckpoint(StateToCheckpoint(full, "{}")));
}

TEST_CASE("too small a corpus is rejected") {
  auto corpus = TinyCorpus();
  corpus.resize(1);
  TrainState state = InitTrainState(TinyModel());
  CHECK_THROWS_AS(Train(corpus, state, TinyTrain()), Error);
}

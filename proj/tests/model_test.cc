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
#include <cstdio>
#include <random>

#include "doctest.h"
#include "sdpn/error.h"
#include "sdpn/model.h"

using namespace sdpn;

namespace {

ModelConfig Small() {
  ModelConfig c;
  c.feature_dim = 5;
  c.encoder_hidden = 6;
  c.embedding_dim = 4;
  c.proj_hidden1 = 7;
  c.proj_hidden2 = 6;
  c.proj_dim = 3;
  c.num_prototypes = 8;
  c.init_seed = 3;
  return c;
}

RealMatrix Random(std::size_t r, std::size_t c, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  RealMatrix m(r, c);
  for (double& x : m.data()) x = g(rng);
  return m;
}

std::vector<CropSet> RandomBatch(std::size_t n, std::size_t feat,
                                 std::mt19937_64& rng) {
  std::vector<CropSet> batch(n);
  for (CropSet& c : batch) {
    c.global_views.push_back(Random(10, feat, rng));
    for (int l = 0; l < 4; ++l) c.local_views.push_back(Random(5, feat, rng));
  }
  return batch;
}

}  // namespace

TEST_CASE("zero input gives zero pooled statistics") {
  Branch b = InitBranch(Small(), 1);
  b.frame.bias.SetZero();
  b.embed.bias.SetZero();
  b.proj3.bias(0, 0) = 1.0;  // keeps the head output away from zero
  ViewCache cache;
  const EmbedOutput out = ForwardEmbed(b, RealMatrix(6, 5), &cache);
  for (double x : cache.pooled) CHECK(x == 0.0);
  for (double x : out.embedding) CHECK(x == 0.0);
}

TEST_CASE("repeating frames leaves the mean pool unchanged") {
  std::mt19937_64 rng(31);
  const Branch b = InitBranch(Small(), 2);
  const RealMatrix x = Random(7, 5, rng);
  RealMatrix twice(14, 5);
  for (std::size_t t = 0; t < 14; ++t)
    for (std::size_t f = 0; f < 5; ++f) twice(t, f) = x(t % 7, f);
  ViewCache a, c;
  ForwardEmbed(b, x, &a);
  ForwardEmbed(b, twice, &c);
  for (std::size_t h = 0; h < a.mean.size(); ++h) {
    CHECK(a.mean[h] == doctest::Approx(c.mean[h]).epsilon(1e-14));
    CHECK(a.stddev[h] == doctest::Approx(c.stddev[h]).epsilon(1e-12));
  }
}

TEST_CASE("projection output is unit norm") {
  std::mt19937_64 rng(32);
  const Branch b = InitBranch(Small(), 3);
  for (int t = 0; t < 30; ++t) {
    const EmbedOutput out = ForwardEmbed(b, Random(3 + t % 9, 5, rng));
    CHECK(std::abs(Norm(out.projected) - 1.0) < 1e-9);
    CHECK(out.embedding.size() == 4);
    CHECK(out.projected.size() == 3);
  }
}

TEST_CASE("feature dimension mismatch is rejected") {
  const Branch b = InitBranch(Small(), 3);
  try {
    ForwardEmbed(b, RealMatrix(4, 6));
    FAIL("expected ShapeMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kShapeMismatch);
  }
}

TEST_CASE("seeded forward regression fixture") {
  const Branch b = InitBranch(Small(), 11);
  RealMatrix x(4, 5);
  for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] = std::sin(0.7 * i);
  const EmbedOutput out = ForwardEmbed(b, x);
  const double golden_embedding[] = {-0.11953721189656595, 0.10280697008367964,
                                     -0.14252293484129666, -0.25977409681421243};
  const double golden_projected[] = {0.89776394149863326, -0.16090113846847198,
                                     -0.41003747265876594};
  for (std::size_t k = 0; k < 4; ++k)
    CHECK(out.embedding[k] == doctest::Approx(golden_embedding[k]).epsilon(1e-12));
  for (std::size_t k = 0; k < 3; ++k)
    CHECK(out.projected[k] == doctest::Approx(golden_projected[k]).epsilon(1e-12));
}

TEST_CASE("backward through the embedder matches finite differences") {
  std::mt19937_64 rng(33);
  const Branch b = InitBranch(Small(), 4);
  const RealMatrix x = Random(6, 5, rng);
  const RealMatrix wp = Random(1, 3, rng);
  const RealMatrix we = Random(1, 4, rng);
  auto objective = [&](const Branch& br) {
    const EmbedOutput o = ForwardEmbed(br, x);
    return Dot(o.projected, wp.Row(0)) + Dot(o.embedding, we.Row(0));
  };
  ViewCache cache;
  ForwardEmbed(b, x, &cache);
  Branch grads = ZerosLike(b);
  BackwardEmbed(b, cache, wp.Row(0), we.Row(0), &grads);
  auto params = const_cast<Branch&>(b).NamedParameters();
  auto gparams = grads.NamedParameters();
  for (std::size_t t = 0; t < params.size(); ++t) {
    const RealMatrix numeric = FiniteDiffGradient(
        [&](const RealMatrix& v) {
          Branch moved = b;
          *moved.NamedParameters()[t].second = v;
          return objective(moved);
        },
        *params[t].second, 1e-5);
    CAPTURE(params[t].first);
    CHECK(MaxRelativeError(*gparams[t].second, numeric) < 1e-5);
  }
}

TEST_CASE("prototype distribution") {
  const RealMatrix bank = RealMatrix::Identity(2);
  const RealVector p = PrototypeDistribution(std::vector<double>{1, 0}, bank, 1.0);
  const double e = std::exp(1.0);
  CHECK(p[0] == doctest::Approx(e / (e + 1)).epsilon(1e-14));
  CHECK(p[1] == doctest::Approx(1 / (e + 1)).epsilon(1e-14));
  const RealMatrix bank3 = RealMatrix::Identity(3);
  const RealVector sharp =
      PrototypeDistribution(std::vector<double>{0, 0, 1}, bank3, 0.01);
  CHECK(sharp[2] > 0.99);
  const RealMatrix same = RealMatrix::FromRows({{0.6, 0.8}, {0.6, 0.8}, {0.6, 0.8}});
  for (double x : PrototypeDistribution(std::vector<double>{0.3, -0.1}, same, 0.1))
    CHECK(x == doctest::Approx(1.0 / 3.0));
  // Centering subtracts before the temperature.
  const RealVector centered = PrototypeDistribution(
      std::vector<double>{1, 0}, bank, 1.0, std::vector<double>{1, 0});
  CHECK(centered[0] == doctest::Approx(0.5));
}

TEST_CASE("ema update") {
  ModelConfig cfg = Small();
  TeacherStudentPair pair = InitPair(cfg);
  std::mt19937_64 rng(34);
  for (auto& [name, p] : pair.student.NamedParameters())
    p->AddScaled(Random(p->rows(), p->cols(), rng), 1.0);
  const Branch old_teacher = pair.teacher;

  TeacherStudentPair zero = pair;
  EmaUpdate(zero, 0.0);
  CHECK(zero.teacher.frame.weight == pair.student.frame.weight);

  TeacherStudentPair one = pair;
  EmaUpdate(one, 0.999);
  const auto t_new = one.teacher.NamedParameters();
  const auto t_old = old_teacher.NamedParameters();
  const auto s = pair.student.NamedParameters();
  for (std::size_t i = 0; i < t_new.size(); ++i) {
    for (std::size_t k = 0; k < t_new[i].second->size(); ++k) {
      const double o = t_old[i].second->data()[k];
      const double st = s[i].second->data()[k];
      const double n = t_new[i].second->data()[k];
      CHECK(n == doctest::Approx(o + 0.001 * (st - o)).epsilon(1e-12));
      CHECK(n >= std::min(o, st) - 1e-15);
      CHECK(n <= std::max(o, st) + 1e-15);
    }
  }

  // Two updates shrink the gap by m^2.
  TeacherStudentPair twice = pair;
  EmaUpdate(twice, 0.7);
  EmaUpdate(twice, 0.7);
  const double gap0 = old_teacher.embed.weight(0, 0) - pair.student.embed.weight(0, 0);
  const double gap2 = twice.teacher.embed.weight(0, 0) - pair.student.embed.weight(0, 0);
  CHECK(gap2 == doctest::Approx(0.49 * gap0).epsilon(1e-12));

  CHECK_THROWS_AS(EmaUpdate(twice, 1.0), Error);
  CHECK_THROWS_AS(EmaUpdate(twice, -0.1), Error);
}

TEST_CASE("init pair") {
  const TeacherStudentPair pair = InitPair(Small());
  CHECK(pair.teacher.proj3.weight == pair.student.proj3.weight);
  CHECK(pair.prototypes.rows() == 8);
  CHECK(pair.prototypes.cols() == 3);
  for (std::size_t k = 0; k < 8; ++k)
    CHECK(std::abs(Norm(pair.prototypes.Row(k)) - 1.0) < 1e-12);
  CHECK(pair.center.size() == 8);
  const TeacherStudentPair again = InitPair(Small());
  CHECK(again.prototypes == pair.prototypes);
}

TEST_CASE("multi-view forward shapes and teacher isolation") {
  std::mt19937_64 rng(35);
  const TeacherStudentPair pair = InitPair(Small());
  const std::vector<CropSet> batch = RandomBatch(5, 5, rng);
  const MultiViewOutput out = MultiViewForward(pair, batch);
  CHECK(out.p_teacher.size() == 5);
  CHECK(out.p_teacher[0].rows() == 1);
  CHECK(out.student_logits[0].rows() == 4);
  CHECK(out.teacher_global.rows() == 5);
  CHECK(out.teacher_global.cols() == 3);
  CHECK(out.student_global.rows() == 5);
  // Identical parameters: the teacher and student global outputs agree.
  CHECK(out.teacher_global == out.student_global);
  // Teacher outputs do not change when only the student moves.
  TeacherStudentPair moved = pair;
  moved.student.proj3.weight.Scale(2.0);
  const MultiViewOutput out2 = MultiViewForward(moved, batch);
  CHECK(out2.teacher_global == out.teacher_global);
  CHECK(out2.p_teacher[2] == out.p_teacher[2]);
}

TEST_CASE("checkpoint round trip") {
  TeacherStudentPair pair = InitPair(Small());
  pair.center[3] = 0.25;
  Checkpoint ckpt;
  ckpt.config_json = "{\"a\":1}";
  ckpt.tensors = PairTensors(pair);
  const std::string bytes = EncodeCheckpoint(ckpt);
  CHECK(bytes.substr(0, 4) == "SDCK");
  const Checkpoint back = DecodeCheckpoint(bytes, "mem");
  CHECK(back.config_json == ckpt.config_json);
  CHECK(EncodeCheckpoint(back) == bytes);
  TeacherStudentPair loaded = InitPair(Small());
  LoadPairTensors(back.tensors, &loaded);
  CHECK(loaded.center[3] == 0.25);
  CHECK(loaded.student.frame.weight == pair.student.frame.weight);

  try {
    DecodeCheckpoint(bytes.substr(0, bytes.size() - 3), "mem");
    FAIL("expected MalformedFile");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kMalformedFile);
  }
  std::string tampered = bytes;
  tampered[20] ^= 0x01;  // inside the config string: hash mismatch
  CHECK_THROWS_AS(DecodeCheckpoint(tampered, "mem"), Error);

  ModelConfig other = Small();
  other.proj_dim = 4;
  TeacherStudentPair wrong = InitPair(other);
  try {
    LoadPairTensors(back.tensors, &wrong);
    FAIL("expected ShapeMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kShapeMismatch);
  }
}

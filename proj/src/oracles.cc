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

#include "sdpn/oracles.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <random>

#include "json.hpp"
#include "sdpn/config.h"
#include "sdpn/error.h"
#include "sdpn/losses.h"
#include "sdpn/model.h"
#include "sdpn/scoring.h"
#include "sdpn/trainer.h"

namespace sdpn {

const char* OracleKindName(OracleKind kind) {
  switch (kind) {
    case OracleKind::kFiniteDifference: return "finite_difference";
    case OracleKind::kExhaustiveThreshold: return "exhaustive_threshold";
    case OracleKind::kAlgebraicIdentity: return "algebraic_identity";
    case OracleKind::kPairedRun: return "paired_run";
  }
  return "unknown";
}

std::string CaseReport::ToJson() const {
  nlohmann::ordered_json j;
  j["name"] = name;
  j["kind"] = OracleKindName(kind);
  j["instances"] = instances;
  j["tolerance"] = tolerance;
  j["max_deviation"] = max_deviation;
  j["passed"] = passed;
  j["seconds"] = seconds;
  if (!error.empty()) j["error"] = error;
  return j.dump();
}

namespace {

using Rng = std::mt19937_64;

RealMatrix RandomMatrix(std::size_t rows, std::size_t cols, Rng& rng,
                        double scale = 1.0) {
  std::normal_distribution<double> gauss(0.0, scale);
  RealMatrix m(rows, cols);
  for (double& x : m.data()) x = gauss(rng);
  return m;
}

std::size_t UniformSize(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

// Every row's nearest and second-nearest neighbours differ by at least
// `margin`, so the nearest-neighbour assignment is stable under FD steps.
bool NeighboursWellSeparated(const RealMatrix& batch, double margin) {
  for (std::size_t u = 0; u < batch.rows(); ++u) {
    std::vector<double> dist;
    for (std::size_t v = 0; v < batch.rows(); ++v) {
      if (v == u) continue;
      double ss = 0.0;
      for (std::size_t k = 0; k < batch.cols(); ++k) {
        const double diff = batch(u, k) - batch(v, k);
        ss += diff * diff;
      }
      dist.push_back(std::sqrt(ss));
    }
    std::sort(dist.begin(), dist.end());
    if (dist.size() >= 2 && dist[1] - dist[0] < margin) return false;
  }
  return true;
}

constexpr double kTieMargin = 1e-3;

}  // namespace

double FdCrossEntropy(std::uint64_t seed, int instances) {
  Rng rng(seed);
  double worst = 0.0;
  for (int i = 0; i < instances; ++i) {
    const std::size_t n = UniformSize(rng, 4, 16);  // local views
    const std::size_t d = UniformSize(rng, 3, 8);   // prototypes
    const std::size_t g = UniformSize(rng, 1, 2);   // global views
    const double tau = std::uniform_real_distribution<double>(0.1, 1.0)(rng);
    const RealMatrix teacher_logits = RandomMatrix(g, d, rng, 2.0);
    RealMatrix p_teacher(g, d);
    for (std::size_t r = 0; r < g; ++r) {
      const RealVector p = Softmax(teacher_logits.Row(r), 0.5);
      std::copy(p.begin(), p.end(), p_teacher.Row(r).begin());
    }
    // Logits on the scale of tau keep every probability above the floor,
    // where the loss is flat.
    const RealMatrix logits = RandomMatrix(n, d, rng, tau);
    const LossValue analytic = CrossEntropyLoss(p_teacher, logits, tau);
    const RealMatrix numeric = FiniteDiffGradient(
        [&](const RealMatrix& x) {
          return CrossEntropyLoss(p_teacher, x, tau).value;
        },
        logits, kFdStep);
    worst = std::max(worst, MaxRelativeError(analytic.gradient, numeric));
  }
  return worst;
}

double FdDiversity(std::uint64_t seed, int instances) {
  Rng rng(seed);
  double worst = 0.0;
  for (int i = 0; i < instances; ++i) {
    const std::size_t n = UniformSize(rng, 4, 16);
    const std::size_t d = UniformSize(rng, 3, 8);
    const bool literal = (i % 2) == 1;
    RealMatrix batch;
    do {
      batch = RandomMatrix(n, d, rng);
    } while (!NeighboursWellSeparated(batch, kTieMargin));
    const DiversityOptions opts{literal};
    const LossValue analytic = DiversityRegularization(batch, opts);
    const RealMatrix numeric = FiniteDiffGradient(
        [&](const RealMatrix& x) { return DiversityRegularization(x, opts).value; },
        batch, kFdStep);
    worst = std::max(worst, MaxRelativeError(analytic.gradient, numeric));
  }
  return worst;
}

namespace {

using PairLoss = PairLossValue (*)(const RealMatrix&, const RealMatrix&,
                                   const CovarianceOptions&);

double FdPairLoss(PairLoss loss, std::uint64_t seed, int instances) {
  Rng rng(seed);
  double worst = 0.0;
  for (int i = 0; i < instances; ++i) {
    const std::size_t n = UniformSize(rng, 4, 16);
    const std::size_t d = UniformSize(rng, 3, 8);
    const CovarianceOptions opts{false, (i % 3) == 2};
    const RealMatrix teacher = RandomMatrix(n, d, rng);
    const RealMatrix student = RandomMatrix(n, d, rng);
    const PairLossValue analytic = loss(teacher, student, opts);
    const RealMatrix num_t = FiniteDiffGradient(
        [&](const RealMatrix& x) { return loss(x, student, opts).value; },
        teacher, kFdStep);
    const RealMatrix num_s = FiniteDiffGradient(
        [&](const RealMatrix& x) { return loss(teacher, x, opts).value; },
        student, kFdStep);
    worst = std::max({worst, MaxRelativeError(analytic.teacher_gradient, num_t),
                      MaxRelativeError(analytic.student_gradient, num_s)});
  }
  return worst;
}

}  // namespace

double FdOffDiagonal(std::uint64_t seed, int instances) {
  return FdPairLoss(&OffDiagonalRegularization, seed, instances);
}

double FdFrobenius(std::uint64_t seed, int instances) {
  return FdPairLoss(&FrobeniusRegularization, seed, instances);
}

double FdComposite(std::uint64_t seed, int instances) {
  Rng rng(seed);
  double worst = 0.0;
  for (int i = 0; i < instances; ++i) {
    const std::size_t n = UniformSize(rng, 4, 16);
    const std::size_t d = UniformSize(rng, 3, 8);
    ModelConfig mc;
    mc.feature_dim = 3;
    mc.encoder_hidden = 4;
    mc.embedding_dim = 4;
    mc.proj_hidden1 = 5;
    mc.proj_hidden2 = 5;
    mc.proj_dim = static_cast<int>(d);
    mc.num_prototypes = 5;
    mc.student_temperature =
        std::uniform_real_distribution<double>(0.1, 0.5)(rng);
    mc.teacher_temperature = 0.07;
    mc.init_seed = rng();
    TeacherStudentPair pair = InitPair(mc);
    // Give the teacher its own parameters and the centre a non-zero value.
    for (auto& [name, p] : pair.teacher.NamedParameters())
      p->AddScaled(RandomMatrix(p->rows(), p->cols(), rng, 0.1), 1.0);
    for (double& c : pair.center) c = 0.1 * std::normal_distribution<double>()(rng);

    ObjectiveOptions opts;
    opts.weights.mu = std::uniform_real_distribution<double>(0.05, 0.5)(rng);
    opts.weights.lambda = std::uniform_real_distribution<double>(0.05, 0.5)(rng);
    opts.regularizer =
        (i % 2) == 0 ? RegularizerKind::kOffDiagonal : RegularizerKind::kFrobenius;
    opts.covariance = {true, false};

    std::vector<CropSet> batch;
    TeacherOutputs teacher;
    for (int attempt = 0;; ++attempt) {
      batch.clear();
      for (std::size_t b = 0; b < n; ++b) {
        CropSet crops;
        crops.global_views.push_back(RandomMatrix(8, 3, rng));
        crops.local_views.push_back(RandomMatrix(4, 3, rng));
        crops.local_views.push_back(RandomMatrix(4, 3, rng));
        batch.push_back(std::move(crops));
      }
      const MultiViewOutput fw = MultiViewForward(pair, batch);
      if (NeighboursWellSeparated(fw.student_global, kTieMargin)) break;
      if (attempt > 1000) Fail(ErrorCode::kInvalidConfig, "cannot avoid ties");
    }
    teacher = TeacherForward(pair, batch);

    const ObjectiveResult analytic = EvaluateObjective(pair, batch, opts, &teacher);
    auto params = pair.StudentParameters();
    auto grad_branch = analytic.student_grad;
    auto grads = grad_branch.NamedParameters();
    grads.emplace_back("prototypes", const_cast<RealMatrix*>(&analytic.prototype_grad));
    for (std::size_t t = 0; t < params.size(); ++t) {
      const std::size_t index = t;
      const RealMatrix numeric = FiniteDiffGradient(
          [&](const RealMatrix& x) {
            TeacherStudentPair moved = pair;
            *moved.StudentParameters()[index].second = x;
            return EvaluateObjective(moved, batch, opts, &teacher).terms.total;
          },
          *params[t].second, kFdStep);
      worst = std::max(worst, MaxRelativeError(*grads[t].second, numeric));
    }
  }
  return worst;
}

double FrobeniusGradConsistency(std::uint64_t seed, int instances) {
  Rng rng(seed);
  std::uniform_real_distribution<double> entry(-1.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < instances; ++i) {
    const std::size_t d = UniformSize(rng, 2, 8);
    RealMatrix c = RealMatrix::Identity(d);
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = a + 1; b < d; ++b) c(a, b) = c(b, a) = entry(rng);
    const RealMatrix analytic = FrobeniusGradWrtC(c);
    // Each off-diagonal entry perturbed on its own, diagonal pinned at 1.
    RealMatrix numeric(d, d);
    for (std::size_t a = 0; a < d; ++a) {
      for (std::size_t b = 0; b < d; ++b) {
        if (a == b) continue;
        RealMatrix plus = c, minus = c;
        plus(a, b) += kFdStep;
        minus(a, b) -= kFdStep;
        numeric(a, b) =
            (std::log(FrobeniusNorm(plus)) - std::log(FrobeniusNorm(minus))) /
            (2.0 * kFdStep);
      }
    }
    for (std::size_t k = 0; k < analytic.size(); ++k) {
      worst = std::max(worst, std::abs(analytic.data()[k] - numeric.data()[k]));
    }
  }
  return worst;
}

double BruteForceEer(std::span<const LabeledScore> scores) {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> thresholds = {-inf, inf};
  for (const LabeledScore& s : scores) thresholds.push_back(s.score);
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()),
                   thresholds.end());
  std::vector<std::pair<double, double>> rates;  // (p_miss, p_fa)
  for (double th : thresholds) {
    int tar = 0, non = 0, miss = 0, fa = 0;
    for (const LabeledScore& s : scores) {
      const bool accept = s.score >= th;
      if (s.target) {
        ++tar;
        if (!accept) ++miss;
      } else {
        ++non;
        if (accept) ++fa;
      }
    }
    rates.emplace_back(static_cast<double>(miss) / tar,
                       static_cast<double>(fa) / non);
  }
  for (std::size_t i = 1; i < rates.size(); ++i) {
    if (rates[i].first < rates[i].second) continue;
    const double d_lo = rates[i - 1].first - rates[i - 1].second;
    const double d_hi = rates[i].first - rates[i].second;
    const double w = d_lo / (d_lo - d_hi);
    return rates[i - 1].first + w * (rates[i].first - rates[i - 1].first);
  }
  return 1.0;
}

double BruteForceMinDcf(std::span<const LabeledScore> scores, double p_target,
                        double c_miss, double c_fa) {
  const double c_def = std::min(c_miss * p_target, c_fa * (1.0 - p_target));
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> thresholds = {-inf, inf};
  for (const LabeledScore& s : scores) thresholds.push_back(s.score);
  double best = inf;
  for (double th : thresholds) {
    int tar = 0, non = 0, miss = 0, fa = 0;
    for (const LabeledScore& s : scores) {
      const bool accept = s.score >= th;
      if (s.target) {
        ++tar;
        if (!accept) ++miss;
      } else {
        ++non;
        if (accept) ++fa;
      }
    }
    const double p_miss = static_cast<double>(miss) / tar;
    const double p_fa = static_cast<double>(fa) / non;
    best = std::min(best, (c_miss * p_miss * p_target +
                           c_fa * p_fa * (1.0 - p_target)) / c_def);
  }
  return best;
}

namespace {

std::vector<LabeledScore> RandomScoreSet(Rng& rng) {
  const std::size_t n = UniformSize(rng, 2, 60);
  const bool coarse = rng() % 2 == 0;  // coarse grid produces ties
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<LabeledScore> scores(n);
  for (std::size_t i = 0; i < n; ++i) {
    const bool target = rng() % 2 == 0;
    double s = gauss(rng) + (target ? 1.0 : 0.0);
    if (coarse) s = std::round(s * 4.0) / 4.0;
    scores[i] = {s, target};
  }
  scores[0].target = true;
  scores[1].target = false;
  return scores;
}

double MetricExhaustive(std::uint64_t seed, int instances) {
  Rng rng(seed);
  double worst = 0.0;
  for (int i = 0; i < instances; ++i) {
    const std::vector<LabeledScore> scores = RandomScoreSet(rng);
    const double eer_dev = std::abs(ComputeEer(scores).eer - BruteForceEer(scores));
    const double dcf_dev =
        std::abs(ComputeMinDcf(scores, 0.05, 1.0, 1.0).min_dcf -
                 BruteForceMinDcf(scores, 0.05, 1.0, 1.0));
    // minDCF must agree exactly; any difference fails the case outright.
    worst = std::max({worst, eer_dev, dcf_dev > 0.0 ? 1.0 : 0.0});
  }
  return worst;
}

double MetricMonotoneInvariance(std::uint64_t seed, int instances) {
  Rng rng(seed);
  double worst = 0.0;
  for (int i = 0; i < instances; ++i) {
    const std::vector<LabeledScore> scores = RandomScoreSet(rng);
    const EerResult eer = ComputeEer(scores);
    const DcfResult dcf = ComputeMinDcf(scores);
    for (int which = 0; which < 2; ++which) {
      std::vector<LabeledScore> mapped = scores;
      for (LabeledScore& s : mapped)
        s.score = which == 0 ? std::exp(s.score) : 2.0 * s.score + 3.0;
      worst = std::max({worst, std::abs(ComputeEer(mapped).eer - eer.eer),
                        std::abs(ComputeMinDcf(mapped).min_dcf - dcf.min_dcf)});
    }
  }
  return worst;
}

std::vector<double> RandomCohortScores(Rng& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(-0.5, 0.9);
  std::vector<double> s(n);
  for (double& x : s) x = u(rng);
  return s;
}

double AsNormEqualsSNorm(std::uint64_t seed, int instances) {
  Rng rng(seed);
  double worst = 0.0;
  for (int i = 0; i < instances; ++i) {
    const std::size_t n = UniformSize(rng, 2, 50);
    const auto e = RandomCohortScores(rng, n);
    const auto t = RandomCohortScores(rng, n);
    const double raw = std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
    const double as = AsNorm(raw, e, t, n);
    const double s = SNorm(raw, ComputeCohortStats(e, n), ComputeCohortStats(t, n));
    worst = std::max(worst, std::abs(as - s));
  }
  return worst;
}

double NormAffineInvariance(std::uint64_t seed, int instances) {
  Rng rng(seed);
  double worst = 0.0;
  for (int i = 0; i < instances; ++i) {
    const std::size_t n = UniformSize(rng, 4, 50);
    const std::size_t k = UniformSize(rng, 2, n);
    const auto e = RandomCohortScores(rng, n);
    const auto t = RandomCohortScores(rng, n);
    const double raw = std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
    auto all = [&](double r, const std::vector<double>& es,
                   const std::vector<double>& ts) {
      const CohortStats se = ComputeCohortStats(es, n);
      const CohortStats st = ComputeCohortStats(ts, n);
      return std::vector<double>{ZNorm(r, se), TNorm(r, st), SNorm(r, se, st),
                                 AsNorm(r, es, ts, k)};
    };
    const auto base = all(raw, e, t);
    for (double a : {0.5, 3.0}) {
      for (double b : {-1.0, 2.0}) {
        auto map = [&](std::vector<double> v) {
          for (double& x : v) x = a * x + b;
          return v;
        };
        const auto moved = all(a * raw + b, map(e), map(t));
        for (std::size_t m = 0; m < base.size(); ++m)
          worst = std::max(worst, std::abs(moved[m] - base[m]));
      }
    }
  }
  return worst;
}

double AsNormHandCase(std::uint64_t, int) {
  const std::vector<double> e = {0.9, 0.5, 0.1};
  const std::vector<double> t = {0.7, 0.6, 0.2};
  return std::abs(AsNorm(0.8, e, t, 2) - 1.75);
}

double CovarianceProperties(std::uint64_t seed, int instances) {
  Rng rng(seed);
  double worst = 0.0;
  std::uniform_real_distribution<double> scale(0.1, 10.0);
  for (int i = 0; i < instances; ++i) {
    const std::size_t n = UniformSize(rng, 2, 32);
    const std::size_t d = UniformSize(rng, 1, 12);
    const RealMatrix batch = RandomMatrix(n, d, rng);
    const RealMatrix c = NormalizedCovariance(batch);
    RealMatrix scaled = batch;
    for (std::size_t j = 0; j < d; ++j) {
      const double s = scale(rng);
      for (std::size_t b = 0; b < n; ++b) scaled(b, j) *= s;
    }
    const RealMatrix c_scaled = NormalizedCovariance(scaled);
    for (std::size_t a = 0; a < d; ++a) {
      worst = std::max(worst, std::abs(c(a, a) - 1.0));
      for (std::size_t b = 0; b < d; ++b) {
        worst = std::max({worst, std::abs(c(a, b) - c(b, a)),
                          std::max(0.0, std::abs(c(a, b)) - 1.0),
                          std::abs(c(a, b) - c_scaled(a, b))});
      }
    }
  }
  return worst;
}

}  // namespace

PairedRunResult RunAntiCollapseExperiment(std::uint64_t seed) {
  const auto start = std::chrono::steady_clock::now();
  RunConfig cfg;
  cfg.seed = seed;
  cfg.data.train.num_speakers = 20;
  cfg.data.train.utts_per_speaker = 10;
  // Short utterances and a high rate buy enough steps for the weak
  // Frobenius term inside the time budget.
  cfg.data.train.frames_per_utt = 60;
  cfg.train.crops = {1, 4, 50, 25};
  cfg.train.epochs = 300;
  cfg.train.warmup_epochs = 3;
  cfg.train.lr_peak = 0.3;
  cfg.Resolve();
  cfg.Validate();
  const std::vector<Utterance> corpus = GenerateSyntheticCorpus(cfg.data.train);
  const std::vector<UnlabeledUtterance> unlabeled = StripLabels(corpus);

  PairedRunResult result;
  for (RegularizerKind kind : {RegularizerKind::kNone,
                               RegularizerKind::kOffDiagonal,
                               RegularizerKind::kFrobenius}) {
    TrainConfig tc = cfg.train;
    tc.regularizer = kind;
    TrainState state = InitTrainState(cfg.model);
    const auto log = Train(unlabeled, state, tc);
    const double offdiag = log.back().diagnostics.mean_abs_offdiag;
    if (kind == RegularizerKind::kNone) result.none = offdiag;
    if (kind == RegularizerKind::kOffDiagonal) result.off_diagonal = offdiag;
    if (kind == RegularizerKind::kFrobenius) result.frobenius = offdiag;
  }
  result.seconds = std::chrono::duration<double>(
                       std::chrono::steady_clock::now() - start).count();
  return result;
}

const std::vector<OracleCase>& RegisteredCases() {
  static const std::vector<OracleCase> cases = {
      {"fd_ce", 101, kFdTolerance, OracleKind::kFiniteDifference, 50,
       FdCrossEntropy},
      {"fd_re", 102, kFdTolerance, OracleKind::kFiniteDifference, 50,
       FdDiversity},
      {"fd_odr", 103, kFdTolerance, OracleKind::kFiniteDifference, 50,
       FdOffDiagonal},
      {"fd_fdr", 104, kFdTolerance, OracleKind::kFiniteDifference, 50,
       FdFrobenius},
      {"fd_composite", 105, kFdTolerance, OracleKind::kFiniteDifference, 50,
       FdComposite},
      {"fdr_grad_wrt_c", 106, 1e-6, OracleKind::kFiniteDifference, 100,
       FrobeniusGradConsistency},
      {"metric_exhaustive", 201, 1e-12, OracleKind::kExhaustiveThreshold, 200,
       MetricExhaustive},
      {"metric_monotone_invariance", 202, 1e-12,
       OracleKind::kExhaustiveThreshold, 200, MetricMonotoneInvariance},
      {"asnorm_full_k_equals_snorm", 301, 1e-12,
       OracleKind::kAlgebraicIdentity, 200, AsNormEqualsSNorm},
      {"norm_affine_invariance", 302, 1e-10, OracleKind::kAlgebraicIdentity,
       200, NormAffineInvariance},
      {"asnorm_hand_case", 303, 1e-14, OracleKind::kAlgebraicIdentity, 1,
       AsNormHandCase},
      {"covariance_properties", 304, 1e-12, OracleKind::kAlgebraicIdentity,
       100, CovarianceProperties},
      // Deviation is the larger regularized/unregularized ratio; passes at 0.5.
      {"anti_collapse", 401, 0.5, OracleKind::kPairedRun, 1,
       [](std::uint64_t seed, int) {
         const PairedRunResult r = RunAntiCollapseExperiment(seed);
         return std::max(r.off_diagonal, r.frobenius) / r.none;
       }},
  };
  return cases;
}

CaseReport RunCase(const OracleCase& c, std::uint64_t seed, int instances) {
  CaseReport r;
  r.name = c.name;
  r.kind = c.kind;
  r.tolerance = c.tolerance;
  r.instances = instances;
  const auto start = std::chrono::steady_clock::now();
  try {
    r.max_deviation = c.run(seed, instances);
    r.passed = std::isfinite(r.max_deviation) && r.max_deviation <= c.tolerance;
  } catch (const std::exception& e) {
    r.error = e.what();
    r.max_deviation = std::numeric_limits<double>::infinity();
    r.passed = false;
  }
  r.seconds = std::chrono::duration<double>(
                  std::chrono::steady_clock::now() - start).count();
  return r;
}

std::vector<CaseReport> RunSuite(const std::string& filter, bool include_slow) {
  std::vector<CaseReport> reports;
  for (const OracleCase& c : RegisteredCases()) {
    if (!filter.empty() && c.name.find(filter) == std::string::npos) continue;
    if (c.kind == OracleKind::kPairedRun && !include_slow) continue;
    reports.push_back(RunCase(c, c.seed, c.instances));
  }
  return reports;
}

std::string ReportToJsonLines(const std::vector<CaseReport>& reports) {
  std::string out;
  for (const CaseReport& r : reports) out += r.ToJson() + "\n";
  return out;
}

}  // namespace sdpn

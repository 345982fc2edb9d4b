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

#include "sdpn/metrics.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "json.hpp"
#include "sdpn/error.h"

namespace sdpn {

namespace {

void CountClasses(std::span<const LabeledScore> scores, std::size_t* targets,
                  std::size_t* nontargets) {
  *targets = 0;
  *nontargets = 0;
  for (const LabeledScore& s : scores) {
    if (!std::isfinite(s.score)) {
      Fail(ErrorCode::kInvalidConfig, "non-finite score");
    }
    (s.target ? *targets : *nontargets) += 1;
  }
  if (*targets == 0 || *nontargets == 0) {
    Fail(ErrorCode::kSingleClassInput,
         std::to_string(*targets) + " targets, " + std::to_string(*nontargets) +
             " nontargets");
  }
}

}  // namespace

std::vector<DetPoint> DetSweep(std::span<const LabeledScore> scores) {
  std::size_t n_tar = 0, n_non = 0;
  CountClasses(scores, &n_tar, &n_non);
  std::vector<LabeledScore> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const LabeledScore& a, const LabeledScore& b) {
              return a.score < b.score;
            });
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<DetPoint> points;
  points.push_back({-inf, 0.0, 1.0});
  // Walking up the sorted scores, everything below the current threshold
  // is rejected.
  std::size_t rejected_tar = 0, rejected_non = 0;
  for (std::size_t i = 0; i < sorted.size();) {
    const double threshold = sorted[i].score;
    points.push_back({threshold,
                      static_cast<double>(rejected_tar) / n_tar,
                      static_cast<double>(n_non - rejected_non) / n_non});
    for (; i < sorted.size() && sorted[i].score == threshold; ++i)
      (sorted[i].target ? rejected_tar : rejected_non) += 1;
  }
  points.push_back({inf, 1.0, 0.0});
  return points;
}

EerResult ComputeEer(std::span<const LabeledScore> scores) {
  const std::vector<DetPoint> points = DetSweep(scores);
  for (std::size_t i = 1; i < points.size(); ++i) {
    const DetPoint& hi = points[i];
    if (hi.p_miss < hi.p_fa) continue;
    const DetPoint& lo = points[i - 1];
    const double d_lo = lo.p_miss - lo.p_fa;  // < 0
    const double d_hi = hi.p_miss - hi.p_fa;  // >= 0
    const double w = d_lo / (d_lo - d_hi);
    EerResult r;
    r.eer = lo.p_miss + w * (hi.p_miss - lo.p_miss);
    if (std::isinf(lo.threshold)) {
      r.threshold = hi.threshold;
    } else if (std::isinf(hi.threshold)) {
      r.threshold = lo.threshold;
    } else {
      r.threshold = lo.threshold + w * (hi.threshold - lo.threshold);
    }
    return r;
  }
  // Unreachable: the reject-all point always has p_miss = 1 > p_fa = 0.
  return {1.0, std::numeric_limits<double>::infinity()};
}

DcfResult ComputeMinDcf(std::span<const LabeledScore> scores, double p_target,
                        double c_miss, double c_fa) {
  if (!(p_target > 0.0 && p_target < 1.0) || !(c_miss > 0.0) ||
      !(c_fa > 0.0)) {
    Fail(ErrorCode::kInvalidConfig, "need 0 < p_target < 1 and positive costs");
  }
  const double c_def = std::min(c_miss * p_target, c_fa * (1.0 - p_target));
  DcfResult best{std::numeric_limits<double>::infinity(), 0.0};
  for (const DetPoint& p : DetSweep(scores)) {
    const double cost =
        (c_miss * p.p_miss * p_target + c_fa * p.p_fa * (1.0 - p_target)) /
        c_def;
    if (cost < best.min_dcf) best = {cost, p.threshold};
  }
  return best;
}

EvalReport Evaluate(std::span<const LabeledScore> scores, double p_target,
                    double c_miss, double c_fa) {
  EvalReport report;
  CountClasses(scores, &report.targets, &report.nontargets);
  report.trials = scores.size();
  const EerResult eer = ComputeEer(scores);
  const DcfResult dcf = ComputeMinDcf(scores, p_target, c_miss, c_fa);
  report.eer = eer.eer;
  report.eer_threshold = eer.threshold;
  report.min_dcf = dcf.min_dcf;
  report.dcf_threshold = dcf.threshold;
  report.p_target = p_target;
  report.c_miss = c_miss;
  report.c_fa = c_fa;
  return report;
}

std::string EvalReport::ToJson() const {
  auto finite_or_null = [](double x) {
    return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr);
  };
  nlohmann::ordered_json j;
  j["trials"] = trials;
  j["targets"] = targets;
  j["nontargets"] = nontargets;
  j["eer"] = eer;
  j["eer_threshold"] = finite_or_null(eer_threshold);
  j["min_dcf"] = min_dcf;
  j["dcf_threshold"] = finite_or_null(dcf_threshold);
  j["p_target"] = p_target;
  j["c_miss"] = c_miss;
  j["c_fa"] = c_fa;
  return j.dump();
}

}  // namespace sdpn

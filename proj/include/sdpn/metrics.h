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

#ifndef SDPN_METRICS_H_
#define SDPN_METRICS_H_

#include <span>
#include <string>
#include <vector>

namespace sdpn {

struct LabeledScore {
  double score = 0.0;
  bool target = false;
};

// Error rates when accepting every trial with score >= threshold.
struct DetPoint {
  double threshold = 0.0;
  double p_miss = 0.0;
  double p_fa = 0.0;
};

// Accept-all point (threshold -inf), one point per distinct score in
// ascending order, then the reject-all point (threshold +inf).
std::vector<DetPoint> DetSweep(std::span<const LabeledScore> scores);

struct EerResult {
  double eer = 0.0;
  double threshold = 0.0;
};

// Linear interpolation between the two adjacent sweep points where
// p_miss - p_fa changes sign.
EerResult ComputeEer(std::span<const LabeledScore> scores);

struct DcfResult {
  double min_dcf = 0.0;
  double threshold = 0.0;
};

inline constexpr double kDefaultPTarget = 0.05;

// Minimum over the sweep of
//   (c_miss p_miss p_target + c_fa p_fa (1 - p_target))
//     / min(c_miss p_target, c_fa (1 - p_target)).
DcfResult ComputeMinDcf(std::span<const LabeledScore> scores,
                        double p_target = kDefaultPTarget, double c_miss = 1.0,
                        double c_fa = 1.0);

struct EvalReport {
  std::size_t trials = 0;
  std::size_t targets = 0;
  std::size_t nontargets = 0;
  double eer = 0.0;
  double eer_threshold = 0.0;
  double min_dcf = 0.0;
  double dcf_threshold = 0.0;
  double p_target = kDefaultPTarget;
  double c_miss = 1.0;
  double c_fa = 1.0;

  // Single-line JSON object; infinite thresholds are written as null.
  std::string ToJson() const;
};

EvalReport Evaluate(std::span<const LabeledScore> scores,
                    double p_target = kDefaultPTarget, double c_miss = 1.0,
                    double c_fa = 1.0);

}  // namespace sdpn

#endif  // SDPN_METRICS_H_

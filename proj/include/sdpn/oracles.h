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

#ifndef SDPN_ORACLES_H_
#define SDPN_ORACLES_H_

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "sdpn/metrics.h"
#include "sdpn/numerics.h"

namespace sdpn {

// Registered cross-module checks. Every case draws its inputs from its own
// seed and reports the largest deviation it saw against its oracle.

enum class OracleKind {
  kFiniteDifference,
  kExhaustiveThreshold,
  kAlgebraicIdentity,
  kPairedRun,
};

const char* OracleKindName(OracleKind kind);

struct OracleCase {
  std::string name;
  std::uint64_t seed = 0;
  double tolerance = 0.0;
  OracleKind kind = OracleKind::kAlgebraicIdentity;
  int instances = 0;
  std::function<double(std::uint64_t seed, int instances)> run;
};

struct CaseReport {
  std::string name;
  OracleKind kind = OracleKind::kAlgebraicIdentity;
  double tolerance = 0.0;
  double max_deviation = 0.0;
  int instances = 0;
  bool passed = false;
  double seconds = 0.0;
  std::string error;  // set when the case threw

  std::string ToJson() const;
};

// Step and pass threshold of every finite-difference case.
inline constexpr double kFdStep = 1e-5;
inline constexpr double kFdTolerance = 1e-4;

const std::vector<OracleCase>& RegisteredCases();

// Runs one case with the given seed and instance count; exceptions become
// a failed report carrying the message.
CaseReport RunCase(const OracleCase& c, std::uint64_t seed, int instances);

// Runs every case whose name contains `filter` (empty: all). Paired-run
// cases are only included when include_slow is set.
std::vector<CaseReport> RunSuite(const std::string& filter,
                                 bool include_slow = false);

std::string ReportToJsonLines(const std::vector<CaseReport>& reports);

// Exhaustive-threshold oracles: error rates are recounted from scratch for
// every candidate threshold (every score plus +-inf), independently of
// DetSweep's sorted cumulative counts.
double BruteForceEer(std::span<const LabeledScore> scores);
double BruteForceMinDcf(std::span<const LabeledScore> scores, double p_target,
                        double c_miss, double c_fa);

// Individual FD checks, each over `instances` random draws with n in
// [4, 16] and d in [3, 8]; returns the worst relative error.
double FdCrossEntropy(std::uint64_t seed, int instances);
double FdDiversity(std::uint64_t seed, int instances);
double FdOffDiagonal(std::uint64_t seed, int instances);
double FdFrobenius(std::uint64_t seed, int instances);
double FdComposite(std::uint64_t seed, int instances);
// FrobeniusGradWrtC against FD of log|C|_F over off-diagonal entries of
// random symmetric unit-diagonal matrices.
double FrobeniusGradConsistency(std::uint64_t seed, int instances);

// Anti-collapse experiment: trains the same seeded setup with no
// regularizer, off-diagonal and Frobenius regularization, and returns the
// final-epoch mean |C_ij| of each.
struct PairedRunResult {
  double none = 0.0;
  double off_diagonal = 0.0;
  double frobenius = 0.0;
  double seconds = 0.0;
};

PairedRunResult RunAntiCollapseExperiment(std::uint64_t seed);

}  // namespace sdpn

#endif  // SDPN_ORACLES_H_

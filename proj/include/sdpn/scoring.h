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

#ifndef SDPN_SCORING_H_
#define SDPN_SCORING_H_

#include <cstddef>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "sdpn/numerics.h"

namespace sdpn {

// Standard deviations below this are treated as a degenerate cohort.
inline constexpr double kSigmaEpsilon = 1e-9;
inline constexpr std::size_t kDefaultTopK = 300;

// utterance id -> backbone embedding, kept in insertion order.
class EmbeddingStore {
 public:
  void Add(const std::string& id, RealVector embedding);
  const RealVector* Find(const std::string& id) const;
  const RealVector& Get(const std::string& id) const;  // MissingEmbedding

  std::size_t size() const { return ids_.size(); }
  std::size_t dim() const { return dim_; }
  const std::vector<std::string>& ids() const { return ids_; }

 private:
  std::vector<std::string> ids_;
  std::vector<RealVector> vectors_;
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t dim_ = 0;
};

// Binary store ("SDEM"): see docs/formats.md.
std::string EncodeEmbeddingStore(const EmbeddingStore& store);
EmbeddingStore DecodeEmbeddingStore(const std::string& bytes,
                                    const std::string& source);
void WriteEmbeddingStore(const EmbeddingStore& store, const std::string& path);
EmbeddingStore ReadEmbeddingStore(const std::string& path);

enum class TrialLabel { kTarget, kNontarget, kUnknown };

struct Trial {
  std::string enroll_id;
  std::string test_id;
  TrialLabel label = TrialLabel::kUnknown;
};

// One trial per line: "<1|0|-> enroll_id test_id".
std::vector<Trial> ReadTrials(const std::string& path);
void WriteTrials(const std::vector<Trial>& trials, const std::string& path);

struct Cohort {
  std::vector<std::string> ids;
  std::vector<RealVector> embeddings;

  std::size_t size() const { return ids.size(); }
};

// Builds a cohort from ids resolved against `store`. Cohort members that
// also appear in `trials` are an error unless drop_overlap is set, in
// which case they are removed and counted in *dropped.
Cohort BuildCohort(const std::vector<std::string>& ids,
                   const EmbeddingStore& store,
                   const std::vector<Trial>& trials, bool drop_overlap,
                   std::size_t* dropped = nullptr);

struct CohortStats {
  double mu = 0.0;
  double sigma = 0.0;
  std::size_t k_used = 0;
};

double CosineScore(std::span<const double> e, std::span<const double> t);

// Cosine scores of x against every cohort member, in cohort order.
std::vector<double> CohortScores(std::span<const double> x,
                                 const Cohort& cohort);

// Mean and standard deviation of the top_k largest scores (ties keep
// cohort order). top_k == scores.size() uses all of them.
CohortStats ComputeCohortStats(std::span<const double> scores,
                               std::size_t top_k, bool sample_stddev = false);

double ZNorm(double raw, const CohortStats& enroll_stats);
double TNorm(double raw, const CohortStats& test_stats);
double SNorm(double raw, const CohortStats& enroll_stats,
             const CohortStats& test_stats);
// Adaptive S-norm over the top_k cohort scores of each side.
double AsNorm(double raw, std::span<const double> enroll_scores,
              std::span<const double> test_scores, std::size_t top_k,
              bool sample_stddev = false);

enum class NormMethod { kCosine, kZ, kT, kS, kAs };

const char* NormMethodName(NormMethod method);
NormMethod ParseNormMethod(const std::string& name);

struct ScoringOptions {
  NormMethod method = NormMethod::kCosine;
  std::size_t top_k = 0;  // 0: min(kDefaultTopK, cohort size)
  bool sample_stddev = false;
  int threads = 1;
};

struct ScoredTrial {
  std::string enroll_id;
  std::string test_id;
  TrialLabel label = TrialLabel::kUnknown;
  double raw = 0.0;
  double normalized = 0.0;
};

struct ScoringCounters {
  std::size_t cohort_score_computations = 0;
};

// Scores every trial in input order. Cohort score lists are computed once
// per distinct utterance before the (optionally threaded) scoring pass.
std::vector<ScoredTrial> NormalizeTrials(const std::vector<Trial>& trials,
                                         const EmbeddingStore& store,
                                         const Cohort& cohort,
                                         const ScoringOptions& options,
                                         ScoringCounters* counters = nullptr);

// "enroll<TAB>test<TAB>raw<TAB>normalized", six decimals.
std::string FormatScores(const std::vector<ScoredTrial>& scores);
void WriteScores(const std::vector<ScoredTrial>& scores,
                 const std::string& path);
std::vector<ScoredTrial> ReadScores(const std::string& path);

}  // namespace sdpn

#endif  // SDPN_SCORING_H_

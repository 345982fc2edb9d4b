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

#include "sdpn/scoring.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <thread>
#include <unordered_set>

#include "sdpn/binary_io.h"
#include "sdpn/error.h"

namespace sdpn {

void EmbeddingStore::Add(const std::string& id, RealVector embedding) {
  if (embedding.empty()) Fail(ErrorCode::kShapeMismatch, "empty embedding");
  if (dim_ == 0) dim_ = embedding.size();
  if (embedding.size() != dim_) {
    Fail(ErrorCode::kShapeMismatch, "embedding '" + id + "' has dimension " +
                                        std::to_string(embedding.size()));
  }
  if (!(Norm(embedding) > 0.0)) {
    Fail(ErrorCode::kZeroVector, "embedding '" + id + "' is zero");
  }
  if (index_.count(id)) {
    Fail(ErrorCode::kInvalidConfig, "duplicate embedding id '" + id + "'");
  }
  index_.emplace(id, ids_.size());
  ids_.push_back(id);
  vectors_.push_back(std::move(embedding));
}

const RealVector* EmbeddingStore::Find(const std::string& id) const {
  auto it = index_.find(id);
  return it == index_.end() ? nullptr : &vectors_[it->second];
}

const RealVector& EmbeddingStore::Get(const std::string& id) const {
  const RealVector* v = Find(id);
  if (v == nullptr) Fail(ErrorCode::kMissingEmbedding, id);
  return *v;
}

std::string EncodeEmbeddingStore(const EmbeddingStore& store) {
  ByteWriter w;
  w.PutBytes("SDEM");
  w.PutU16(1);
  w.PutU32(static_cast<std::uint32_t>(store.size()));
  for (const std::string& id : store.ids()) {
    const RealVector& v = store.Get(id);
    w.PutString(id);
    w.PutU32(static_cast<std::uint32_t>(v.size()));
    for (double x : v) w.PutF64(x);
  }
  return w.bytes();
}

EmbeddingStore DecodeEmbeddingStore(const std::string& bytes,
                                    const std::string& source) {
  ByteReader r(bytes, source);
  if (r.GetBytes(4) != "SDEM") r.Malformed("bad magic");
  if (r.GetU16() != 1) r.Malformed("unsupported version");
  const std::uint32_t count = r.GetU32();
  EmbeddingStore store;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string id = r.GetString();
    const std::uint32_t dim = r.GetU32();
    if (dim == 0 || static_cast<std::uint64_t>(dim) * 8 > r.remaining()) {
      r.Malformed("bad dimension for '" + id + "'");
    }
    RealVector v(dim);
    for (double& x : v) x = r.GetF64();
    store.Add(id, std::move(v));
  }
  if (!r.AtEnd()) r.Malformed("trailing bytes");
  return store;
}

void WriteEmbeddingStore(const EmbeddingStore& store, const std::string& path) {
  WriteFileAtomic(path, EncodeEmbeddingStore(store));
}

EmbeddingStore ReadEmbeddingStore(const std::string& path) {
  return DecodeEmbeddingStore(ReadFileBytes(path), path);
}

std::vector<Trial> ReadTrials(const std::string& path) {
  std::ifstream in(path);
  if (!in) Fail(ErrorCode::kIoError, "cannot open trials " + path);
  std::vector<Trial> trials;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ss(line);
    std::string label, enroll, test, extra;
    if (!(ss >> label)) continue;  // blank line
    if (!(ss >> enroll >> test) || (ss >> extra)) {
      Fail(ErrorCode::kMalformedFile, path + ":" + std::to_string(line_no) +
                                          ": expected 'label enroll test'");
    }
    Trial t{enroll, test, TrialLabel::kUnknown};
    if (label == "1") {
      t.label = TrialLabel::kTarget;
    } else if (label == "0") {
      t.label = TrialLabel::kNontarget;
    } else if (label != "-") {
      Fail(ErrorCode::kMalformedFile,
           path + ":" + std::to_string(line_no) + ": bad label '" + label + "'");
    }
    trials.push_back(std::move(t));
  }
  return trials;
}

void WriteTrials(const std::vector<Trial>& trials, const std::string& path) {
  std::string text;
  for (const Trial& t : trials) {
    const char* label = t.label == TrialLabel::kTarget      ? "1"
                        : t.label == TrialLabel::kNontarget ? "0"
                                                            : "-";
    text += std::string(label) + " " + t.enroll_id + " " + t.test_id + "\n";
  }
  WriteFileAtomic(path, text);
}

Cohort BuildCohort(const std::vector<std::string>& ids,
                   const EmbeddingStore& store,
                   const std::vector<Trial>& trials, bool drop_overlap,
                   std::size_t* dropped) {
  std::unordered_set<std::string> in_trials;
  for (const Trial& t : trials) {
    in_trials.insert(t.enroll_id);
    in_trials.insert(t.test_id);
  }
  Cohort cohort;
  std::size_t n_dropped = 0;
  for (const std::string& id : ids) {
    if (in_trials.count(id)) {
      if (!drop_overlap) {
        Fail(ErrorCode::kInvalidConfig,
             "cohort member '" + id + "' appears in the trial list");
      }
      ++n_dropped;
      continue;
    }
    cohort.ids.push_back(id);
    cohort.embeddings.push_back(store.Get(id));
  }
  if (dropped) *dropped = n_dropped;
  if (cohort.size() < 2) {
    Fail(ErrorCode::kDegenerateCohort, "cohort needs at least 2 members");
  }
  return cohort;
}

double CosineScore(std::span<const double> e, std::span<const double> t) {
  const double ne = Norm(e), nt = Norm(t);
  if (!(ne > 0.0) || !(nt > 0.0)) {
    Fail(ErrorCode::kZeroVector, "cosine score of a zero vector");
  }
  return std::clamp(Dot(e, t) / (ne * nt), -1.0, 1.0);
}

std::vector<double> CohortScores(std::span<const double> x,
                                 const Cohort& cohort) {
  if (cohort.size() == 0) {
    Fail(ErrorCode::kDegenerateCohort, "empty cohort");
  }
  std::vector<double> scores;
  scores.reserve(cohort.size());
  for (const RealVector& c : cohort.embeddings)
    scores.push_back(CosineScore(x, c));
  return scores;
}

CohortStats ComputeCohortStats(std::span<const double> scores,
                               std::size_t top_k, bool sample_stddev) {
  const std::size_t n = scores.size();
  if (top_k > n) {
    Fail(ErrorCode::kKTooLarge, "top_k " + std::to_string(top_k) +
                                    " exceeds cohort size " + std::to_string(n));
  }
  if (top_k < 2) {
    Fail(ErrorCode::kDegenerateCohort, "need at least 2 cohort scores");
  }
  // Indices of the top_k largest scores; stable so that ties keep cohort
  // order. The statistics are then accumulated in cohort order, which makes
  // top_k == n reproduce the full-cohort statistics exactly.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });
  order.resize(top_k);
  std::sort(order.begin(), order.end());

  double mean = 0.0;
  for (std::size_t i : order) mean += scores[i];
  mean /= static_cast<double>(top_k);
  double ss = 0.0;
  for (std::size_t i : order) ss += (scores[i] - mean) * (scores[i] - mean);
  const double denom = static_cast<double>(sample_stddev ? top_k - 1 : top_k);
  return {mean, std::sqrt(ss / denom), top_k};
}

namespace {

void CheckSigma(const CohortStats& stats, const char* side) {
  if (!(stats.sigma > kSigmaEpsilon)) {
    Fail(ErrorCode::kDegenerateCohort,
         std::string(side) + " cohort sigma " + std::to_string(stats.sigma));
  }
}

}  // namespace

double ZNorm(double raw, const CohortStats& enroll_stats) {
  CheckSigma(enroll_stats, "enrollment");
  return (raw - enroll_stats.mu) / enroll_stats.sigma;
}

double TNorm(double raw, const CohortStats& test_stats) {
  CheckSigma(test_stats, "test");
  return (raw - test_stats.mu) / test_stats.sigma;
}

double SNorm(double raw, const CohortStats& enroll_stats,
             const CohortStats& test_stats) {
  return 0.5 * (ZNorm(raw, enroll_stats) + TNorm(raw, test_stats));
}

double AsNorm(double raw, std::span<const double> enroll_scores,
              std::span<const double> test_scores, std::size_t top_k,
              bool sample_stddev) {
  return SNorm(raw, ComputeCohortStats(enroll_scores, top_k, sample_stddev),
               ComputeCohortStats(test_scores, top_k, sample_stddev));
}

const char* NormMethodName(NormMethod method) {
  switch (method) {
    case NormMethod::kCosine: return "cosine";
    case NormMethod::kZ: return "z";
    case NormMethod::kT: return "t";
    case NormMethod::kS: return "s";
    case NormMethod::kAs: return "as";
  }
  return "cosine";
}

NormMethod ParseNormMethod(const std::string& name) {
  if (name == "cosine") return NormMethod::kCosine;
  if (name == "z") return NormMethod::kZ;
  if (name == "t") return NormMethod::kT;
  if (name == "s") return NormMethod::kS;
  if (name == "as") return NormMethod::kAs;
  Fail(ErrorCode::kInvalidConfig, "unknown scoring method '" + name + "'");
}

std::vector<ScoredTrial> NormalizeTrials(const std::vector<Trial>& trials,
                                         const EmbeddingStore& store,
                                         const Cohort& cohort,
                                         const ScoringOptions& options,
                                         ScoringCounters* counters) {
  for (const Trial& t : trials) {
    store.Get(t.enroll_id);
    store.Get(t.test_id);
  }
  const bool needs_cohort = options.method != NormMethod::kCosine;
  std::size_t top_k = cohort.size();
  if (options.method == NormMethod::kAs) {
    top_k = options.top_k == 0 ? std::min(kDefaultTopK, cohort.size())
                               : options.top_k;
    if (top_k > cohort.size()) {
      Fail(ErrorCode::kKTooLarge, "top_k " + std::to_string(top_k) +
                                      " exceeds cohort size " +
                                      std::to_string(cohort.size()));
    }
  }

  // Single-writer phase: statistics per distinct utterance.
  std::unordered_map<std::string, CohortStats> stats;
  if (needs_cohort) {
    for (const Trial& t : trials) {
      for (const std::string* id : {&t.enroll_id, &t.test_id}) {
        if (stats.count(*id)) continue;
        const std::vector<double> s = CohortScores(store.Get(*id), cohort);
        stats.emplace(*id, ComputeCohortStats(s, top_k, options.sample_stddev));
        if (counters) ++counters->cohort_score_computations;
      }
    }
  }

  std::vector<ScoredTrial> out(trials.size());
  auto score_range = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const Trial& t = trials[i];
      ScoredTrial& s = out[i];
      s.enroll_id = t.enroll_id;
      s.test_id = t.test_id;
      s.label = t.label;
      s.raw = CosineScore(store.Get(t.enroll_id), store.Get(t.test_id));
      switch (options.method) {
        case NormMethod::kCosine:
          s.normalized = s.raw;
          break;
        case NormMethod::kZ:
          s.normalized = ZNorm(s.raw, stats.at(t.enroll_id));
          break;
        case NormMethod::kT:
          s.normalized = TNorm(s.raw, stats.at(t.test_id));
          break;
        case NormMethod::kS:
        case NormMethod::kAs:
          s.normalized =
              SNorm(s.raw, stats.at(t.enroll_id), stats.at(t.test_id));
          break;
      }
    }
  };
  const std::size_t threads =
      static_cast<std::size_t>(std::max(1, options.threads));
  if (threads == 1 || trials.size() < 2 * threads) {
    score_range(0, trials.size());
  } else {
    std::vector<std::thread> workers;
    std::vector<std::exception_ptr> errors(threads);
    const std::size_t chunk = (trials.size() + threads - 1) / threads;
    for (std::size_t w = 0; w < threads; ++w) {
      const std::size_t begin = w * chunk;
      const std::size_t end = std::min(trials.size(), begin + chunk);
      workers.emplace_back([&, w, begin, end] {
        try {
          score_range(begin, end);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& th : workers) th.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
  return out;
}

std::string FormatScores(const std::vector<ScoredTrial>& scores) {
  std::string text;
  char buf[64];
  for (const ScoredTrial& s : scores) {
    std::snprintf(buf, sizeof(buf), "\t%.6f\t%.6f\n", s.raw, s.normalized);
    text += s.enroll_id + "\t" + s.test_id + buf;
  }
  return text;
}

void WriteScores(const std::vector<ScoredTrial>& scores,
                 const std::string& path) {
  WriteFileAtomic(path, FormatScores(scores));
}

std::vector<ScoredTrial> ReadScores(const std::string& path) {
  std::ifstream in(path);
  if (!in) Fail(ErrorCode::kIoError, "cannot open scores " + path);
  std::vector<ScoredTrial> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, '\t')) f.push_back(field);
    ScoredTrial s;
    try {
      if (f.size() != 4) throw std::invalid_argument("field count");
      s.enroll_id = f[0];
      s.test_id = f[1];
      s.raw = std::stod(f[2]);
      s.normalized = std::stod(f[3]);
    } catch (const std::exception&) {
      Fail(ErrorCode::kMalformedFile,
           path + ":" + std::to_string(line_no) +
               ": expected enroll<TAB>test<TAB>raw<TAB>normalized");
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace sdpn

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

#ifndef SDPN_COMMANDS_H_
#define SDPN_COMMANDS_H_

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "sdpn/config.h"
#include "sdpn/metrics.h"
#include "sdpn/oracles.h"
#include "sdpn/trainer.h"

namespace sdpn {

// Library side of the command-line tool. Every command takes a resolved
// RunConfig plus paths and writes its artifacts; the CLI only parses flags.

inline constexpr char kTrainManifest[] = "train.tsv";
inline constexpr char kEvalManifest[] = "eval.tsv";
inline constexpr char kTrialsFile[] = "trials.txt";
inline constexpr char kCheckpointFile[] = "model.ckpt";
inline constexpr char kMetricsLog[] = "metrics.jsonl";

struct GenDataResult {
  std::string train_manifest;
  std::string eval_manifest;
  std::string trials;
  std::size_t train_utterances = 0;
  std::size_t eval_utterances = 0;
  std::size_t trial_count = 0;
};

// Writes a training corpus, a held-out evaluation corpus of unseen speakers
// and the all-pairs trial list over the evaluation corpus.
GenDataResult GenData(const RunConfig& config, const std::string& out_dir);

// Held-out corpus parameters derived from the run config.
SyntheticCorpusConfig EvalCorpusConfig(const RunConfig& config);

struct TrainCommandOptions {
  bool resume = false;    // continue from out_dir/model.ckpt
  int stop_after = -1;    // stop once this many epochs are done
  std::ostream* progress = nullptr;
};

struct TrainCommandResult {
  std::string checkpoint;
  int epochs_done = 0;
  std::vector<EpochRecord> records;  // epochs run by this invocation
};

// Trains on the manifest, rewriting out_dir/model.ckpt after every epoch
// and appending one JSON line per epoch to out_dir/metrics.jsonl. With
// zero epochs only the initial checkpoint is written.
TrainCommandResult TrainCommand(const RunConfig& config,
                                const std::string& manifest,
                                const std::string& out_dir,
                                const TrainCommandOptions& options = {});

std::string EpochRecordToJson(const EpochRecord& record);

enum class EmbedBranch { kTeacher, kStudent };
EmbedBranch ParseEmbedBranch(const std::string& name);

// Full-utterance embeddings of every manifest entry.
EmbeddingStore EmbedCorpus(const Checkpoint& checkpoint,
                           const std::vector<Utterance>& corpus,
                           EmbedBranch branch = EmbedBranch::kTeacher);
std::size_t EmbedCommand(const std::string& checkpoint_path,
                         const std::string& manifest,
                         const std::string& out_store,
                         EmbedBranch branch = EmbedBranch::kTeacher);

// Model and run settings stored in a checkpoint.
RunConfig CheckpointRunConfig(const Checkpoint& checkpoint);

struct ScoreCommandResult {
  std::size_t trials = 0;
  std::size_t cohort_size = 0;
  std::size_t cohort_dropped = 0;
};

// Cohort ids come from cohort_manifest; their embeddings from cohort_store,
// or from the trial store when cohort_store is empty.
ScoreCommandResult ScoreCommand(const std::string& store_path,
                                const std::string& trials_path,
                                const std::string& cohort_manifest,
                                const std::string& cohort_store,
                                const ScoringSection& scoring,
                                const std::string& out_scores);

// Joins the normalized column of a scores file with the trial labels.
EvalReport EvalCommand(const std::string& scores_path,
                       const std::string& trials_path,
                       const MetricsSection& metrics,
                       const std::string& out_report);

struct GradCheckOptions {
  std::string loss;                   // name filter, empty: all
  std::optional<std::uint64_t> seed;  // replaces per-case seeds
  int instances = 0;                  // 0: per-case default
};

// Finite-difference cases only.
std::vector<CaseReport> GradCheck(const GradCheckOptions& options);
std::string FormatGradCheckTable(const std::vector<CaseReport>& reports);

}  // namespace sdpn

#endif  // SDPN_COMMANDS_H_

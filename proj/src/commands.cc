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

#include "sdpn/commands.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"
#include "sdpn/binary_io.h"
#include "sdpn/error.h"

namespace sdpn {

namespace fs = std::filesystem;

namespace {

void EnsureDir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) Fail(ErrorCode::kIoError, "cannot create directory " + dir);
}

std::string Join(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

std::vector<ManifestEntry> WriteCorpus(const std::vector<Utterance>& corpus,
                                       const std::string& out_dir) {
  EnsureDir(Join(out_dir, "feats"));
  std::vector<ManifestEntry> entries;
  for (const Utterance& u : corpus) {
    const std::string rel = "feats/" + u.utterance_id + ".sdfk";
    WriteFeatureFile(u, Join(out_dir, rel));
    entries.push_back({u.utterance_id, rel, u.speaker_id});
  }
  return entries;
}

}  // namespace

SyntheticCorpusConfig EvalCorpusConfig(const RunConfig& config) {
  SyntheticCorpusConfig c = config.data.train;
  c.num_speakers = config.data.eval_speakers;
  c.utts_per_speaker = config.data.eval_utts_per_speaker;
  c.seed = DeriveSeed(config.seed, "eval");
  c.id_prefix = "ev";
  return c;
}

GenDataResult GenData(const RunConfig& config, const std::string& out_dir) {
  EnsureDir(out_dir);
  GenDataResult result;
  const std::vector<Utterance> train = GenerateSyntheticCorpus(config.data.train);
  const std::vector<Utterance> eval = GenerateSyntheticCorpus(EvalCorpusConfig(config));

  result.train_manifest = Join(out_dir, kTrainManifest);
  result.eval_manifest = Join(out_dir, kEvalManifest);
  result.trials = Join(out_dir, kTrialsFile);
  WriteManifest(WriteCorpus(train, out_dir), result.train_manifest);
  WriteManifest(WriteCorpus(eval, out_dir), result.eval_manifest);
  result.train_utterances = train.size();
  result.eval_utterances = eval.size();

  std::vector<Trial> trials;
  for (std::size_t i = 0; i < eval.size(); ++i) {
    for (std::size_t j = i + 1; j < eval.size(); ++j) {
      trials.push_back({eval[i].utterance_id, eval[j].utterance_id,
                        eval[i].speaker_id == eval[j].speaker_id
                            ? TrialLabel::kTarget
                            : TrialLabel::kNontarget});
    }
  }
  WriteTrials(trials, result.trials);
  result.trial_count = trials.size();
  return result;
}

std::string EpochRecordToJson(const EpochRecord& r) {
  nlohmann::ordered_json j;
  j["epoch"] = r.epoch;
  j["steps"] = r.steps;
  j["lr"] = r.lr;
  j["loss"] = r.mean_terms.total;
  j["ce"] = r.mean_terms.ce;
  j["re"] = r.mean_terms.re;
  j["dr"] = r.mean_terms.dr;
  j["mean_abs_offdiag"] = r.diagnostics.mean_abs_offdiag;
  j["embedding_std"] = r.diagnostics.embedding_std;
  j["prototype_usage_entropy"] = r.diagnostics.prototype_usage_entropy;
  return j.dump();
}

namespace {

// Keeps the first `epochs` lines of an existing log so a resumed run ends
// with the same log as an uninterrupted one.
std::string TruncatedLog(const std::string& path, int epochs) {
  std::ifstream in(path);
  std::string out, line;
  for (int i = 0; i < epochs && std::getline(in, line); ++i) out += line + "\n";
  return out;
}

}  // namespace

TrainCommandResult TrainCommand(const RunConfig& config,
                                const std::string& manifest,
                                const std::string& out_dir,
                                const TrainCommandOptions& options) {
  config.Validate();
  EnsureDir(out_dir);
  const std::vector<UnlabeledUtterance> corpus =
      StripLabels(LoadCorpus(manifest));
  const std::string config_json = RunConfigToJson(config);

  TrainCommandResult result;
  result.checkpoint = Join(out_dir, kCheckpointFile);
  const std::string log_path = Join(out_dir, kMetricsLog);

  TrainState state;
  std::string log;
  if (options.resume) {
    const Checkpoint ckpt = ReadCheckpoint(result.checkpoint);
    if (ckpt.config_json != config_json) {
      Fail(ErrorCode::kInvalidConfig,
           "checkpoint was written with a different configuration");
    }
    state = StateFromCheckpoint(ckpt, config.model);
    log = TruncatedLog(log_path, state.epochs_done);
  } else {
    state = InitTrainState(config.model);
    WriteCheckpoint(StateToCheckpoint(state, config_json), result.checkpoint);
  }
  WriteFileAtomic(log_path, log);

  result.records = Train(
      corpus, state, config.train,
      [&](const TrainState& s, const EpochRecord& record) {
        WriteCheckpoint(StateToCheckpoint(s, config_json), result.checkpoint);
        log += EpochRecordToJson(record) + "\n";
        WriteFileAtomic(log_path, log);
        if (options.progress != nullptr) {
          *options.progress << "epoch " << record.epoch << "/"
                            << config.train.epochs << " loss "
                            << record.mean_terms.total << " offdiag "
                            << record.diagnostics.mean_abs_offdiag << "\n";
        }
      },
      options.stop_after);
  result.epochs_done = state.epochs_done;
  return result;
}

EmbedBranch ParseEmbedBranch(const std::string& name) {
  if (name == "teacher") return EmbedBranch::kTeacher;
  if (name == "student") return EmbedBranch::kStudent;
  Fail(ErrorCode::kInvalidConfig, "unknown branch '" + name + "'");
}

RunConfig CheckpointRunConfig(const Checkpoint& checkpoint) {
  return ParseRunConfig(checkpoint.config_json);
}

EmbeddingStore EmbedCorpus(const Checkpoint& checkpoint,
                           const std::vector<Utterance>& corpus,
                           EmbedBranch branch) {
  const RunConfig config = CheckpointRunConfig(checkpoint);
  TeacherStudentPair pair = InitPair(config.model);
  LoadPairTensors(checkpoint.tensors, &pair);
  const Branch& net =
      branch == EmbedBranch::kTeacher ? pair.teacher : pair.student;
  EmbeddingStore store;
  for (const Utterance& u : corpus) {
    if (u.frames.cols() != static_cast<std::size_t>(config.model.feature_dim)) {
      Fail(ErrorCode::kShapeMismatch,
           u.utterance_id + " has " + std::to_string(u.frames.cols()) +
               " features, model expects " +
               std::to_string(config.model.feature_dim));
    }
    store.Add(u.utterance_id, ForwardEmbed(net, u.frames, nullptr).embedding);
  }
  return store;
}

std::size_t EmbedCommand(const std::string& checkpoint_path,
                         const std::string& manifest,
                         const std::string& out_store, EmbedBranch branch) {
  const EmbeddingStore store =
      EmbedCorpus(ReadCheckpoint(checkpoint_path), LoadCorpus(manifest), branch);
  WriteEmbeddingStore(store, out_store);
  return store.size();
}

ScoreCommandResult ScoreCommand(const std::string& store_path,
                                const std::string& trials_path,
                                const std::string& cohort_manifest,
                                const std::string& cohort_store,
                                const ScoringSection& scoring,
                                const std::string& out_scores) {
  const EmbeddingStore store = ReadEmbeddingStore(store_path);
  const std::vector<Trial> trials = ReadTrials(trials_path);
  ScoreCommandResult result;
  result.trials = trials.size();

  Cohort cohort;
  if (scoring.options.method != NormMethod::kCosine) {
    std::vector<std::string> ids;
    for (const ManifestEntry& e : ReadManifest(cohort_manifest))
      ids.push_back(e.utterance_id);
    const EmbeddingStore cohort_embeddings =
        cohort_store.empty() ? EmbeddingStore() : ReadEmbeddingStore(cohort_store);
    cohort = BuildCohort(ids, cohort_store.empty() ? store : cohort_embeddings,
                         trials, scoring.drop_cohort_overlap,
                         &result.cohort_dropped);
  }
  result.cohort_size = cohort.size();
  WriteScores(NormalizeTrials(trials, store, cohort, scoring.options),
              out_scores);
  return result;
}

EvalReport EvalCommand(const std::string& scores_path,
                       const std::string& trials_path,
                       const MetricsSection& metrics,
                       const std::string& out_report) {
  std::map<std::pair<std::string, std::string>, TrialLabel> labels;
  for (const Trial& t : ReadTrials(trials_path))
    labels[{t.enroll_id, t.test_id}] = t.label;
  std::vector<LabeledScore> scores;
  for (const ScoredTrial& s : ReadScores(scores_path)) {
    const auto it = labels.find({s.enroll_id, s.test_id});
    if (it == labels.end()) {
      Fail(ErrorCode::kMalformedFile, scores_path + ": trial " + s.enroll_id +
                                          " " + s.test_id +
                                          " is not in " + trials_path);
    }
    if (it->second == TrialLabel::kUnknown) {
      Fail(ErrorCode::kMalformedFile, trials_path + ": trial " + s.enroll_id +
                                          " " + s.test_id + " has no label");
    }
    scores.push_back({s.normalized, it->second == TrialLabel::kTarget});
  }
  const EvalReport report =
      Evaluate(scores, metrics.p_target, metrics.c_miss, metrics.c_fa);
  if (!out_report.empty()) WriteFileAtomic(out_report, report.ToJson() + "\n");
  return report;
}

std::vector<CaseReport> GradCheck(const GradCheckOptions& options) {
  std::vector<CaseReport> reports;
  for (const OracleCase& c : RegisteredCases()) {
    if (c.kind != OracleKind::kFiniteDifference) continue;
    if (!options.loss.empty() && c.name != "fd_" + options.loss &&
        c.name.rfind(options.loss + "_", 0) != 0) {
      continue;
    }
    const std::uint64_t seed =
        options.seed ? DeriveSeed(*options.seed, c.name) : c.seed;
    reports.push_back(RunCase(c, seed, options.instances > 0 ? options.instances
                                                             : c.instances));
  }
  if (reports.empty()) {
    Fail(ErrorCode::kInvalidConfig, "no gradient check matches '" +
                                        options.loss + "'");
  }
  return reports;
}

std::string FormatGradCheckTable(const std::vector<CaseReport>& reports) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "%-16s %9s %13s %10s  %s\n", "case",
                "instances", "max_rel_err", "tolerance", "result");
  out << line;
  for (const CaseReport& r : reports) {
    std::snprintf(line, sizeof line, "%-16s %9d %13.3e %10.1e  %s\n",
                  r.name.c_str(), r.instances, r.max_deviation, r.tolerance,
                  r.passed ? "PASS" : "FAIL");
    out << line;
    if (!r.error.empty()) out << "  " << r.error << "\n";
  }
  return out.str();
}

}  // namespace sdpn

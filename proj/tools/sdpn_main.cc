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

// sdpn: generate data, train, embed, score, evaluate, grad-check.

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "sdpn/binary_io.h"
#include "sdpn/commands.h"
#include "sdpn/error.h"

namespace {

using namespace sdpn;

// Config file first, then SDPN_SEED, then explicit flags.
struct ConfigFlags {
  std::string path;
  std::optional<std::uint64_t> seed;

  void Add(CLI::App* app) {
    app->add_option("--config", path, "RunConfig JSON file");
    app->add_option("--seed", seed, "top-level seed");
  }

  RunConfig Load() const {
    RunConfig c = path.empty() ? RunConfig() : LoadRunConfig(path);
    if (const char* env = std::getenv("SDPN_SEED"); env != nullptr && *env) {
      try {
        c.seed = std::stoull(env);
      } catch (const std::exception&) {
        Fail(ErrorCode::kInvalidConfig, std::string("bad SDPN_SEED '") + env + "'");
      }
    }
    if (seed) c.seed = *seed;
    return c;
  }
};

RunConfig Finish(RunConfig c) {
  c.Resolve();
  c.Validate();
  return c;
}

int Run(int argc, char** argv) {
  CLI::App app{"Self-supervised speaker verification toolkit"};
  app.require_subcommand(1);

  // gen-data
  ConfigFlags gen_cfg;
  std::string gen_out;
  std::optional<int> gen_speakers, gen_utts, gen_frames;
  auto* gen = app.add_subcommand("gen-data", "write a synthetic corpus and trials");
  gen_cfg.Add(gen);
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--speakers", gen_speakers, "training speakers");
  gen->add_option("--utts", gen_utts, "utterances per training speaker");
  gen->add_option("--frames", gen_frames, "frames per utterance");

  // train
  ConfigFlags train_cfg;
  std::string train_manifest, train_out, train_reg;
  std::optional<int> train_epochs, train_batch, train_stop;
  std::optional<double> train_lr, train_mu, train_lambda;
  bool train_resume = false, train_quiet = false;
  auto* train = app.add_subcommand("train", "train the teacher-student model");
  train_cfg.Add(train);
  train->add_option("--manifest", train_manifest, "training manifest")->required();
  train->add_option("--out", train_out, "output directory")->required();
  train->add_option("--regularizer", train_reg, "none|off_diagonal|frobenius");
  train->add_option("--epochs", train_epochs, "training epochs");
  train->add_option("--batch-size", train_batch, "utterances per step");
  train->add_option("--lr", train_lr, "peak learning rate");
  train->add_option("--mu", train_mu, "diversity weight");
  train->add_option("--lambda", train_lambda, "dimension regularization weight");
  train->add_flag("--resume", train_resume, "continue from <out>/model.ckpt");
  train->add_option("--stop-after", train_stop, "stop after this many epochs");
  train->add_flag("--quiet", train_quiet, "no per-epoch progress");

  // embed
  std::string embed_ckpt, embed_manifest, embed_out, embed_branch = "teacher";
  auto* embed = app.add_subcommand("embed", "extract full-utterance embeddings");
  embed->add_option("--checkpoint", embed_ckpt, "model checkpoint")->required();
  embed->add_option("--manifest", embed_manifest, "utterance manifest")->required();
  embed->add_option("--out", embed_out, "embedding store")->required();
  embed->add_option("--branch", embed_branch, "teacher|student");

  // score and normalize share their flags.
  struct ScoreFlags {
    ConfigFlags cfg;
    std::string store, trials, cohort, cohort_store, method, out;
    std::optional<std::size_t> top_k;
    std::optional<int> threads;
    bool drop_overlap = false, sample_std = false;
  };
  ScoreFlags score_flags, norm_flags;
  auto add_score = [](CLI::App* cmd, ScoreFlags& f) {
    f.cfg.Add(cmd);
    cmd->add_option("--store", f.store, "embedding store")->required();
    cmd->add_option("--trials", f.trials, "trials file")->required();
    cmd->add_option("--cohort", f.cohort, "cohort manifest");
    cmd->add_option("--cohort-store", f.cohort_store,
                    "cohort embeddings (default: --store)");
    cmd->add_option("--method", f.method, "cosine|z|t|s|as");
    cmd->add_option("--top-k", f.top_k, "AS-norm K (0: min(300, cohort))");
    cmd->add_option("--threads", f.threads, "scoring threads");
    cmd->add_flag("--drop-overlap", f.drop_overlap,
                  "drop cohort ids that appear in trials");
    cmd->add_flag("--sample-std", f.sample_std, "n-1 cohort deviation");
    cmd->add_option("--out", f.out, "scores file")->required();
  };
  auto* score = app.add_subcommand("score", "score trials");
  add_score(score, score_flags);
  auto* normalize = app.add_subcommand("normalize", "score with a cohort normalization");
  add_score(normalize, norm_flags);

  // eval
  ConfigFlags eval_cfg;
  std::string eval_scores, eval_trials, eval_out;
  std::optional<double> eval_pt, eval_cmiss, eval_cfa;
  auto* eval = app.add_subcommand("eval", "EER and minDCF of a scores file");
  eval_cfg.Add(eval);
  eval->add_option("--scores", eval_scores, "scores file")->required();
  eval->add_option("--trials", eval_trials, "labelled trials")->required();
  eval->add_option("--out", eval_out, "JSON report (default: stdout only)");
  eval->add_option("--p-target", eval_pt, "target prior");
  eval->add_option("--c-miss", eval_cmiss, "miss cost");
  eval->add_option("--c-fa", eval_cfa, "false-alarm cost");

  // grad-check
  GradCheckOptions gc;
  std::string gc_report;
  auto* grad = app.add_subcommand("grad-check", "finite-difference gradient checks");
  grad->add_option("--loss", gc.loss, "ce|re|odr|fdr|composite");
  grad->add_option("--seed", gc.seed, "seed for every case");
  grad->add_option("--instances", gc.instances, "random draws per case");
  grad->add_option("--report", gc_report, "JSON-lines report file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (*gen) {
    RunConfig c = gen_cfg.Load();
    if (gen_speakers) c.data.train.num_speakers = *gen_speakers;
    if (gen_utts) c.data.train.utts_per_speaker = *gen_utts;
    if (gen_frames) c.data.train.frames_per_utt = *gen_frames;
    const GenDataResult r = GenData(Finish(c), gen_out);
    std::printf("%s\n%s\n%s\n", r.train_manifest.c_str(),
                r.eval_manifest.c_str(), r.trials.c_str());
    std::fprintf(stderr, "%zu training, %zu evaluation utterances, %zu trials\n",
                 r.train_utterances, r.eval_utterances, r.trial_count);
  } else if (*train) {
    RunConfig c = train_cfg.Load();
    if (!train_reg.empty()) c.train.regularizer = ParseRegularizer(train_reg);
    if (train_epochs) c.train.epochs = *train_epochs;
    if (train_batch) c.train.batch_size = *train_batch;
    if (train_lr) c.train.lr_peak = *train_lr;
    if (train_mu) c.train.weights.mu = *train_mu;
    if (train_lambda) c.train.weights.lambda = *train_lambda;
    TrainCommandOptions opts;
    opts.resume = train_resume;
    if (train_stop) opts.stop_after = *train_stop;
    if (!train_quiet) opts.progress = &std::cerr;
    const TrainCommandResult r =
        TrainCommand(Finish(c), train_manifest, train_out, opts);
    std::printf("%s\n", r.checkpoint.c_str());
  } else if (*embed) {
    const std::size_t n = EmbedCommand(embed_ckpt, embed_manifest, embed_out,
                                       ParseEmbedBranch(embed_branch));
    std::fprintf(stderr, "%zu embeddings\n", n);
  } else if (*score || *normalize) {
    ScoreFlags& f = *score ? score_flags : norm_flags;
    const RunConfig c = Finish(f.cfg.Load());
    ScoringSection s = c.scoring;
    if (!f.method.empty()) s.options.method = ParseNormMethod(f.method);
    if (*normalize && f.method.empty() && s.options.method == NormMethod::kCosine)
      s.options.method = NormMethod::kAs;
    if (*normalize && s.options.method == NormMethod::kCosine) {
      Fail(ErrorCode::kInvalidConfig, "normalize needs a method other than cosine");
    }
    if (f.top_k) s.options.top_k = *f.top_k;
    if (f.threads) s.options.threads = *f.threads;
    if (f.drop_overlap) s.drop_cohort_overlap = true;
    if (f.sample_std) s.options.sample_stddev = true;
    if (s.options.method != NormMethod::kCosine && f.cohort.empty()) {
      Fail(ErrorCode::kInvalidConfig, "--cohort is required for normalized scoring");
    }
    const ScoreCommandResult r =
        ScoreCommand(f.store, f.trials, f.cohort, f.cohort_store, s, f.out);
    std::fprintf(stderr, "%zu trials scored (%s, cohort %zu, dropped %zu)\n",
                 r.trials, NormMethodName(s.options.method), r.cohort_size,
                 r.cohort_dropped);
  } else if (*eval) {
    const RunConfig c = Finish(eval_cfg.Load());
    MetricsSection m = c.metrics;
    if (eval_pt) m.p_target = *eval_pt;
    if (eval_cmiss) m.c_miss = *eval_cmiss;
    if (eval_cfa) m.c_fa = *eval_cfa;
    const EvalReport r = EvalCommand(eval_scores, eval_trials, m, eval_out);
    std::printf("%s\n", r.ToJson().c_str());
  } else if (*grad) {
    const std::vector<CaseReport> reports = GradCheck(gc);
    std::printf("%s", FormatGradCheckTable(reports).c_str());
    if (!gc_report.empty()) {
      WriteFileAtomic(gc_report, ReportToJsonLines(reports));
    }
    for (const CaseReport& r : reports) {
      if (!r.passed) return 3;
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return Run(argc, argv);
  } catch (const sdpn::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return sdpn::ExitCodeFor(e.code());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}

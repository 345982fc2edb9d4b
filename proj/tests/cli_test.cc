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

// Runs the sdpn binary end to end on a tiny corpus.

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "sdpn/data.h"
#include "sdpn/scoring.h"

namespace fs = std::filesystem;

namespace {

const char kTinyConfig[] = R"({
  "schema_version": 1, "seed": 3,
  "data": {"num_speakers": 4, "utts_per_speaker": 3, "frames_per_utt": 40,
           "eval_speakers": 3, "eval_utts_per_speaker": 2},
  "model": {"encoder_hidden": 8, "embedding_dim": 6, "proj_hidden1": 8,
            "proj_hidden2": 8, "proj_dim": 8, "num_prototypes": 8},
  "train": {"epochs": 3, "batch_size": 4, "warmup_epochs": 1,
            "crops": {"num_global": 2, "num_local": 2, "len_global": 30, "len_local": 15},
            "mask": {"max_width": 3}}
})";

std::string ReadAll(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void WriteText(const fs::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

struct Run {
  int code = -1;
  std::string output;
};

class Sandbox {
 public:
  Sandbox() {
    dir_ = fs::temp_directory_path() /
           ("sdpn_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter_++));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    WriteText(dir_ / "tiny.json", kTinyConfig);
  }
  ~Sandbox() { fs::remove_all(dir_); }

  fs::path operator/(const std::string& name) const { return dir_ / name; }
  std::string Config() const { return "--config " + (dir_ / "tiny.json").string(); }

  Run Sdpn(const std::string& args, const std::string& env = "") const {
    const fs::path log = dir_ / "cmd.log";
    const std::string cmd = env + (env.empty() ? "" : " ") + SDPN_CLI + " " + args +
                            " > " + log.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    Run r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.output = ReadAll(log);
    return r;
  }

 private:
  static inline int counter_ = 0;
  fs::path dir_;
};

std::size_t Lines(const std::string& text) {
  std::size_t n = 0;
  for (char c : text) n += c == '\n';
  return n;
}

}  // namespace

TEST_CASE("usage errors exit 1") {
  Sandbox box;
  CHECK(box.Sdpn("").code == 1);
  CHECK(box.Sdpn("frobnicate").code == 1);
  CHECK(box.Sdpn("gen-data").code == 1);
  CHECK(box.Sdpn("gen-data --out " + (box / "x").string() + " --speakers nine").code == 1);
  WriteText(box / "bad.json", R"({"schema_version": 1, "bogus": 1})");
  const Run bad = box.Sdpn("gen-data --config " + (box / "bad.json").string() +
                           " --out " + (box / "x").string());
  CHECK(bad.code == 1);
  CHECK(bad.output.find("bogus") != std::string::npos);
}

TEST_CASE("gen-data is deterministic and honours seed precedence") {
  Sandbox box;
  REQUIRE(box.Sdpn("gen-data " + box.Config() + " --out " + (box / "a").string()).code == 0);
  REQUIRE(box.Sdpn("gen-data " + box.Config() + " --out " + (box / "b").string()).code == 0);
  const auto train = sdpn::ReadManifest((box / "a" / "train.tsv").string());
  CHECK(train.size() == 12);
  CHECK(sdpn::ReadManifest((box / "a" / "eval.tsv").string()).size() == 6);
  CHECK(Lines(ReadAll(box / "a" / "trials.txt")) == 15);
  for (const auto& e : train) {
    CHECK(ReadAll(box / "a" / e.path) == ReadAll(box / "b" / e.path));
  }
  CHECK(ReadAll(box / "a" / "trials.txt") == ReadAll(box / "b" / "trials.txt"));

  REQUIRE(box.Sdpn("gen-data " + box.Config() + " --out " + (box / "c").string(),
                   "SDPN_SEED=77").code == 0);
  REQUIRE(box.Sdpn("gen-data " + box.Config() + " --seed 77 --out " + (box / "d").string(),
                   "SDPN_SEED=5").code == 0);
  const std::string first = train.front().path;
  CHECK(ReadAll(box / "a" / first) != ReadAll(box / "c" / first));
  CHECK(ReadAll(box / "c" / first) == ReadAll(box / "d" / first));
}

TEST_CASE("train, resume, embed, score, eval") {
  Sandbox box;
  const std::string data = (box / "data").string();
  REQUIRE(box.Sdpn("gen-data " + box.Config() + " --out " + data).code == 0);
  const std::string manifest = data + "/train.tsv";

  // Zero epochs: only the initial checkpoint.
  REQUIRE(box.Sdpn("train " + box.Config() + " --quiet --epochs 0 --manifest " + manifest +
                   " --out " + (box / "r0").string()).code == 0);
  CHECK(fs::exists(box / "r0" / "model.ckpt"));
  CHECK(ReadAll(box / "r0" / "metrics.jsonl").empty());

  REQUIRE(box.Sdpn("train " + box.Config() + " --quiet --manifest " + manifest + " --out " +
                   (box / "full").string()).code == 0);
  CHECK(Lines(ReadAll(box / "full" / "metrics.jsonl")) == 3);

  REQUIRE(box.Sdpn("train " + box.Config() + " --quiet --stop-after 1 --manifest " +
                   manifest + " --out " + (box / "split").string()).code == 0);
  CHECK(Lines(ReadAll(box / "split" / "metrics.jsonl")) == 1);
  // A different config cannot resume this run.
  CHECK(box.Sdpn("train " + box.Config() + " --quiet --resume --lr 0.01 --manifest " +
                 manifest + " --out " + (box / "split").string()).code == 1);
  REQUIRE(box.Sdpn("train " + box.Config() + " --quiet --resume --manifest " + manifest +
                   " --out " + (box / "split").string()).code == 0);
  CHECK(ReadAll(box / "split" / "model.ckpt") == ReadAll(box / "full" / "model.ckpt"));
  CHECK(ReadAll(box / "split" / "metrics.jsonl") == ReadAll(box / "full" / "metrics.jsonl"));

  const std::string ckpt = (box / "full" / "model.ckpt").string();
  const std::string eval_store = (box / "eval.emb").string();
  const std::string train_store = (box / "train.emb").string();
  REQUIRE(box.Sdpn("embed --checkpoint " + ckpt + " --manifest " + data + "/eval.tsv --out " +
                   eval_store).code == 0);
  REQUIRE(box.Sdpn("embed --checkpoint " + ckpt + " --manifest " + manifest + " --out " +
                   train_store).code == 0);
  REQUIRE(box.Sdpn("embed --branch student --checkpoint " + ckpt + " --manifest " + data +
                   "/eval.tsv --out " + (box / "student.emb").string()).code == 0);
  CHECK(ReadAll(box / "student.emb") != ReadAll(eval_store));
  CHECK(box.Sdpn("embed --branch middle --checkpoint " + ckpt + " --manifest " + manifest +
                 " --out " + (box / "x.emb").string()).code == 1);

  const std::string trials = data + "/trials.txt";
  REQUIRE(box.Sdpn("score --store " + eval_store + " --trials " + trials + " --out " +
                   (box / "cos.txt").string()).code == 0);
  const auto cos = sdpn::ReadScores((box / "cos.txt").string());
  REQUIRE(cos.size() == 15);
  for (const auto& s : cos) CHECK(s.raw == s.normalized);

  const std::string cohort = " --cohort " + manifest + " --cohort-store " + train_store;
  // normalize defaults to AS-norm; with K equal to the cohort it matches S-norm.
  REQUIRE(box.Sdpn("normalize --store " + eval_store + " --trials " + trials + cohort +
                   " --top-k 12 --out " + (box / "as.txt").string()).code == 0);
  REQUIRE(box.Sdpn("score --method s --store " + eval_store + " --trials " + trials + cohort +
                   " --out " + (box / "s.txt").string()).code == 0);
  CHECK(ReadAll(box / "as.txt") == ReadAll(box / "s.txt"));
  CHECK(box.Sdpn("normalize --method cosine --store " + eval_store + " --trials " + trials +
                 cohort + " --out " + (box / "y.txt").string()).code == 1);
  CHECK(box.Sdpn("score --method z --store " + eval_store + " --trials " + trials +
                 " --out " + (box / "y.txt").string()).code == 1);
  CHECK(box.Sdpn("normalize --store " + eval_store + " --trials " + trials + cohort +
                 " --top-k 13 --out " + (box / "y.txt").string()).code == 1);

  const Run ev = box.Sdpn("eval --scores " + (box / "as.txt").string() + " --trials " + trials +
                          " --out " + (box / "report.json").string());
  REQUIRE(ev.code == 0);
  const std::string report = ReadAll(box / "report.json");
  CHECK(report.find("\"eer\"") != std::string::npos);
  CHECK(report.find("\"min_dcf\"") != std::string::npos);

  // An unknown id is a data error naming the id.
  WriteText(box / "ghost.txt", "1 ghost-utt " + cos.front().test_id + "\n");
  const Run ghost = box.Sdpn("score --store " + eval_store + " --trials " +
                             (box / "ghost.txt").string() + " --out " +
                             (box / "g.txt").string());
  CHECK(ghost.code == 2);
  CHECK(ghost.output.find("ghost-utt") != std::string::npos);
  CHECK(box.Sdpn("eval --scores " + (box / "missing.txt").string() + " --trials " + trials)
            .code == 2);
}

TEST_CASE("eval on separable scores") {
  Sandbox box;
  WriteText(box / "t.txt", "1 a b\n0 a c\n1 c d\n0 b d\n");
  WriteText(box / "s.txt", "a\tb\t0.9\t0.9\na\tc\t0.1\t0.1\nc\td\t0.8\t0.8\nb\td\t0.2\t0.2\n");
  const Run r = box.Sdpn("eval --scores " + (box / "s.txt").string() + " --trials " +
                         (box / "t.txt").string() + " --out " + (box / "r.json").string());
  REQUIRE(r.code == 0);
  CHECK(ReadAll(box / "r.json").find("\"eer\":0.0") != std::string::npos);
}

TEST_CASE("grad-check filters by loss") {
  Sandbox box;
  const Run r = box.Sdpn("grad-check --loss fdr --instances 5 --report " +
                         (box / "gc.jsonl").string());
  CHECK(r.code == 0);
  const std::string report = ReadAll(box / "gc.jsonl");
  CHECK(Lines(report) == 2);
  CHECK(report.find("fd_fdr") != std::string::npos);
  CHECK(report.find("fdr_grad_wrt_c") != std::string::npos);
  CHECK(box.Sdpn("grad-check --loss nothing").code == 1);
}

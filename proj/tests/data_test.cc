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

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>

#include "doctest.h"
#include "sdpn/binary_io.h"
#include "sdpn/data.h"
#include "sdpn/error.h"

using namespace sdpn;
namespace fs = std::filesystem;

namespace {

std::string TempDir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("sdpn_data_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p.string();
}

ErrorCode CodeOf(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no exception");
  return ErrorCode::kIoError;
}

SyntheticCorpusConfig Corpus(double spread) {
  SyntheticCorpusConfig c;
  c.num_speakers = 20;
  c.utts_per_speaker = 10;
  c.frames_per_utt = 120;
  c.feature_dim = 24;
  c.intra_speaker_spread = spread;
  c.seed = 5;
  return c;
}

RealVector MeanFrame(const RealMatrix& frames) {
  RealVector m(frames.cols(), 0.0);
  for (std::size_t t = 0; t < frames.rows(); ++t)
    for (std::size_t f = 0; f < frames.cols(); ++f) m[f] += frames(t, f);
  for (double& x : m) x /= frames.rows();
  return m;
}

// Leave-one-out nearest-centroid accuracy on utterance mean frames.
double CentroidAccuracy(const std::vector<Utterance>& corpus) {
  std::map<std::string, std::vector<RealVector>> by_speaker;
  for (const Utterance& u : corpus) by_speaker[u.speaker_id].push_back(MeanFrame(u.frames));
  int correct = 0, total = 0;
  for (const Utterance& u : corpus) {
    const RealVector x = MeanFrame(u.frames);
    std::string best;
    double best_d = INFINITY;
    for (const auto& [spk, vecs] : by_speaker) {
      RealVector c(x.size(), 0.0);
      int n = 0;
      for (const RealVector& v : vecs) {
        if (v == x) continue;
        for (std::size_t f = 0; f < x.size(); ++f) c[f] += v[f];
        ++n;
      }
      double d = 0.0;
      for (std::size_t f = 0; f < x.size(); ++f) d += std::pow(x[f] - c[f] / n, 2);
      if (d < best_d) best_d = d, best = spk;
    }
    correct += best == u.speaker_id;
    ++total;
  }
  return static_cast<double>(correct) / total;
}

}  // namespace

TEST_CASE("synthetic corpus shape and determinism") {
  const auto a = GenerateSyntheticCorpus(Corpus(0.5));
  const auto b = GenerateSyntheticCorpus(Corpus(0.5));
  CHECK(a.size() == 200);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].utterance_id == b[i].utterance_id);
    CHECK(a[i].frames == b[i].frames);
    CHECK(a[i].frames.rows() == 120);
    CHECK(a[i].frames.cols() == 24);
  }
  SyntheticCorpusConfig other = Corpus(0.5);
  other.seed = 6;
  CHECK_FALSE(GenerateSyntheticCorpus(other)[0].frames == a[0].frames);
  std::map<std::string, int> per_speaker;
  for (const Utterance& u : a) ++per_speaker[u.speaker_id];
  CHECK(per_speaker.size() == 20);
  for (const auto& [spk, n] : per_speaker) CHECK(n == 10);
  // Ids are unique and do not spell the speaker.
  std::vector<std::string> ids;
  for (const Utterance& u : a) {
    ids.push_back(u.utterance_id);
    CHECK(u.utterance_id.find(u.speaker_id) == std::string::npos);
  }
  std::sort(ids.begin(), ids.end());
  CHECK(std::adjacent_find(ids.begin(), ids.end()) == ids.end());
}

TEST_CASE("speakers are separable on mean frames") {
  CHECK(CentroidAccuracy(GenerateSyntheticCorpus(Corpus(0.5))) >= 0.95);
  CHECK(CentroidAccuracy(GenerateSyntheticCorpus(Corpus(1e-9))) == 1.0);
}

TEST_CASE("labels are stripped for training") {
  const auto corpus = GenerateSyntheticCorpus(Corpus(0.5));
  const auto unlabeled = StripLabels(corpus);
  CHECK(unlabeled.size() == corpus.size());
  CHECK(unlabeled[3].utterance_id == corpus[3].utterance_id);
  CHECK(unlabeled[3].frames == corpus[3].frames);
}

TEST_CASE("crop sampling") {
  std::mt19937_64 rng(41);
  RealMatrix frames(50, 3);
  for (std::size_t i = 0; i < frames.size(); ++i) frames.data()[i] = i;
  const UnlabeledUtterance utt{"u", frames};
  const CropConfig cfg{1, 4, 20, 10};
  for (int t = 0; t < 200; ++t) {
    const CropSet c = SampleCrops(utt, cfg, rng);
    CHECK(c.source == "u");
    CHECK(c.global_views.size() == 1);
    CHECK(c.local_views.size() == 4);
    CHECK(c.global_views[0].rows() == 20);
    for (const RealMatrix& l : c.local_views) {
      CHECK(l.rows() == 10);
      // Contiguous rows of the source.
      const std::size_t start = static_cast<std::size_t>(l(0, 0)) / 3;
      CHECK(start + 10 <= 50);
      for (std::size_t r = 0; r < 10; ++r) CHECK(l(r, 1) == frames(start + r, 1));
    }
  }
  // A global crop as long as the utterance is the utterance.
  const CropSet full = SampleCrops(utt, {1, 2, 50, 10}, rng);
  CHECK(full.global_views[0] == frames);
  // Same seed, same offsets.
  std::mt19937_64 r1(7), r2(7);
  CHECK(SampleCrops(utt, cfg, r1).local_views[2] == SampleCrops(utt, cfg, r2).local_views[2]);
  CHECK(CodeOf([&] { SampleCrops({"s", RealMatrix(10, 3)}, cfg, rng); }) ==
        ErrorCode::kUtteranceTooShort);
  CHECK_THROWS_AS((CropConfig{1, 4, 10, 10}.Validate()), Error);
  CHECK_THROWS_AS((CropConfig{0, 4, 20, 10}.Validate()), Error);
}

TEST_CASE("time and frequency masks") {
  std::mt19937_64 rng(42);
  std::normal_distribution<double> g;
  RealMatrix x(40, 12);
  for (double& v : x.data()) v = g(rng);
  CHECK(SpecMask(x, {0, 0, 3}, rng) == x);

  double mean = 0.0;
  for (double v : x.data()) mean += v;
  mean /= x.size();
  for (int t = 0; t < 100; ++t) {
    const int kt = t % 3, kf = (t / 3) % 3, w = 1 + t % 4;
    const RealMatrix m = SpecMask(x, {kt, kf, w}, rng);
    // Altered entries all carry the mean.
    std::size_t unchanged = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (m.data()[i] == x.data()[i]) {
        ++unchanged;
      } else {
        CHECK(m.data()[i] == mean);
      }
    }
    CHECK(unchanged >= static_cast<std::size_t>((40 - kt * w) * (12 - kf * w)));
    // Count maximal runs of fully masked rows and columns.
    auto row_masked = [&](std::size_t r) {
      for (std::size_t c = 0; c < 12; ++c)
        if (m(r, c) != mean) return false;
      return true;
    };
    auto col_masked = [&](std::size_t c) {
      for (std::size_t r = 0; r < 40; ++r)
        if (m(r, c) != mean) return false;
      return true;
    };
    int row_runs = 0, col_runs = 0;
    for (std::size_t r = 0; r < 40; ++r)
      row_runs += row_masked(r) && (r == 0 || !row_masked(r - 1));
    for (std::size_t c = 0; c < 12; ++c)
      col_runs += col_masked(c) && (c == 0 || !col_masked(c - 1));
    if (kf == 0) CHECK(row_runs == kt);
    if (kt == 0) CHECK(col_runs == kf);
  }
  CHECK(CodeOf([&] { SpecMask(x, {1, 1, 12}, rng); }) == ErrorCode::kInvalidConfig);
}

TEST_CASE("golden feature file") {
  const Utterance u = ReadFeatureFile(std::string(SDPN_TEST_DATA) + "/golden_2x3.sdfk");
  CHECK(u.utterance_id == "golden-utt");
  CHECK(u.speaker_id == "spk7");
  const RealMatrix expected =
      RealMatrix::FromRows({{1.0, -2.5, 0.125}, {3.0e10, -0.0, 6.75}});
  CHECK(u.frames == expected);
  CHECK(std::signbit(u.frames(1, 1)));
  CHECK(EncodeFeatureFile(u) ==
        ReadFileBytes(std::string(SDPN_TEST_DATA) + "/golden_2x3.sdfk"));
}

TEST_CASE("feature file round trip and corruption") {
  const std::string dir = TempDir("feat");
  Utterance u{"a1", "", RealMatrix::FromRows({{1, 2}, {3, 4}, {5, 6}})};
  WriteFeatureFile(u, dir + "/a1.sdfk");
  const Utterance back = ReadFeatureFile(dir + "/a1.sdfk");
  CHECK(back.frames == u.frames);
  CHECK(back.speaker_id.empty());
  CHECK_FALSE(fs::exists(dir + "/a1.sdfk.tmp"));

  const std::string bytes = EncodeFeatureFile(u);
  for (std::size_t cut : {std::size_t{0}, std::size_t{3}, std::size_t{9},
                          bytes.size() / 2, bytes.size() - 1}) {
    CHECK(CodeOf([&] { DecodeFeatureFile(bytes.substr(0, cut), "x"); }) ==
          ErrorCode::kMalformedFile);
  }
  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK(CodeOf([&] { DecodeFeatureFile(bad_magic, "x"); }) == ErrorCode::kMalformedFile);
  std::string bad_version = bytes;
  bad_version[4] = 9;
  CHECK(CodeOf([&] { DecodeFeatureFile(bad_version, "x"); }) == ErrorCode::kMalformedFile);
  CHECK(CodeOf([&] { DecodeFeatureFile(bytes + "zz", "x"); }) == ErrorCode::kMalformedFile);
  CHECK(CodeOf([&] { ReadFeatureFile(dir + "/missing.sdfk"); }) == ErrorCode::kIoError);
}

TEST_CASE("manifest and corpus loading") {
  const std::string dir = TempDir("manifest");
  fs::create_directories(dir + "/f");
  const auto corpus = GenerateSyntheticCorpus(
      {2, 2, 30, 4, 0.5, 3, "x"});
  std::vector<ManifestEntry> entries;
  for (const Utterance& u : corpus) {
    WriteFeatureFile(u, dir + "/f/" + u.utterance_id + ".sdfk");
    entries.push_back({u.utterance_id, "f/" + u.utterance_id + ".sdfk", u.speaker_id});
  }
  WriteManifest(entries, dir + "/m.tsv");
  const auto read = ReadManifest(dir + "/m.tsv");
  CHECK(read.size() == 4);
  CHECK(read[2].speaker_id == corpus[2].speaker_id);
  const auto loaded = LoadCorpus(dir + "/m.tsv");
  CHECK(loaded[1].frames == corpus[1].frames);

  std::ofstream(dir + "/bad.tsv") << "only-one-field\n";
  CHECK(CodeOf([&] { ReadManifest(dir + "/bad.tsv"); }) == ErrorCode::kMalformedFile);
  std::ofstream(dir + "/swap.tsv") << "wrong-id\tf/" << corpus[0].utterance_id << ".sdfk\n";
  CHECK(CodeOf([&] { LoadCorpus(dir + "/swap.tsv"); }) == ErrorCode::kMalformedFile);
}

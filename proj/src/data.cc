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

#include "sdpn/data.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include "sdpn/binary_io.h"
#include "sdpn/error.h"

namespace sdpn {

std::vector<UnlabeledUtterance> StripLabels(std::span<const Utterance> utts) {
  std::vector<UnlabeledUtterance> out;
  out.reserve(utts.size());
  for (const Utterance& u : utts) out.push_back({u.utterance_id, u.frames});
  return out;
}

void SyntheticCorpusConfig::Validate() const {
  if (num_speakers < 2) {
    Fail(ErrorCode::kInvalidConfig, "num_speakers must be >= 2");
  }
  if (utts_per_speaker < 1 || frames_per_utt < 1 || feature_dim < 1) {
    Fail(ErrorCode::kInvalidConfig, "corpus sizes must be positive");
  }
  if (!(intra_speaker_spread > 0.0)) {
    Fail(ErrorCode::kInvalidConfig, "intra_speaker_spread must be > 0");
  }
}

namespace {

std::string FormatId(const std::string& prefix, const char* stem, int index,
                     int width) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%0*d", stem, width, index);
  return prefix + buf;
}

}  // namespace

std::vector<Utterance> GenerateSyntheticCorpus(
    const SyntheticCorpusConfig& config) {
  config.Validate();
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t f_dim = static_cast<std::size_t>(config.feature_dim);
  const double spread = config.intra_speaker_spread;

  struct Speaker {
    RealVector mean, amplitude, frequency, phase;
  };
  std::vector<Speaker> speakers(config.num_speakers);
  for (Speaker& s : speakers) {
    s.mean.resize(f_dim);
    s.amplitude.resize(f_dim);
    s.frequency.resize(f_dim);
    s.phase.resize(f_dim);
    for (std::size_t k = 0; k < f_dim; ++k) {
      s.mean[k] = gauss(rng);
      s.amplitude[k] = 0.5 * gauss(rng);
      s.frequency[k] = 0.005 + 0.015 * unit(rng);  // cycles per frame
      s.phase[k] = 2.0 * std::numbers::pi * unit(rng);
    }
  }

  const int total = config.num_speakers * config.utts_per_speaker;
  std::vector<int> id_order(total);
  std::iota(id_order.begin(), id_order.end(), 0);
  std::shuffle(id_order.begin(), id_order.end(), rng);

  std::vector<Utterance> corpus;
  corpus.reserve(total);
  const std::size_t t_len = static_cast<std::size_t>(config.frames_per_utt);
  for (int s = 0; s < config.num_speakers; ++s) {
    const Speaker& spk = speakers[s];
    for (int u = 0; u < config.utts_per_speaker; ++u) {
      Utterance utt;
      utt.utterance_id = FormatId(config.id_prefix, "utt",
                                  id_order[s * config.utts_per_speaker + u], 5);
      utt.speaker_id = FormatId(config.id_prefix, "spk", s, 3);
      utt.frames = RealMatrix(t_len, f_dim);
      RealVector channel(f_dim);
      for (double& c : channel) c = 0.5 * spread * gauss(rng);
      const double time_shift = 1000.0 * unit(rng);
      for (std::size_t t = 0; t < t_len; ++t) {
        for (std::size_t k = 0; k < f_dim; ++k) {
          const double pattern =
              spk.amplitude[k] *
              std::sin(2.0 * std::numbers::pi * spk.frequency[k] *
                           (static_cast<double>(t) + time_shift) +
                       spk.phase[k]);
          utt.frames(t, k) =
              spk.mean[k] + pattern + channel[k] + spread * gauss(rng);
        }
      }
      corpus.push_back(std::move(utt));
    }
  }
  return corpus;
}

void CropConfig::Validate() const {
  if (num_global < 1 || num_local < 1) {
    Fail(ErrorCode::kInvalidConfig, "need at least one global and one local view");
  }
  if (len_local < 1 || len_global <= len_local) {
    Fail(ErrorCode::kInvalidConfig, "crop lengths must satisfy 1 <= local < global");
  }
}

RealMatrix CutFrames(const RealMatrix& frames, std::size_t start,
                     std::size_t length) {
  if (length == 0 || start + length > frames.rows()) {
    Fail(ErrorCode::kUtteranceTooShort,
         "crop [" + std::to_string(start) + ", " +
             std::to_string(start + length) + ") outside " +
             std::to_string(frames.rows()) + " frames");
  }
  RealMatrix out(length, frames.cols());
  std::copy_n(frames.data().begin() + start * frames.cols(),
              length * frames.cols(), out.data().begin());
  return out;
}

CropSet SampleCrops(const UnlabeledUtterance& utt, const CropConfig& config,
                    std::mt19937_64& rng) {
  config.Validate();
  const std::size_t t_len = utt.frames.rows();
  if (t_len < static_cast<std::size_t>(config.len_global)) {
    Fail(ErrorCode::kUtteranceTooShort,
         utt.utterance_id + " has " + std::to_string(t_len) +
             " frames, global crop needs " + std::to_string(config.len_global));
  }
  auto cut = [&](int len) {
    const std::size_t length = static_cast<std::size_t>(len);
    std::uniform_int_distribution<std::size_t> start(0, t_len - length);
    return CutFrames(utt.frames, start(rng), length);
  };
  CropSet crops;
  crops.source = utt.utterance_id;
  for (int i = 0; i < config.num_global; ++i)
    crops.global_views.push_back(cut(config.len_global));
  for (int i = 0; i < config.num_local; ++i)
    crops.local_views.push_back(cut(config.len_local));
  return crops;
}

namespace {

// Picks `count` bands of width in [1, max_width] inside [0, extent) with at
// least one untouched index between any two bands.
std::vector<std::pair<std::size_t, std::size_t>> PlaceBands(
    int count, int max_width, std::size_t extent, std::mt19937_64& rng) {
  std::vector<std::pair<std::size_t, std::size_t>> bands;
  std::uniform_int_distribution<int> width_dist(1, max_width);
  for (int attempt = 0; static_cast<int>(bands.size()) < count; ++attempt) {
    if (attempt > 10000) {
      Fail(ErrorCode::kInvalidConfig, "cannot place non-touching mask bands");
    }
    const std::size_t width = static_cast<std::size_t>(width_dist(rng));
    std::uniform_int_distribution<std::size_t> start_dist(0, extent - width);
    const std::size_t start = start_dist(rng);
    const bool clashes = std::any_of(
        bands.begin(), bands.end(), [&](const auto& b) {
          return start <= b.first + b.second && b.first <= start + width;
        });
    if (!clashes) bands.emplace_back(start, width);
  }
  return bands;
}

}  // namespace

RealMatrix SpecMask(const RealMatrix& frames, const MaskConfig& config,
                    std::mt19937_64& rng) {
  const std::size_t t_len = frames.rows(), f_dim = frames.cols();
  if (config.time_masks < 0 || config.freq_masks < 0) {
    Fail(ErrorCode::kInvalidConfig, "mask counts must be non-negative");
  }
  if (config.time_masks == 0 && config.freq_masks == 0) return frames;
  const std::size_t width = static_cast<std::size_t>(config.max_width);
  if (config.max_width < 1 || width >= std::min(t_len, f_dim)) {
    Fail(ErrorCode::kInvalidConfig, "max_width must be in [1, min(T, F))");
  }
  // Worst case every band has max_width plus one separating index.
  if (static_cast<std::size_t>(config.time_masks) * (width + 1) > t_len + 1 ||
      static_cast<std::size_t>(config.freq_masks) * (width + 1) > f_dim + 1) {
    Fail(ErrorCode::kInvalidConfig, "too many masks for the matrix size");
  }
  double mean = 0.0;
  for (double x : frames.data()) mean += x;
  mean /= static_cast<double>(frames.size());

  RealMatrix out = frames;
  for (auto [start, w] : PlaceBands(config.time_masks, config.max_width, t_len, rng))
    for (std::size_t t = start; t < start + w; ++t)
      for (std::size_t k = 0; k < f_dim; ++k) out(t, k) = mean;
  for (auto [start, w] : PlaceBands(config.freq_masks, config.max_width, f_dim, rng))
    for (std::size_t k = start; k < start + w; ++k)
      for (std::size_t t = 0; t < t_len; ++t) out(t, k) = mean;
  return out;
}

std::string EncodeFeatureFile(const Utterance& utt) {
  ByteWriter w;
  w.PutBytes(std::string_view(kFeatureMagic, 4));
  w.PutU16(kFeatureVersion);
  w.PutU32(static_cast<std::uint32_t>(utt.frames.rows()));
  w.PutU32(static_cast<std::uint32_t>(utt.frames.cols()));
  for (double x : utt.frames.data()) w.PutF64(x);
  w.PutString(utt.utterance_id);
  w.PutString(utt.speaker_id);
  return w.bytes();
}

Utterance DecodeFeatureFile(const std::string& bytes,
                            const std::string& source) {
  ByteReader r(bytes, source);
  if (r.GetBytes(4) != std::string_view(kFeatureMagic, 4)) {
    Fail(ErrorCode::kMalformedFile, source + " at byte offset 0: bad magic");
  }
  const std::uint16_t version = r.GetU16();
  if (version != kFeatureVersion) {
    r.Malformed("unsupported version " + std::to_string(version));
  }
  const std::uint32_t t_len = r.GetU32();
  const std::uint32_t f_dim = r.GetU32();
  if (t_len == 0 || f_dim == 0) r.Malformed("empty matrix");
  const std::uint64_t count = static_cast<std::uint64_t>(t_len) * f_dim;
  if (count * 8 > r.remaining()) r.Malformed("truncated frame data");
  std::vector<double> data(count);
  for (double& x : data) x = r.GetF64();
  Utterance utt;
  utt.frames = RealMatrix(t_len, f_dim, std::move(data));
  utt.utterance_id = r.GetString();
  utt.speaker_id = r.GetString();
  if (!r.AtEnd()) r.Malformed("trailing bytes");
  return utt;
}

void WriteFeatureFile(const Utterance& utt, const std::string& path) {
  WriteFileAtomic(path, EncodeFeatureFile(utt));
}

Utterance ReadFeatureFile(const std::string& path) {
  return DecodeFeatureFile(ReadFileBytes(path), path);
}

std::vector<ManifestEntry> ReadManifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) Fail(ErrorCode::kIoError, "cannot open manifest " + path);
  std::vector<ManifestEntry> entries;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, '\t')) fields.push_back(field);
    if (fields.size() < 2 || fields.size() > 3 || fields[0].empty()) {
      Fail(ErrorCode::kMalformedFile,
           path + ":" + std::to_string(line_no) +
               ": expected utterance_id<TAB>path[<TAB>speaker_id]");
    }
    entries.push_back({fields[0], fields[1], fields.size() == 3 ? fields[2] : ""});
  }
  return entries;
}

void WriteManifest(const std::vector<ManifestEntry>& entries,
                   const std::string& path) {
  std::string text;
  for (const ManifestEntry& e : entries) {
    text += e.utterance_id + "\t" + e.path;
    if (!e.speaker_id.empty()) text += "\t" + e.speaker_id;
    text += "\n";
  }
  WriteFileAtomic(path, text);
}

std::vector<Utterance> LoadCorpus(const std::string& manifest_path) {
  const std::filesystem::path base =
      std::filesystem::path(manifest_path).parent_path();
  std::vector<Utterance> corpus;
  for (const ManifestEntry& e : ReadManifest(manifest_path)) {
    std::filesystem::path p(e.path);
    if (p.is_relative()) p = base / p;
    Utterance utt = ReadFeatureFile(p.string());
    if (utt.utterance_id != e.utterance_id) {
      Fail(ErrorCode::kMalformedFile,
           p.string() + " holds '" + utt.utterance_id + "', manifest says '" +
               e.utterance_id + "'");
    }
    if (utt.speaker_id.empty()) utt.speaker_id = e.speaker_id;
    corpus.push_back(std::move(utt));
  }
  return corpus;
}

}  // namespace sdpn

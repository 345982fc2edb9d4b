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

#ifndef SDPN_DATA_H_
#define SDPN_DATA_H_

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "sdpn/numerics.h"

namespace sdpn {

// An utterance as stored on disk. speaker_id is only used for building
// evaluation trials; the trainer never sees this type.
struct Utterance {
  std::string utterance_id;
  std::string speaker_id;  // may be empty
  RealMatrix frames;       // T x F
};

// What the trainer consumes: frames and an opaque id, no speaker label.
struct UnlabeledUtterance {
  std::string utterance_id;
  RealMatrix frames;
};

std::vector<UnlabeledUtterance> StripLabels(std::span<const Utterance> utts);

struct SyntheticCorpusConfig {
  int num_speakers = 20;
  int utts_per_speaker = 10;
  int frames_per_utt = 300;
  int feature_dim = 24;
  double intra_speaker_spread = 0.5;
  std::uint64_t seed = 1;
  // Prefix for generated ids, so that several corpora can share a store.
  std::string id_prefix;

  void Validate() const;
};

// Each speaker gets a random mean vector and a slowly varying sinusoidal
// pattern; each utterance adds a random channel offset and per-frame noise,
// both scaled by intra_speaker_spread. Utterance ids are shuffled so they
// do not reveal the speaker.
std::vector<Utterance> GenerateSyntheticCorpus(
    const SyntheticCorpusConfig& config);

struct CropConfig {
  int num_global = 1;
  int num_local = 4;
  int len_global = 200;
  int len_local = 100;

  void Validate() const;
};

struct CropSet {
  std::vector<RealMatrix> global_views;
  std::vector<RealMatrix> local_views;
  std::string source;  // utterance id
};

RealMatrix CutFrames(const RealMatrix& frames, std::size_t start,
                     std::size_t length);

CropSet SampleCrops(const UnlabeledUtterance& utt, const CropConfig& config,
                    std::mt19937_64& rng);

struct MaskConfig {
  int time_masks = 0;
  int freq_masks = 0;
  int max_width = 1;
};

// Masks exactly time_masks row bands and freq_masks column bands, each of
// width in [1, max_width], filling them with the mean of the input. Bands
// on the same axis never overlap or touch.
RealMatrix SpecMask(const RealMatrix& frames, const MaskConfig& config,
                    std::mt19937_64& rng);

// Feature file ("SDFK"): see docs/formats.md.
inline constexpr char kFeatureMagic[] = "SDFK";
inline constexpr std::uint16_t kFeatureVersion = 1;

std::string EncodeFeatureFile(const Utterance& utt);
Utterance DecodeFeatureFile(const std::string& bytes,
                            const std::string& source);
void WriteFeatureFile(const Utterance& utt, const std::string& path);
Utterance ReadFeatureFile(const std::string& path);

struct ManifestEntry {
  std::string utterance_id;
  std::string path;
  std::string speaker_id;  // optional
};

std::vector<ManifestEntry> ReadManifest(const std::string& path);
void WriteManifest(const std::vector<ManifestEntry>& entries,
                   const std::string& path);

// Loads every feature file of a manifest; relative paths are resolved
// against the manifest's directory.
std::vector<Utterance> LoadCorpus(const std::string& manifest_path);

}  // namespace sdpn

#endif  // SDPN_DATA_H_

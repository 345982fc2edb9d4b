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

#ifndef SDPN_CONFIG_H_
#define SDPN_CONFIG_H_

#include <cstdint>
#include <string>

#include "sdpn/data.h"
#include "sdpn/model.h"
#include "sdpn/scoring.h"
#include "sdpn/trainer.h"

namespace sdpn {

inline constexpr int kConfigSchemaVersion = 1;

struct DataSection {
  SyntheticCorpusConfig train;  // seed and id_prefix are derived
  int eval_speakers = 20;
  int eval_utts_per_speaker = 6;
};

struct ScoringSection {
  ScoringOptions options;
  bool drop_cohort_overlap = false;
};

struct MetricsSection {
  double p_target = 0.05;
  double c_miss = 1.0;
  double c_fa = 1.0;
};

// Everything a pipeline run needs, as one JSON document. A single seed
// drives corpus generation, initialization and training.
struct RunConfig {
  std::uint64_t seed = 1;
  DataSection data;
  ModelConfig model;
  TrainConfig train;
  ScoringSection scoring;
  MetricsSection metrics;

  // Copies seed-derived values into the sections.
  void Resolve();
  void Validate() const;
};

std::uint64_t DeriveSeed(std::uint64_t seed, const std::string& purpose);

// Missing keys keep their defaults; unknown keys and a wrong
// schema_version are InvalidConfig.
RunConfig ParseRunConfig(const std::string& json_text);
RunConfig LoadRunConfig(const std::string& path);
// Canonical JSON with every field, stable key order.
std::string RunConfigToJson(const RunConfig& config);

}  // namespace sdpn

#endif  // SDPN_CONFIG_H_

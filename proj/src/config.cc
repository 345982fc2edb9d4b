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

#include "sdpn/config.h"

#include <functional>
#include <map>

#include "json.hpp"
#include "sdpn/binary_io.h"
#include "sdpn/error.h"

namespace sdpn {

using nlohmann::json;
using nlohmann::ordered_json;

std::uint64_t DeriveSeed(std::uint64_t seed, const std::string& purpose) {
  return Fnv1a64(purpose + ":" + std::to_string(seed));
}

void RunConfig::Resolve() {
  data.train.seed = DeriveSeed(seed, "data");
  data.train.id_prefix = "tr";
  model.init_seed = DeriveSeed(seed, "init");
  model.feature_dim = data.train.feature_dim;
  train.seed = DeriveSeed(seed, "train");
}

void RunConfig::Validate() const {
  data.train.Validate();
  if (data.eval_speakers < 2 || data.eval_utts_per_speaker < 2) {
    Fail(ErrorCode::kInvalidConfig,
         "evaluation corpus needs >= 2 speakers with >= 2 utterances");
  }
  if (model.feature_dim != data.train.feature_dim) {
    Fail(ErrorCode::kInvalidConfig, "model.feature_dim != data.feature_dim");
  }
  model.Validate();
  train.Validate();
  if (data.train.frames_per_utt < train.crops.len_global) {
    Fail(ErrorCode::kInvalidConfig, "frames_per_utt shorter than a global crop");
  }
  if (!(metrics.p_target > 0.0 && metrics.p_target < 1.0) ||
      !(metrics.c_miss > 0.0) || !(metrics.c_fa > 0.0)) {
    Fail(ErrorCode::kInvalidConfig, "bad detection cost parameters");
  }
}

namespace {

// Walks an object and hands every key to its handler; unknown keys fail.
using Handlers = std::map<std::string, std::function<void(const json&)>>;

void Visit(const json& obj, const std::string& where, const Handlers& handlers) {
  if (!obj.is_object()) {
    Fail(ErrorCode::kInvalidConfig, where + " must be an object");
  }
  for (const auto& [key, value] : obj.items()) {
    auto it = handlers.find(key);
    if (it == handlers.end()) {
      Fail(ErrorCode::kInvalidConfig, "unknown key '" + where + "." + key + "'");
    }
    try {
      it->second(value);
    } catch (const json::exception& e) {
      Fail(ErrorCode::kInvalidConfig, where + "." + key + ": " + e.what());
    }
  }
}

template <typename T>
std::function<void(const json&)> Set(T* field) {
  return [field](const json& v) { *field = v.get<T>(); };
}

}  // namespace

RunConfig ParseRunConfig(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    Fail(ErrorCode::kInvalidConfig, std::string("config is not JSON: ") + e.what());
  }
  RunConfig c;
  bool saw_version = false;
  SyntheticCorpusConfig& d = c.data.train;
  ModelConfig& m = c.model;
  TrainConfig& t = c.train;
  ScoringOptions& s = c.scoring.options;
  Visit(doc, "config", {
    {"schema_version", [&](const json& v) {
       saw_version = true;
       if (v.get<int>() != kConfigSchemaVersion) {
         Fail(ErrorCode::kInvalidConfig,
              "schema_version " + v.dump() + ", expected " +
                  std::to_string(kConfigSchemaVersion));
       }
     }},
    {"seed", Set(&c.seed)},
    {"data", [&](const json& v) {
       Visit(v, "data", {
         {"num_speakers", Set(&d.num_speakers)},
         {"utts_per_speaker", Set(&d.utts_per_speaker)},
         {"frames_per_utt", Set(&d.frames_per_utt)},
         {"feature_dim", Set(&d.feature_dim)},
         {"intra_speaker_spread", Set(&d.intra_speaker_spread)},
         {"eval_speakers", Set(&c.data.eval_speakers)},
         {"eval_utts_per_speaker", Set(&c.data.eval_utts_per_speaker)},
       });
     }},
    {"model", [&](const json& v) {
       Visit(v, "model", {
         {"encoder_hidden", Set(&m.encoder_hidden)},
         {"embedding_dim", Set(&m.embedding_dim)},
         {"proj_hidden1", Set(&m.proj_hidden1)},
         {"proj_hidden2", Set(&m.proj_hidden2)},
         {"proj_dim", Set(&m.proj_dim)},
         {"num_prototypes", Set(&m.num_prototypes)},
         {"student_temperature", Set(&m.student_temperature)},
         {"teacher_temperature", Set(&m.teacher_temperature)},
         {"teacher_centering", Set(&m.teacher_centering)},
         {"center_momentum", Set(&m.center_momentum)},
         {"ema_base", Set(&m.ema_base)},
         {"ema_final", Set(&m.ema_final)},
       });
     }},
    {"train", [&](const json& v) {
       Visit(v, "train", {
         {"epochs", Set(&t.epochs)},
         {"batch_size", Set(&t.batch_size)},
         {"lr_peak", Set(&t.lr_peak)},
         {"lr_final", Set(&t.lr_final)},
         {"warmup_epochs", Set(&t.warmup_epochs)},
         {"momentum", Set(&t.momentum)},
         {"mu", Set(&t.weights.mu)},
         {"lambda", Set(&t.weights.lambda)},
         {"regularizer", [&](const json& r) {
            t.regularizer = ParseRegularizer(r.get<std::string>());
          }},
         {"centered_covariance", Set(&t.centered_covariance)},
         {"eq2_literal", Set(&t.eq2_literal)},
         {"crops", [&](const json& r) {
            Visit(r, "train.crops", {
              {"num_global", Set(&t.crops.num_global)},
              {"num_local", Set(&t.crops.num_local)},
              {"len_global", Set(&t.crops.len_global)},
              {"len_local", Set(&t.crops.len_local)},
            });
          }},
         {"mask", [&](const json& r) {
            Visit(r, "train.mask", {
              {"time_masks", Set(&t.mask.time_masks)},
              {"freq_masks", Set(&t.mask.freq_masks)},
              {"max_width", Set(&t.mask.max_width)},
            });
          }},
       });
     }},
    {"scoring", [&](const json& v) {
       Visit(v, "scoring", {
         {"method", [&](const json& r) {
            s.method = ParseNormMethod(r.get<std::string>());
          }},
         {"top_k", Set(&s.top_k)},
         {"sample_stddev", Set(&s.sample_stddev)},
         {"threads", Set(&s.threads)},
         {"drop_cohort_overlap", Set(&c.scoring.drop_cohort_overlap)},
       });
     }},
    {"metrics", [&](const json& v) {
       Visit(v, "metrics", {
         {"p_target", Set(&c.metrics.p_target)},
         {"c_miss", Set(&c.metrics.c_miss)},
         {"c_fa", Set(&c.metrics.c_fa)},
       });
     }},
  });
  if (!saw_version) {
    Fail(ErrorCode::kInvalidConfig, "missing schema_version");
  }
  c.Resolve();
  c.Validate();
  return c;
}

RunConfig LoadRunConfig(const std::string& path) {
  return ParseRunConfig(ReadFileBytes(path));
}

std::string RunConfigToJson(const RunConfig& c) {
  const SyntheticCorpusConfig& d = c.data.train;
  const ModelConfig& m = c.model;
  const TrainConfig& t = c.train;
  const ScoringOptions& s = c.scoring.options;
  ordered_json j;
  j["schema_version"] = kConfigSchemaVersion;
  j["seed"] = c.seed;
  j["data"] = {{"num_speakers", d.num_speakers},
               {"utts_per_speaker", d.utts_per_speaker},
               {"frames_per_utt", d.frames_per_utt},
               {"feature_dim", d.feature_dim},
               {"intra_speaker_spread", d.intra_speaker_spread},
               {"eval_speakers", c.data.eval_speakers},
               {"eval_utts_per_speaker", c.data.eval_utts_per_speaker}};
  j["model"] = {{"encoder_hidden", m.encoder_hidden},
                {"embedding_dim", m.embedding_dim},
                {"proj_hidden1", m.proj_hidden1},
                {"proj_hidden2", m.proj_hidden2},
                {"proj_dim", m.proj_dim},
                {"num_prototypes", m.num_prototypes},
                {"student_temperature", m.student_temperature},
                {"teacher_temperature", m.teacher_temperature},
                {"teacher_centering", m.teacher_centering},
                {"center_momentum", m.center_momentum},
                {"ema_base", m.ema_base},
                {"ema_final", m.ema_final}};
  j["train"] = {{"epochs", t.epochs},
                {"batch_size", t.batch_size},
                {"lr_peak", t.lr_peak},
                {"lr_final", t.lr_final},
                {"warmup_epochs", t.warmup_epochs},
                {"momentum", t.momentum},
                {"mu", t.weights.mu},
                {"lambda", t.weights.lambda},
                {"regularizer", RegularizerName(t.regularizer)},
                {"centered_covariance", t.centered_covariance},
                {"eq2_literal", t.eq2_literal},
                {"crops", {{"num_global", t.crops.num_global},
                           {"num_local", t.crops.num_local},
                           {"len_global", t.crops.len_global},
                           {"len_local", t.crops.len_local}}},
                {"mask", {{"time_masks", t.mask.time_masks},
                          {"freq_masks", t.mask.freq_masks},
                          {"max_width", t.mask.max_width}}}};
  j["scoring"] = {{"method", NormMethodName(s.method)},
                  {"top_k", s.top_k},
                  {"sample_stddev", s.sample_stddev},
                  {"threads", s.threads},
                  {"drop_cohort_overlap", c.scoring.drop_cohort_overlap}};
  j["metrics"] = {{"p_target", c.metrics.p_target},
                  {"c_miss", c.metrics.c_miss},
                  {"c_fa", c.metrics.c_fa}};
  return j.dump(2) + "\n";
}

}  // namespace sdpn

// Copyright 2026 The HumorChain Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef HUMORCHAIN_TYPES_H_
#define HUMORCHAIN_TYPES_H_

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace humorchain {

using Json = nlohmann::json;

struct ImageRecord {
  std::string id;
  std::string source;  // local path or URL
  std::string dataset_tag;
};

struct SamplingParams {
  double temperature = 0.0;
  int max_tokens = 4000;
  std::optional<double> top_p;
  std::optional<int> top_k;
  std::optional<int64_t> seed;
  std::optional<double> repetition_penalty;
  std::optional<double> presence_penalty;

  // Throws Error(kInvalidArgument) on a violated range.
  void Validate() const;
};

struct SceneDescription {
  std::string image_id;
  std::string text;
  std::string model_id;
};

enum class PlausibilityLevel { kCommon, kPlausible, kRare, kImplausible };

enum class StrategyKind {
  kAbsurdity,
  kContrastIrony,
  kEmotionAnalogy,
  kObjectAnalogy,
};

inline constexpr StrategyKind kAllStrategies[] = {
    StrategyKind::kAbsurdity, StrategyKind::kContrastIrony,
    StrategyKind::kEmotionAnalogy, StrategyKind::kObjectAnalogy};

enum class ViolationCategory {
  kGroupAttack,
  kPersonalAttack,
  kHateSpeech,
  kHumiliation,
  kOther,
};

// Wire literals. The Parse* functions throw Error(kEnum) naming the bad
// literal.
std::string_view ToString(PlausibilityLevel level);
std::string_view ToString(StrategyKind strategy);
std::string_view ToString(ViolationCategory category);
PlausibilityLevel ParsePlausibility(std::string_view literal);
StrategyKind ParseStrategy(std::string_view literal);
ViolationCategory ParseViolationCategory(std::string_view literal);

struct SceneJudgment {
  PlausibilityLevel plausibility = PlausibilityLevel::kCommon;
  bool incongruity_for_humor = false;
  // People, animals or cartoon characters are present. The stage-2 prompt
  // calls this field has_human_or_animal_or_cartoon.
  bool has_living_entity = false;
  std::vector<std::string> reasons;

  bool operator==(const SceneJudgment&) const = default;
};

struct SafetyVerdict {
  bool compliant = true;
  std::vector<ViolationCategory> violation_categories;
  std::string explanation;

  // compliant => no categories; non-compliant => 1..3 categories.
  // Throws Error(kSchema).
  void Validate() const;
  bool operator==(const SafetyVerdict&) const = default;
};

struct HumorVerdict {
  std::optional<double> score;  // scored judges, in [0, 1]
  std::optional<int> label;     // binary judges, 0 or 1
  bool accepted = false;
  std::string judge_id;
  double threshold_used = 0.0;

  bool operator==(const HumorVerdict&) const = default;
};

struct StageEvent {
  std::string stage;
  int64_t timestamp = 0;  // microseconds; logical ticks under a test clock
  int attempt = 0;        // 0 for per-image stages (describe, judge)
  std::string input_digest;
  std::string output_digest;
  std::string model_id;
  std::vector<std::string> warnings;

  bool operator==(const StageEvent&) const = default;
};

struct CaptionCandidate {
  std::string image_id;
  std::string caption;
  StrategyKind strategy = StrategyKind::kAbsurdity;
  int attempt = 1;
  SafetyVerdict safety;
  std::optional<HumorVerdict> humor;
  bool accepted = false;
  std::vector<StageEvent> trace;

  bool operator==(const CaptionCandidate&) const = default;
};

// Whitespace-delimited word count after trimming.
int CountWords(std::string_view text);

// Soft checks on a stage-2 judgment: 2..5 reasons, each at most 20 words.
// Returns one warning per violated constraint; empty when all hold.
std::vector<std::string> ValidateSceneJudgment(const SceneJudgment& judgment);

// Checks the cross-field invariants of a candidate (accepted implies a
// compliant and humor-accepted verdict; trace timestamps monotone).
// Returns the list of violations, empty when the candidate is consistent.
std::vector<std::string> CheckCandidateInvariants(
    const CaptionCandidate& candidate);

// Reads an image manifest: one JSON object per line, blank lines ignored.
// Throws Error(kParse) with the 1-based line number on a malformed line and
// Error(kDuplicate) naming a repeated id.
std::vector<ImageRecord> LoadManifest(const std::string& path);

// JSON Lines helpers shared by every file format in the project.
std::vector<Json> ReadJsonLines(const std::string& path);
void WriteJsonLines(const std::string& path, const std::vector<Json>& rows);

// JSON (de)serialization. Field names are the on-disk schema.
void to_json(Json& j, const ImageRecord& v);
void from_json(const Json& j, ImageRecord& v);
void to_json(Json& j, const SamplingParams& v);
void from_json(const Json& j, SamplingParams& v);
void to_json(Json& j, const SceneDescription& v);
void from_json(const Json& j, SceneDescription& v);
void to_json(Json& j, const SceneJudgment& v);
void from_json(const Json& j, SceneJudgment& v);
void to_json(Json& j, const SafetyVerdict& v);
void from_json(const Json& j, SafetyVerdict& v);
void to_json(Json& j, const HumorVerdict& v);
void from_json(const Json& j, HumorVerdict& v);
void to_json(Json& j, const StageEvent& v);
void from_json(const Json& j, StageEvent& v);
void to_json(Json& j, const CaptionCandidate& v);
void from_json(const Json& j, CaptionCandidate& v);

}  // namespace humorchain

#endif  // HUMORCHAIN_TYPES_H_

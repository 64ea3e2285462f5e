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

#include "humorchain/types.h"

#include <fstream>
#include <set>
#include <sstream>

#include "humorchain/errors.h"

namespace humorchain {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kParse: return "parse";
    case ErrorCode::kSchema: return "schema";
    case ErrorCode::kEnum: return "enum";
    case ErrorCode::kDuplicate: return "duplicate";
    case ErrorCode::kExtraction: return "extraction";
    case ErrorCode::kTransport: return "transport";
    case ErrorCode::kTimeout: return "timeout";
    case ErrorCode::kBackend: return "backend";
    case ErrorCode::kStage: return "stage";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kUndefined: return "undefined";
    case ErrorCode::kDisconnected: return "disconnected";
    case ErrorCode::kNotFound: return "not_found";
    case ErrorCode::kConflict: return "conflict";
  }
  return "unknown";
}

namespace {

template <typename E, size_t N>
E ParseEnum(std::string_view literal, const std::pair<E, std::string_view> (&table)[N],
            std::string_view what) {
  for (const auto& [value, name] : table) {
    if (name == literal) return value;
  }
  throw Error(ErrorCode::kEnum, "invalid " + std::string(what) + " literal '" +
                                    std::string(literal) + "'");
}

template <typename E, size_t N>
std::string_view EnumName(E value,
                          const std::pair<E, std::string_view> (&table)[N]) {
  for (const auto& [v, name] : table) {
    if (v == value) return name;
  }
  return "?";
}

constexpr std::pair<PlausibilityLevel, std::string_view> kPlausibilityNames[] = {
    {PlausibilityLevel::kCommon, "common"},
    {PlausibilityLevel::kPlausible, "plausible"},
    {PlausibilityLevel::kRare, "rare"},
    {PlausibilityLevel::kImplausible, "implausible"},
};

constexpr std::pair<StrategyKind, std::string_view> kStrategyNames[] = {
    {StrategyKind::kAbsurdity, "absurdity"},
    {StrategyKind::kContrastIrony, "contrast_irony"},
    {StrategyKind::kEmotionAnalogy, "emotion_analogy"},
    {StrategyKind::kObjectAnalogy, "object_analogy"},
};

constexpr std::pair<ViolationCategory, std::string_view> kViolationNames[] = {
    {ViolationCategory::kGroupAttack, "group_attack"},
    {ViolationCategory::kPersonalAttack, "personal_attack"},
    {ViolationCategory::kHateSpeech, "hate_speech"},
    {ViolationCategory::kHumiliation, "humiliation"},
    {ViolationCategory::kOther, "other"},
};

const Json& Require(const Json& j, const char* key) {
  if (!j.is_object()) {
    throw Error(ErrorCode::kSchema, "expected a JSON object");
  }
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) {
    throw Error(ErrorCode::kSchema, std::string("missing field '") + key + "'");
  }
  return *it;
}

template <typename T>
T RequireAs(const Json& j, const char* key) {
  const Json& v = Require(j, key);
  try {
    return v.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorCode::kSchema,
                std::string("field '") + key + "' has the wrong type");
  }
}

template <typename T>
std::optional<T> Optional(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorCode::kSchema,
                std::string("field '") + key + "' has the wrong type");
  }
}

template <typename T>
void PutOptional(Json& j, const char* key, const std::optional<T>& v) {
  if (v) j[key] = *v;
}

}  // namespace

std::string_view ToString(PlausibilityLevel level) {
  return EnumName(level, kPlausibilityNames);
}
std::string_view ToString(StrategyKind strategy) {
  return EnumName(strategy, kStrategyNames);
}
std::string_view ToString(ViolationCategory category) {
  return EnumName(category, kViolationNames);
}
PlausibilityLevel ParsePlausibility(std::string_view literal) {
  return ParseEnum(literal, kPlausibilityNames, "plausibility");
}
StrategyKind ParseStrategy(std::string_view literal) {
  return ParseEnum(literal, kStrategyNames, "strategy");
}
ViolationCategory ParseViolationCategory(std::string_view literal) {
  return ParseEnum(literal, kViolationNames, "violation category");
}

void SamplingParams::Validate() const {
  if (!(temperature >= 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "temperature must be >= 0");
  }
  if (max_tokens < 1) {
    throw Error(ErrorCode::kInvalidArgument, "max_tokens must be >= 1");
  }
  if (top_p && !(*top_p > 0.0 && *top_p <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "top_p must be in (0, 1]");
  }
  if (top_k && *top_k < 1) {
    throw Error(ErrorCode::kInvalidArgument, "top_k must be positive");
  }
}

void SafetyVerdict::Validate() const {
  if (compliant && !violation_categories.empty()) {
    throw Error(ErrorCode::kSchema,
                "compliant verdict must not list violation categories");
  }
  if (!compliant &&
      (violation_categories.empty() || violation_categories.size() > 3)) {
    throw Error(ErrorCode::kSchema,
                "non-compliant verdict needs 1-3 violation categories, got " +
                    std::to_string(violation_categories.size()));
  }
}

int CountWords(std::string_view text) {
  int words = 0;
  bool in_word = false;
  for (char c : text) {
    bool space = c == ' ' || c == '\t' || c == '\n' || c == '\r' ||
                 c == '\f' || c == '\v';
    if (!space && !in_word) ++words;
    in_word = !space;
  }
  return words;
}

std::vector<std::string> ValidateSceneJudgment(const SceneJudgment& judgment) {
  std::vector<std::string> warnings;
  const size_t n = judgment.reasons.size();
  if (n < 2) {
    warnings.push_back("fewer than 2 reasons (" + std::to_string(n) + ")");
  } else if (n > 5) {
    warnings.push_back("more than 5 reasons (" + std::to_string(n) + ")");
  }
  for (size_t i = 0; i < n; ++i) {
    int words = CountWords(judgment.reasons[i]);
    if (words > 20) {
      warnings.push_back("reason " + std::to_string(i + 1) +
                         " exceeds 20 words (" + std::to_string(words) + ")");
    }
  }
  return warnings;
}

std::vector<std::string> CheckCandidateInvariants(
    const CaptionCandidate& candidate) {
  std::vector<std::string> problems;
  if (candidate.accepted) {
    if (!candidate.safety.compliant) {
      problems.push_back("accepted candidate is not safety-compliant");
    }
    if (!candidate.humor || !candidate.humor->accepted) {
      problems.push_back("accepted candidate lacks an accepting humor verdict");
    }
  }
  if (candidate.attempt < 1) problems.push_back("attempt must be positive");
  for (size_t i = 1; i < candidate.trace.size(); ++i) {
    if (candidate.trace[i].timestamp < candidate.trace[i - 1].timestamp) {
      problems.push_back("trace timestamps are not monotone");
      break;
    }
  }
  return problems;
}

std::vector<Json> ReadJsonLines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kNotFound, "cannot open " + path);
  std::vector<Json> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      rows.push_back(Json::parse(line));
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::kParse, path + ":" + std::to_string(line_no) +
                                         ": malformed JSON line: " + e.what());
    }
  }
  return rows;
}

void WriteJsonLines(const std::string& path, const std::vector<Json>& rows) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kNotFound, "cannot write " + path);
  for (const Json& row : rows) out << row.dump() << '\n';
  if (!out) throw Error(ErrorCode::kNotFound, "write failed for " + path);
}

std::vector<ImageRecord> LoadManifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kNotFound, "cannot open manifest " + path);
  std::vector<ImageRecord> records;
  std::set<std::string> seen;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ImageRecord record;
    try {
      record = Json::parse(line).get<ImageRecord>();
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kParse, "manifest line " + std::to_string(line_no) +
                                         ": " + e.what());
    } catch (const Error& e) {
      throw Error(ErrorCode::kParse, "manifest line " + std::to_string(line_no) +
                                         ": " + e.what());
    }
    if (record.id.empty() || record.source.empty()) {
      throw Error(ErrorCode::kParse, "manifest line " + std::to_string(line_no) +
                                         ": id and source must be non-empty");
    }
    if (!seen.insert(record.id).second) {
      throw Error(ErrorCode::kDuplicate,
                  "duplicate image id '" + record.id + "' at manifest line " +
                      std::to_string(line_no));
    }
    records.push_back(std::move(record));
  }
  return records;
}

void to_json(Json& j, const ImageRecord& v) {
  j = Json{{"id", v.id}, {"source", v.source}, {"dataset_tag", v.dataset_tag}};
}

void from_json(const Json& j, ImageRecord& v) {
  v.id = RequireAs<std::string>(j, "id");
  v.source = RequireAs<std::string>(j, "source");
  v.dataset_tag = Optional<std::string>(j, "dataset_tag").value_or("");
}

void to_json(Json& j, const SamplingParams& v) {
  j = Json{{"temperature", v.temperature}, {"max_tokens", v.max_tokens}};
  PutOptional(j, "top_p", v.top_p);
  PutOptional(j, "top_k", v.top_k);
  PutOptional(j, "seed", v.seed);
  PutOptional(j, "repetition_penalty", v.repetition_penalty);
  PutOptional(j, "presence_penalty", v.presence_penalty);
}

void from_json(const Json& j, SamplingParams& v) {
  v.temperature = RequireAs<double>(j, "temperature");
  v.max_tokens = RequireAs<int>(j, "max_tokens");
  v.top_p = Optional<double>(j, "top_p");
  v.top_k = Optional<int>(j, "top_k");
  v.seed = Optional<int64_t>(j, "seed");
  v.repetition_penalty = Optional<double>(j, "repetition_penalty");
  v.presence_penalty = Optional<double>(j, "presence_penalty");
  v.Validate();
}

void to_json(Json& j, const SceneDescription& v) {
  j = Json{{"image_id", v.image_id}, {"text", v.text}, {"model_id", v.model_id}};
}

void from_json(const Json& j, SceneDescription& v) {
  v.image_id = RequireAs<std::string>(j, "image_id");
  v.text = RequireAs<std::string>(j, "text");
  v.model_id = Optional<std::string>(j, "model_id").value_or("");
}

void to_json(Json& j, const SceneJudgment& v) {
  j = Json{{"plausibility", ToString(v.plausibility)},
           {"incongruity_for_humor", v.incongruity_for_humor},
           {"has_living_entity", v.has_living_entity},
           {"reasons", v.reasons}};
}

void from_json(const Json& j, SceneJudgment& v) {
  v.plausibility = ParsePlausibility(RequireAs<std::string>(j, "plausibility"));
  v.incongruity_for_humor = RequireAs<bool>(j, "incongruity_for_humor");
  v.has_living_entity = RequireAs<bool>(j, "has_living_entity");
  v.reasons = RequireAs<std::vector<std::string>>(j, "reasons");
}

void to_json(Json& j, const SafetyVerdict& v) {
  Json categories = Json::array();
  for (auto c : v.violation_categories) categories.push_back(ToString(c));
  j = Json{{"compliant", v.compliant},
           {"violation_categories", categories},
           {"explanation", v.explanation}};
}

void from_json(const Json& j, SafetyVerdict& v) {
  v.compliant = RequireAs<bool>(j, "compliant");
  v.violation_categories.clear();
  for (const auto& c : RequireAs<std::vector<std::string>>(j, "violation_categories")) {
    v.violation_categories.push_back(ParseViolationCategory(c));
  }
  v.explanation = Optional<std::string>(j, "explanation").value_or("");
  v.Validate();
}

void to_json(Json& j, const HumorVerdict& v) {
  j = Json{{"accepted", v.accepted},
           {"judge_id", v.judge_id},
           {"threshold_used", v.threshold_used}};
  PutOptional(j, "score", v.score);
  PutOptional(j, "label", v.label);
}

void from_json(const Json& j, HumorVerdict& v) {
  v.accepted = RequireAs<bool>(j, "accepted");
  v.judge_id = Optional<std::string>(j, "judge_id").value_or("");
  v.threshold_used = RequireAs<double>(j, "threshold_used");
  v.score = Optional<double>(j, "score");
  v.label = Optional<int>(j, "label");
  if (v.score && !(*v.score >= 0.0 && *v.score <= 1.0)) {
    throw Error(ErrorCode::kSchema, "humor score outside [0, 1]");
  }
  if (v.label && *v.label != 0 && *v.label != 1) {
    throw Error(ErrorCode::kEnum, "humor label must be 0 or 1");
  }
}

void to_json(Json& j, const StageEvent& v) {
  j = Json{{"stage", v.stage},
           {"timestamp", v.timestamp},
           {"attempt", v.attempt},
           {"input_digest", v.input_digest},
           {"output_digest", v.output_digest},
           {"model_id", v.model_id}};
  if (!v.warnings.empty()) j["warnings"] = v.warnings;
}

void from_json(const Json& j, StageEvent& v) {
  v.stage = RequireAs<std::string>(j, "stage");
  v.timestamp = RequireAs<int64_t>(j, "timestamp");
  v.attempt = RequireAs<int>(j, "attempt");
  v.input_digest = Optional<std::string>(j, "input_digest").value_or("");
  v.output_digest = Optional<std::string>(j, "output_digest").value_or("");
  v.model_id = Optional<std::string>(j, "model_id").value_or("");
  v.warnings =
      Optional<std::vector<std::string>>(j, "warnings").value_or(
          std::vector<std::string>{});
}

void to_json(Json& j, const CaptionCandidate& v) {
  j = Json{{"image_id", v.image_id},
           {"caption", v.caption},
           {"strategy", ToString(v.strategy)},
           {"attempt", v.attempt},
           {"safety", v.safety},
           {"accepted", v.accepted},
           {"trace", v.trace}};
  if (v.humor) j["humor"] = *v.humor;
}

void from_json(const Json& j, CaptionCandidate& v) {
  v.image_id = RequireAs<std::string>(j, "image_id");
  v.caption = RequireAs<std::string>(j, "caption");
  v.strategy = ParseStrategy(RequireAs<std::string>(j, "strategy"));
  v.attempt = RequireAs<int>(j, "attempt");
  v.safety = Require(j, "safety").get<SafetyVerdict>();
  v.accepted = RequireAs<bool>(j, "accepted");
  v.trace = Optional<std::vector<StageEvent>>(j, "trace").value_or(
      std::vector<StageEvent>{});
  v.humor = Optional<HumorVerdict>(j, "humor");
}

}  // namespace humorchain

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

#include <cmath>

#include "humorchain/errors.h"
#include "humorchain/llm.h"

namespace humorchain {

namespace {

// Index one past the brace closing the object opened at `start`, or npos if
// the text ends first. Braces inside string literals do not count.
size_t MatchObject(std::string_view text, size_t start) {
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (size_t i = start; i < text.size(); ++i) {
    char c = text[i];
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}') {
      if (--depth == 0) return i + 1;
    }
  }
  return std::string_view::npos;
}

Json ExtractFrom(std::string_view text, const char* what) {
  try {
    return ExtractJsonObject(text);
  } catch (Error& e) {
    throw Error(ErrorCode::kExtraction,
                std::string(what) + ": " + e.what());
  }
}

const Json& Field(const Json& j, const char* key, std::vector<std::string>* missing) {
  static const Json kNull;
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) {
    missing->push_back(key);
    return kNull;
  }
  return *it;
}

void ThrowMissing(const std::vector<std::string>& missing, const char* what) {
  if (missing.empty()) return;
  std::string list;
  for (const auto& m : missing) list += (list.empty() ? "" : ", ") + m;
  throw Error(ErrorCode::kSchema,
              std::string(what) + " is missing fields: " + list);
}

bool AsBool(const Json& v, const char* key) {
  if (v.is_boolean()) return v.get<bool>();
  if (v.is_string()) {
    if (v == "true") return true;
    if (v == "false") return false;
  }
  throw Error(ErrorCode::kEnum, std::string("field '") + key +
                                    "' must be true or false, got " + v.dump());
}

}  // namespace

Json ExtractJsonObject(std::string_view text) {
  for (size_t start = text.find('{'); start != std::string_view::npos;
       start = text.find('{', start + 1)) {
    size_t end = MatchObject(text, start);
    if (end == std::string_view::npos) continue;
    Json parsed = Json::parse(text.substr(start, end - start), nullptr,
                              /*allow_exceptions=*/false);
    if (!parsed.is_discarded() && parsed.is_object()) return parsed;
  }
  throw Error(ErrorCode::kExtraction,
              "no JSON object found in model text: " + std::string(text));
}

SceneJudgment ParseSceneJudgment(std::string_view text) {
  Json j = ExtractFrom(text, "scene judgment");
  std::vector<std::string> missing;
  const Json& plausibility = Field(j, "plausibility", &missing);
  const Json& incongruity = Field(j, "incongruity_for_humor", &missing);
  const Json* living = nullptr;
  if (j.contains("has_human_or_animal_or_cartoon")) {
    living = &j["has_human_or_animal_or_cartoon"];
  } else if (j.contains("has_living_entity")) {
    living = &j["has_living_entity"];
  } else {
    missing.push_back("has_human_or_animal_or_cartoon");
  }
  const Json& reasons = Field(j, "reasons", &missing);
  ThrowMissing(missing, "scene judgment");

  SceneJudgment judgment;
  if (!plausibility.is_string()) {
    throw Error(ErrorCode::kEnum, "invalid plausibility literal " +
                                      plausibility.dump());
  }
  judgment.plausibility = ParsePlausibility(plausibility.get<std::string>());
  judgment.incongruity_for_humor = AsBool(incongruity, "incongruity_for_humor");
  judgment.has_living_entity = AsBool(*living, "has_human_or_animal_or_cartoon");
  if (!reasons.is_array()) {
    throw Error(ErrorCode::kSchema, "reasons must be a list of strings");
  }
  for (const Json& r : reasons) {
    if (!r.is_string()) {
      throw Error(ErrorCode::kSchema, "reasons must be a list of strings");
    }
    judgment.reasons.push_back(r.get<std::string>());
  }
  return judgment;
}

SafetyVerdict ParseSafetyVerdict(std::string_view text) {
  Json j = ExtractFrom(text, "safety verdict");
  std::vector<std::string> missing;
  const Json& compliant = Field(j, "compliant", &missing);
  const Json& categories = Field(j, "violation_categories", &missing);
  ThrowMissing(missing, "safety verdict");

  SafetyVerdict verdict;
  verdict.compliant = AsBool(compliant, "compliant");
  if (!categories.is_array()) {
    throw Error(ErrorCode::kSchema, "violation_categories must be a list");
  }
  for (const Json& c : categories) {
    if (!c.is_string()) {
      throw Error(ErrorCode::kEnum,
                  "invalid violation category literal " + c.dump());
    }
    verdict.violation_categories.push_back(
        ParseViolationCategory(c.get<std::string>()));
  }
  verdict.explanation = j.value("explanation", std::string());
  verdict.Validate();
  return verdict;
}

int ParseHumorBinary(std::string_view text) {
  Json j = ExtractFrom(text, "humor judgment");
  std::vector<std::string> missing;
  const Json& v = Field(j, "humorous", &missing);
  ThrowMissing(missing, "humor judgment");
  if (v.is_number()) {
    double d = v.get<double>();
    if (d == 0.0) return 0;
    if (d == 1.0) return 1;
  }
  throw Error(ErrorCode::kEnum,
              "invalid humorous literal " + v.dump() + " (expected 0 or 1)");
}

double ParseHumorScore(std::string_view text) {
  double score;
  Json bare = Json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (!bare.is_discarded() && bare.is_number()) {
    score = bare.get<double>();
  } else {
    Json j = ExtractFrom(text, "humor score");
    const Json* v = nullptr;
    for (const char* key : {"score", "probability", "humor_probability"}) {
      if (j.contains(key) && j[key].is_number()) {
        v = &j[key];
        break;
      }
    }
    if (v == nullptr) {
      throw Error(ErrorCode::kSchema, "humor score is missing fields: score");
    }
    score = v->get<double>();
  }
  if (!(score >= 0.0 && score <= 1.0)) {
    throw Error(ErrorCode::kSchema,
                "humor score " + std::to_string(score) + " outside [0, 1]");
  }
  return score;
}

}  // namespace humorchain

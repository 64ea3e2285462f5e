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

#include "humorchain/judge.h"

#include <cmath>

#include "humorchain/errors.h"

namespace humorchain {

ClassifierMetrics ComputeClassifierMetrics(const ConfusionMatrix& cm) {
  if (cm.tp < 0 || cm.tn < 0 || cm.fp < 0 || cm.fn < 0) {
    throw Error(ErrorCode::kInvalidArgument, "negative confusion count");
  }
  const double total = static_cast<double>(cm.total());
  if (total == 0) {
    throw Error(ErrorCode::kUndefined, "empty confusion matrix");
  }
  ClassifierMetrics m;
  m.accuracy = static_cast<double>(cm.tp + cm.tn) / total;
  m.positive_rate = static_cast<double>(cm.tp + cm.fp) / total;
  if (cm.tp + cm.fp > 0) {
    m.precision = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fp);
  }
  if (cm.tp + cm.fn > 0) {
    m.recall = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fn);
  }
  if (m.precision && m.recall && *m.precision + *m.recall > 0) {
    m.f1 = 2 * *m.precision * *m.recall / (*m.precision + *m.recall);
  }
  return m;
}

ConfusionMatrix Tally(std::span<const int> predicted,
                      std::span<const int> truth) {
  if (predicted.size() != truth.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "prediction and label counts differ");
  }
  ConfusionMatrix cm;
  for (size_t i = 0; i < predicted.size(); ++i) {
    if ((predicted[i] != 0 && predicted[i] != 1) ||
        (truth[i] != 0 && truth[i] != 1)) {
      throw Error(ErrorCode::kInvalidArgument,
                  "labels must be 0 or 1 (row " + std::to_string(i) + ")");
    }
    const bool p = predicted[i] == 1;
    const bool t = truth[i] == 1;
    if (p && t) ++cm.tp;
    else if (p) ++cm.fp;
    else if (t) ++cm.fn;
    else ++cm.tn;
  }
  return cm;
}

bool Gate(double score, double threshold) {
  if (!(score >= 0.0 && score <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "humor score " + std::to_string(score) + " outside [0, 1]");
  }
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "threshold " + std::to_string(threshold) + " outside [0, 1]");
  }
  return score >= threshold;
}

int QuorumLabel(std::span<const int> votes, int quorum) {
  int positive = 0;
  for (int v : votes) positive += v == 1 ? 1 : 0;
  return positive >= quorum ? 1 : 0;
}

double ExpectedGenerations(double acceptance_rate) {
  if (!(acceptance_rate > 0.0 && acceptance_rate <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument,
                "acceptance rate must be in (0, 1]");
  }
  return 1.0 / acceptance_rate;
}

SamplingParams DefaultDiscriminatorParams() {
  SamplingParams p;
  p.temperature = 0.7;
  p.top_p = 0.8;
  p.top_k = 20;
  p.seed = 3407;
  p.repetition_penalty = 1.0;
  p.presence_penalty = 1.5;
  p.max_tokens = 32768;
  return p;
}

namespace {

CompletionRequest JudgeRequest(const Gateway& gateway,
                               const std::string& system_prompt,
                               const SamplingParams& params,
                               const ImageRecord& image,
                               const std::string& caption, int attempt) {
  if (caption.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "cannot judge an empty caption");
  }
  CompletionRequest req;
  req.model = gateway.model();
  req.params = params;
  req.key = {"humor", image.id, attempt};
  req.turns.push_back(ChatTurn::System(system_prompt));
  req.turns.push_back(ChatTurn::UserWithImage(image.source, "Title: " + caption));
  return req;
}

}  // namespace

BinaryLlmJudge::BinaryLlmJudge(std::shared_ptr<Gateway> gateway,
                               std::string system_prompt, SamplingParams params)
    : gateway_(std::move(gateway)),
      system_prompt_(std::move(system_prompt)),
      params_(params) {}

int BinaryLlmJudge::JudgeBinary(const ImageRecord& image,
                                const std::string& caption, int attempt) {
  return ParseHumorBinary(gateway_->Complete(
      JudgeRequest(*gateway_, system_prompt_, params_, image, caption, attempt)));
}

HumorVerdict BinaryLlmJudge::Judge(const ImageRecord& image,
                                   const std::string& caption, int attempt) {
  HumorVerdict v;
  v.label = JudgeBinary(image, caption, attempt);
  v.accepted = *v.label == 1;
  v.judge_id = id();
  v.threshold_used = 1.0;
  return v;
}

std::string BinaryLlmJudge::id() const {
  return "binary_llm:" + gateway_->model();
}

ScoredJudge::ScoredJudge(std::shared_ptr<Gateway> gateway,
                         std::string system_prompt, double threshold,
                         SamplingParams params)
    : gateway_(std::move(gateway)),
      system_prompt_(std::move(system_prompt)),
      threshold_(threshold),
      params_(params) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw Error(ErrorCode::kConfig, "judge threshold must be in [0, 1]");
  }
}

double ScoredJudge::Score(const ImageRecord& image, const std::string& caption,
                          int attempt) {
  return ParseHumorScore(gateway_->Complete(
      JudgeRequest(*gateway_, system_prompt_, params_, image, caption, attempt)));
}

HumorVerdict ScoredJudge::Judge(const ImageRecord& image,
                                const std::string& caption, int attempt) {
  HumorVerdict v;
  v.score = Score(image, caption, attempt);
  v.accepted = Gate(*v.score, threshold_);
  v.judge_id = id();
  v.threshold_used = threshold_;
  return v;
}

std::string ScoredJudge::id() const { return "scored:" + gateway_->model(); }

void JudgeProfile::Validate() const {
  if (kind != "binary_llm" && kind != "scored") {
    throw Error(ErrorCode::kConfig,
                "judge kind must be 'binary_llm' or 'scored'");
  }
  if (kind == "scored" && !threshold) {
    throw Error(ErrorCode::kConfig, "scored judge needs a threshold");
  }
  if (kind == "binary_llm" && threshold) {
    throw Error(ErrorCode::kConfig, "binary_llm judge takes no threshold");
  }
  if (threshold && !(*threshold >= 0.0 && *threshold <= 1.0)) {
    throw Error(ErrorCode::kConfig, "judge threshold must be in [0, 1]");
  }
}

void from_json(const Json& j, JudgeProfile& v) {
  v.kind = j.value("kind", std::string("binary_llm"));
  if (j.contains("backend")) v.backend = j.at("backend").get<BackendProfile>();
  if (j.contains("threshold") && !j.at("threshold").is_null()) {
    v.threshold = j.at("threshold").get<double>();
  } else {
    v.threshold.reset();
  }
  v.Validate();
}

void to_json(Json& j, const JudgeProfile& v) {
  j = Json{{"kind", v.kind}, {"backend", v.backend}};
  if (v.threshold) j["threshold"] = *v.threshold;
}

std::unique_ptr<HumorJudge> MakeJudge(const JudgeProfile& profile,
                                      std::shared_ptr<Gateway> gateway,
                                      std::string system_prompt) {
  profile.Validate();
  if (profile.kind == "scored") {
    return std::make_unique<ScoredJudge>(std::move(gateway),
                                         std::move(system_prompt),
                                         *profile.threshold);
  }
  return std::make_unique<BinaryLlmJudge>(std::move(gateway),
                                          std::move(system_prompt));
}

std::vector<ValidationRow> LoadValidationSet(const std::string& path) {
  std::vector<ValidationRow> rows;
  int line = 0;
  for (const Json& j : ReadJsonLines(path)) {
    ++line;
    try {
      ValidationRow row;
      row.image_id = j.at("image_id").get<std::string>();
      row.image_source = j.value("image", row.image_id);
      row.caption = j.at("caption").get<std::string>();
      row.human_label = j.at("human_label").get<int>();
      if (row.human_label != 0 && row.human_label != 1) {
        throw Error(ErrorCode::kEnum, "human_label must be 0 or 1");
      }
      if (j.contains("predicted")) row.predicted = j.at("predicted").get<int>();
      rows.push_back(std::move(row));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kSchema, path + ":" + std::to_string(line) + ": " +
                                          e.what());
    }
  }
  return rows;
}

namespace {

Json OrUndefined(const std::optional<double>& v) {
  return v ? Json(*v) : Json("undefined");
}

}  // namespace

Json DiscriminatorReport(const ConfusionMatrix& cm) {
  ClassifierMetrics m = ComputeClassifierMetrics(cm);
  Json report = {
      {"confusion_matrix",
       {{"tp", cm.tp}, {"tn", cm.tn}, {"fp", cm.fp}, {"fn", cm.fn}}},
      {"total", cm.total()},
      {"accuracy", m.accuracy},
      {"precision", OrUndefined(m.precision)},
      {"recall", OrUndefined(m.recall)},
      {"f1", OrUndefined(m.f1)},
      {"positive_rate", m.positive_rate},
  };
  // The acceptance rate of the gate is its positive-prediction rate.
  if (m.positive_rate > 0) {
    report["expected_generations_per_accepted"] =
        ExpectedGenerations(m.positive_rate);
  } else {
    report["expected_generations_per_accepted"] = "undefined";
  }
  // Share of accepted outputs that humans also call humorous.
  report["humorous_share_after_gate"] = OrUndefined(m.precision);
  report["humorous_share_before_gate"] =
      static_cast<double>(cm.tp + cm.fn) / static_cast<double>(cm.total());
  return report;
}

}  // namespace humorchain

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

#ifndef HUMORCHAIN_JUDGE_H_
#define HUMORCHAIN_JUDGE_H_

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "humorchain/llm.h"
#include "humorchain/types.h"

namespace humorchain {

inline constexpr double kDefaultHumorThreshold = 0.66;

// Positive class is "humorous".
struct ConfusionMatrix {
  int64_t tp = 0;
  int64_t tn = 0;
  int64_t fp = 0;
  int64_t fn = 0;

  int64_t total() const { return tp + tn + fp + fn; }
  bool operator==(const ConfusionMatrix&) const = default;
};

// Undefined ratios (zero denominators) are empty optionals, never 0.
struct ClassifierMetrics {
  double accuracy = 0;
  std::optional<double> precision;
  std::optional<double> recall;
  std::optional<double> f1;
  double positive_rate = 0;
};

// Throws Error(kUndefined) for an empty matrix.
ClassifierMetrics ComputeClassifierMetrics(const ConfusionMatrix& cm);

// Tallies binary predictions against binary ground truth.
ConfusionMatrix Tally(std::span<const int> predicted, std::span<const int> truth);

// score >= threshold. Throws Error(kInvalidArgument) outside [0, 1].
bool Gate(double score, double threshold);

// 1 iff at least `quorum` votes are 1.
int QuorumLabel(std::span<const int> votes, int quorum = 2);

// Expected generations per accepted caption for an independent per-attempt
// acceptance probability (mean of a geometric distribution).
double ExpectedGenerations(double acceptance_rate);

// Discriminator sampling parameters: top_p 0.8, top_k 20, temperature 0.7,
// seed 3407, repetition_penalty 1.0, presence_penalty 1.5.
SamplingParams DefaultDiscriminatorParams();

class HumorJudge {
 public:
  virtual ~HumorJudge() = default;
  virtual HumorVerdict Judge(const ImageRecord& image,
                             const std::string& caption, int attempt) = 0;
  virtual std::string id() const = 0;
};

// Binary LLM-as-judge using the GTVH discriminator prompt; accepts label 1.
class BinaryLlmJudge : public HumorJudge {
 public:
  BinaryLlmJudge(std::shared_ptr<Gateway> gateway, std::string system_prompt,
                 SamplingParams params = DefaultDiscriminatorParams());

  // Raw 0/1 judgment. Throws on extraction or enum errors.
  int JudgeBinary(const ImageRecord& image, const std::string& caption,
                  int attempt = 0);

  HumorVerdict Judge(const ImageRecord& image, const std::string& caption,
                     int attempt) override;
  std::string id() const override;

 private:
  std::shared_ptr<Gateway> gateway_;
  std::string system_prompt_;
  SamplingParams params_;
};

// Any provider returning a humor probability, gated at `threshold`.
class ScoredJudge : public HumorJudge {
 public:
  ScoredJudge(std::shared_ptr<Gateway> gateway, std::string system_prompt,
              double threshold = kDefaultHumorThreshold,
              SamplingParams params = DefaultDiscriminatorParams());

  double Score(const ImageRecord& image, const std::string& caption,
               int attempt = 0);

  HumorVerdict Judge(const ImageRecord& image, const std::string& caption,
                     int attempt) override;
  std::string id() const override;
  double threshold() const { return threshold_; }

 private:
  std::shared_ptr<Gateway> gateway_;
  std::string system_prompt_;
  double threshold_;
  SamplingParams params_;
};

struct JudgeProfile {
  std::string kind = "binary_llm";  // "binary_llm" or "scored"
  BackendProfile backend;
  std::optional<double> threshold;  // present iff kind == "scored"

  void Validate() const;
};

void from_json(const Json& j, JudgeProfile& v);
void to_json(Json& j, const JudgeProfile& v);

std::unique_ptr<HumorJudge> MakeJudge(const JudgeProfile& profile,
                                      std::shared_ptr<Gateway> gateway,
                                      std::string system_prompt);

// Validation-set row: {image_id, caption, human_label}. Optional
// "image" (source for the judge) and "predicted" (a recorded prediction,
// used when no live judge is given).
struct ValidationRow {
  std::string image_id;
  std::string image_source;
  std::string caption;
  int human_label = 0;
  std::optional<int> predicted;
};

std::vector<ValidationRow> LoadValidationSet(const std::string& path);

// Confusion matrix, all metrics, and the expected-generations cost line.
// Reports the humorous share before the gate (base rate of the validation
// labels) and after it (precision) as separate fields.
Json DiscriminatorReport(const ConfusionMatrix& cm);

}  // namespace humorchain

#endif  // HUMORCHAIN_JUDGE_H_

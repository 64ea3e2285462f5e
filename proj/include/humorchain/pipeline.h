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

#ifndef HUMORCHAIN_PIPELINE_H_
#define HUMORCHAIN_PIPELINE_H_

#include <array>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "humorchain/judge.h"
#include "humorchain/llm.h"
#include "humorchain/types.h"
#include "humorchain/util.h"

namespace humorchain {

// Stage names used in traces and as mock-script keys.
namespace stage {
inline constexpr char kDescribe[] = "describe";
inline constexpr char kJudge[] = "judge";
inline constexpr char kRoute[] = "route";
inline constexpr char kGenerate[] = "generate";
inline constexpr char kSafety[] = "safety";
inline constexpr char kHumorGate[] = "humor_gate";
}  // namespace stage

// Prompt texts loaded verbatim from <dir>/<name>.txt. Names: describe, judge,
// absurdity, contrast_irony, emotion_analogy, object_analogy, safety,
// discriminator.
class PromptLibrary {
 public:
  // Throws Error(kConfig) naming the first missing asset.
  static PromptLibrary Load(const std::string& dir);
  static const std::vector<std::string>& RequiredNames();

  void Set(std::string name, std::string text);
  const std::string& Get(const std::string& name) const;

 private:
  std::map<std::string, std::string> texts_;
};

// Maps each of the 4 x 2 x 2 judgment combinations to a strategy. The
// default table is
//   no living entity                          -> object_analogy
//   rare/implausible with incongruity         -> absurdity
//   no incongruity                            -> emotion_analogy
//   otherwise                                 -> contrast_irony
class RoutingTable {
 public:
  static RoutingTable Default();

  StrategyKind Route(const SceneJudgment& judgment) const;
  void Set(PlausibilityLevel plausibility, bool incongruity, bool living,
           StrategyKind strategy);

 private:
  std::array<StrategyKind, 16> table_{};
};

StrategyKind RouteStrategy(const SceneJudgment& judgment);

// Decision-table order (object_analogy, absurdity, emotion_analogy,
// contrast_irony) rotated to start at `initial`.
std::vector<StrategyKind> DefaultFallbackOrder(StrategyKind initial);

struct PipelineConfig {
  SamplingParams describe;
  SamplingParams judge;
  std::map<StrategyKind, SamplingParams> strategy;
  SamplingParams safety;
  double threshold = kDefaultHumorThreshold;
  int max_attempts = 5;
  int safety_rewrite_limit = 2;
  // Strategy used at attempt k is order[(k - 1) % order.size()]; each order
  // starts with its initial route.
  std::map<StrategyKind, std::vector<StrategyKind>> fallback_order;
  RoutingTable routing = RoutingTable::Default();
  std::string clock = "wall";  // "logical" for reproducible traces

  // Generation parameters of the reference setup.
  static PipelineConfig Defaults();

  void Validate() const;
  const std::vector<StrategyKind>& FallbackFor(StrategyKind initial) const;
};

void to_json(Json& j, const PipelineConfig& v);
// Missing fields keep their defaults.
void from_json(const Json& j, PipelineConfig& v);

struct PipelineResult {
  enum class Status { kAccepted, kExhausted, kAborted };

  std::string image_id;
  Status status = Status::kAborted;
  std::optional<CaptionCandidate> final;          // kAccepted
  std::optional<CaptionCandidate> best_rejected;  // kExhausted
  std::vector<CaptionCandidate> attempts;
  std::optional<SceneDescription> description;
  std::optional<SceneJudgment> judgment;
  std::vector<StageEvent> trace;  // whole chain, in order
  std::string error;              // kAborted

  int generations() const;
};

std::string_view ToString(PipelineResult::Status status);
void to_json(Json& j, const PipelineResult& v);

class HumorChain {
 public:
  HumorChain(std::shared_ptr<Gateway> llm, std::shared_ptr<HumorJudge> judge,
             PromptLibrary prompts, PipelineConfig config);

  // Collects stage events for one chain.
  class Trace {
   public:
    explicit Trace(std::unique_ptr<Clock> clock) : clock_(std::move(clock)) {}
    const StageEvent& Record(std::string stage, int attempt,
                             std::string_view input, std::string_view output,
                             std::string model_id,
                             std::vector<std::string> warnings = {});
    const std::vector<StageEvent>& events() const { return events_; }

   private:
    std::unique_ptr<Clock> clock_;
    std::vector<StageEvent> events_;
  };

  SceneDescription DescribeImage(const ImageRecord& image, Trace& trace);
  SceneJudgment JudgeScene(const SceneDescription& description, Trace& trace);
  // `feedback` holds extra turns from earlier safety rejections. Returns the
  // caption; an over-long caption is kept and flagged in the trace.
  std::string GenerateCaption(StrategyKind strategy,
                              const SceneDescription& description,
                              const SceneJudgment& judgment, int attempt,
                              const std::vector<ChatTurn>& feedback,
                              Trace& trace);
  SafetyVerdict CheckSafety(const std::string& caption,
                            const SceneDescription& description, int attempt,
                            Trace& trace);

  // Full generate-evaluate-revise loop for one image. Gateway failures end
  // the chain with status kAborted and the partial trace kept.
  PipelineResult Run(const ImageRecord& image);

  // Runs chains concurrently; results come back in input order.
  std::vector<PipelineResult> RunBatch(const std::vector<ImageRecord>& images,
                                       int parallelism);

  const PipelineConfig& config() const { return config_; }

 private:
  std::string Complete(CompletionRequest request, const char* stage_name);

  std::shared_ptr<Gateway> llm_;
  std::shared_ptr<HumorJudge> judge_;
  PromptLibrary prompts_;
  PipelineConfig config_;
};

// User-turn renderings of stage inputs (few-shot "user.stepN" layout).
std::string RenderJudgeInput(const SceneDescription& description);
std::string RenderGenerationInput(const SceneDescription& description,
                                  const SceneJudgment& judgment);

// First non-empty line, trimmed, with one pair of wrapping quotes removed.
std::string CleanCaption(std::string_view raw);

}  // namespace humorchain

#endif  // HUMORCHAIN_PIPELINE_H_

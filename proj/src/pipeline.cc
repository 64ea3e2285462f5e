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

#include "humorchain/pipeline.h"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <set>
#include <thread>

#include "humorchain/errors.h"

namespace humorchain {

// ---------------------------------------------------------------------------
// Prompts

const std::vector<std::string>& PromptLibrary::RequiredNames() {
  static const std::vector<std::string> kNames = {
      "describe",        "judge",          "absurdity", "contrast_irony",
      "emotion_analogy", "object_analogy", "safety",    "discriminator"};
  return kNames;
}

PromptLibrary PromptLibrary::Load(const std::string& dir) {
  PromptLibrary lib;
  for (const std::string& name : RequiredNames()) {
    std::filesystem::path path = std::filesystem::path(dir) / (name + ".txt");
    if (!std::filesystem::is_regular_file(path)) {
      throw Error(ErrorCode::kConfig,
                  "missing prompt asset " + path.string());
    }
    lib.Set(name, ReadFile(path.string()));
  }
  return lib;
}

void PromptLibrary::Set(std::string name, std::string text) {
  texts_[std::move(name)] = std::move(text);
}

const std::string& PromptLibrary::Get(const std::string& name) const {
  auto it = texts_.find(name);
  if (it == texts_.end()) {
    throw Error(ErrorCode::kConfig, "no prompt named '" + name + "'");
  }
  return it->second;
}

// ---------------------------------------------------------------------------
// Routing

namespace {

size_t RouteIndex(PlausibilityLevel p, bool incongruity, bool living) {
  return static_cast<size_t>(p) * 4 + (incongruity ? 2 : 0) + (living ? 1 : 0);
}

}  // namespace

RoutingTable RoutingTable::Default() {
  RoutingTable t;
  for (auto p : {PlausibilityLevel::kCommon, PlausibilityLevel::kPlausible,
                 PlausibilityLevel::kRare, PlausibilityLevel::kImplausible}) {
    for (bool incongruity : {false, true}) {
      for (bool living : {false, true}) {
        StrategyKind s;
        const bool unusual = p == PlausibilityLevel::kRare ||
                             p == PlausibilityLevel::kImplausible;
        if (!living) {
          s = StrategyKind::kObjectAnalogy;
        } else if (unusual && incongruity) {
          s = StrategyKind::kAbsurdity;
        } else if (!incongruity) {
          s = StrategyKind::kEmotionAnalogy;
        } else {
          s = StrategyKind::kContrastIrony;
        }
        t.Set(p, incongruity, living, s);
      }
    }
  }
  return t;
}

StrategyKind RoutingTable::Route(const SceneJudgment& j) const {
  return table_[RouteIndex(j.plausibility, j.incongruity_for_humor,
                           j.has_living_entity)];
}

void RoutingTable::Set(PlausibilityLevel plausibility, bool incongruity,
                       bool living, StrategyKind strategy) {
  table_[RouteIndex(plausibility, incongruity, living)] = strategy;
}

StrategyKind RouteStrategy(const SceneJudgment& judgment) {
  static const RoutingTable kTable = RoutingTable::Default();
  return kTable.Route(judgment);
}

std::vector<StrategyKind> DefaultFallbackOrder(StrategyKind initial) {
  std::vector<StrategyKind> order = {
      StrategyKind::kObjectAnalogy, StrategyKind::kAbsurdity,
      StrategyKind::kEmotionAnalogy, StrategyKind::kContrastIrony};
  auto it = std::find(order.begin(), order.end(), initial);
  std::rotate(order.begin(), it, order.end());
  return order;
}

// ---------------------------------------------------------------------------
// Config

namespace {

SamplingParams Params(double temperature, int max_tokens = 4000) {
  SamplingParams p;
  p.temperature = temperature;
  p.max_tokens = max_tokens;
  return p;
}

}  // namespace

PipelineConfig PipelineConfig::Defaults() {
  PipelineConfig c;
  c.describe = Params(0.2);
  c.judge = Params(0.1);
  c.strategy[StrategyKind::kObjectAnalogy] = Params(0.9);
  c.strategy[StrategyKind::kAbsurdity] = Params(0.8);
  c.strategy[StrategyKind::kContrastIrony] = Params(0.9);
  c.strategy[StrategyKind::kEmotionAnalogy] = Params(0.85);
  c.safety = Params(0.1);
  for (StrategyKind s : kAllStrategies) {
    c.fallback_order[s] = DefaultFallbackOrder(s);
  }
  return c;
}

void PipelineConfig::Validate() const {
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw Error(ErrorCode::kConfig, "threshold must be in [0, 1]");
  }
  if (max_attempts < 1) {
    throw Error(ErrorCode::kConfig, "max_attempts must be >= 1");
  }
  if (safety_rewrite_limit < 0) {
    throw Error(ErrorCode::kConfig, "safety_rewrite_limit must be >= 0");
  }
  describe.Validate();
  judge.Validate();
  safety.Validate();
  for (StrategyKind s : kAllStrategies) {
    auto it = strategy.find(s);
    if (it == strategy.end()) {
      throw Error(ErrorCode::kConfig, "no sampling parameters for strategy " +
                                          std::string(ToString(s)));
    }
    it->second.Validate();
    auto order = fallback_order.find(s);
    if (order == fallback_order.end() || order->second.empty()) {
      throw Error(ErrorCode::kConfig,
                  "no fallback order for " + std::string(ToString(s)));
    }
    if (order->second.front() != s) {
      throw Error(ErrorCode::kConfig, "fallback order for " +
                                          std::string(ToString(s)) +
                                          " must start with it");
    }
    std::set<StrategyKind> unique(order->second.begin(), order->second.end());
    if (unique.size() != order->second.size()) {
      throw Error(ErrorCode::kConfig, "fallback order for " +
                                          std::string(ToString(s)) +
                                          " repeats a strategy");
    }
  }
  MakeClock(clock);
}

const std::vector<StrategyKind>& PipelineConfig::FallbackFor(
    StrategyKind initial) const {
  return fallback_order.at(initial);
}

void to_json(Json& j, const PipelineConfig& v) {
  Json strategies = Json::object();
  for (const auto& [s, p] : v.strategy) strategies[std::string(ToString(s))] = p;
  Json orders = Json::object();
  for (const auto& [s, order] : v.fallback_order) {
    Json list = Json::array();
    for (StrategyKind o : order) list.push_back(ToString(o));
    orders[std::string(ToString(s))] = list;
  }
  Json routing = Json::array();
  for (auto p : {PlausibilityLevel::kCommon, PlausibilityLevel::kPlausible,
                 PlausibilityLevel::kRare, PlausibilityLevel::kImplausible}) {
    for (bool incongruity : {false, true}) {
      for (bool living : {false, true}) {
        SceneJudgment sj{p, incongruity, living, {}};
        routing.push_back({{"plausibility", ToString(p)},
                           {"incongruity_for_humor", incongruity},
                           {"has_living_entity", living},
                           {"strategy", ToString(v.routing.Route(sj))}});
      }
    }
  }
  j = Json{{"describe", v.describe},
           {"judge", v.judge},
           {"strategies", strategies},
           {"safety", v.safety},
           {"threshold", v.threshold},
           {"max_attempts", v.max_attempts},
           {"safety_rewrite_limit", v.safety_rewrite_limit},
           {"fallback_order", orders},
           {"routing", routing},
           {"clock", v.clock}};
}

void from_json(const Json& j, PipelineConfig& v) {
  v = PipelineConfig::Defaults();
  try {
    if (j.contains("describe")) v.describe = j.at("describe").get<SamplingParams>();
    if (j.contains("judge")) v.judge = j.at("judge").get<SamplingParams>();
    if (j.contains("safety")) v.safety = j.at("safety").get<SamplingParams>();
    if (j.contains("strategies")) {
      for (const auto& [name, p] : j.at("strategies").items()) {
        v.strategy[ParseStrategy(name)] = p.get<SamplingParams>();
      }
    }
    v.threshold = j.value("threshold", v.threshold);
    v.max_attempts = j.value("max_attempts", v.max_attempts);
    v.safety_rewrite_limit =
        j.value("safety_rewrite_limit", v.safety_rewrite_limit);
    if (j.contains("fallback_order")) {
      for (const auto& [name, list] : j.at("fallback_order").items()) {
        std::vector<StrategyKind> order;
        for (const Json& s : list) order.push_back(ParseStrategy(s.get<std::string>()));
        v.fallback_order[ParseStrategy(name)] = std::move(order);
      }
    }
    if (j.contains("routing")) {
      for (const Json& row : j.at("routing")) {
        v.routing.Set(
            ParsePlausibility(row.at("plausibility").get<std::string>()),
            row.at("incongruity_for_humor").get<bool>(),
            row.at("has_living_entity").get<bool>(),
            ParseStrategy(row.at("strategy").get<std::string>()));
      }
    }
    v.clock = j.value("clock", v.clock);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kConfig,
                std::string("bad pipeline config: ") + e.what());
  } catch (const Error& e) {
    throw Error(ErrorCode::kConfig,
                std::string("bad pipeline config: ") + e.what());
  }
  v.Validate();
}

// ---------------------------------------------------------------------------
// Results

int PipelineResult::generations() const {
  int n = 0;
  for (const StageEvent& e : trace) n += e.stage == stage::kGenerate ? 1 : 0;
  return n;
}

std::string_view ToString(PipelineResult::Status status) {
  switch (status) {
    case PipelineResult::Status::kAccepted: return "accepted";
    case PipelineResult::Status::kExhausted: return "exhausted";
    case PipelineResult::Status::kAborted: return "aborted";
  }
  return "aborted";
}

void to_json(Json& j, const PipelineResult& v) {
  j = Json{{"image_id", v.image_id},
           {"status", ToString(v.status)},
           {"final", v.final ? Json(*v.final) : Json(nullptr)},
           {"attempts", v.attempts}};
  if (v.best_rejected) j["best_rejected"] = *v.best_rejected;
  if (v.description) j["description"] = *v.description;
  if (v.judgment) j["judgment"] = *v.judgment;
  if (!v.error.empty()) j["error"] = v.error;
}

// ---------------------------------------------------------------------------
// Chain

const StageEvent& HumorChain::Trace::Record(std::string stage_name, int attempt,
                                            std::string_view input,
                                            std::string_view output,
                                            std::string model_id,
                                            std::vector<std::string> warnings) {
  StageEvent e;
  e.stage = std::move(stage_name);
  e.timestamp = clock_->NowMicros();
  if (!events_.empty() && e.timestamp < events_.back().timestamp) {
    e.timestamp = events_.back().timestamp;
  }
  e.attempt = attempt;
  e.input_digest = Sha256Hex(input);
  e.output_digest = Sha256Hex(output);
  e.model_id = std::move(model_id);
  e.warnings = std::move(warnings);
  events_.push_back(std::move(e));
  return events_.back();
}

HumorChain::HumorChain(std::shared_ptr<Gateway> llm,
                       std::shared_ptr<HumorJudge> judge, PromptLibrary prompts,
                       PipelineConfig config)
    : llm_(std::move(llm)),
      judge_(std::move(judge)),
      prompts_(std::move(prompts)),
      config_(std::move(config)) {
  config_.Validate();
}

std::string HumorChain::Complete(CompletionRequest request,
                                 const char* stage_name) {
  request.model = llm_->model();
  try {
    return llm_->Complete(request);
  } catch (Error& e) {
    e.set_stage(stage_name);
    throw;
  }
}

namespace {

std::string Trim(std::string_view s) {
  const char* ws = " \t\r\n\f\v";
  auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return "";
  auto e = s.find_last_not_of(ws);
  return std::string(s.substr(b, e - b + 1));
}

Error StageError(const char* stage_name, const std::string& message) {
  Error e(ErrorCode::kStage, std::string(stage_name) + ": " + message);
  e.set_stage(stage_name);
  return e;
}

std::string Quote(const std::string& s) { return Json(s).dump(); }

}  // namespace

std::string CleanCaption(std::string_view raw) {
  std::string text(raw);
  size_t pos = 0;
  std::string line;
  while (pos <= text.size()) {
    size_t nl = text.find('\n', pos);
    line = Trim(std::string_view(text).substr(
        pos, nl == std::string::npos ? std::string::npos : nl - pos));
    if (!line.empty() || nl == std::string::npos) break;
    pos = nl + 1;
  }
  if (line.size() >= 2 &&
      ((line.front() == '"' && line.back() == '"') ||
       (line.front() == '\'' && line.back() == '\''))) {
    line = Trim(line.substr(1, line.size() - 2));
  }
  return line;
}

std::string RenderJudgeInput(const SceneDescription& description) {
  return "Description: " + Quote(description.text) +
         "\n\nRespond with a single JSON object with the fields "
         "\"plausibility\", \"incongruity_for_humor\", "
         "\"has_human_or_animal_or_cartoon\" and \"reasons\".";
}

std::string RenderGenerationInput(const SceneDescription& description,
                                  const SceneJudgment& judgment) {
  std::string out = "user.step1: " + Quote(description.text) + "\n";
  out += "user.step2.plausibility: " +
         Quote(std::string(ToString(judgment.plausibility))) + "\n";
  out += "user.step2.incongruity_for_humor: ";
  out += judgment.incongruity_for_humor ? "true\n" : "false\n";
  out += "user.step2.has_human_or_animal_or_cartoon: ";
  out += judgment.has_living_entity ? "true\n" : "false\n";
  out += "user.step2.reasons:\n";
  for (const std::string& r : judgment.reasons) out += "  - " + Quote(r) + "\n";
  return out;
}

SceneDescription HumorChain::DescribeImage(const ImageRecord& image,
                                           Trace& trace) {
  CompletionRequest req;
  req.params = config_.describe;
  req.key = {stage::kDescribe, image.id, 0};
  req.turns.push_back(ChatTurn::System(prompts_.Get("describe")));
  const std::string instruction = "Describe this image.";
  req.turns.push_back(ChatTurn::UserWithImage(image.source, instruction));
  std::string reply = Complete(req, stage::kDescribe);
  std::string text = Trim(reply);
  trace.Record(stage::kDescribe, 0, image.source + "\n" + instruction, reply,
               llm_->model());
  if (text.empty()) throw StageError(stage::kDescribe, "empty description");
  return {image.id, text, llm_->model()};
}

SceneJudgment HumorChain::JudgeScene(const SceneDescription& description,
                                     Trace& trace) {
  if (description.text.empty()) {
    throw StageError(stage::kJudge, "empty description");
  }
  CompletionRequest req;
  req.params = config_.judge;
  req.key = {stage::kJudge, description.image_id, 0};
  req.turns.push_back(ChatTurn::System(prompts_.Get("judge")));
  std::string input = RenderJudgeInput(description);
  req.turns.push_back(ChatTurn::User(input));
  std::string reply = Complete(req, stage::kJudge);
  SceneJudgment judgment;
  try {
    judgment = ParseSceneJudgment(reply);
  } catch (Error& e) {
    trace.Record(stage::kJudge, 0, input, reply, llm_->model(), {e.what()});
    e.set_stage(stage::kJudge);
    throw;
  }
  trace.Record(stage::kJudge, 0, input, reply, llm_->model(),
               ValidateSceneJudgment(judgment));
  return judgment;
}

std::string HumorChain::GenerateCaption(StrategyKind strategy,
                                        const SceneDescription& description,
                                        const SceneJudgment& judgment,
                                        int attempt,
                                        const std::vector<ChatTurn>& feedback,
                                        Trace& trace) {
  CompletionRequest req;
  req.params = config_.strategy.at(strategy);
  req.key = {std::string(stage::kGenerate) + "." + std::string(ToString(strategy)),
             description.image_id, attempt};
  req.turns.push_back(ChatTurn::System(prompts_.Get(std::string(ToString(strategy)))));
  std::string input = RenderGenerationInput(description, judgment);
  req.turns.push_back(ChatTurn::User(input));
  for (const ChatTurn& t : feedback) {
    req.turns.push_back(t);
    for (const auto& part : t.parts) input += "\n" + part.text;
  }
  std::string reply = Complete(req, stage::kGenerate);
  std::string caption = CleanCaption(reply);
  std::vector<std::string> warnings;
  if (int words = CountWords(caption); words > 20) {
    warnings.push_back("caption exceeds 20 words (" + std::to_string(words) +
                       ")");
  }
  trace.Record(stage::kGenerate, attempt,
               std::string(ToString(strategy)) + "\n" + input, reply,
               llm_->model(), std::move(warnings));
  if (caption.empty()) throw StageError(stage::kGenerate, "empty caption");
  return caption;
}

SafetyVerdict HumorChain::CheckSafety(const std::string& caption,
                                      const SceneDescription& description,
                                      int attempt, Trace& trace) {
  if (caption.empty()) throw StageError(stage::kSafety, "empty caption");
  CompletionRequest req;
  req.params = config_.safety;
  req.key = {stage::kSafety, description.image_id, attempt};
  req.turns.push_back(ChatTurn::System(prompts_.Get("safety")));
  std::string input = "Caption: " + Quote(caption) +
                      "\nImage context: " + Quote(description.text);
  req.turns.push_back(ChatTurn::User(input));
  std::string reply = Complete(req, stage::kSafety);
  SafetyVerdict verdict;
  try {
    verdict = ParseSafetyVerdict(reply);
  } catch (Error& e) {
    trace.Record(stage::kSafety, attempt, input, reply, llm_->model(), {e.what()});
    e.set_stage(stage::kSafety);
    throw;
  }
  std::vector<std::string> warnings;
  if (int words = CountWords(verdict.explanation); words > 50) {
    warnings.push_back("safety explanation exceeds 50 words (" +
                       std::to_string(words) + ")");
  }
  trace.Record(stage::kSafety, attempt, input, reply, llm_->model(),
               std::move(warnings));
  return verdict;
}

namespace {

std::string CategoriesText(const SafetyVerdict& v) {
  std::string out;
  for (auto c : v.violation_categories) {
    out += (out.empty() ? "" : ", ") + std::string(ToString(c));
  }
  return out;
}

double RankScore(const CaptionCandidate& c) {
  if (!c.humor) return -1.0;
  if (c.humor->score) return *c.humor->score;
  if (c.humor->label) return *c.humor->label;
  return -1.0;
}

}  // namespace

PipelineResult HumorChain::Run(const ImageRecord& image) {
  PipelineResult result;
  result.image_id = image.id;
  Trace trace(MakeClock(config_.clock));
  size_t prefix_end = 0;
  try {
    result.description = DescribeImage(image, trace);
    result.judgment = JudgeScene(*result.description, trace);
    prefix_end = trace.events().size();
    const SceneDescription& desc = *result.description;
    const SceneJudgment& judgment = *result.judgment;

    const StrategyKind initial = config_.routing.Route(judgment);
    const std::vector<StrategyKind>& order = config_.FallbackFor(initial);

    for (int attempt = 1; attempt <= config_.max_attempts; ++attempt) {
      const size_t attempt_begin = trace.events().size();
      const StrategyKind strategy = order[(attempt - 1) % order.size()];
      trace.Record(stage::kRoute, attempt, Json(judgment).dump(),
                   std::string(ToString(strategy)), "routing-table");

      CaptionCandidate candidate;
      candidate.image_id = image.id;
      candidate.strategy = strategy;
      candidate.attempt = attempt;

      std::vector<ChatTurn> feedback;
      for (int rewrite = 0;; ++rewrite) {
        candidate.caption =
            GenerateCaption(strategy, desc, judgment, attempt, feedback, trace);
        candidate.safety = CheckSafety(candidate.caption, desc, attempt, trace);
        if (candidate.safety.compliant ||
            rewrite >= config_.safety_rewrite_limit) {
          break;
        }
        feedback.push_back(ChatTurn::Assistant(candidate.caption));
        feedback.push_back(ChatTurn::User(
            "The title above was flagged by the safety classifier (" +
            CategoriesText(candidate.safety) +
            "): " + candidate.safety.explanation +
            "\nRewrite it so it is compliant while keeping the humor. Output "
            "only the new title."));
      }

      if (candidate.safety.compliant) {
        try {
          candidate.humor = judge_->Judge(image, candidate.caption, attempt);
        } catch (Error& e) {
          e.set_stage(stage::kHumorGate);
          throw;
        }
        const HumorVerdict& h = *candidate.humor;
        trace.Record(stage::kHumorGate, attempt, candidate.caption,
                     Json(h).dump(), h.judge_id);
        candidate.accepted = h.accepted;
      }

      const auto& events = trace.events();
      candidate.trace.assign(events.begin(), events.begin() + prefix_end);
      candidate.trace.insert(candidate.trace.end(),
                             events.begin() + attempt_begin, events.end());
      result.attempts.push_back(candidate);
      if (candidate.accepted) {
        result.status = PipelineResult::Status::kAccepted;
        result.final = std::move(candidate);
        result.trace = trace.events();
        return result;
      }
    }

    result.status = PipelineResult::Status::kExhausted;
    const CaptionCandidate* best = &result.attempts.front();
    for (const CaptionCandidate& c : result.attempts) {
      if (RankScore(c) > RankScore(*best)) best = &c;
    }
    result.best_rejected = *best;
  } catch (const Error& e) {
    result.status = PipelineResult::Status::kAborted;
    result.error = (e.stage().empty() ? "" : "[" + e.stage() + "] ") +
                   std::string(ErrorCodeName(e.code())) + ": " + e.what();
  }
  result.trace = trace.events();
  return result;
}

std::vector<PipelineResult> HumorChain::RunBatch(
    const std::vector<ImageRecord>& images, int parallelism) {
  std::vector<PipelineResult> results(images.size());
  const int workers =
      std::max(1, std::min<int>(parallelism, static_cast<int>(images.size())));
  std::atomic<size_t> next{0};
  auto work = [&] {
    for (size_t i = next++; i < images.size(); i = next++) {
      results[i] = Run(images[i]);
    }
  };
  if (workers == 1) {
    work();
    return results;
  }
  std::vector<std::jthread> pool;
  for (int w = 0; w < workers; ++w) pool.emplace_back(work);
  pool.clear();
  return results;
}

}  // namespace humorchain

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

#include "humorchain/cli.h"

#include <atomic>
#include <chrono>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "humorchain/annotation.h"
#include "humorchain/arena.h"
#include "humorchain/judge.h"
#include "humorchain/llm.h"
#include "humorchain/metrics.h"
#include "humorchain/pipeline.h"

namespace humorchain {

namespace fs = std::filesystem;

namespace {

std::atomic<bool> g_stop{false};

void OnSignal(int) { g_stop = true; }

std::string Resolve(const fs::path& base, const std::string& p) {
  if (p.empty() || fs::path(p).is_absolute() || p.find("://") != std::string::npos) {
    return p;
  }
  return (base / p).lexically_normal().string();
}

void ResolveKey(Json& j, const char* key, const fs::path& base) {
  if (j.is_object() && j.contains(key) && j.at(key).is_string()) {
    j[key] = Resolve(base, j.at(key).get<std::string>());
  }
}

void WriteText(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kNotFound, "cannot write " + path.string());
  out << text;
}

void WriteJson(const fs::path& path, const Json& j) {
  WriteText(path, j.dump(2) + "\n");
}

struct Common {
  std::string config_path;
  std::string out_dir = "out";
  std::optional<uint64_t> seed;
  std::optional<std::string> backend;
  std::optional<std::string> mock_script;
};

Json ConfigOrEmpty(const Common& c) {
  return c.config_path.empty() ? Json::object() : LoadToolConfig(c.config_path);
}

BackendProfile BackendFrom(const Json& config, const Common& c) {
  BackendProfile p = config.value("backend", Json::object()).get<BackendProfile>();
  if (c.backend) p.kind = *c.backend;
  if (c.mock_script) p.mock_script = *c.mock_script;
  p.Validate();
  return p;
}

PromptLibrary PromptsFrom(const Json& config) {
  return PromptLibrary::Load(
      config.value("prompts_dir", std::string(HUMORCHAIN_ASSET_DIR) + "/prompts"));
}

// The judge shares the generation backend unless it names its own. A scored
// judge takes `override` if given, else its own threshold, else `fallback`.
std::shared_ptr<HumorJudge> JudgeFrom(const Json& config,
                                      const BackendProfile& backend,
                                      const PromptLibrary& prompts,
                                      std::optional<double> override,
                                      std::optional<double> fallback,
                                      std::shared_ptr<Gateway> shared) {
  Json j = config.value("judge", Json::object());
  const bool own_backend = j.contains("backend");
  if (!own_backend) j["backend"] = backend;
  if (j.value("kind", std::string("binary_llm")) == "scored") {
    if (override) {
      j["threshold"] = *override;
    } else if (!j.contains("threshold") && fallback) {
      j["threshold"] = *fallback;
    }
  }
  const JudgeProfile jp = j.get<JudgeProfile>();
  std::shared_ptr<Gateway> gateway = shared;
  if (own_backend) {
    gateway = std::make_shared<Gateway>(MakeBackend(jp.backend), jp.backend);
  }
  return MakeJudge(jp, gateway, prompts.Get("discriminator"));
}

int RunGenerate(const Common& c, const std::string& manifest, int parallelism,
                std::optional<double> threshold, std::optional<int> max_attempts) {
  const Json config = ConfigOrEmpty(c);
  PipelineConfig pc = config.value("pipeline", Json::object()).get<PipelineConfig>();
  if (threshold) pc.threshold = *threshold;
  if (max_attempts) pc.max_attempts = *max_attempts;
  pc.Validate();
  const BackendProfile backend = BackendFrom(config, c);
  const PromptLibrary prompts = PromptsFrom(config);
  const std::vector<ImageRecord> images = LoadManifest(manifest);
  auto gateway = std::make_shared<Gateway>(MakeBackend(backend), backend);
  auto judge = JudgeFrom(config, backend, prompts, threshold, pc.threshold, gateway);
  HumorChain chain(gateway, judge, prompts, pc);

  const std::vector<PipelineResult> results = chain.RunBatch(images, parallelism);

  fs::create_directories(c.out_dir);
  std::string captions, traces, full;
  int aborted = 0, accepted = 0;
  for (const PipelineResult& r : results) {
    Json line = {{"image_id", r.image_id},
                 {"status", ToString(r.status)},
                 {"generations", r.generations()}};
    const CaptionCandidate* shown = r.final ? &*r.final
                                    : r.best_rejected ? &*r.best_rejected
                                                      : nullptr;
    line["caption"] = shown ? Json(shown->caption) : Json(nullptr);
    if (shown) {
      line["strategy"] = ToString(shown->strategy);
      line["attempt"] = shown->attempt;
      line["humor"] = shown->humor ? Json(*shown->humor) : Json(nullptr);
    }
    if (!r.error.empty()) line["error"] = r.error;
    captions += line.dump() + "\n";
    full += Json(r).dump() + "\n";
    for (const StageEvent& e : r.trace) {
      Json t = e;
      t["image_id"] = r.image_id;
      traces += t.dump() + "\n";
    }
    aborted += r.status == PipelineResult::Status::kAborted;
    accepted += r.status == PipelineResult::Status::kAccepted;
  }
  WriteText(fs::path(c.out_dir) / "captions.jsonl", captions);
  WriteText(fs::path(c.out_dir) / "results.jsonl", full);
  WriteText(fs::path(c.out_dir) / "traces.jsonl", traces);
  std::cerr << "generate: " << results.size() << " images, " << accepted
            << " accepted, " << aborted << " aborted\n";
  return aborted > 0 ? kExitPartial : kExitOk;
}

EloConfig EloFrom(const Json& config, const Common& c) {
  EloConfig elo;
  if (config.contains("elo")) {
    const Json& e = config.at("elo");
    elo.k = e.value("k", elo.k);
    elo.initial = e.value("initial", elo.initial);
    elo.shuffles = e.value("shuffles", elo.shuffles);
    elo.seed = e.value("seed", elo.seed);
  }
  if (c.seed) elo.seed = *c.seed;
  if (elo.shuffles < 1) throw Error(ErrorCode::kConfig, "elo shuffles < 1");
  return elo;
}

int RunEvalPairwise(const Common& c, const std::string& matches_path,
                    std::string reference) {
  const Json config = ConfigOrEmpty(c);
  const EloConfig elo = EloFrom(config, c);
  if (reference.empty()) reference = config.value("reference_system", std::string());
  const std::vector<MatchRecord> matches = LoadMatchLog(matches_path);
  if (matches.empty()) throw Error(ErrorCode::kUndefined, "match log is empty");

  const RatingTable table = BuildRatingTable(matches, elo, reference);
  const std::vector<PairwiseRow> pairs = PairwiseTable(matches);
  fs::create_directories(c.out_dir);
  const fs::path out(c.out_dir);
  WriteJson(out / "ratings.json", RatingTableJson(table));
  WriteText(out / "ratings.csv", RatingTableCsv(table));
  WriteJson(out / "pairwise.json", PairwiseTableJson(pairs));
  WriteText(out / "pairwise.csv", PairwiseTableCsv(pairs));
  if (!table.bt_error.empty()) {
    std::cerr << "eval-pairwise: Bradley-Terry fit unavailable: "
              << table.bt_error << "\n";
    return kExitPartial;
  }
  return kExitOk;
}

std::unique_ptr<EmbeddingProvider> EmbeddingFrom(const Json& config,
                                                 const std::string& kind) {
  const Json e = config.value("embedding", Json::object());
  if (kind == "none") return nullptr;
  if (kind == "mock") return std::make_unique<MockEmbeddingProvider>(e.value("dim", 16));
  if (kind == "http") {
    return std::make_unique<HttpEmbeddingProvider>(
        e.at("endpoint").get<std::string>(), e.value("auth_env", std::string()),
        e.value("timeout_seconds", 30.0));
  }
  throw Error(ErrorCode::kConfig, "embedding must be none, mock or http");
}

int RunEvalSingle(const Common& c, const std::string& captions_path,
                  const std::string& labels_path, std::string embedding) {
  const Json config = ConfigOrEmpty(c);
  if (embedding.empty()) {
    embedding = config.value("embedding", Json::object()).value("kind", "none");
  }
  auto provider = EmbeddingFrom(config, embedding);
  SingleEvalOptions options;
  options.quorum = config.value("quorum", options.quorum);
  options.clip_rescale = config.value("clip_rescale", options.clip_rescale);
  const auto captions = LoadCaptionRows(captions_path);
  std::vector<LabelRow> labels;
  if (!labels_path.empty()) labels = LoadLabelRows(labels_path);
  const Json report = SingleCaptionReport(captions, labels, provider.get(), options);
  fs::create_directories(c.out_dir);
  WriteJson(fs::path(c.out_dir) / "single_report.json", report);
  return kExitOk;
}

int RunDiscriminatorReport(const Common& c, const std::string& validation,
                           const std::string& judge_mode,
                           std::optional<double> threshold) {
  const std::vector<ValidationRow> rows = LoadValidationSet(validation);
  std::vector<int> predicted, truth;
  int failures = 0;
  if (judge_mode == "recorded") {
    for (const ValidationRow& r : rows) {
      if (!r.predicted) {
        throw Error(ErrorCode::kSchema,
                    "row for " + r.image_id + " has no recorded prediction");
      }
      predicted.push_back(*r.predicted);
      truth.push_back(r.human_label);
    }
  } else if (judge_mode == "live") {
    const Json config = ConfigOrEmpty(c);
    const BackendProfile backend = BackendFrom(config, c);
    const PromptLibrary prompts = PromptsFrom(config);
    auto gateway = std::make_shared<Gateway>(MakeBackend(backend), backend);
    auto judge = JudgeFrom(config, backend, prompts, threshold, std::nullopt, gateway);
    for (const ValidationRow& r : rows) {
      try {
        const HumorVerdict v =
            judge->Judge(ImageRecord{r.image_id, r.image_source, ""}, r.caption, 1);
        predicted.push_back(v.accepted ? 1 : 0);
        truth.push_back(r.human_label);
      } catch (const Error& e) {
        ++failures;
        std::cerr << "discriminator-report: " << r.image_id << ": " << e.what()
                  << "\n";
      }
    }
  } else {
    throw Error(ErrorCode::kConfig, "--judge must be 'recorded' or 'live'");
  }
  if (predicted.empty()) throw Error(ErrorCode::kUndefined, "no judged rows");
  Json report = DiscriminatorReport(Tally(predicted, truth));
  report["failed_rows"] = failures;
  fs::create_directories(c.out_dir);
  WriteJson(fs::path(c.out_dir) / "discriminator_report.json", report);
  return failures > 0 ? kExitPartial : kExitOk;
}

int RunServe(const Common& c, std::optional<int> port) {
  const Json config = ConfigOrEmpty(c);
  if (!config.contains("annotation")) {
    throw Error(ErrorCode::kConfig, "config has no 'annotation' section");
  }
  ServiceConfig sc = config.at("annotation").get<ServiceConfig>();
  if (port) sc.port = *port;
  if (c.seed) sc.seed = *c.seed;
  AnnotationService service(sc);
  AnnotationServer server(service);
  if (!server.Bind(sc.host, sc.port)) {
    std::cerr << "serve: cannot bind " << sc.host << ":" << sc.port << "\n";
    return kExitConfig;
  }
  std::cerr << "serve: listening on " << sc.host << ":" << server.port() << "\n";
  g_stop = false;
  auto old_int = std::signal(SIGINT, OnSignal);
  auto old_term = std::signal(SIGTERM, OnSignal);
  std::thread watcher([&server] {
    while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(50));
    server.Stop();
  });
  server.Serve();
  g_stop = true;
  watcher.join();
  std::signal(SIGINT, old_int);
  std::signal(SIGTERM, old_term);
  std::cerr << "serve: stopped after " << service.stored_judgments()
            << " stored judgments\n";
  return kExitOk;
}

}  // namespace

Json LoadToolConfig(const std::string& path) {
  Json config;
  try {
    config = Json::parse(ReadFile(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::kConfig, path + ": " + e.what());
  } catch (const Error& e) {
    throw Error(ErrorCode::kConfig, e.what());
  }
  if (!config.is_object()) throw Error(ErrorCode::kConfig, path + ": not an object");
  const fs::path base = fs::path(path).parent_path();
  ResolveKey(config, "prompts_dir", base);
  if (config.contains("backend")) ResolveKey(config["backend"], "mock_script", base);
  if (config.contains("judge") && config["judge"].contains("backend")) {
    ResolveKey(config["judge"]["backend"], "mock_script", base);
  }
  if (config.contains("annotation")) {
    for (const char* key : {"corpus", "log", "static_dir"}) {
      ResolveKey(config["annotation"], key, base);
    }
  }
  return config;
}

int RunCli(int argc, char** argv) {
  CLI::App app{"Image humor captioning, judging and evaluation."};
  app.require_subcommand(1);
  Common c;
  auto add_common = [&c](CLI::App* sub) {
    sub->add_option("--config", c.config_path, "tool configuration (JSON)");
    sub->add_option("--out", c.out_dir, "output directory");
    sub->add_option("--seed", c.seed, "seed for randomized procedures");
    sub->add_option("--backend", c.backend, "mock or http")
        ->check(CLI::IsMember({"mock", "http"}));
    sub->add_option("--mock-script", c.mock_script, "mock backend script");
  };

  std::string manifest;
  int parallelism = 4;
  std::optional<double> threshold;
  std::optional<int> max_attempts;
  auto* gen = app.add_subcommand("generate", "caption every image in a manifest");
  add_common(gen);
  gen->add_option("--manifest", manifest, "image manifest (JSON Lines)")->required();
  gen->add_option("--parallelism", parallelism, "concurrent chains")
      ->check(CLI::PositiveNumber);
  gen->add_option("--threshold", threshold, "humor acceptance threshold")
      ->check(CLI::Range(0.0, 1.0));
  gen->add_option("--max-attempts", max_attempts, "generation attempts per image")
      ->check(CLI::PositiveNumber);

  std::string matches, reference;
  auto* pairwise = app.add_subcommand("eval-pairwise", "win rates, Elo and Bradley-Terry");
  add_common(pairwise);
  pairwise->add_option("--matches", matches, "match log (JSON Lines)")->required();
  pairwise->add_option("--reference", reference, "system with strength 1");

  std::string captions, labels, embedding;
  auto* single = app.add_subcommand("eval-single", "single-caption metrics");
  add_common(single);
  single->add_option("--captions", captions, "captions (JSON Lines)")->required();
  single->add_option("--labels", labels, "human labels (JSON Lines)");
  single->add_option("--embedding", embedding, "none, mock or http");

  std::string validation, judge_mode = "recorded";
  auto* disc = app.add_subcommand("discriminator-report", "judge against human labels");
  add_common(disc);
  disc->add_option("--validation", validation, "validation set (JSON Lines)")
      ->required();
  disc->add_option("--judge", judge_mode, "recorded or live");
  disc->add_option("--threshold", threshold, "scored judge threshold")
      ->check(CLI::Range(0.0, 1.0));

  std::optional<int> port;
  auto* serve = app.add_subcommand("serve", "annotation service");
  add_common(serve);
  serve->add_option("--port", port, "listen port")->check(CLI::Range(0, 65535));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*gen) return RunGenerate(c, manifest, parallelism, threshold, max_attempts);
    if (*pairwise) return RunEvalPairwise(c, matches, reference);
    if (*single) return RunEvalSingle(c, captions, labels, embedding);
    if (*disc) return RunDiscriminatorReport(c, validation, judge_mode, threshold);
    if (*serve) return RunServe(c, port);
  } catch (const Error& e) {
    std::cerr << "error [" << ErrorCodeName(e.code()) << "]: " << e.what() << "\n";
    return kExitConfig;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error [config]: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}

}  // namespace humorchain

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

#ifndef HUMORCHAIN_ANNOTATION_H_
#define HUMORCHAIN_ANNOTATION_H_

#include <condition_variable>
#include <cstdio>
#include <deque>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "humorchain/arena.h"
#include "humorchain/errors.h"
#include "humorchain/types.h"
#include "humorchain/util.h"

namespace humorchain {

enum class TaskKind { kPairwise, kSingle };

// One corpus line. Pairwise items carry two captions with their systems;
// single items one caption.
//   {"item_id", "kind": "pairwise", "image", "caption_a", "system_a",
//    "caption_b", "system_b"}
//   {"item_id", "kind": "single", "image", "caption", "system"}
struct CorpusItem {
  std::string item_id;
  TaskKind kind = TaskKind::kSingle;
  std::string image;
  std::string caption_a;  // single: the caption
  std::string system_a;   // single: the system
  std::string caption_b;
  std::string system_b;
};

std::vector<CorpusItem> LoadCorpus(const std::string& path);

struct ServiceConfig {
  std::string corpus_path;
  std::string log_path;
  int annotators_per_item = 5;
  int quorum = 2;
  uint64_t seed = 0;
  std::string host = "127.0.0.1";
  int port = 8080;
  // Environment variable holding the token required by the aggregate
  // endpoints (/api/ratings, /api/export). Unset variable = endpoints off.
  std::string admin_token_env = "HUMORCHAIN_ADMIN_TOKEN";
  std::string static_dir;  // optional browser UI bundle
  std::string clock = "wall";
  std::string reference_system;
  EloConfig elo;

  void Validate() const;
};

void from_json(const Json& j, ServiceConfig& v);

// What an annotator sees. No system identifiers; for pairwise tasks the
// captions are already in display order.
struct AnnotationTask {
  std::string task_id;
  TaskKind kind = TaskKind::kSingle;
  std::string image;
  std::vector<std::string> captions;  // pairwise: {A, B} as displayed
  std::string annotator_id;
  bool display_swap = false;  // server side only, never serialized
};

Json ClientTaskJson(const AnnotationTask& task);

struct JudgmentRecord {
  std::string judgment_id;
  std::string task_id;
  std::string annotator_id;
  // Pairwise: a_wins | b_wins | tie | both_not_funny as displayed.
  // Single: "1" (humorous) or "0".
  std::string verdict;
  int64_t timestamp = 0;
};

struct SubmitAck {
  std::string judgment_id;
  bool duplicate = false;  // true for an idempotent resubmission
};

struct Progress {
  struct Counts {
    int64_t judged = 0;
    int64_t remaining = 0;
  };
  std::map<std::string, Counts> annotators;
  int64_t corpus_judged = 0;
  int64_t corpus_required = 0;
  int64_t items_complete = 0;
};

Json ProgressJson(const Progress& progress);

// Aggregates derived from stored judgments in true-system orientation.
class Aggregator {
 public:
  Aggregator(const std::vector<CorpusItem>* corpus, int quorum)
      : corpus_(corpus), quorum_(quorum) {}

  // `event` is a stored judgment log line.
  void Add(const Json& event);

  std::map<std::string, int> QuorumLabels() const;
  const std::map<std::string, std::vector<int>>& votes() const { return votes_; }
  const std::vector<MatchRecord>& matches() const { return matches_; }

  Json ToJson(const EloConfig& elo, const std::string& reference) const;

 private:
  const std::vector<CorpusItem>* corpus_;
  std::map<std::string, size_t> index_;
  int quorum_;
  std::map<std::string, std::vector<int>> votes_;
  std::vector<MatchRecord> matches_;
};

// Single background writer: appends are queued, written, flushed and
// fsync'ed in order; the returned future resolves once the line is durable.
class JsonlWriter {
 public:
  explicit JsonlWriter(const std::string& path);
  ~JsonlWriter();
  JsonlWriter(const JsonlWriter&) = delete;
  JsonlWriter& operator=(const JsonlWriter&) = delete;

  std::future<void> Append(std::string line);

 private:
  void Loop();

  std::FILE* file_ = nullptr;
  std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::pair<std::string, std::promise<void>>> queue_;
  bool stop_ = false;
  std::thread thread_;
};

// Reads a judgment log, dropping (and truncating away) a torn final line
// left by a crash mid-append.
std::vector<Json> RecoverLog(const std::string& path);

class AnnotationService {
 public:
  // Loads the corpus and replays the log.
  explicit AnnotationService(ServiceConfig config);

  // Registers (or re-joins) an annotator and opens a session.
  std::string OpenSession(const std::string& annotator_id);

  // The annotator's outstanding task if any, otherwise a fresh assignment,
  // otherwise nullopt. Throws Error(kNotFound) for an unknown annotator and
  // Error(kInvalidArgument) for a bad session token.
  std::optional<AnnotationTask> NextTask(const std::string& annotator_id,
                                         const std::string& token);

  // Durable before it returns. Throws Error(kNotFound) for an unassigned
  // task, Error(kInvalidArgument) for an illegal verdict and
  // Error(kConflict) for a second judgment with a different id.
  SubmitAck SubmitJudgment(JudgmentRecord record, const std::string& token);

  // Counts only. With an annotator id, the per-annotator section is limited
  // to that annotator (zero counts if unknown).
  Progress GetProgress(const std::optional<std::string>& annotator_id) const;

  // Aggregates maintained incrementally while collecting.
  Json Aggregates() const;
  // Aggregates rebuilt from the log file alone.
  Json RecomputeAggregates() const;

  std::vector<Json> ExportLog() const;
  size_t stored_judgments() const;
  const ServiceConfig& config() const { return config_; }

 private:
  struct ItemState {
    std::set<std::string> assigned;  // annotators holding or done
    std::map<std::string, bool> swap;
    std::map<std::string, Json> judgments;  // annotator -> stored event
  };

  void Apply(const Json& event);
  void Persist(const Json& event);
  void CheckSession(const std::string& annotator_id,
                    const std::string& token) const;
  AnnotationTask MakeTask(size_t item, const std::string& annotator) const;
  std::vector<size_t> OrderFor(const std::string& annotator_id) const;

  ServiceConfig config_;
  std::vector<CorpusItem> corpus_;
  std::map<std::string, size_t> item_index_;
  std::unique_ptr<Clock> clock_;

  mutable std::mutex mu_;
  std::map<std::string, std::set<std::string>> sessions_;  // id -> token hashes
  std::vector<ItemState> items_;
  std::map<std::string, std::string> outstanding_;  // annotator -> item id
  std::map<std::string, std::string> judgment_ids_;  // id -> task/annotator
  std::vector<Json> log_;
  Aggregator aggregator_;
  uint64_t session_counter_ = 0;
  std::unique_ptr<JsonlWriter> writer_;
};

// HTTP JSON front end for AnnotationService.
class AnnotationServer {
 public:
  explicit AnnotationServer(AnnotationService& service);
  ~AnnotationServer();

  // Returns false when the port cannot be bound. Port 0 picks a free port.
  bool Bind(const std::string& host, int port);
  int port() const { return port_; }
  // Blocks until Stop().
  void Serve();
  void Stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int port_ = 0;
};

}  // namespace humorchain

#endif  // HUMORCHAIN_ANNOTATION_H_

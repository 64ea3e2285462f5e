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

#include "humorchain/annotation.h"

#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "humorchain/judge.h"
#include "humorchain/metrics.h"

namespace humorchain {

namespace {

std::string_view KindName(TaskKind kind) {
  return kind == TaskKind::kPairwise ? "pairwise" : "single";
}

TaskKind ParseKind(std::string_view s) {
  if (s == "pairwise") return TaskKind::kPairwise;
  if (s == "single") return TaskKind::kSingle;
  throw Error(ErrorCode::kEnum, "invalid task kind '" + std::string(s) + "'");
}

Verdict Flip(Verdict v) {
  if (v == Verdict::kAWins) return Verdict::kBWins;
  if (v == Verdict::kBWins) return Verdict::kAWins;
  return v;
}

}  // namespace

std::vector<CorpusItem> LoadCorpus(const std::string& path) {
  std::vector<CorpusItem> items;
  std::set<std::string> seen;
  int line = 0;
  for (const Json& j : ReadJsonLines(path)) {
    ++line;
    const std::string where = path + ":" + std::to_string(line) + ": ";
    CorpusItem item;
    try {
      item.item_id = j.at("item_id").get<std::string>();
      item.kind = ParseKind(j.at("kind").get<std::string>());
      item.image = j.at("image").get<std::string>();
      if (item.kind == TaskKind::kPairwise) {
        item.caption_a = j.at("caption_a").get<std::string>();
        item.system_a = j.at("system_a").get<std::string>();
        item.caption_b = j.at("caption_b").get<std::string>();
        item.system_b = j.at("system_b").get<std::string>();
      } else {
        item.caption_a = j.at("caption").get<std::string>();
        item.system_a = j.at("system").get<std::string>();
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kSchema, where + e.what());
    } catch (const Error& e) {
      throw Error(e.code(), where + e.what());
    }
    if (item.item_id.empty()) {
      throw Error(ErrorCode::kSchema, where + "empty item_id");
    }
    if (item.kind == TaskKind::kPairwise && item.system_a == item.system_b) {
      throw Error(ErrorCode::kSchema,
                  where + "pairwise item compares a system with itself");
    }
    if (!seen.insert(item.item_id).second) {
      throw Error(ErrorCode::kDuplicate, where + "duplicate item_id '" +
                                             item.item_id + "'");
    }
    items.push_back(std::move(item));
  }
  return items;
}

void ServiceConfig::Validate() const {
  if (corpus_path.empty()) throw Error(ErrorCode::kConfig, "corpus path missing");
  if (log_path.empty()) throw Error(ErrorCode::kConfig, "log path missing");
  if (annotators_per_item < 1) {
    throw Error(ErrorCode::kConfig, "annotators_per_item must be >= 1");
  }
  if (quorum < 1 || quorum > annotators_per_item) {
    throw Error(ErrorCode::kConfig,
                "quorum must lie in [1, annotators_per_item]");
  }
  if (port < 0 || port > 65535) throw Error(ErrorCode::kConfig, "bad port");
  if (clock != "wall" && clock != "logical") {
    throw Error(ErrorCode::kConfig, "clock must be 'wall' or 'logical'");
  }
  if (elo.shuffles < 1) throw Error(ErrorCode::kConfig, "elo shuffles < 1");
}

void from_json(const Json& j, ServiceConfig& v) {
  for (const char* forbidden : {"admin_token", "token", "api_key"}) {
    if (j.contains(forbidden)) {
      throw Error(ErrorCode::kConfig,
                  std::string("'") + forbidden +
                      "' may not appear in configuration; name an "
                      "environment variable instead");
    }
  }
  try {
    v.corpus_path = j.at("corpus").get<std::string>();
    v.log_path = j.at("log").get<std::string>();
    v.annotators_per_item = j.value("annotators_per_item", v.annotators_per_item);
    v.quorum = j.value("quorum", v.quorum);
    v.seed = j.value("seed", v.seed);
    v.host = j.value("host", v.host);
    v.port = j.value("port", v.port);
    v.admin_token_env = j.value("admin_token_env", v.admin_token_env);
    v.static_dir = j.value("static_dir", v.static_dir);
    v.clock = j.value("clock", v.clock);
    v.reference_system = j.value("reference_system", v.reference_system);
    if (j.contains("elo")) {
      const Json& e = j.at("elo");
      v.elo.k = e.value("k", v.elo.k);
      v.elo.initial = e.value("initial", v.elo.initial);
      v.elo.shuffles = e.value("shuffles", v.elo.shuffles);
      v.elo.seed = e.value("seed", v.elo.seed);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kConfig, std::string("service config: ") + e.what());
  }
  v.Validate();
}

Json ClientTaskJson(const AnnotationTask& task) {
  Json j = {{"task_id", task.task_id},
            {"kind", KindName(task.kind)},
            {"image", task.image}};
  if (task.kind == TaskKind::kPairwise) {
    j["captions"] = Json::array({{{"label", "A"}, {"text", task.captions.at(0)}},
                                 {{"label", "B"}, {"text", task.captions.at(1)}}});
    j["verdicts"] = {"a_wins", "b_wins", "tie", "both_not_funny"};
  } else {
    j["caption"] = task.captions.at(0);
    j["verdicts"] = {0, 1};
  }
  return j;
}

Json ProgressJson(const Progress& progress) {
  Json annotators = Json::object();
  for (const auto& [id, c] : progress.annotators) {
    annotators[id] = {{"judged", c.judged}, {"remaining", c.remaining}};
  }
  return {{"annotators", annotators},
          {"corpus",
           {{"judged", progress.corpus_judged},
            {"required", progress.corpus_required},
            {"items_complete", progress.items_complete}}}};
}

void Aggregator::Add(const Json& event) {
  if (index_.empty()) {
    for (size_t i = 0; i < corpus_->size(); ++i) {
      index_[(*corpus_)[i].item_id] = i;
    }
  }
  const std::string task = event.at("task_id").get<std::string>();
  auto it = index_.find(task);
  if (it == index_.end()) {
    throw Error(ErrorCode::kNotFound, "judgment for unknown task '" + task + "'");
  }
  const CorpusItem& item = (*corpus_)[it->second];
  if (item.kind == TaskKind::kPairwise) {
    MatchRecord m;
    m.pair_id = item.item_id;
    m.image_id = item.image;
    m.system_a = item.system_a;
    m.system_b = item.system_b;
    m.verdict = ParseVerdict(event.at("verdict").get<std::string>());
    m.annotator_id = event.at("annotator_id").get<std::string>();
    m.display_swap = event.value("display_swap", false);
    matches_.push_back(std::move(m));
  } else {
    votes_[item.item_id].push_back(std::stoi(event.at("verdict").get<std::string>()));
  }
}

std::map<std::string, int> Aggregator::QuorumLabels() const {
  std::map<std::string, int> labels;
  for (const auto& [item, votes] : votes_) {
    labels[item] = QuorumLabel(votes, quorum_);
  }
  return labels;
}

Json Aggregator::ToJson(const EloConfig& elo, const std::string& reference) const {
  Json single = Json::array();
  std::map<std::string, std::vector<int>> by_system;
  for (const auto& [item, label] : QuorumLabels()) {
    const CorpusItem& c = (*corpus_)[index_.at(item)];
    single.push_back({{"item_id", item},
                      {"system", c.system_a},
                      {"votes", votes_.at(item)},
                      {"label", label}});
    by_system[c.system_a].push_back(label);
  }
  Json humor = Json::object();
  for (const auto& [system, labels] : by_system) humor[system] = HumorMean(labels);

  Json out = {{"single_labels", single},
              {"humor_mean", humor},
              {"matches", matches_.size()}};
  if (matches_.empty()) {
    out["ratings"] = nullptr;
    out["pairwise"] = Json::array();
  } else {
    out["ratings"] = RatingTableJson(BuildRatingTable(matches_, elo, reference));
    out["pairwise"] = PairwiseTableJson(PairwiseTable(matches_));
  }
  return out;
}

JsonlWriter::JsonlWriter(const std::string& path) {
  const std::filesystem::path parent = std::filesystem::path(path).parent_path();
  std::error_code ec;
  if (!parent.empty()) std::filesystem::create_directories(parent, ec);
  file_ = std::fopen(path.c_str(), "ab");
  if (file_ == nullptr) {
    throw Error(ErrorCode::kNotFound, "cannot open log " + path + " for append");
  }
  thread_ = std::thread([this] { Loop(); });
}

JsonlWriter::~JsonlWriter() {
  {
    std::lock_guard<std::mutex> lock(mu_);
    stop_ = true;
  }
  cv_.notify_all();
  thread_.join();
  std::fclose(file_);
}

std::future<void> JsonlWriter::Append(std::string line) {
  std::promise<void> done;
  std::future<void> result = done.get_future();
  {
    std::lock_guard<std::mutex> lock(mu_);
    queue_.emplace_back(std::move(line), std::move(done));
  }
  cv_.notify_one();
  return result;
}

void JsonlWriter::Loop() {
  for (;;) {
    std::pair<std::string, std::promise<void>> next;
    {
      std::unique_lock<std::mutex> lock(mu_);
      cv_.wait(lock, [this] { return stop_ || !queue_.empty(); });
      if (queue_.empty()) return;
      next = std::move(queue_.front());
      queue_.pop_front();
    }
    next.first.push_back('\n');
    const bool ok =
        std::fwrite(next.first.data(), 1, next.first.size(), file_) ==
            next.first.size() &&
        std::fflush(file_) == 0 && ::fsync(::fileno(file_)) == 0;
    if (ok) {
      next.second.set_value();
    } else {
      next.second.set_exception(std::make_exception_ptr(
          Error(ErrorCode::kTransport, "log append failed")));
    }
  }
}

std::vector<Json> RecoverLog(const std::string& path) {
  std::vector<Json> events;
  if (!std::filesystem::exists(path)) return events;
  const std::string data = ReadFile(path);
  size_t pos = 0;
  int line_no = 0;
  while (pos < data.size()) {
    ++line_no;
    const size_t end = data.find('\n', pos);
    const bool complete = end != std::string::npos;
    const std::string line =
        data.substr(pos, complete ? end - pos : std::string::npos);
    try {
      if (line.find_first_not_of(" \t\r") != std::string::npos) {
        events.push_back(Json::parse(line));
      }
    } catch (const nlohmann::json::parse_error&) {
      if (complete) {
        throw Error(ErrorCode::kParse, path + ":" + std::to_string(line_no) +
                                           ": corrupt log line");
      }
      // Torn final append: the write was never acknowledged.
      std::filesystem::resize_file(path, pos);
      return events;
    }
    if (!complete) {
      std::ofstream(path, std::ios::app | std::ios::binary) << '\n';
      break;
    }
    pos = end + 1;
  }
  return events;
}

AnnotationService::AnnotationService(ServiceConfig config)
    : config_(std::move(config)), aggregator_(&corpus_, config_.quorum) {
  config_.Validate();
  corpus_ = LoadCorpus(config_.corpus_path);
  for (size_t i = 0; i < corpus_.size(); ++i) item_index_[corpus_[i].item_id] = i;
  items_.resize(corpus_.size());
  clock_ = MakeClock(config_.clock);
  aggregator_ = Aggregator(&corpus_, config_.quorum);
  for (const Json& event : RecoverLog(config_.log_path)) {
    try {
      Apply(event);
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kSchema,
                  config_.log_path + ": bad log event: " + e.what());
    }
  }
  writer_ = std::make_unique<JsonlWriter>(config_.log_path);
}

void AnnotationService::Apply(const Json& event) {
  const std::string type = event.at("type").get<std::string>();
  const std::string annotator = event.at("annotator_id").get<std::string>();
  if (type == "session") {
    sessions_[annotator].insert(event.at("token_sha256").get<std::string>());
  } else if (type == "assign" || type == "judgment") {
    const std::string task = event.at("task_id").get<std::string>();
    auto it = item_index_.find(task);
    if (it == item_index_.end()) {
      throw Error(ErrorCode::kNotFound, "log names unknown task '" + task + "'");
    }
    ItemState& st = items_[it->second];
    if (type == "assign") {
      st.assigned.insert(annotator);
      st.swap[annotator] = event.at("display_swap").get<bool>();
      outstanding_[annotator] = task;
    } else {
      st.judgments[annotator] = event;
      judgment_ids_[event.at("judgment_id").get<std::string>()] =
          task + "\n" + annotator;
      auto out = outstanding_.find(annotator);
      if (out != outstanding_.end() && out->second == task) outstanding_.erase(out);
      aggregator_.Add(event);
    }
  } else {
    throw Error(ErrorCode::kSchema, "unknown log event type '" + type + "'");
  }
  log_.push_back(event);
}

void AnnotationService::Persist(const Json& event) {
  writer_->Append(event.dump()).get();
  Apply(event);
}

void AnnotationService::CheckSession(const std::string& annotator_id,
                                     const std::string& token) const {
  auto it = sessions_.find(annotator_id);
  if (it == sessions_.end()) {
    throw Error(ErrorCode::kNotFound, "unknown annotator '" + annotator_id + "'");
  }
  if (!it->second.count(Sha256Hex(token))) {
    throw Error(ErrorCode::kInvalidArgument, "invalid session token");
  }
}

std::string AnnotationService::OpenSession(const std::string& annotator_id) {
  if (annotator_id.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "annotator id must be non-empty");
  }
  std::random_device rd;
  std::lock_guard<std::mutex> lock(mu_);
  std::ostringstream material;
  material << annotator_id << '\n' << ++session_counter_ << '\n';
  for (int i = 0; i < 8; ++i) material << rd() << '.';
  const std::string token = Sha256Hex(material.str());
  Persist({{"type", "session"},
           {"annotator_id", annotator_id},
           {"token_sha256", Sha256Hex(token)}});
  return token;
}

std::vector<size_t> AnnotationService::OrderFor(
    const std::string& annotator_id) const {
  std::vector<size_t> order(corpus_.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  // Fisher-Yates on raw engine output keeps the order identical across
  // standard libraries.
  std::mt19937_64 rng(config_.seed ^ StableHash64(annotator_id));
  for (size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[rng() % i]);
  }
  return order;
}

AnnotationTask AnnotationService::MakeTask(size_t item,
                                           const std::string& annotator) const {
  const CorpusItem& c = corpus_[item];
  AnnotationTask task;
  task.task_id = c.item_id;
  task.kind = c.kind;
  task.image = c.image;
  task.annotator_id = annotator;
  if (c.kind == TaskKind::kPairwise) {
    task.display_swap = items_[item].swap.at(annotator);
    task.captions = task.display_swap
                        ? std::vector<std::string>{c.caption_b, c.caption_a}
                        : std::vector<std::string>{c.caption_a, c.caption_b};
  } else {
    task.captions = {c.caption_a};
  }
  return task;
}

std::optional<AnnotationTask> AnnotationService::NextTask(
    const std::string& annotator_id, const std::string& token) {
  std::lock_guard<std::mutex> lock(mu_);
  CheckSession(annotator_id, token);
  auto out = outstanding_.find(annotator_id);
  if (out != outstanding_.end()) {
    return MakeTask(item_index_.at(out->second), annotator_id);
  }
  for (size_t i : OrderFor(annotator_id)) {
    const ItemState& st = items_[i];
    if (st.assigned.count(annotator_id) ||
        static_cast<int>(st.assigned.size()) >= config_.annotators_per_item) {
      continue;
    }
    bool swap = false;
    if (corpus_[i].kind == TaskKind::kPairwise) {
      std::mt19937_64 rng(config_.seed ^
                          StableHash64(annotator_id + "\n" + corpus_[i].item_id));
      swap = (rng() & 1) != 0;
    }
    Persist({{"type", "assign"},
             {"task_id", corpus_[i].item_id},
             {"annotator_id", annotator_id},
             {"display_swap", swap}});
    return MakeTask(i, annotator_id);
  }
  return std::nullopt;
}

SubmitAck AnnotationService::SubmitJudgment(JudgmentRecord record,
                                            const std::string& token) {
  std::lock_guard<std::mutex> lock(mu_);
  CheckSession(record.annotator_id, token);
  if (record.judgment_id.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "judgment_id must be non-empty");
  }
  auto it = item_index_.find(record.task_id);
  if (it == item_index_.end()) {
    throw Error(ErrorCode::kNotFound, "unknown task '" + record.task_id + "'");
  }
  const size_t item = it->second;
  ItemState& st = items_[item];

  auto prior = st.judgments.find(record.annotator_id);
  if (prior != st.judgments.end()) {
    if (prior->second.at("judgment_id").get<std::string>() == record.judgment_id) {
      return {record.judgment_id, true};
    }
    throw Error(ErrorCode::kConflict,
                "task '" + record.task_id + "' already judged by '" +
                    record.annotator_id + "'");
  }
  if (judgment_ids_.count(record.judgment_id)) {
    throw Error(ErrorCode::kConflict, "judgment_id '" + record.judgment_id +
                                          "' already used for another task");
  }
  if (!st.assigned.count(record.annotator_id)) {
    throw Error(ErrorCode::kNotFound, "task '" + record.task_id +
                                          "' is not assigned to '" +
                                          record.annotator_id + "'");
  }

  Json event = {{"type", "judgment"},
                {"judgment_id", record.judgment_id},
                {"task_id", record.task_id},
                {"annotator_id", record.annotator_id},
                {"kind", KindName(corpus_[item].kind)},
                {"display_verdict", record.verdict},
                {"timestamp", clock_->NowMicros()}};
  if (corpus_[item].kind == TaskKind::kPairwise) {
    Verdict shown;
    try {
      shown = ParseVerdict(record.verdict);
    } catch (const Error& e) {
      throw Error(ErrorCode::kInvalidArgument, e.what());
    }
    const bool swap = st.swap.at(record.annotator_id);
    event["display_swap"] = swap;
    event["verdict"] = ToString(swap ? Flip(shown) : shown);
  } else {
    if (record.verdict != "0" && record.verdict != "1") {
      throw Error(ErrorCode::kInvalidArgument,
                  "single-caption verdict must be 0 or 1");
    }
    event["verdict"] = record.verdict;
  }
  Persist(event);
  return {record.judgment_id, false};
}

Progress AnnotationService::GetProgress(
    const std::optional<std::string>& annotator_id) const {
  std::lock_guard<std::mutex> lock(mu_);
  Progress p;
  auto counts_for = [&](const std::string& a) {
    Progress::Counts c;
    for (const ItemState& st : items_) {
      if (st.judgments.count(a)) {
        ++c.judged;
      } else if (st.assigned.count(a) ||
                 static_cast<int>(st.assigned.size()) <
                     config_.annotators_per_item) {
        ++c.remaining;
      }
    }
    return c;
  };
  if (annotator_id) {
    p.annotators[*annotator_id] = counts_for(*annotator_id);
  } else {
    for (const auto& [a, tokens] : sessions_) p.annotators[a] = counts_for(a);
  }
  for (const ItemState& st : items_) {
    p.corpus_judged += static_cast<int64_t>(st.judgments.size());
    if (static_cast<int>(st.judgments.size()) >= config_.annotators_per_item) {
      ++p.items_complete;
    }
  }
  p.corpus_required =
      static_cast<int64_t>(items_.size()) * config_.annotators_per_item;
  return p;
}

Json AnnotationService::Aggregates() const {
  std::lock_guard<std::mutex> lock(mu_);
  return aggregator_.ToJson(config_.elo, config_.reference_system);
}

Json AnnotationService::RecomputeAggregates() const {
  std::lock_guard<std::mutex> lock(mu_);
  Aggregator fresh(&corpus_, config_.quorum);
  for (const Json& event : ReadJsonLines(config_.log_path)) {
    if (event.at("type") == "judgment") fresh.Add(event);
  }
  return fresh.ToJson(config_.elo, config_.reference_system);
}

std::vector<Json> AnnotationService::ExportLog() const {
  std::lock_guard<std::mutex> lock(mu_);
  return log_;
}

size_t AnnotationService::stored_judgments() const {
  std::lock_guard<std::mutex> lock(mu_);
  return judgment_ids_.size();
}

}  // namespace humorchain

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

#include <chrono>
#include <cmath>
#include <thread>

#include "humorchain/errors.h"
#include "humorchain/llm.h"
#include "humorchain/util.h"

namespace humorchain {

std::string_view ToString(Role role) {
  switch (role) {
    case Role::kSystem: return "system";
    case Role::kUser: return "user";
    case Role::kAssistant: return "assistant";
  }
  return "user";
}

ChatTurn ChatTurn::System(std::string text) {
  return {Role::kSystem, {ContentPart::Text(std::move(text))}};
}

ChatTurn ChatTurn::User(std::string text) {
  return {Role::kUser, {ContentPart::Text(std::move(text))}};
}

ChatTurn ChatTurn::UserWithImage(std::string image_source, std::string text) {
  return {Role::kUser,
          {ContentPart::Image(std::move(image_source)),
           ContentPart::Text(std::move(text))}};
}

ChatTurn ChatTurn::Assistant(std::string text) {
  return {Role::kAssistant, {ContentPart::Text(std::move(text))}};
}

void CompletionRequest::Validate() const {
  if (turns.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "completion request has no turns");
  }
  if (turns.front().role != Role::kSystem) {
    throw Error(ErrorCode::kInvalidArgument,
                "first turn must be the stage system prompt");
  }
  for (const ChatTurn& turn : turns) {
    if (turn.parts.empty()) {
      throw Error(ErrorCode::kInvalidArgument, "chat turn with no parts");
    }
    for (const ContentPart& part : turn.parts) {
      if (part.kind == ContentPart::Kind::kImage && turn.role != Role::kUser) {
        throw Error(ErrorCode::kInvalidArgument,
                    "image parts are only allowed in user turns");
      }
      if (part.kind == ContentPart::Kind::kText && part.text.empty()) {
        throw Error(ErrorCode::kInvalidArgument, "empty text part");
      }
    }
  }
  params.Validate();
}

void BackendProfile::Validate() const {
  if (kind != "http" && kind != "mock") {
    throw Error(ErrorCode::kConfig, "backend kind must be 'http' or 'mock'");
  }
  if (kind == "http" && endpoint.empty()) {
    throw Error(ErrorCode::kConfig, "http backend needs an endpoint");
  }
  if (kind == "mock" && mock_script.empty()) {
    throw Error(ErrorCode::kConfig, "mock backend needs a mock_script path");
  }
  if (!(timeout_seconds > 0)) {
    throw Error(ErrorCode::kConfig, "backend timeout must be positive");
  }
  if (retry.max_retries < 0) {
    throw Error(ErrorCode::kConfig, "max_retries must be >= 0");
  }
  if (max_in_flight < 1) {
    throw Error(ErrorCode::kConfig, "max_in_flight must be >= 1");
  }
}

void to_json(Json& j, const BackendProfile& v) {
  j = Json{{"kind", v.kind},
           {"endpoint", v.endpoint},
           {"mock_script", v.mock_script},
           {"model", v.model},
           {"auth_env", v.auth_env},
           {"timeout_seconds", v.timeout_seconds},
           {"max_in_flight", v.max_in_flight},
           {"max_retries", v.retry.max_retries},
           {"backoff_base_seconds", v.retry.backoff_base_seconds},
           {"image_transport",
            v.image_transport == ImageTransport::kUrl ? "url" : "base64"}};
}

void from_json(const Json& j, BackendProfile& v) {
  BackendProfile d;
  v.kind = j.value("kind", d.kind);
  v.endpoint = j.value("endpoint", d.endpoint);
  v.mock_script = j.value("mock_script", d.mock_script);
  v.model = j.value("model", d.model);
  v.auth_env = j.value("auth_env", d.auth_env);
  v.timeout_seconds = j.value("timeout_seconds", d.timeout_seconds);
  v.max_in_flight = j.value("max_in_flight", d.max_in_flight);
  v.retry.max_retries = j.value("max_retries", d.retry.max_retries);
  v.retry.backoff_base_seconds =
      j.value("backoff_base_seconds", d.retry.backoff_base_seconds);
  std::string transport = j.value("image_transport", std::string("url"));
  if (transport == "url") {
    v.image_transport = ImageTransport::kUrl;
  } else if (transport == "base64") {
    v.image_transport = ImageTransport::kBase64;
  } else {
    throw Error(ErrorCode::kConfig,
                "image_transport must be 'url' or 'base64'");
  }
  if (j.contains("auth_token") || j.contains("api_key")) {
    throw Error(ErrorCode::kConfig,
                "tokens must come from the environment variable named by "
                "auth_env, not from the config file");
  }
}

// ---------------------------------------------------------------------------
// Mock backend

std::shared_ptr<MockChatBackend> MockChatBackend::FromFile(
    const std::string& path) {
  return FromRows(ReadJsonLines(path));
}

std::shared_ptr<MockChatBackend> MockChatBackend::FromRows(
    const std::vector<Json>& rows) {
  auto mock = std::make_shared<MockChatBackend>();
  int line = 0;
  for (const Json& row : rows) {
    ++line;
    if (!row.is_object() || !row.contains("stage") ||
        !row.contains("response_text")) {
      throw Error(ErrorCode::kSchema,
                  "mock script row " + std::to_string(line) +
                      " needs 'stage' and 'response_text'");
    }
    Entry entry;
    entry.response_text = row.at("response_text").get<std::string>();
    entry.fail_times = row.value("fail_times", 0);
    entry.fail_status = row.value("fail_status", 429);
    mock->Add(row.at("stage").get<std::string>(),
              row.value("image_id", std::string("*")), row.value("attempt", 0),
              std::move(entry));
  }
  return mock;
}

void MockChatBackend::Add(std::string stage, std::string image_id, int attempt,
                          Entry entry) {
  std::lock_guard<std::mutex> lock(mu_);
  if (image_id.empty()) image_id = "*";
  slots_[{std::move(stage), std::move(image_id), attempt}].entries.push_back(
      std::move(entry));
}

MockChatBackend::Slot* MockChatBackend::Find(const RequestKey& key) {
  std::vector<std::string> stages = {key.stage};
  if (auto dot = key.stage.find('.'); dot != std::string::npos) {
    stages.push_back(key.stage.substr(0, dot));
  }
  for (const std::string& stage : stages) {
    for (const std::string& image : {key.image_id, std::string("*")}) {
      for (int attempt : {key.attempt, 0}) {
        auto it = slots_.find({stage, image, attempt});
        if (it != slots_.end()) return &it->second;
      }
    }
  }
  return nullptr;
}

std::string MockChatBackend::Send(const CompletionRequest& request) {
  std::lock_guard<std::mutex> lock(mu_);
  ++calls_;
  Slot* slot = Find(request.key);
  if (slot == nullptr) {
    throw BackendError(404, "no scripted response for stage '" +
                                request.key.stage + "', image '" +
                                request.key.image_id + "', attempt " +
                                std::to_string(request.key.attempt));
  }
  const Entry& entry = slot->entries[slot->next];
  if (slot->failures_served < entry.fail_times) {
    ++slot->failures_served;
    ++injected_failures_;
    if (entry.fail_status == 0) {
      throw Error(ErrorCode::kTransport, "injected transport failure");
    }
    throw BackendError(entry.fail_status, "injected failure");
  }
  std::string response = entry.response_text;
  if (slot->next + 1 < slot->entries.size()) {
    ++slot->next;
    slot->failures_served = 0;
  }
  std::string content;
  for (const ChatTurn& turn : request.turns) {
    content += std::string(ToString(turn.role)) + ":";
    for (const ContentPart& part : turn.parts) {
      content += part.text + part.image_source + "\n";
    }
  }
  transcript_.push_back(request.key.stage + "|" + request.key.image_id + "|" +
                        std::to_string(request.key.attempt) + " " +
                        Sha256Hex(content) + " -> " + response);
  requests_.push_back(request);
  return response;
}

int MockChatBackend::calls() const {
  std::lock_guard<std::mutex> lock(mu_);
  return calls_;
}

int MockChatBackend::injected_failures() const {
  std::lock_guard<std::mutex> lock(mu_);
  return injected_failures_;
}

std::vector<std::string> MockChatBackend::transcript() const {
  std::lock_guard<std::mutex> lock(mu_);
  return transcript_;
}

std::vector<CompletionRequest> MockChatBackend::requests() const {
  std::lock_guard<std::mutex> lock(mu_);
  return requests_;
}

// ---------------------------------------------------------------------------
// Gateway

namespace {

bool IsRetryable(const Error& e) {
  if (e.code() == ErrorCode::kTransport || e.code() == ErrorCode::kTimeout) {
    return true;
  }
  if (const auto* be = dynamic_cast<const BackendError*>(&e)) {
    return be->status() == 408 || be->status() == 429 || be->status() >= 500;
  }
  return false;
}

void DefaultSleep(double seconds) {
  if (seconds > 0) {
    std::this_thread::sleep_for(std::chrono::duration<double>(seconds));
  }
}

}  // namespace

Gateway::Gateway(std::shared_ptr<ChatBackend> backend, BackendProfile profile,
                 SleepFn sleep)
    : backend_(std::move(backend)),
      profile_(std::move(profile)),
      sleep_(sleep ? std::move(sleep) : SleepFn(DefaultSleep)),
      in_flight_(std::make_unique<std::counting_semaphore<>>(
          std::max(1, profile_.max_in_flight))) {}

std::string Gateway::Complete(const CompletionRequest& request) {
  request.Validate();
  in_flight_->acquire();
  struct Release {
    std::counting_semaphore<>* s;
    ~Release() { s->release(); }
  } release{in_flight_.get()};

  const RetryPolicy& policy = profile_.retry;
  for (int attempt = 0;; ++attempt) {
    try {
      return backend_->Send(request);
    } catch (const Error& e) {
      if (!IsRetryable(e)) throw;
      if (attempt >= policy.max_retries) {
        ErrorCode code = e.code() == ErrorCode::kTimeout ? ErrorCode::kTimeout
                                                         : ErrorCode::kTransport;
        throw Error(code, "giving up after " + std::to_string(attempt) +
                              " retries: " + e.what());
      }
      sleep_(policy.backoff_base_seconds * std::ldexp(1.0, attempt));
    }
  }
}

std::shared_ptr<ChatBackend> MakeBackend(const BackendProfile& profile) {
  profile.Validate();
  if (profile.kind == "mock") return MockChatBackend::FromFile(profile.mock_script);
  return std::make_shared<HttpChatBackend>(profile);
}

}  // namespace humorchain

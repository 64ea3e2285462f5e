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

#ifndef HUMORCHAIN_LLM_H_
#define HUMORCHAIN_LLM_H_

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "humorchain/types.h"

namespace humorchain {

enum class Role { kSystem, kUser, kAssistant };
std::string_view ToString(Role role);

struct ContentPart {
  enum class Kind { kText, kImage };
  Kind kind = Kind::kText;
  std::string text;          // kText
  std::string image_source;  // kImage: local path or URL

  static ContentPart Text(std::string text) {
    return {Kind::kText, std::move(text), {}};
  }
  static ContentPart Image(std::string source) {
    return {Kind::kImage, {}, std::move(source)};
  }
};

struct ChatTurn {
  Role role = Role::kUser;
  std::vector<ContentPart> parts;

  static ChatTurn System(std::string text);
  static ChatTurn User(std::string text);
  static ChatTurn UserWithImage(std::string image_source, std::string text);
  static ChatTurn Assistant(std::string text);
};

// Routing key for scripted backends. Live backends ignore it.
struct RequestKey {
  std::string stage;
  std::string image_id;
  int attempt = 0;
};

struct CompletionRequest {
  std::string model;
  std::vector<ChatTurn> turns;
  SamplingParams params;
  RequestKey key;

  // Non-empty turns, system prompt first, every turn non-empty, image parts
  // only in user turns. Throws Error(kInvalidArgument).
  void Validate() const;
};

struct RetryPolicy {
  int max_retries = 3;
  double backoff_base_seconds = 0.5;  // delay before retry k is base * 2^k
};

enum class ImageTransport { kUrl, kBase64 };

struct BackendProfile {
  std::string kind = "mock";  // "http" or "mock"
  std::string endpoint;       // http: full chat-completions URL
  std::string mock_script;    // mock: JSON Lines script path
  std::string model = "mock-model";
  // Name of the environment variable holding the bearer token. Tokens are
  // never stored in configuration files.
  std::string auth_env;
  double timeout_seconds = 60.0;
  int max_in_flight = 4;
  RetryPolicy retry;
  ImageTransport image_transport = ImageTransport::kUrl;

  void Validate() const;
};

void to_json(Json& j, const BackendProfile& v);
void from_json(const Json& j, BackendProfile& v);

// One request/response exchange, no retries. Implementations throw
// Error(kTransport), Error(kTimeout) or BackendError.
class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual std::string Send(const CompletionRequest& request) = 0;
};

// HTTP JSON chat-completion client (OpenAI-compatible wire format).
class HttpChatBackend : public ChatBackend {
 public:
  explicit HttpChatBackend(BackendProfile profile);
  std::string Send(const CompletionRequest& request) override;

 private:
  BackendProfile profile_;
  std::string scheme_host_port_;
  std::string path_;
};

// Request body for the HTTP protocol; exposed so the wire format is testable.
Json BuildChatRequestBody(const CompletionRequest& request,
                          ImageTransport transport);
// Returns choices[0].message.content. Throws Error(kSchema).
std::string ParseChatResponseBody(std::string_view body);

// Deterministic scripted backend. Script lines are
//   {"stage", "image_id", "attempt", "response_text", "fail_times"?,
//    "fail_status"?}
// Lookup tries (stage, image, attempt), then with attempt wildcard (attempt
// omitted or 0), then image "*", and finally the stage prefix before the
// first '.', so "generate.absurdity" falls back to "generate". Lines sharing
// a key form a sequence: successive calls consume them in order and the last
// one repeats. A line with fail_times = n answers its first n calls with an
// injected failure (HTTP fail_status, default 429; 0 means a transport
// error).
class MockChatBackend : public ChatBackend {
 public:
  struct Entry {
    std::string response_text;
    int fail_times = 0;
    int fail_status = 429;
  };

  static std::shared_ptr<MockChatBackend> FromFile(const std::string& path);
  static std::shared_ptr<MockChatBackend> FromRows(const std::vector<Json>& rows);

  void Add(std::string stage, std::string image_id, int attempt, Entry entry);

  std::string Send(const CompletionRequest& request) override;

  int calls() const;
  int injected_failures() const;
  // "stage|image|attempt sha256(request) -> response" per successful call,
  // in call order.
  std::vector<std::string> transcript() const;
  // Every successfully answered request, in call order.
  std::vector<CompletionRequest> requests() const;

 private:
  struct Slot {
    std::vector<Entry> entries;
    size_t next = 0;
    int failures_served = 0;  // for entries[next]
  };
  using Key = std::tuple<std::string, std::string, int>;

  Slot* Find(const RequestKey& key);

  mutable std::mutex mu_;
  std::map<Key, Slot> slots_;
  int calls_ = 0;
  int injected_failures_ = 0;
  std::vector<std::string> transcript_;
  std::vector<CompletionRequest> requests_;
};

// Retrying, concurrency-bounded front door to a backend.
class Gateway {
 public:
  using SleepFn = std::function<void(double seconds)>;

  Gateway(std::shared_ptr<ChatBackend> backend, BackendProfile profile,
          SleepFn sleep = {});

  // Returns the assistant text verbatim. Retries transport failures,
  // timeouts, HTTP 408/429 and 5xx with exponential backoff. Blocks while
  // max_in_flight requests are outstanding.
  std::string Complete(const CompletionRequest& request);

  const BackendProfile& profile() const { return profile_; }
  const std::string& model() const { return profile_.model; }

 private:
  std::shared_ptr<ChatBackend> backend_;
  BackendProfile profile_;
  SleepFn sleep_;
  std::unique_ptr<std::counting_semaphore<>> in_flight_;
};

// Builds the backend named by a profile ("http" or "mock").
std::shared_ptr<ChatBackend> MakeBackend(const BackendProfile& profile);

// Returns the first syntactically complete top-level JSON object in `text`,
// found by balanced-brace scanning that ignores braces inside string
// literals. Throws Error(kExtraction) carrying the full raw text.
Json ExtractJsonObject(std::string_view text);

// Typed parsers over model replies. Accept the prompt's wire field
// has_human_or_animal_or_cartoon as well as has_living_entity.
SceneJudgment ParseSceneJudgment(std::string_view text);
SafetyVerdict ParseSafetyVerdict(std::string_view text);
int ParseHumorBinary(std::string_view text);
// {"score": p} or {"probability": p} or {"humor_probability": p}, or a bare
// number. Throws Error(kSchema) for values outside [0, 1].
double ParseHumorScore(std::string_view text);

}  // namespace humorchain

#endif  // HUMORCHAIN_LLM_H_

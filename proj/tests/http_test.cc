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

#include <gtest/gtest.h>

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <thread>

#include "humorchain/annotation.h"
#include "humorchain/llm.h"
#include "humorchain/metrics.h"
#include "test_support.h"

// After the Eigen users: <resolv.h> defines `_res`.
#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

namespace humorchain {
namespace {

// httplib server on a free loopback port, served from a background thread.
class LocalServer {
 public:
  LocalServer() { port_ = server_.bind_to_any_port("127.0.0.1"); }
  ~LocalServer() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }
  httplib::Server& server() { return server_; }
  void Start() {
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  std::string Url(const std::string& path) const {
    return "http://127.0.0.1:" + std::to_string(port_) + path;
  }
  int port() const { return port_; }

 private:
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
};

CompletionRequest Request() {
  CompletionRequest r;
  r.model = "m";
  r.turns = {ChatTurn::System("system"), ChatTurn::User("hello")};
  r.key = {"describe", "img", 0};
  return r;
}

BackendProfile HttpProfile(const std::string& endpoint) {
  BackendProfile p;
  p.kind = "http";
  p.endpoint = endpoint;
  p.timeout_seconds = 5;
  p.retry.max_retries = 3;
  return p;
}

const char* kReply = R"({"choices":[{"message":{"content":"hi there"}}]})";

TEST(HttpGatewayTest, RetriesTooManyRequests) {
  LocalServer srv;
  std::atomic<int> calls{0};
  std::string auth;
  srv.server().Post("/v1/chat/completions",
                    [&](const httplib::Request& req, httplib::Response& res) {
                      auth = req.get_header_value("Authorization");
                      if (++calls <= 2) {
                        res.status = 429;
                        res.set_content("slow down", "text/plain");
                      } else {
                        res.set_content(kReply, "application/json");
                      }
                    });
  srv.Start();
  ::setenv("HUMORCHAIN_TEST_KEY", "k-123", 1);
  BackendProfile p = HttpProfile(srv.Url("/v1/chat/completions"));
  p.auth_env = "HUMORCHAIN_TEST_KEY";
  std::vector<double> sleeps;
  Gateway gw(std::make_shared<HttpChatBackend>(p), p,
             [&](double s) { sleeps.push_back(s); });
  EXPECT_EQ(gw.Complete(Request()), "hi there");
  EXPECT_EQ(calls, 3);
  EXPECT_EQ(sleeps, (std::vector<double>{0.5, 1.0}));
  EXPECT_EQ(auth, "Bearer k-123");
}

TEST(HttpGatewayTest, ClientErrorIsNotRetried) {
  LocalServer srv;
  std::atomic<int> calls{0};
  srv.server().Post("/chat", [&](const httplib::Request&, httplib::Response& res) {
    ++calls;
    res.status = 400;
    res.set_content("bad model", "text/plain");
  });
  srv.Start();
  BackendProfile p = HttpProfile(srv.Url("/chat"));
  Gateway gw(std::make_shared<HttpChatBackend>(p), p, [](double) {});
  try {
    gw.Complete(Request());
    FAIL();
  } catch (const BackendError& e) {
    EXPECT_EQ(e.status(), 400);
    EXPECT_EQ(e.body(), "bad model");
  }
  EXPECT_EQ(calls, 1);
}

TEST(HttpGatewayTest, DownPortIsTransportError) {
  // Bind a free port, then release it unlistened.
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  ASSERT_EQ(::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)), 0);
  socklen_t len = sizeof(addr);
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
  const int port = ntohs(addr.sin_port);
  ::close(fd);
  BackendProfile p =
      HttpProfile("http://127.0.0.1:" + std::to_string(port) + "/v1/chat");
  p.retry.max_retries = 1;
  Gateway gw(std::make_shared<HttpChatBackend>(p), p, [](double) {});
  try {
    gw.Complete(Request());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kTransport);
  }
}

TEST(HttpGatewayTest, SlowServerTimesOut) {
  LocalServer srv;
  srv.server().Post("/chat", [](const httplib::Request&, httplib::Response& res) {
    std::this_thread::sleep_for(std::chrono::milliseconds(1500));
    res.set_content(kReply, "application/json");
  });
  srv.Start();
  BackendProfile p = HttpProfile(srv.Url("/chat"));
  p.timeout_seconds = 0.3;
  p.retry.max_retries = 0;
  Gateway gw(std::make_shared<HttpChatBackend>(p), p, [](double) {});
  try {
    gw.Complete(Request());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kTimeout);
  }
}

TEST(HttpGatewayTest, MalformedReplyIsSchemaError) {
  LocalServer srv;
  srv.server().Post("/chat", [](const httplib::Request&, httplib::Response& res) {
    res.set_content(R"({"choices":[]})", "application/json");
  });
  srv.Start();
  BackendProfile p = HttpProfile(srv.Url("/chat"));
  HttpChatBackend backend(p);
  try {
    backend.Send(Request());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kSchema);
  }
}

TEST(HttpEmbeddingTest, NormalizesVectors) {
  LocalServer srv;
  srv.server().Post("/embed", [](const httplib::Request& req, httplib::Response& res) {
    const Json body = Json::parse(req.body);
    const bool text = body["kind"] == "text";
    res.set_content(Json{{"vector", text ? std::vector<double>{3, 4}
                                         : std::vector<double>{0, 2}}}
                        .dump(),
                    "application/json");
  });
  srv.Start();
  HttpEmbeddingProvider provider(srv.Url("/embed"), "");
  Eigen::VectorXd t = provider.EmbedText("cat");
  EXPECT_NEAR(t(0), 0.6, 1e-12);
  EXPECT_NEAR(t(1), 0.8, 1e-12);
  Eigen::VectorXd i = provider.EmbedImage({"img", "img.png", ""});
  EXPECT_NEAR(i(1), 1.0, 1e-12);
}

// --- Annotation HTTP API ---------------------------------------------------

class AnnotationHttpTest : public ::testing::Test {
 protected:
  void SetUp() override {
    std::string corpus;
    for (int i = 0; i < 3; ++i) {
      corpus += Json{{"item_id", "p" + std::to_string(i)},
                     {"kind", "pairwise"},
                     {"image", "img" + std::to_string(i) + ".png"},
                     {"caption_a", "first " + std::to_string(i)},
                     {"system_a", "sys_left"},
                     {"caption_b", "second " + std::to_string(i)},
                     {"system_b", "sys_right"}}
                    .dump() +
                "\n";
    }
    corpus += R"({"item_id":"s0","kind":"single","image":"x.png",)"
              R"("caption":"lonely","system":"sys_solo"})"
              "\n";
    testing::WriteFile(dir_.File("corpus.jsonl"), corpus);
    ServiceConfig config;
    config.corpus_path = dir_.File("corpus.jsonl");
    config.log_path = dir_.File("log.jsonl");
    config.annotators_per_item = 2;
    config.quorum = 1;
    config.clock = "logical";
    config.admin_token_env = "HUMORCHAIN_TEST_ADMIN";
    service_ = std::make_unique<AnnotationService>(config);
    server_ = std::make_unique<AnnotationServer>(*service_);
    ASSERT_TRUE(server_->Bind("127.0.0.1", 0));
    thread_ = std::thread([this] { server_->Serve(); });
    client_ = std::make_unique<httplib::Client>("127.0.0.1", server_->port());
    for (int i = 0; i < 100 && !client_->Get("/api/health"); ++i) {
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
  }

  void TearDown() override {
    server_->Stop();
    thread_.join();
  }

  Json PostJson(const std::string& path, const Json& body, int* status) {
    auto res = client_->Post(path, body.dump(), "application/json");
    *status = res ? res->status : -1;
    return res && !res->body.empty() ? Json::parse(res->body) : Json();
  }

  Json GetJson(const std::string& path, const httplib::Headers& headers,
               int* status) {
    auto res = client_->Get(path, headers);
    *status = res ? res->status : -1;
    return res && res->status == 200 ? Json::parse(res->body) : Json();
  }

  std::string Session(const std::string& who) {
    int status;
    Json j = PostJson("/api/session", {{"annotator_id", who}}, &status);
    EXPECT_EQ(status, 200);
    return j["token"].get<std::string>();
  }

  testing::TempDir dir_;
  std::unique_ptr<AnnotationService> service_;
  std::unique_ptr<AnnotationServer> server_;
  std::unique_ptr<httplib::Client> client_;
  std::thread thread_;
};

TEST_F(AnnotationHttpTest, Health) {
  int status;
  EXPECT_EQ(GetJson("/api/health", {}, &status)["status"], "ok");
  EXPECT_EQ(status, 200);
}

TEST_F(AnnotationHttpTest, TaskFlow) {
  const std::string token = Session("ann1");
  const httplib::Headers auth{{"X-Session-Token", token}};
  int status;

  GetJson("/api/tasks/next?annotator=ann1", {}, &status);
  EXPECT_EQ(status, 401);
  GetJson("/api/tasks/next?annotator=ann1", {{"X-Session-Token", "bogus"}},
          &status);
  EXPECT_EQ(status, 400);
  GetJson("/api/tasks/next?annotator=ghost", auth, &status);
  EXPECT_EQ(status, 404);

  Json next = GetJson("/api/tasks/next?annotator=ann1", auth, &status);
  ASSERT_EQ(status, 200);
  EXPECT_FALSE(next["done"].get<bool>());
  const Json task = next["task"];
  EXPECT_EQ(GetJson("/api/tasks/next?annotator=ann1", auth, &status)["task"],
            task);
  for (const char* sys : {"sys_left", "sys_right", "sys_solo"}) {
    EXPECT_EQ(next.dump().find(sys), std::string::npos);
  }

  const bool single = task["kind"] == "single";
  Json judgment = {{"judgment_id", "j1"},
                   {"task_id", task["task_id"]},
                   {"annotator_id", "ann1"},
                   {"token", token}};
  if (single) {
    judgment["verdict"] = 1;
  } else {
    judgment["verdict"] = "a_wins";
  }
  Json ack = PostJson("/api/judgments", judgment, &status);
  EXPECT_EQ(status, 200);
  EXPECT_EQ(ack["status"], "stored");
  ack = PostJson("/api/judgments", judgment, &status);
  EXPECT_EQ(status, 200);
  EXPECT_EQ(ack["status"], "duplicate");

  judgment["judgment_id"] = "j2";
  PostJson("/api/judgments", judgment, &status);
  EXPECT_EQ(status, 409);
  judgment["task_id"] = "no-such-task";
  PostJson("/api/judgments", judgment, &status);
  EXPECT_EQ(status, 404);
  PostJson("/api/judgments", {{"judgment_id", "j3"}}, &status);
  EXPECT_EQ(status, 401);
  auto res = client_->Post("/api/judgments", "{not json", "application/json");
  EXPECT_EQ(res->status, 400);

  Json progress = GetJson("/api/progress?annotator=ann1", {}, &status);
  EXPECT_EQ(progress["annotators"]["ann1"]["judged"], 1);
  EXPECT_EQ(progress["annotators"]["ann1"]["remaining"], 3);
  EXPECT_EQ(service_->stored_judgments(), 1u);
}

TEST_F(AnnotationHttpTest, AdminEndpointsNeedToken) {
  int status;
  ::unsetenv("HUMORCHAIN_TEST_ADMIN");
  GetJson("/api/ratings", {{"Authorization", "Bearer anything"}}, &status);
  EXPECT_EQ(status, 403);

  ::setenv("HUMORCHAIN_TEST_ADMIN", "s3cret", 1);
  GetJson("/api/ratings", {}, &status);
  EXPECT_EQ(status, 403);
  GetJson("/api/export", {{"Authorization", "Bearer wrong"}}, &status);
  EXPECT_EQ(status, 403);

  const std::string token = Session("ann1");
  const httplib::Headers auth{{"X-Session-Token", token}};
  while (true) {
    Json next = GetJson("/api/tasks/next?annotator=ann1", auth, &status);
    if (next["done"].get<bool>()) break;
    const Json& task = next["task"];
    Json body = {{"judgment_id", "j-" + task["task_id"].get<std::string>()},
                 {"task_id", task["task_id"]},
                 {"annotator_id", "ann1"},
                 {"verdict", task["kind"] == "single" ? "1" : "tie"}};
    client_->Post("/api/judgments", auth, body.dump(), "application/json");
  }

  const httplib::Headers admin{{"Authorization", "Bearer s3cret"}};
  Json ratings = GetJson("/api/ratings", admin, &status);
  EXPECT_EQ(status, 200);
  EXPECT_EQ(ratings["matches"], 3);
  EXPECT_EQ(ratings["humor_mean"]["sys_solo"], 1.0);
  auto res = client_->Get("/api/export", admin);
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  int judgments = 0;
  size_t pos = 0;
  while ((pos = res->body.find("\"type\":\"judgment\"", pos)) != std::string::npos) {
    ++judgments;
    ++pos;
  }
  EXPECT_EQ(judgments, 4);
  ::unsetenv("HUMORCHAIN_TEST_ADMIN");
}

TEST(AnnotationServerTest, BindFailsOnBusyPort) {
  testing::TempDir dir;
  testing::WriteFile(dir.File("c.jsonl"),
                     R"({"item_id":"a","kind":"single","image":"i","caption":"c","system":"s"})"
                     "\n");
  ServiceConfig config;
  config.corpus_path = dir.File("c.jsonl");
  config.log_path = dir.File("l.jsonl");
  config.annotators_per_item = 1;
  config.quorum = 1;
  AnnotationService service(config);
  AnnotationServer first(service);
  ASSERT_TRUE(first.Bind("127.0.0.1", 0));
  AnnotationServer second(service);
  EXPECT_FALSE(second.Bind("127.0.0.1", first.port()));
}

}  // namespace
}  // namespace humorchain

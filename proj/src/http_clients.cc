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

#include <openssl/evp.h>

#include <cstdlib>
#include <filesystem>

// Eigen users come first: <resolv.h>, pulled in by httplib, defines `_res`.
#include "humorchain/annotation.h"
#include "humorchain/errors.h"
#include "humorchain/llm.h"
#include "humorchain/metrics.h"
#include "humorchain/util.h"

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

namespace humorchain {

namespace {

std::string Base64(std::string_view data) {
  std::string out(4 * ((data.size() + 2) / 3), '\0');
  int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()),
                          reinterpret_cast<const unsigned char*>(data.data()),
                          static_cast<int>(data.size()));
  out.resize(n);
  return out;
}

std::string MimeFor(const std::string& path) {
  auto dot = path.rfind('.');
  std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
  for (char& c : ext) c = static_cast<char>(std::tolower(c));
  if (ext == "png") return "image/png";
  if (ext == "gif") return "image/gif";
  if (ext == "webp") return "image/webp";
  return "image/jpeg";
}

bool IsUrl(const std::string& source) {
  return source.rfind("http://", 0) == 0 || source.rfind("https://", 0) == 0 ||
         source.rfind("data:", 0) == 0;
}

Json ImagePart(const std::string& source, ImageTransport transport) {
  std::string url = source;
  if (transport == ImageTransport::kBase64 && !IsUrl(source)) {
    url = "data:" + MimeFor(source) + ";base64," + Base64(ReadFile(source));
  }
  return Json{{"type", "image_url"}, {"image_url", {{"url", url}}}};
}

}  // namespace

Json BuildChatRequestBody(const CompletionRequest& request,
                          ImageTransport transport) {
  Json messages = Json::array();
  for (const ChatTurn& turn : request.turns) {
    Json content = Json::array();
    for (const ContentPart& part : turn.parts) {
      if (part.kind == ContentPart::Kind::kText) {
        content.push_back({{"type", "text"}, {"text", part.text}});
      } else {
        content.push_back(ImagePart(part.image_source, transport));
      }
    }
    messages.push_back({{"role", ToString(turn.role)}, {"content", content}});
  }
  const SamplingParams& p = request.params;
  Json body = {{"model", request.model},
               {"messages", messages},
               {"temperature", p.temperature},
               {"max_tokens", p.max_tokens}};
  if (p.top_p) body["top_p"] = *p.top_p;
  if (p.top_k) body["top_k"] = *p.top_k;
  if (p.seed) body["seed"] = *p.seed;
  if (p.repetition_penalty) body["repetition_penalty"] = *p.repetition_penalty;
  if (p.presence_penalty) body["presence_penalty"] = *p.presence_penalty;
  return body;
}

std::string ParseChatResponseBody(std::string_view body) {
  Json j;
  try {
    j = Json::parse(body);
  } catch (const nlohmann::json::parse_error&) {
    throw Error(ErrorCode::kSchema,
                "chat response is not JSON: " + std::string(body));
  }
  try {
    const Json& content = j.at("choices").at(0).at("message").at("content");
    if (content.is_string()) return content.get<std::string>();
    // Some servers echo content as a list of text parts.
    std::string text;
    for (const Json& part : content) {
      if (part.value("type", "") == "text") text += part.value("text", "");
    }
    return text;
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorCode::kSchema,
                "chat response lacks choices[0].message.content: " +
                    std::string(body));
  }
}

HttpChatBackend::HttpChatBackend(BackendProfile profile)
    : profile_(std::move(profile)) {
  const std::string& url = profile_.endpoint;
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorCode::kConfig, "endpoint must be an absolute URL: " + url);
  }
  auto path_start = url.find('/', scheme_end + 3);
  scheme_host_port_ = url.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/" : url.substr(path_start);
}

std::string HttpChatBackend::Send(const CompletionRequest& request) {
  httplib::Client client(scheme_host_port_);
  auto secs = static_cast<time_t>(profile_.timeout_seconds);
  auto usecs = static_cast<time_t>(
      (profile_.timeout_seconds - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);

  httplib::Headers headers;
  if (!profile_.auth_env.empty()) {
    if (const char* token = std::getenv(profile_.auth_env.c_str())) {
      headers.emplace("Authorization", std::string("Bearer ") + token);
    }
  }
  CompletionRequest wire = request;
  if (wire.model.empty()) wire.model = profile_.model;
  std::string body =
      BuildChatRequestBody(wire, profile_.image_transport).dump();
  auto res = client.Post(path_, headers, body, "application/json");
  if (!res) {
    if (res.error() == httplib::Error::Read ||
        res.error() == httplib::Error::ConnectionTimeout) {
      throw Error(ErrorCode::kTimeout,
                  "request to " + profile_.endpoint + " timed out");
    }
    throw Error(ErrorCode::kTransport, "request to " + profile_.endpoint +
                                           " failed: " +
                                           httplib::to_string(res.error()));
  }
  if (res->status < 200 || res->status >= 300) {
    throw BackendError(res->status, res->body);
  }
  return ParseChatResponseBody(res->body);
}

// ---------------------------------------------------------------------------
// Embedding provider

HttpEmbeddingProvider::HttpEmbeddingProvider(std::string endpoint,
                                             std::string auth_env,
                                             double timeout_seconds)
    : endpoint_(std::move(endpoint)),
      auth_env_(std::move(auth_env)),
      timeout_seconds_(timeout_seconds) {
  if (endpoint_.find("://") == std::string::npos) {
    throw Error(ErrorCode::kConfig,
                "embedding endpoint must be an absolute URL: " + endpoint_);
  }
}

Eigen::VectorXd HttpEmbeddingProvider::Request(std::string_view kind,
                                               std::string_view payload) {
  auto scheme_end = endpoint_.find("://");
  auto path_start = endpoint_.find('/', scheme_end + 3);
  httplib::Client client(endpoint_.substr(0, path_start));
  auto secs = static_cast<time_t>(timeout_seconds_);
  client.set_connection_timeout(secs, 0);
  client.set_read_timeout(secs, 0);
  httplib::Headers headers;
  if (!auth_env_.empty()) {
    if (const char* token = std::getenv(auth_env_.c_str())) {
      headers.emplace("Authorization", std::string("Bearer ") + token);
    }
  }
  Json body = {{"kind", kind}, {"payload", payload}};
  auto res = client.Post(
      path_start == std::string::npos ? "/" : endpoint_.substr(path_start),
      headers, body.dump(), "application/json");
  if (!res) {
    throw Error(ErrorCode::kTransport, "embedding request failed: " +
                                           httplib::to_string(res.error()));
  }
  if (res->status < 200 || res->status >= 300) {
    throw BackendError(res->status, res->body);
  }
  std::vector<double> values;
  try {
    values = Json::parse(res->body).at("vector").get<std::vector<double>>();
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorCode::kSchema,
                "embedding response lacks a numeric 'vector': " + res->body);
  }
  Eigen::VectorXd v =
      Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
  if (v.size() == 0 || v.norm() == 0) {
    throw Error(ErrorCode::kSchema, "embedding response vector is empty or zero");
  }
  return v.normalized();
}

Eigen::VectorXd HttpEmbeddingProvider::EmbedText(std::string_view text) {
  return Request("text", text);
}

Eigen::VectorXd HttpEmbeddingProvider::EmbedImage(const ImageRecord& image) {
  return Request("image", image.source);
}

namespace {

int StatusFor(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNotFound: return 404;
    case ErrorCode::kConflict: return 409;
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kEnum:
    case ErrorCode::kSchema:
    case ErrorCode::kParse: return 400;
    default: return 500;
  }
}

void Reply(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void ReplyError(httplib::Response& res, const Error& e) {
  Reply(res, StatusFor(e.code()),
        {{"error", ErrorCodeName(e.code())}, {"message", e.what()}});
}

std::string SessionToken(const httplib::Request& req, const Json* body) {
  if (req.has_header("X-Session-Token")) return req.get_header_value("X-Session-Token");
  if (body != nullptr && body->contains("token")) {
    return body->at("token").get<std::string>();
  }
  return req.get_param_value("token");
}

std::string VerdictText(const Json& v) {
  if (v.is_number_integer()) return std::to_string(v.get<int64_t>());
  if (v.is_string()) return v.get<std::string>();
  throw Error(ErrorCode::kInvalidArgument, "verdict must be a string or 0/1");
}

}  // namespace

struct AnnotationServer::Impl {
  explicit Impl(AnnotationService& s) : service(s) {}

  // Aggregate endpoints are closed unless the configured variable is set and
  // the request presents its value as a bearer token.
  bool Admin(const httplib::Request& req, httplib::Response& res) const {
    const char* expected = std::getenv(service.config().admin_token_env.c_str());
    if (expected == nullptr || *expected == '\0') {
      Reply(res, 403, {{"error", "forbidden"},
                       {"message", "aggregate endpoints are disabled"}});
      return false;
    }
    if (req.get_header_value("Authorization") !=
        std::string("Bearer ") + expected) {
      Reply(res, 403, {{"error", "forbidden"}, {"message", "admin token required"}});
      return false;
    }
    return true;
  }

  void Routes() {
    server.Get("/api/health", [](const httplib::Request&, httplib::Response& res) {
      Reply(res, 200, {{"status", "ok"}});
    });

    server.Post("/api/session", [this](const httplib::Request& req,
                                       httplib::Response& res) {
      try {
        const Json body = Json::parse(req.body);
        const std::string id = body.at("annotator_id").get<std::string>();
        Reply(res, 200, {{"annotator_id", id}, {"token", service.OpenSession(id)}});
      } catch (const Error& e) {
        ReplyError(res, e);
      } catch (const nlohmann::json::exception& e) {
        Reply(res, 400, {{"error", "bad_request"}, {"message", e.what()}});
      }
    });

    server.Get("/api/tasks/next", [this](const httplib::Request& req,
                                         httplib::Response& res) {
      const std::string id = req.get_param_value("annotator");
      const std::string token = SessionToken(req, nullptr);
      if (token.empty()) {
        Reply(res, 401, {{"error", "unauthorized"}, {"message", "session token required"}});
        return;
      }
      try {
        auto task = service.NextTask(id, token);
        if (task) {
          Reply(res, 200, {{"task", ClientTaskJson(*task)}, {"done", false}});
        } else {
          Reply(res, 200, {{"task", nullptr}, {"done", true}});
        }
      } catch (const Error& e) {
        ReplyError(res, e);
      }
    });

    server.Post("/api/judgments", [this](const httplib::Request& req,
                                         httplib::Response& res) {
      try {
        const Json body = Json::parse(req.body);
        const std::string token = SessionToken(req, &body);
        if (token.empty()) {
          Reply(res, 401, {{"error", "unauthorized"}, {"message", "session token required"}});
          return;
        }
        JudgmentRecord r;
        r.judgment_id = body.at("judgment_id").get<std::string>();
        r.task_id = body.at("task_id").get<std::string>();
        r.annotator_id = body.at("annotator_id").get<std::string>();
        r.verdict = VerdictText(body.at("verdict"));
        const SubmitAck ack = service.SubmitJudgment(r, token);
        Reply(res, 200, {{"judgment_id", ack.judgment_id},
                         {"status", ack.duplicate ? "duplicate" : "stored"}});
      } catch (const Error& e) {
        ReplyError(res, e);
      } catch (const nlohmann::json::exception& e) {
        Reply(res, 400, {{"error", "bad_request"}, {"message", e.what()}});
      }
    });

    server.Get("/api/progress", [this](const httplib::Request& req,
                                       httplib::Response& res) {
      std::optional<std::string> id;
      if (req.has_param("annotator")) id = req.get_param_value("annotator");
      Reply(res, 200, ProgressJson(service.GetProgress(id)));
    });

    server.Get("/api/ratings", [this](const httplib::Request& req,
                                      httplib::Response& res) {
      if (!Admin(req, res)) return;
      try {
        Reply(res, 200, service.Aggregates());
      } catch (const Error& e) {
        ReplyError(res, e);
      }
    });

    server.Get("/api/export", [this](const httplib::Request& req,
                                     httplib::Response& res) {
      if (!Admin(req, res)) return;
      std::string out;
      for (const Json& event : service.ExportLog()) out += event.dump() + "\n";
      res.status = 200;
      res.set_content(out, "application/x-ndjson");
    });

    const std::string& dir = service.config().static_dir;
    if (!dir.empty() && std::filesystem::is_directory(dir)) {
      server.set_mount_point("/", dir);
    }
  }

  AnnotationService& service;
  httplib::Server server;
};

AnnotationServer::AnnotationServer(AnnotationService& service)
    : impl_(std::make_unique<Impl>(service)) {
  // httplib's default adds SO_REUSEPORT, which lets a second server share a
  // busy port silently.
  impl_->server.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });
  impl_->Routes();
}

AnnotationServer::~AnnotationServer() { Stop(); }

bool AnnotationServer::Bind(const std::string& host, int port) {
  if (port == 0) {
    port_ = impl_->server.bind_to_any_port(host);
    return port_ > 0;
  }
  if (!impl_->server.bind_to_port(host, port)) return false;
  port_ = port;
  return true;
}

void AnnotationServer::Serve() { impl_->server.listen_after_bind(); }

void AnnotationServer::Stop() {
  if (impl_) impl_->server.stop();
}

}  // namespace humorchain

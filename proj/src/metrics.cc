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

#include "humorchain/metrics.h"

#include <cctype>
#include <map>
#include <random>
#include <set>

#include "humorchain/judge.h"
#include "humorchain/util.h"

namespace humorchain {

namespace {

bool IsPunct(unsigned char c) { return std::ispunct(c) != 0; }

}  // namespace

TokenSeq Tokenize(std::string_view caption) {
  TokenSeq tokens;
  size_t i = 0;
  while (i < caption.size()) {
    while (i < caption.size() &&
           std::isspace(static_cast<unsigned char>(caption[i]))) {
      ++i;
    }
    size_t start = i;
    while (i < caption.size() &&
           !std::isspace(static_cast<unsigned char>(caption[i]))) {
      ++i;
    }
    size_t b = start;
    size_t e = i;
    while (b < e && IsPunct(static_cast<unsigned char>(caption[b]))) ++b;
    while (e > b && IsPunct(static_cast<unsigned char>(caption[e - 1]))) --e;
    if (b < e) {
      std::string token(caption.substr(b, e - b));
      for (char& c : token) {
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      }
      tokens.push_back(std::move(token));
    }
  }
  return tokens;
}

std::optional<double> DistinctN(std::span<const TokenSeq> corpus, int n) {
  if (n < 1) throw Error(ErrorCode::kInvalidArgument, "n must be >= 1");
  std::set<std::vector<std::string>> unique;
  int64_t total = 0;
  for (const TokenSeq& seq : corpus) {
    if (seq.size() < static_cast<size_t>(n)) continue;
    for (size_t i = 0; i + n <= seq.size(); ++i) {
      unique.emplace(seq.begin() + i, seq.begin() + i + n);
      ++total;
    }
  }
  if (total == 0) return std::nullopt;
  return static_cast<double>(unique.size()) / static_cast<double>(total);
}

double HumorMean(std::span<const int> labels) {
  if (labels.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "humor mean of no labels");
  }
  double sum = 0;
  for (int l : labels) sum += l;
  return sum / static_cast<double>(labels.size());
}

Eigen::VectorXd MockEmbeddingProvider::Seeded(std::string_view key) const {
  std::mt19937_64 rng(StableHash64(key));
  Eigen::VectorXd v(dim_);
  // Map raw 64-bit draws to [-1, 1) directly; distribution objects are not
  // portable across standard libraries.
  for (int i = 0; i < dim_; ++i) {
    v(i) = static_cast<double>(rng() >> 11) * 0x1.0p-52 - 1.0;
  }
  if (v.norm() == 0) v(0) = 1;
  return v.normalized();
}

Eigen::VectorXd MockEmbeddingProvider::EmbedText(std::string_view text) {
  return Seeded("text:" + std::string(text));
}

Eigen::VectorXd MockEmbeddingProvider::EmbedImage(const ImageRecord& image) {
  return Seeded("image:" + image.id);
}

Eigen::MatrixXd EmbedTokens(const TokenSeq& tokens, EmbeddingProvider& provider) {
  if (tokens.empty()) return Eigen::MatrixXd();
  Eigen::VectorXd first = provider.EmbedText(tokens.front());
  Eigen::MatrixXd m(first.size(), static_cast<Eigen::Index>(tokens.size()));
  m.col(0) = first;
  for (size_t i = 1; i < tokens.size(); ++i) {
    m.col(static_cast<Eigen::Index>(i)) = provider.EmbedText(tokens[i]);
  }
  return m;
}

std::optional<double> EmbeddingAverage(const TokenSeq& candidate,
                                       const TokenSeq& reference,
                                       EmbeddingProvider& provider) {
  if (candidate.empty() || reference.empty()) {
    throw Error(ErrorCode::kInvalidArgument,
                "embedding average needs non-empty token sequences");
  }
  return EmbeddingAverageOf(EmbedTokens(candidate, provider),
                            EmbedTokens(reference, provider));
}

double GreedyMatching(const TokenSeq& candidate, const TokenSeq& reference,
                      EmbeddingProvider& provider) {
  if (candidate.empty() || reference.empty()) {
    throw Error(ErrorCode::kInvalidArgument,
                "greedy matching needs non-empty token sequences");
  }
  return GreedyMatchingOf(EmbedTokens(candidate, provider),
                          EmbedTokens(reference, provider));
}

double CrossSimilarityMean(std::span<const std::string> captions,
                           EmbeddingProvider& provider) {
  if (captions.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument,
                "cross similarity needs at least 2 captions");
  }
  Eigen::VectorXd first = provider.EmbedText(captions.front());
  Eigen::MatrixXd m(first.size(), static_cast<Eigen::Index>(captions.size()));
  m.col(0) = first;
  for (size_t i = 1; i < captions.size(); ++i) {
    m.col(static_cast<Eigen::Index>(i)) = provider.EmbedText(captions[i]);
  }
  return CrossSimilarityMeanOf(m);
}

namespace {

Json ValueOr(const std::optional<double>& v, const char* missing) {
  return v ? Json(*v) : Json(missing);
}

std::optional<double> Mean(const std::vector<double>& xs) {
  if (xs.empty()) return std::nullopt;
  double s = 0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

}  // namespace

Json SingleCaptionReport(std::span<const CaptionRow> captions,
                         std::span<const LabelRow> labels,
                         EmbeddingProvider* provider,
                         const SingleEvalOptions& options) {
  std::map<std::string, std::vector<const CaptionRow*>> by_system;
  for (const CaptionRow& row : captions) by_system[row.system].push_back(&row);
  std::map<std::string, std::vector<int>> labels_by_system;
  for (const LabelRow& row : labels) {
    int label = row.votes.size() == 1 ? row.votes.front()
                                      : QuorumLabel(row.votes, options.quorum);
    labels_by_system[row.system].push_back(label);
    by_system.try_emplace(row.system);
  }

  Json systems = Json::array();
  for (const auto& [system, rows] : by_system) {
    Json entry = {{"system", system}, {"captions", rows.size()}};
    const auto& sys_labels = labels_by_system[system];
    entry["humor_mean"] = sys_labels.empty()
                              ? Json("undefined")
                              : Json(HumorMean(sys_labels));

    std::vector<TokenSeq> corpus;
    for (const CaptionRow* r : rows) corpus.push_back(Tokenize(r->caption));
    entry["distinct_1"] = ValueOr(DistinctN(corpus, 1), "undefined");
    entry["distinct_2"] = ValueOr(DistinctN(corpus, 2), "undefined");

    if (provider == nullptr) {
      for (const char* col : {"clip_score", "ea", "gm", "cross_similarity"}) {
        entry[col] = "unavailable";
      }
    } else {
      std::vector<double> clip, ea, gm;
      std::vector<std::string> texts;
      for (size_t i = 0; i < rows.size(); ++i) {
        const CaptionRow& r = *rows[i];
        texts.push_back(r.caption);
        ImageRecord image{r.image_id, r.image_source, ""};
        clip.push_back(ClipStyleScore(provider->EmbedImage(image),
                                      provider->EmbedText(r.caption),
                                      options.clip_rescale));
        const TokenSeq ref = Tokenize(r.reference);
        if (!corpus[i].empty() && !ref.empty()) {
          if (auto v = EmbeddingAverage(corpus[i], ref, *provider)) {
            ea.push_back(*v);
          }
          gm.push_back(GreedyMatching(corpus[i], ref, *provider));
        }
      }
      entry["clip_score"] = ValueOr(Mean(clip), "undefined");
      entry["ea"] = ValueOr(Mean(ea), "undefined");
      entry["gm"] = ValueOr(Mean(gm), "undefined");
      entry["cross_similarity"] =
          texts.size() >= 2 ? Json(CrossSimilarityMean(texts, *provider))
                            : Json("undefined");
    }
    systems.push_back(entry);
  }
  return Json{{"systems", systems},
              {"tokenizer", "lowercase, whitespace split, edge punctuation "
                            "stripped"},
              {"clip_rescale", options.clip_rescale}};
}

std::vector<CaptionRow> LoadCaptionRows(const std::string& path) {
  std::vector<CaptionRow> rows;
  int line = 0;
  for (const Json& j : ReadJsonLines(path)) {
    ++line;
    try {
      CaptionRow r;
      r.system = j.at("system").get<std::string>();
      r.image_id = j.at("image_id").get<std::string>();
      r.image_source = j.value("image", r.image_id);
      r.caption = j.at("caption").get<std::string>();
      r.reference = j.value("description", std::string());
      rows.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kSchema,
                  path + ":" + std::to_string(line) + ": " + e.what());
    }
  }
  return rows;
}

std::vector<LabelRow> LoadLabelRows(const std::string& path) {
  std::vector<LabelRow> rows;
  int line = 0;
  for (const Json& j : ReadJsonLines(path)) {
    ++line;
    try {
      LabelRow r;
      r.system = j.at("system").get<std::string>();
      r.image_id = j.value("image_id", std::string());
      if (j.contains("votes")) {
        r.votes = j.at("votes").get<std::vector<int>>();
      } else {
        r.votes = {j.at("label").get<int>()};
      }
      for (int v : r.votes) {
        if (v != 0 && v != 1) {
          throw Error(ErrorCode::kEnum, path + ":" + std::to_string(line) +
                                            ": labels must be 0 or 1");
        }
      }
      if (r.votes.empty()) {
        throw Error(ErrorCode::kSchema,
                    path + ":" + std::to_string(line) + ": empty votes");
      }
      rows.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::kSchema,
                  path + ":" + std::to_string(line) + ": " + e.what());
    }
  }
  return rows;
}

}  // namespace humorchain

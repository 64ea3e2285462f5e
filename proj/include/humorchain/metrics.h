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

#ifndef HUMORCHAIN_METRICS_H_
#define HUMORCHAIN_METRICS_H_

#include <algorithm>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "humorchain/errors.h"
#include "humorchain/types.h"

namespace humorchain {

using TokenSeq = std::vector<std::string>;

// Lowercases, splits on whitespace and strips leading/trailing punctuation
// from each token; internal punctuation ("won't") is kept. Empty tokens are
// dropped.
TokenSeq Tokenize(std::string_view caption);

// Unique n-grams over total n-grams across the whole corpus. nullopt when the
// corpus has no n-gram of that order.
std::optional<double> DistinctN(std::span<const TokenSeq> corpus, int n);

// Arithmetic mean of 0/1 labels. Throws Error(kInvalidArgument) when empty.
double HumorMean(std::span<const int> labels);

// --- Vector metrics, templated on the Eigen expression type. -------------

// Cosine similarity; nullopt if either vector is zero.
template <typename DerivedA, typename DerivedB>
std::optional<typename DerivedA::Scalar> Cosine(
    const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  const Scalar na = a.norm();
  const Scalar nb = b.norm();
  if (na == Scalar(0) || nb == Scalar(0)) return std::nullopt;
  return a.dot(b) / (na * nb);
}

// Token embeddings are the columns of each matrix. Cosine between the mean
// token vectors; nullopt when a mean vector is zero.
template <typename DerivedA, typename DerivedB>
std::optional<typename DerivedA::Scalar> EmbeddingAverageOf(
    const Eigen::MatrixBase<DerivedA>& candidate,
    const Eigen::MatrixBase<DerivedB>& reference) {
  if (candidate.cols() == 0 || reference.cols() == 0) {
    throw Error(ErrorCode::kInvalidArgument,
                "embedding average needs non-empty token sequences");
  }
  return Cosine(candidate.rowwise().mean(), reference.rowwise().mean());
}

// Mean over candidate tokens of the best cosine against any reference token,
// averaged with the same quantity in the other direction.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar GreedyMatchingOf(
    const Eigen::MatrixBase<DerivedA>& candidate,
    const Eigen::MatrixBase<DerivedB>& reference) {
  using Scalar = typename DerivedA::Scalar;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if (candidate.cols() == 0 || reference.cols() == 0) {
    throw Error(ErrorCode::kInvalidArgument,
                "greedy matching needs non-empty token sequences");
  }
  Matrix c = candidate;
  Matrix r = reference;
  c.colwise().normalize();
  r.colwise().normalize();
  const Matrix sim = c.transpose() * r;  // |cand| x |ref|
  const Scalar forward = sim.rowwise().maxCoeff().mean();
  const Scalar backward = sim.colwise().maxCoeff().mean();
  return (forward + backward) / Scalar(2);
}

// rescale * max(cos(image, text), 0).
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar ClipStyleScore(
    const Eigen::MatrixBase<DerivedA>& image_vec,
    const Eigen::MatrixBase<DerivedB>& text_vec,
    typename DerivedA::Scalar rescale = 1) {
  using Scalar = typename DerivedA::Scalar;
  if (image_vec.size() != text_vec.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "image and text embeddings differ in dimension");
  }
  auto cos = Cosine(image_vec, text_vec);
  return rescale * std::max(cos.value_or(Scalar(0)), Scalar(0));
}

// Mean pairwise cosine over all unordered pairs of columns.
template <typename Derived>
typename Derived::Scalar CrossSimilarityMeanOf(
    const Eigen::MatrixBase<Derived>& sentences) {
  using Scalar = typename Derived::Scalar;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const Eigen::Index n = sentences.cols();
  if (n < 2) {
    throw Error(ErrorCode::kInvalidArgument,
                "cross similarity needs at least 2 captions");
  }
  Matrix u = sentences;
  u.colwise().normalize();
  const Matrix gram = u.transpose() * u;
  const Scalar off_diagonal = gram.sum() - gram.trace();
  return off_diagonal / Scalar(n * (n - 1));
}

// --- Embedding providers. ------------------------------------------------

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  // Unit vectors of a fixed dimension per provider.
  virtual Eigen::VectorXd EmbedText(std::string_view text) = 0;
  virtual Eigen::VectorXd EmbedImage(const ImageRecord& image) = 0;
};

// Token -> unit vector seeded from a stable hash of the text. Deterministic
// across runs and platforms.
class MockEmbeddingProvider : public EmbeddingProvider {
 public:
  explicit MockEmbeddingProvider(int dim = 16) : dim_(dim) {}
  Eigen::VectorXd EmbedText(std::string_view text) override;
  Eigen::VectorXd EmbedImage(const ImageRecord& image) override;

 private:
  Eigen::VectorXd Seeded(std::string_view key) const;
  int dim_;
};

// POST {"kind": "text"|"image", "payload": ...} -> {"vector": [...]}.
// Returned vectors are normalized.
class HttpEmbeddingProvider : public EmbeddingProvider {
 public:
  HttpEmbeddingProvider(std::string endpoint, std::string auth_env,
                        double timeout_seconds = 30.0);
  Eigen::VectorXd EmbedText(std::string_view text) override;
  Eigen::VectorXd EmbedImage(const ImageRecord& image) override;

 private:
  Eigen::VectorXd Request(std::string_view kind, std::string_view payload);
  std::string endpoint_;
  std::string auth_env_;
  double timeout_seconds_;
};

// d x n matrix of token embeddings.
Eigen::MatrixXd EmbedTokens(const TokenSeq& tokens, EmbeddingProvider& provider);

std::optional<double> EmbeddingAverage(const TokenSeq& candidate,
                                       const TokenSeq& reference,
                                       EmbeddingProvider& provider);
double GreedyMatching(const TokenSeq& candidate, const TokenSeq& reference,
                      EmbeddingProvider& provider);
double CrossSimilarityMean(std::span<const std::string> captions,
                           EmbeddingProvider& provider);

// --- Single-caption report. ----------------------------------------------

struct CaptionRow {
  std::string system;
  std::string image_id;
  std::string image_source;
  std::string caption;
  std::string reference;  // scene description used for EA/GM
};

struct LabelRow {
  std::string system;
  std::string image_id;
  std::vector<int> votes;  // a single label is one vote
};

struct SingleEvalOptions {
  int quorum = 2;           // applied when a label row has several votes
  double clip_rescale = 1;  // 2.5 for the original CLIPScore convention
};

// One row per system: humor_mean, clip_score, ea, gm, distinct_1,
// distinct_2, cross_similarity. Columns that need embeddings are
// "unavailable" when `provider` is null; undefined values are "undefined".
Json SingleCaptionReport(std::span<const CaptionRow> captions,
                         std::span<const LabelRow> labels,
                         EmbeddingProvider* provider,
                         const SingleEvalOptions& options = {});

std::vector<CaptionRow> LoadCaptionRows(const std::string& path);
std::vector<LabelRow> LoadLabelRows(const std::string& path);

}  // namespace humorchain

#endif  // HUMORCHAIN_METRICS_H_

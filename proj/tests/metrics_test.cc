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

#include <cmath>
#include <map>
#include <random>
#include <set>

#include "humorchain/metrics.h"
#include "test_support.h"

namespace humorchain {
namespace {

// Hand-built 2-D embeddings. Unknown text maps to the x axis.
class FixtureProvider : public EmbeddingProvider {
 public:
  FixtureProvider(std::map<std::string, Eigen::Vector2d> text,
                  std::map<std::string, Eigen::Vector2d> images = {})
      : text_(std::move(text)), images_(std::move(images)) {}

  Eigen::VectorXd EmbedText(std::string_view text) override {
    auto it = text_.find(std::string(text));
    return it == text_.end() ? Eigen::Vector2d(1, 0) : it->second;
  }
  Eigen::VectorXd EmbedImage(const ImageRecord& image) override {
    auto it = images_.find(image.id);
    return it == images_.end() ? Eigen::Vector2d(1, 0) : it->second;
  }

 private:
  std::map<std::string, Eigen::Vector2d> text_;
  std::map<std::string, Eigen::Vector2d> images_;
};

const double kHalfSqrt2 = std::sqrt(0.5);

TEST(TokenizeTest, Examples) {
  EXPECT_EQ(Tokenize("End of the month"),
            (TokenSeq{"end", "of", "the", "month"}));
  EXPECT_EQ(Tokenize("This won't hurt."), (TokenSeq{"this", "won't", "hurt"}));
  EXPECT_TRUE(Tokenize("").empty());
  EXPECT_TRUE(Tokenize(" ... !! ").empty());
  EXPECT_EQ(Tokenize("  \"Hello,\"\tWORLD!\n"), (TokenSeq{"hello", "world"}));
}

TEST(DistinctTest, Examples) {
  std::vector<TokenSeq> one{Tokenize("a b c")};
  EXPECT_DOUBLE_EQ(*DistinctN(one, 1), 1.0);
  EXPECT_DOUBLE_EQ(*DistinctN(one, 2), 1.0);

  std::vector<TokenSeq> two{Tokenize("a a b"), Tokenize("a c")};
  EXPECT_DOUBLE_EQ(*DistinctN(two, 1), 0.6);
  EXPECT_DOUBLE_EQ(*DistinctN(two, 2), 1.0);

  std::vector<TokenSeq> shorts{Tokenize("a"), Tokenize("")};
  EXPECT_FALSE(DistinctN(shorts, 2));
  EXPECT_THROW(DistinctN(shorts, 0), Error);
}

// Oracle: recount n-grams by joining tokens into one string key.
double NaiveDistinct(const std::vector<TokenSeq>& corpus, int n) {
  std::set<std::string> seen;
  double total = 0;
  for (const auto& seq : corpus) {
    for (int i = 0; i + n <= static_cast<int>(seq.size()); ++i) {
      std::string key;
      for (int k = 0; k < n; ++k) key += seq[i + k] + '\x1f';
      seen.insert(key);
      ++total;
    }
  }
  return seen.size() / total;
}

TEST(DistinctTest, RandomCorporaMatchRecount) {
  std::mt19937_64 rng(3);
  const std::vector<std::string> vocab{"a", "b", "c", "d", "e", "f"};
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<TokenSeq> corpus(1 + rng() % 5);
    for (auto& seq : corpus) {
      seq.resize(2 + rng() % 6);
      for (auto& t : seq) t = vocab[rng() % vocab.size()];
    }
    for (int n : {1, 2}) {
      EXPECT_NEAR(*DistinctN(corpus, n), NaiveDistinct(corpus, n), 1e-12);
    }
    // Duplicating a caption never raises distinct-n.
    auto doubled = corpus;
    doubled.push_back(corpus.front());
    EXPECT_LE(*DistinctN(doubled, 1), *DistinctN(corpus, 1) + 1e-12);
  }
}

TEST(HumorMeanTest, Examples) {
  std::vector<int> labels(81, 1);
  labels.insert(labels.end(), 19, 0);
  EXPECT_DOUBLE_EQ(HumorMean(labels), 0.81);
  EXPECT_THROW(HumorMean(std::vector<int>{}), Error);
}

TEST(VectorMetricsTest, CosineAndClip) {
  Eigen::Vector2d x(1, 0), y(0, 1), zero(0, 0);
  EXPECT_DOUBLE_EQ(*Cosine(x, x), 1.0);
  EXPECT_DOUBLE_EQ(*Cosine(x, y), 0.0);
  EXPECT_FALSE(Cosine(x, zero));

  Eigen::Vector2d image(1, 0);
  Eigen::Vector2d text(0.63, std::sqrt(1 - 0.63 * 0.63));
  EXPECT_NEAR(ClipStyleScore(image, text, 2.5), 1.575, 1e-12);
  EXPECT_DOUBLE_EQ(ClipStyleScore(image, Eigen::Vector2d(-1, 0), 2.5), 0.0);
  EXPECT_THROW(ClipStyleScore(Eigen::VectorXd::Ones(2), Eigen::VectorXd::Ones(3)),
               Error);
}

TEST(VectorMetricsTest, EmbeddingAverageAndGreedy) {
  Eigen::Matrix2d same;
  same << 1, 0, 0, 1;
  EXPECT_NEAR(*EmbeddingAverageOf(same, same), 1.0, 1e-12);
  EXPECT_NEAR(GreedyMatchingOf(same, same), 1.0, 1e-12);

  Eigen::MatrixXd x(2, 1), y(2, 1);
  x << 1, 0;
  y << 0, 1;
  EXPECT_NEAR(*EmbeddingAverageOf(x, y), 0.0, 1e-12);
  EXPECT_NEAR(GreedyMatchingOf(x, y), 0.0, 1e-12);

  // Candidate {x, y} against reference {x}: means (0.5, 0.5) and (1, 0).
  EXPECT_NEAR(*EmbeddingAverageOf(same, x), kHalfSqrt2, 1e-12);
  // Forward (1 + 0) / 2, backward 1.
  EXPECT_NEAR(GreedyMatchingOf(same, x), 0.75, 1e-12);

  Eigen::MatrixXd opposite(2, 2);
  opposite << 1, -1, 0, 0;
  EXPECT_FALSE(EmbeddingAverageOf(opposite, x));
  EXPECT_THROW(GreedyMatchingOf(Eigen::MatrixXd(2, 0), x), Error);
}

TEST(VectorMetricsTest, CrossSimilarity) {
  Eigen::MatrixXd m(2, 3);
  m << 1, 0, 1, 0, 1, 1;
  // Pairs: 0, 1/sqrt2, 1/sqrt2.
  EXPECT_NEAR(CrossSimilarityMeanOf(m), 2 * kHalfSqrt2 / 3, 1e-12);
  Eigen::MatrixXd repeated(2, 4);
  repeated.colwise() = Eigen::Vector2d(3, 4);
  EXPECT_NEAR(CrossSimilarityMeanOf(repeated), 1.0, 1e-12);
  EXPECT_THROW(CrossSimilarityMeanOf(Eigen::MatrixXd(2, 1)), Error);
}

TEST(VectorMetricsTest, ProviderWrappers) {
  FixtureProvider p({{"cat", {1, 0}}, {"dog", {0, 1}}, {"fox", {1, 1}}});
  EXPECT_NEAR(*EmbeddingAverage({"cat", "dog"}, {"cat"}, p), kHalfSqrt2, 1e-12);
  EXPECT_NEAR(GreedyMatching({"cat", "dog"}, {"cat"}, p), 0.75, 1e-12);
  std::vector<std::string> captions{"cat", "dog", "fox"};
  EXPECT_NEAR(CrossSimilarityMean(captions, p), 2 * kHalfSqrt2 / 3, 1e-12);
}

TEST(MockProviderTest, UnitNormAndDeterministic) {
  MockEmbeddingProvider a(16), b(16);
  for (const char* t : {"seagull", "wallet", "", "x"}) {
    Eigen::VectorXd v = a.EmbedText(t);
    EXPECT_EQ(v.size(), 16);
    EXPECT_NEAR(v.norm(), 1.0, 1e-12);
    EXPECT_EQ(v, b.EmbedText(t));
  }
  EXPECT_NE(a.EmbedText("seagull"), a.EmbedText("wallet"));
  ImageRecord img{"img_1", "img_1.png", ""};
  EXPECT_NEAR(a.EmbedImage(img).norm(), 1.0, 1e-12);
  EXPECT_NE(a.EmbedImage(img), a.EmbedText("img_1"));
}

TEST(SingleReportTest, ColumnsPerSystem) {
  std::vector<CaptionRow> captions{
      {"sys1", "i1", "i1.png", "cat dog", "cat"},
      {"sys1", "i2", "i2.png", "cat", "cat"},
      {"sys2", "i1", "i1.png", "fox", "cat"},
  };
  std::vector<LabelRow> labels{
      {"sys1", "i1", {1}},
      {"sys1", "i2", {0, 1, 1}},
      {"sys2", "i1", {1, 0, 0}},
  };
  FixtureProvider p({{"cat", {1, 0}}, {"dog", {0, 1}}, {"fox", {1, 1}},
                     {"cat dog", {0, 1}}},
                    {{"i1", {0, 1}}, {"i2", {1, 0}}});

  Json report = SingleCaptionReport(captions, labels, &p, {2, 2.5});
  const Json& s1 = report["systems"][0];
  const Json& s2 = report["systems"][1];
  EXPECT_EQ(s1["system"], "sys1");
  EXPECT_DOUBLE_EQ(s1["humor_mean"].get<double>(), 1.0);
  EXPECT_DOUBLE_EQ(s2["humor_mean"].get<double>(), 0.0);
  // Tokens {cat, dog, cat}: 2 unique of 3; bigram {cat dog} only.
  EXPECT_NEAR(s1["distinct_1"].get<double>(), 2.0 / 3, 1e-12);
  EXPECT_DOUBLE_EQ(s1["distinct_2"].get<double>(), 1.0);
  EXPECT_EQ(s2["distinct_2"], "undefined");
  // "cat dog" on i1 and "cat" on i2 both align perfectly: 2.5 each.
  EXPECT_NEAR(s1["clip_score"].get<double>(), 2.5, 1e-12);
  EXPECT_NEAR(s2["clip_score"].get<double>(), 2.5 * kHalfSqrt2, 1e-12);
  EXPECT_NEAR(s1["ea"].get<double>(), (kHalfSqrt2 + 1) / 2, 1e-12);
  EXPECT_NEAR(s1["gm"].get<double>(), (0.75 + 1) / 2, 1e-12);
  EXPECT_NEAR(s1["cross_similarity"].get<double>(), 0.0, 1e-12);
  EXPECT_EQ(s2["cross_similarity"], "undefined");

  Json bare = SingleCaptionReport(captions, labels, nullptr);
  EXPECT_EQ(bare["systems"][0]["clip_score"], "unavailable");
  EXPECT_EQ(bare["systems"][0]["gm"], "unavailable");
}

TEST(SingleReportTest, LoadRows) {
  testing::TempDir dir;
  testing::WriteFile(dir.File("c.jsonl"),
                     R"({"system":"s","image_id":"i","caption":"hi"})" "\n");
  testing::WriteFile(dir.File("l.jsonl"),
                     R"({"system":"s","image_id":"i","votes":[1,0,1]})" "\n"
                     R"({"system":"s","image_id":"j","label":0})" "\n");
  EXPECT_EQ(LoadCaptionRows(dir.File("c.jsonl")).at(0).image_source, "i");
  auto labels = LoadLabelRows(dir.File("l.jsonl"));
  ASSERT_EQ(labels.size(), 2u);
  EXPECT_EQ(labels[1].votes, std::vector<int>{0});
  testing::WriteFile(dir.File("bad.jsonl"),
                     R"({"system":"s","label":2})" "\n");
  EXPECT_THROW(LoadLabelRows(dir.File("bad.jsonl")), Error);
}

}  // namespace
}  // namespace humorchain

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
#include <random>

#include "humorchain/arena.h"
#include "test_support.h"

namespace humorchain {
namespace {

MatchRecord M(const std::string& a, const std::string& b, Verdict v) {
  static int counter = 0;
  MatchRecord m;
  m.pair_id = "p" + std::to_string(++counter);
  m.image_id = "img";
  m.system_a = a;
  m.system_b = b;
  m.verdict = v;
  m.annotator_id = "ann";
  return m;
}

void Add(std::vector<MatchRecord>& out, const std::string& a,
         const std::string& b, Verdict v, int count) {
  for (int i = 0; i < count; ++i) out.push_back(M(a, b, v));
}

// Exact binomial tail by Pascal's triangle, independent of SignTest.
double BinomialTail(int k, int n) {
  std::vector<double> row{1.0};
  for (int i = 0; i < n; ++i) {
    std::vector<double> next(row.size() + 1, 0.0);
    for (size_t j = 0; j < row.size(); ++j) {
      next[j] += row[j] / 2;
      next[j + 1] += row[j] / 2;
    }
    row = std::move(next);
  }
  double tail = 0;
  for (int j = k; j <= n; ++j) tail += row[j];
  return tail;
}

// Planted strengths, decisive outcomes drawn with P(i beats j) = s_i/(s_i+s_j).
std::vector<MatchRecord> Planted(const std::vector<std::string>& names,
                                 const std::vector<double>& strength,
                                 int per_pair, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<MatchRecord> out;
  for (size_t i = 0; i < names.size(); ++i) {
    for (size_t j = i + 1; j < names.size(); ++j) {
      const double p = strength[i] / (strength[i] + strength[j]);
      for (int k = 0; k < per_pair; ++k) {
        const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        const bool swap = (rng() & 1) != 0;
        const bool i_wins = u < p;
        if (swap) {
          out.push_back(M(names[j], names[i],
                          i_wins ? Verdict::kBWins : Verdict::kAWins));
        } else {
          out.push_back(M(names[i], names[j],
                          i_wins ? Verdict::kAWins : Verdict::kBWins));
        }
      }
    }
  }
  return out;
}

TEST(VerdictTest, ParseAndCredit) {
  EXPECT_EQ(ParseVerdict("a_wins"), Verdict::kAWins);
  EXPECT_EQ(ParseVerdict("both_not_funny"), Verdict::kBothNotFunny);
  EXPECT_THROW(ParseVerdict("A_WINS"), Error);
  EXPECT_EQ(ScoreForA(Verdict::kTie), 0.5);
  EXPECT_EQ(ScoreForA(Verdict::kBothNotFunny), 0.5);
  EXPECT_FALSE(IsDecisive(Verdict::kTie));
}

TEST(WinRateTest, AllTiesIsHalf) {
  std::vector<MatchRecord> m;
  Add(m, "A", "B", Verdict::kTie, 10);
  auto r = ComputeWinRates(m, "A", "B");
  ASSERT_TRUE(r);
  EXPECT_DOUBLE_EQ(r->rate_a, 0.5);
  EXPECT_DOUBLE_EQ(r->rate_b, 0.5);
  EXPECT_EQ(r->n, 10);
  EXPECT_FALSE(HardWinRate(m, "A"));
}

TEST(WinRateTest, HalfCreditAndHardRate) {
  std::vector<MatchRecord> m;
  Add(m, "A", "B", Verdict::kAWins, 6);
  Add(m, "A", "B", Verdict::kBWins, 2);
  Add(m, "A", "B", Verdict::kBothNotFunny, 2);
  auto r = ComputeWinRates(m, "A", "B");
  EXPECT_DOUBLE_EQ(r->rate_a, 0.7);
  EXPECT_DOUBLE_EQ(r->rate_b, 0.3);
  EXPECT_DOUBLE_EQ(*HardWinRate(m, "A"), 0.75);
  EXPECT_DOUBLE_EQ(*HardWinRate(m, "B"), 0.25);
}

TEST(WinRateTest, EitherOrientationAndEmpty) {
  std::vector<MatchRecord> m;
  Add(m, "B", "A", Verdict::kBWins, 3);
  Add(m, "A", "B", Verdict::kAWins, 1);
  EXPECT_DOUBLE_EQ(ComputeWinRates(m, "A", "B")->rate_a, 1.0);
  EXPECT_FALSE(ComputeWinRates({}, "A", "B"));
  m.push_back(M("A", "C", Verdict::kTie));
  EXPECT_THROW(ComputeWinRates(m, "A", "B"), Error);
}

TEST(WinRateTest, SyntheticLargeMargin) {
  std::vector<MatchRecord> m;
  Add(m, "I", "H", Verdict::kAWins, 866);
  Add(m, "I", "H", Verdict::kBWins, 141);
  auto r = ComputeWinRates(m, "I", "H");
  EXPECT_EQ(r->n, 1007);
  EXPECT_NEAR(r->rate_a, 0.860, 5e-4);
  EXPECT_NEAR(r->rate_b, 0.140, 5e-4);
  EXPECT_LT(SignTest(866, 141), 1e-30);
}

TEST(HardWinRateTest, SingleWin) {
  std::vector<MatchRecord> m{M("A", "B", Verdict::kAWins),
                             M("A", "B", Verdict::kTie)};
  EXPECT_DOUBLE_EQ(*HardWinRate(m, "A"), 1.0);
  EXPECT_DOUBLE_EQ(*HardWinRate(m, "B"), 0.0);
}

TEST(SignTestTest, Examples) {
  EXPECT_NEAR(SignTest(8, 2), 56.0 / 1024, 1e-12);
  EXPECT_NEAR(SignTest(5, 5), 638.0 / 1024, 1e-12);
  EXPECT_NEAR(SignTest(0, 4), 1.0, 1e-12);
  EXPECT_THROW(SignTest(0, 0), Error);
  EXPECT_THROW(SignTest(-1, 3), Error);
}

TEST(SignTestTest, MatchesEnumeration) {
  for (int n = 1; n <= 20; ++n) {
    for (int k = 0; k <= n; ++k) {
      EXPECT_NEAR(SignTest(k, n - k), BinomialTail(k, n), 1e-12)
          << k << "/" << n;
    }
  }
}

TEST(SignTestTest, ComplementIdentity) {
  // P(X >= k) + P(X >= n - k + 1) = 1 by symmetry.
  for (int n = 1; n <= 200; n += 7) {
    for (int k = 1; k <= n; ++k) {
      EXPECT_NEAR(SignTest(k, n - k) + SignTest(n - k + 1, k - 1), 1.0, 1e-9);
    }
  }
}

TEST(EloTest, Examples) {
  auto [a, b] = EloUpdate(1000, 1000, 1, 32);
  EXPECT_DOUBLE_EQ(a, 1016);
  EXPECT_DOUBLE_EQ(b, 984);
  std::tie(a, b) = EloUpdate(1000, 1000, 0.5, 32);
  EXPECT_DOUBLE_EQ(a, 1000);
  EXPECT_DOUBLE_EQ(b, 1000);
  const double expected = 1.0 / (1.0 + std::pow(10.0, -200.0 / 400.0));
  EXPECT_NEAR(EloExpected(1200, 1000), expected, 1e-12);
  std::tie(a, b) = EloUpdate(1200, 1000, 0, 32);
  EXPECT_NEAR(1200 - a, 24.31, 0.01);
  EXPECT_NEAR(b - 1000, 24.31, 0.01);
}

TEST(EloTest, ZeroSum) {
  std::mt19937_64 rng(7);
  const std::vector<std::string> names{"A", "B", "C", "D"};
  std::vector<MatchRecord> m;
  for (int i = 0; i < 500; ++i) {
    const size_t x = rng() % 4;
    const size_t y = (x + 1 + rng() % 3) % 4;
    m.push_back(M(names[x], names[y], static_cast<Verdict>(rng() % 4)));
  }
  auto ratings = SequentialElo(m, 32, 1500);
  double total = 0;
  for (const auto& [name, r] : ratings) total += r;
  EXPECT_NEAR(total, 4 * 1500.0, 1e-6);
}

TEST(ArenaEloTest, AllTiesStayAtInitial) {
  std::vector<MatchRecord> m;
  Add(m, "A", "B", Verdict::kTie, 5);
  Add(m, "B", "C", Verdict::kBothNotFunny, 5);
  for (const auto& [name, r] : ArenaElo(m, EloConfig{})) {
    EXPECT_DOUBLE_EQ(r, 1500) << name;
  }
}

TEST(ArenaEloTest, DominanceAndDeterminism) {
  std::vector<MatchRecord> m;
  Add(m, "A", "B", Verdict::kAWins, 20);
  Add(m, "A", "B", Verdict::kBWins, 5);
  EloConfig config;
  config.seed = 11;
  auto r = ArenaElo(m, config);
  EXPECT_GT(r["A"], 1500);
  EXPECT_LT(r["B"], 1500);
  EXPECT_EQ(r, ArenaElo(m, config));
}

TEST(ArenaEloTest, PlantedOrderRecovered) {
  const std::vector<std::string> names{"S4", "S2", "S1"};
  EloConfig config;
  config.shuffles = 20;
  int correct = 0;
  for (uint64_t rep = 0; rep < 20; ++rep) {
    auto m = Planted(names, {4, 2, 1}, 500, 1000 + rep);
    config.seed = rep;
    auto r = ArenaElo(m, config);
    correct += (r["S4"] > r["S2"] && r["S2"] > r["S1"]) ? 1 : 0;
  }
  EXPECT_GE(correct, 19);
}

TEST(BradleyTerryTest, EvenSplit) {
  std::vector<MatchRecord> m;
  Add(m, "A", "B", Verdict::kAWins, 5);
  Add(m, "A", "B", Verdict::kBWins, 5);
  auto fit = FitBradleyTerry(m, "A");
  EXPECT_NEAR(fit.StrengthOf("A"), 1.0, 1e-9);
  EXPECT_NEAR(fit.StrengthOf("B"), 1.0, 1e-6);
  EXPECT_TRUE(fit.converged);
}

TEST(BradleyTerryTest, TwoPlayerRatio) {
  std::vector<MatchRecord> m;
  Add(m, "A", "B", Verdict::kAWins, 3);
  Add(m, "A", "B", Verdict::kBWins, 1);
  auto fit = FitBradleyTerry(m, "B");
  EXPECT_NEAR(fit.StrengthOf("A") / fit.StrengthOf("B"), 3.0, 1e-6);
}

TEST(BradleyTerryTest, ThreeSystemGridOracle) {
  std::vector<MatchRecord> m;
  Add(m, "A", "B", Verdict::kAWins, 7);
  Add(m, "A", "B", Verdict::kBWins, 3);
  Add(m, "B", "C", Verdict::kAWins, 6);
  Add(m, "B", "C", Verdict::kBWins, 4);
  Add(m, "A", "C", Verdict::kAWins, 8);
  Add(m, "A", "C", Verdict::kBWins, 2);
  Add(m, "A", "C", Verdict::kTie, 2);
  auto fit = FitBradleyTerry(m, "C");

  // Grid search over log strengths with C fixed at 0.
  const Eigen::MatrixXd credit = WinCreditMatrix(m, SystemsOf(m));
  double best = -1e300, best_a = 0, best_b = 0;
  for (int i = -300; i <= 300; ++i) {
    for (int j = -300; j <= 300; ++j) {
      Eigen::VectorXd s(3);
      s << std::exp(i * 0.01), std::exp(j * 0.01), 1.0;
      const double ll = BradleyTerryLogLikelihood<double>(credit, s);
      if (ll > best) {
        best = ll;
        best_a = i * 0.01;
        best_b = j * 0.01;
      }
    }
  }
  EXPECT_NEAR(std::log(fit.StrengthOf("A")), best_a, 0.01);
  EXPECT_NEAR(std::log(fit.StrengthOf("B")), best_b, 0.01);
  EXPECT_GE(BradleyTerryLogLikelihood<double>(credit, fit.strength), best);
}

TEST(BradleyTerryTest, ReferenceOrderAndLabelInvariance) {
  auto m = Planted({"A", "B", "C", "D"}, {3, 1.5, 1, 0.5}, 60, 5);
  auto by_a = FitBradleyTerry(m, "A");
  auto by_c = FitBradleyTerry(m, "C");
  for (const char* x : {"A", "B", "C", "D"}) {
    for (const char* y : {"A", "B", "C", "D"}) {
      EXPECT_NEAR(by_a.StrengthOf(x) / by_a.StrengthOf(y),
                  by_c.StrengthOf(x) / by_c.StrengthOf(y), 1e-6);
    }
  }

  std::vector<MatchRecord> reversed(m.rbegin(), m.rend());
  auto r = FitBradleyTerry(reversed, "A");
  std::vector<MatchRecord> renamed = m;
  auto rename = [](std::string& s) { s = "z_" + s; };
  for (auto& x : renamed) {
    rename(x.system_a);
    rename(x.system_b);
  }
  auto n = FitBradleyTerry(renamed, "z_A");
  for (const char* x : {"A", "B", "C", "D"}) {
    EXPECT_NEAR(r.StrengthOf(x), by_a.StrengthOf(x), 1e-6);
    EXPECT_NEAR(n.StrengthOf(std::string("z_") + x), by_a.StrengthOf(x), 1e-6);
  }
}

TEST(BradleyTerryTest, PlantedRatios) {
  auto m = Planted({"S4", "S2", "S1"}, {4, 2, 1}, 2000, 42);
  auto fit = FitBradleyTerry(m, "S1");
  EXPECT_NEAR(fit.StrengthOf("S4") / 4.0, 1.0, 0.10);
  EXPECT_NEAR(fit.StrengthOf("S2") / 2.0, 1.0, 0.10);
}

TEST(BradleyTerryTest, Errors) {
  std::vector<MatchRecord> ties;
  Add(ties, "A", "B", Verdict::kTie, 4);
  try {
    FitBradleyTerry(ties, "A");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUndefined);
  }

  std::vector<MatchRecord> split;
  Add(split, "A", "B", Verdict::kAWins, 2);
  Add(split, "A", "B", Verdict::kBWins, 2);
  Add(split, "C", "D", Verdict::kAWins, 2);
  Add(split, "C", "D", Verdict::kBWins, 2);
  try {
    FitBradleyTerry(split, "A");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDisconnected);
    EXPECT_NE(std::string(e.what()).find("{A, B}"), std::string::npos);
  }

  // A never loses: no finite maximum exists.
  std::vector<MatchRecord> sweep;
  Add(sweep, "A", "B", Verdict::kAWins, 3);
  try {
    FitBradleyTerry(sweep, "A");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kDisconnected);
  }
  EXPECT_THROW(FitBradleyTerry(split, "Z"), Error);
}

TEST(RatingTableTest, RowsAndFallback) {
  std::vector<MatchRecord> m;
  Add(m, "A", "B", Verdict::kAWins, 3);
  Add(m, "A", "B", Verdict::kBWins, 1);
  Add(m, "A", "B", Verdict::kTie, 1);
  Add(m, "A", "B", Verdict::kBothNotFunny, 1);
  auto table = BuildRatingTable(m, EloConfig{}, "B");
  ASSERT_EQ(table.rows.size(), 2u);
  EXPECT_EQ(table.rows[0].system, "A");
  EXPECT_EQ(table.rows[0].wins, 3);
  EXPECT_EQ(table.rows[0].losses, 1);
  EXPECT_EQ(table.rows[0].ties, 1);
  EXPECT_EQ(table.rows[0].both_not_funny, 1);
  EXPECT_EQ(table.rows[0].matches, 6);
  EXPECT_NEAR(*table.rows[0].bt_strength, 4.0 / 2.0, 1e-6);
  EXPECT_TRUE(table.bt_error.empty());

  std::vector<MatchRecord> sweep;
  Add(sweep, "A", "B", Verdict::kAWins, 3);
  auto partial = BuildRatingTable(sweep, EloConfig{});
  EXPECT_FALSE(partial.bt_error.empty());
  EXPECT_FALSE(partial.rows[0].bt_strength);
  EXPECT_GT(partial.rows[0].elo, 1500);
}

TEST(PairwiseTableTest, RowsMatchWinRates) {
  std::vector<MatchRecord> m;
  Add(m, "A", "B", Verdict::kAWins, 8);
  Add(m, "B", "A", Verdict::kAWins, 2);
  Add(m, "A", "C", Verdict::kTie, 1);
  auto rows = PairwiseTable(m);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].system_a, "A");
  EXPECT_EQ(rows[0].wins_a, 8);
  EXPECT_EQ(rows[0].wins_b, 2);
  EXPECT_DOUBLE_EQ(rows[0].rate_a, 0.8);
  EXPECT_NEAR(*rows[0].p_value, 56.0 / 1024, 1e-12);
  EXPECT_FALSE(rows[1].p_value);
  EXPECT_FALSE(rows[1].hard_rate_a);
  EXPECT_NE(PairwiseTableCsv(rows).find("A vs B"), std::string::npos);
}

TEST(MatchLogTest, RoundTripAndValidation) {
  testing::TempDir dir;
  std::vector<MatchRecord> m{M("A", "B", Verdict::kAWins),
                             M("B", "C", Verdict::kBothNotFunny)};
  std::string text;
  for (const auto& x : m) text += Json(x).dump() + "\n";
  testing::WriteFile(dir.File("m.jsonl"), text);
  EXPECT_EQ(LoadMatchLog(dir.File("m.jsonl")), m);

  testing::WriteFile(dir.File("bad.jsonl"),
                     R"({"pair_id":"x","image_id":"i","system_a":"A",)"
                     R"("system_b":"A","verdict":"a_wins","annotator_id":"n"})"
                     "\n");
  EXPECT_THROW(LoadMatchLog(dir.File("bad.jsonl")), Error);
}

}  // namespace
}  // namespace humorchain

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

#ifndef HUMORCHAIN_ARENA_H_
#define HUMORCHAIN_ARENA_H_

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "humorchain/types.h"

namespace humorchain {

enum class Verdict { kAWins, kBWins, kTie, kBothNotFunny };

std::string_view ToString(Verdict verdict);
Verdict ParseVerdict(std::string_view literal);

// Credit to side A: 1, 0, or 0.5 for both tie kinds.
double ScoreForA(Verdict verdict);
bool IsDecisive(Verdict verdict);

struct MatchRecord {
  std::string pair_id;
  std::string image_id;
  std::string system_a;
  std::string system_b;
  Verdict verdict = Verdict::kTie;
  std::string annotator_id;
  bool display_swap = false;

  void Validate() const;
  bool operator==(const MatchRecord&) const = default;
};

void to_json(Json& j, const MatchRecord& v);
void from_json(const Json& j, MatchRecord& v);

std::vector<MatchRecord> LoadMatchLog(const std::string& path);

struct WinRates {
  double rate_a = 0;
  double rate_b = 0;
  int64_t n = 0;
};

// Half-credit win rates of `system_a` against `system_b`. Matches may list the
// pair in either orientation; any other system is an error. Empty -> nullopt.
std::optional<WinRates> ComputeWinRates(std::span<const MatchRecord> matches,
                                        const std::string& system_a,
                                        const std::string& system_b);

// Wins / decisive matches for `system` over every match it took part in.
// nullopt when it has no decisive match.
std::optional<double> HardWinRate(std::span<const MatchRecord> matches,
                                  const std::string& system);

// One-sided exact sign test P(X >= wins_first), X ~ Binomial(n, 1/2) with
// n = wins_first + wins_second, summed in log space.
double SignTest(int64_t wins_first, int64_t wins_second);

// Standard Elo expectation and update.
double EloExpected(double rating_a, double rating_b);
std::pair<double, double> EloUpdate(double rating_a, double rating_b,
                                    double score_a, double k);

struct EloConfig {
  double k = 32.0;
  double initial = 1500.0;
  int shuffles = 100;
  uint64_t seed = 0;
};

// Sequential Elo over `matches` in the given order.
std::map<std::string, double> SequentialElo(std::span<const MatchRecord> matches,
                                            double k, double initial);

// Mean rating per system over `shuffles` seeded random orderings.
std::map<std::string, double> ArenaElo(std::span<const MatchRecord> matches,
                                       const EloConfig& config);

// Systems in sorted order, and the matrix whose (i, j) entry is the credit i
// earned against j (1 per win, 0.5 per tie of either kind).
std::vector<std::string> SystemsOf(std::span<const MatchRecord> matches);
Eigen::MatrixXd WinCreditMatrix(std::span<const MatchRecord> matches,
                                const std::vector<std::string>& systems);

// Groups of mutually reachable systems in the credit graph (edge i -> j when
// i earned credit against j). A finite maximum-likelihood fit needs exactly
// one group.
std::vector<std::vector<int>> CreditComponents(const Eigen::MatrixXd& credit);

template <typename Scalar>
struct MmFit {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> strength;
  int iterations = 0;
  Scalar final_delta = 0;
  bool converged = false;
};

// Minorization-maximization for Bradley-Terry strengths:
//   p_i <- W_i / sum_{j != i} n_ij / (p_i + p_j)
// with W_i the row sums of `credit` and n = credit + credit^T. Strengths are
// rescaled after every sweep so strength(reference) = 1. Stops when the
// largest change in log strength drops below `tolerance`.
template <typename Scalar>
MmFit<Scalar> FitBradleyTerryMM(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& credit,
    Eigen::Index reference, Scalar tolerance = Scalar(1e-8),
    int max_sweeps = 10000) {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const Eigen::Index n = credit.rows();
  const Matrix games = credit + credit.transpose();
  const Vector wins = credit.rowwise().sum();

  MmFit<Scalar> fit;
  fit.strength = Vector::Ones(n);
  Vector next(n);
  for (int sweep = 1; sweep <= max_sweeps; ++sweep) {
    for (Eigen::Index i = 0; i < n; ++i) {
      Scalar denom = 0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j != i && games(i, j) > 0) {
          denom += games(i, j) / (fit.strength(i) + fit.strength(j));
        }
      }
      next(i) = wins(i) / denom;
    }
    next /= next(reference);
    fit.final_delta =
        (next.array().log() - fit.strength.array().log()).abs().maxCoeff();
    fit.strength = next;
    fit.iterations = sweep;
    if (fit.final_delta < tolerance) {
      fit.converged = true;
      break;
    }
  }
  return fit;
}

// Bradley-Terry log-likelihood with ties as half wins; strengths > 0.
template <typename Scalar>
Scalar BradleyTerryLogLikelihood(
    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& credit,
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& strength) {
  Scalar ll = 0;
  for (Eigen::Index i = 0; i < credit.rows(); ++i) {
    for (Eigen::Index j = 0; j < credit.cols(); ++j) {
      if (i != j && credit(i, j) > 0) {
        ll += credit(i, j) *
              std::log(strength(i) / (strength(i) + strength(j)));
      }
    }
  }
  return ll;
}

struct BradleyTerryFit {
  std::vector<std::string> systems;
  Eigen::VectorXd strength;
  std::string reference;
  int iterations = 0;
  double final_delta = 0;
  bool converged = false;

  double StrengthOf(const std::string& system) const;
};

// Throws Error(kUndefined) without decisive matches, Error(kDisconnected)
// naming the components when the credit graph is not strongly connected,
// and Error(kInvalidArgument) for an unknown reference system.
BradleyTerryFit FitBradleyTerry(std::span<const MatchRecord> matches,
                                const std::string& reference_system);

struct RatingRow {
  std::string system;
  double elo = 0;
  std::optional<double> bt_strength;
  std::optional<double> bt_log_strength;
  int64_t matches = 0;
  int64_t wins = 0;
  int64_t losses = 0;
  int64_t ties = 0;
  int64_t both_not_funny = 0;
};

struct RatingTable {
  std::vector<RatingRow> rows;  // sorted by Elo, descending
  std::string reference;
  int bt_iterations = 0;
  double bt_final_delta = 0;
  bool bt_converged = false;
  std::string bt_error;  // set when the fit was impossible; Elo still valid
};

// Elo for every system plus the Bradley-Terry fit when it exists. An empty
// reference picks the first system in sorted order.
RatingTable BuildRatingTable(std::span<const MatchRecord> matches,
                             const EloConfig& elo, std::string reference = "");

Json RatingTableJson(const RatingTable& table);
std::string RatingTableCsv(const RatingTable& table);

struct PairwiseRow {
  std::string system_a;
  std::string system_b;
  int64_t total = 0;
  int64_t wins_a = 0;
  int64_t wins_b = 0;
  int64_t ties = 0;
  int64_t both_not_funny = 0;
  double rate_a = 0;
  double rate_b = 0;
  std::optional<double> hard_rate_a;
  std::optional<double> hard_rate_b;
  std::optional<double> p_value;  // SignTest(wins_a, wins_b)
};

// One row per unordered system pair, oriented the way the pair first appears
// in the log.
std::vector<PairwiseRow> PairwiseTable(std::span<const MatchRecord> matches);
Json PairwiseTableJson(const std::vector<PairwiseRow>& rows);
std::string PairwiseTableCsv(const std::vector<PairwiseRow>& rows);

}  // namespace humorchain

#endif  // HUMORCHAIN_ARENA_H_

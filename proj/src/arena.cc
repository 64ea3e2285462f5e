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

#include "humorchain/arena.h"

#include <algorithm>
#include <iomanip>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "humorchain/errors.h"

namespace humorchain {

std::string_view ToString(Verdict verdict) {
  switch (verdict) {
    case Verdict::kAWins: return "a_wins";
    case Verdict::kBWins: return "b_wins";
    case Verdict::kTie: return "tie";
    case Verdict::kBothNotFunny: return "both_not_funny";
  }
  return "tie";
}

Verdict ParseVerdict(std::string_view literal) {
  if (literal == "a_wins") return Verdict::kAWins;
  if (literal == "b_wins") return Verdict::kBWins;
  if (literal == "tie") return Verdict::kTie;
  if (literal == "both_not_funny") return Verdict::kBothNotFunny;
  throw Error(ErrorCode::kEnum,
              "invalid verdict literal '" + std::string(literal) + "'");
}

double ScoreForA(Verdict verdict) {
  switch (verdict) {
    case Verdict::kAWins: return 1.0;
    case Verdict::kBWins: return 0.0;
    default: return 0.5;
  }
}

bool IsDecisive(Verdict verdict) {
  return verdict == Verdict::kAWins || verdict == Verdict::kBWins;
}

void MatchRecord::Validate() const {
  if (system_a.empty() || system_b.empty()) {
    throw Error(ErrorCode::kSchema, "match needs both system ids");
  }
  if (system_a == system_b) {
    throw Error(ErrorCode::kSchema,
                "match compares system '" + system_a + "' with itself");
  }
}

void to_json(Json& j, const MatchRecord& v) {
  j = Json{{"pair_id", v.pair_id},
           {"image_id", v.image_id},
           {"system_a", v.system_a},
           {"system_b", v.system_b},
           {"verdict", ToString(v.verdict)},
           {"annotator_id", v.annotator_id},
           {"display_swap", v.display_swap}};
}

void from_json(const Json& j, MatchRecord& v) {
  try {
    v.pair_id = j.value("pair_id", std::string());
    v.image_id = j.value("image_id", std::string());
    v.system_a = j.at("system_a").get<std::string>();
    v.system_b = j.at("system_b").get<std::string>();
    v.verdict = ParseVerdict(j.at("verdict").get<std::string>());
    v.annotator_id = j.value("annotator_id", std::string());
    v.display_swap = j.value("display_swap", false);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kSchema, std::string("bad match record: ") + e.what());
  }
  v.Validate();
}

std::vector<MatchRecord> LoadMatchLog(const std::string& path) {
  std::vector<MatchRecord> matches;
  int line = 0;
  for (const Json& j : ReadJsonLines(path)) {
    ++line;
    try {
      matches.push_back(j.get<MatchRecord>());
    } catch (const Error& e) {
      throw Error(e.code(), path + ":" + std::to_string(line) + ": " + e.what());
    }
  }
  return matches;
}

std::optional<WinRates> ComputeWinRates(std::span<const MatchRecord> matches,
                                        const std::string& system_a,
                                        const std::string& system_b) {
  if (matches.empty()) return std::nullopt;
  double credit_a = 0;
  for (const MatchRecord& m : matches) {
    if (m.system_a == system_a && m.system_b == system_b) {
      credit_a += ScoreForA(m.verdict);
    } else if (m.system_a == system_b && m.system_b == system_a) {
      credit_a += 1.0 - ScoreForA(m.verdict);
    } else {
      throw Error(ErrorCode::kInvalidArgument,
                  "match " + m.system_a + " vs " + m.system_b +
                      " is not between " + system_a + " and " + system_b);
    }
  }
  WinRates r;
  r.n = static_cast<int64_t>(matches.size());
  r.rate_a = credit_a / static_cast<double>(r.n);
  r.rate_b = 1.0 - r.rate_a;
  return r;
}

std::optional<double> HardWinRate(std::span<const MatchRecord> matches,
                                  const std::string& system) {
  int64_t wins = 0;
  int64_t decisive = 0;
  for (const MatchRecord& m : matches) {
    if (!IsDecisive(m.verdict)) continue;
    if (m.system_a == system) {
      ++decisive;
      wins += m.verdict == Verdict::kAWins ? 1 : 0;
    } else if (m.system_b == system) {
      ++decisive;
      wins += m.verdict == Verdict::kBWins ? 1 : 0;
    }
  }
  if (decisive == 0) return std::nullopt;
  return static_cast<double>(wins) / static_cast<double>(decisive);
}

double SignTest(int64_t wins_first, int64_t wins_second) {
  if (wins_first < 0 || wins_second < 0) {
    throw Error(ErrorCode::kInvalidArgument, "win counts must be >= 0");
  }
  const int64_t n = wins_first + wins_second;
  if (n == 0) {
    throw Error(ErrorCode::kInvalidArgument,
                "sign test needs at least one decisive outcome");
  }
  const double log_half_n = static_cast<double>(n) * std::log(0.5);
  const double lgn1 = std::lgamma(static_cast<double>(n) + 1.0);
  auto log_term = [&](int64_t k) {
    return lgn1 - std::lgamma(static_cast<double>(k) + 1.0) -
           std::lgamma(static_cast<double>(n - k) + 1.0) + log_half_n;
  };
  double max_log = -INFINITY;
  for (int64_t k = wins_first; k <= n; ++k) max_log = std::max(max_log, log_term(k));
  double sum = 0;
  for (int64_t k = wins_first; k <= n; ++k) sum += std::exp(log_term(k) - max_log);
  return std::min(1.0, std::exp(max_log + std::log(sum)));
}

double EloExpected(double rating_a, double rating_b) {
  return 1.0 / (1.0 + std::pow(10.0, (rating_b - rating_a) / 400.0));
}

std::pair<double, double> EloUpdate(double rating_a, double rating_b,
                                    double score_a, double k) {
  if (!(k > 0)) throw Error(ErrorCode::kInvalidArgument, "Elo k must be > 0");
  const double expected_a = EloExpected(rating_a, rating_b);
  const double delta = k * (score_a - expected_a);
  return {rating_a + delta, rating_b - delta};
}

std::map<std::string, double> SequentialElo(std::span<const MatchRecord> matches,
                                            double k, double initial) {
  std::map<std::string, double> ratings;
  for (const MatchRecord& m : matches) {
    double& ra = ratings.try_emplace(m.system_a, initial).first->second;
    double& rb = ratings.try_emplace(m.system_b, initial).first->second;
    std::tie(ra, rb) = EloUpdate(ra, rb, ScoreForA(m.verdict), k);
  }
  return ratings;
}

std::map<std::string, double> ArenaElo(std::span<const MatchRecord> matches,
                                       const EloConfig& config) {
  if (config.shuffles < 1) {
    throw Error(ErrorCode::kInvalidArgument, "shuffles must be >= 1");
  }
  std::vector<std::string> systems = SystemsOf(matches);
  std::map<std::string, double> mean;
  for (const auto& s : systems) mean[s] = 0.0;
  std::vector<MatchRecord> order(matches.begin(), matches.end());
  std::mt19937_64 rng(config.seed);
  for (int s = 0; s < config.shuffles; ++s) {
    // Fisher-Yates on raw engine output: identical on every standard library.
    for (size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[rng() % i]);
    }
    for (const auto& [system, rating] :
         SequentialElo(order, config.k, config.initial)) {
      mean[system] += rating;
    }
  }
  for (auto& [system, rating] : mean) rating /= config.shuffles;
  return mean;
}

std::vector<std::string> SystemsOf(std::span<const MatchRecord> matches) {
  std::set<std::string> systems;
  for (const MatchRecord& m : matches) {
    systems.insert(m.system_a);
    systems.insert(m.system_b);
  }
  return {systems.begin(), systems.end()};
}

Eigen::MatrixXd WinCreditMatrix(std::span<const MatchRecord> matches,
                                const std::vector<std::string>& systems) {
  std::map<std::string, Eigen::Index> index;
  for (size_t i = 0; i < systems.size(); ++i) index[systems[i]] = i;
  const auto n = static_cast<Eigen::Index>(systems.size());
  Eigen::MatrixXd credit = Eigen::MatrixXd::Zero(n, n);
  for (const MatchRecord& m : matches) {
    const Eigen::Index a = index.at(m.system_a);
    const Eigen::Index b = index.at(m.system_b);
    const double s = ScoreForA(m.verdict);
    credit(a, b) += s;
    credit(b, a) += 1.0 - s;
  }
  return credit;
}

std::vector<std::vector<int>> CreditComponents(const Eigen::MatrixXd& credit) {
  const int n = static_cast<int>(credit.rows());
  // reach(i, j): j reachable from i. Closure by repeated BFS; n is small.
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> reach(n, n);
  reach.setConstant(false);
  for (int s = 0; s < n; ++s) {
    std::vector<int> stack = {s};
    reach(s, s) = true;
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      for (int v = 0; v < n; ++v) {
        if (credit(u, v) > 0 && !reach(s, v)) {
          reach(s, v) = true;
          stack.push_back(v);
        }
      }
    }
  }
  std::vector<int> component(n, -1);
  std::vector<std::vector<int>> groups;
  for (int i = 0; i < n; ++i) {
    if (component[i] >= 0) continue;
    component[i] = static_cast<int>(groups.size());
    groups.push_back({i});
    for (int j = i + 1; j < n; ++j) {
      if (component[j] < 0 && reach(i, j) && reach(j, i)) {
        component[j] = component[i];
        groups.back().push_back(j);
      }
    }
  }
  return groups;
}

double BradleyTerryFit::StrengthOf(const std::string& system) const {
  auto it = std::find(systems.begin(), systems.end(), system);
  if (it == systems.end()) {
    throw Error(ErrorCode::kNotFound, "no system '" + system + "' in fit");
  }
  return strength(it - systems.begin());
}

BradleyTerryFit FitBradleyTerry(std::span<const MatchRecord> matches,
                                const std::string& reference_system) {
  if (std::none_of(matches.begin(), matches.end(),
                   [](const MatchRecord& m) { return IsDecisive(m.verdict); })) {
    throw Error(ErrorCode::kUndefined,
                "Bradley-Terry fit needs at least one decisive match");
  }
  BradleyTerryFit fit;
  fit.systems = SystemsOf(matches);
  auto ref = std::find(fit.systems.begin(), fit.systems.end(), reference_system);
  if (ref == fit.systems.end()) {
    throw Error(ErrorCode::kInvalidArgument,
                "reference system '" + reference_system + "' has no matches");
  }
  const Eigen::MatrixXd credit = WinCreditMatrix(matches, fit.systems);
  auto groups = CreditComponents(credit);
  if (groups.size() > 1) {
    std::string names;
    for (const auto& g : groups) {
      names += names.empty() ? "{" : ", {";
      for (size_t k = 0; k < g.size(); ++k) {
        names += (k ? ", " : "") + fit.systems[g[k]];
      }
      names += "}";
    }
    throw Error(ErrorCode::kDisconnected,
                "comparison graph is not connected; components: " + names);
  }
  auto mm = FitBradleyTerryMM<double>(credit, ref - fit.systems.begin());
  fit.strength = mm.strength;
  fit.reference = reference_system;
  fit.iterations = mm.iterations;
  fit.final_delta = mm.final_delta;
  fit.converged = mm.converged;
  return fit;
}

RatingTable BuildRatingTable(std::span<const MatchRecord> matches,
                             const EloConfig& elo, std::string reference) {
  RatingTable table;
  std::vector<std::string> systems = SystemsOf(matches);
  if (systems.empty()) return table;
  if (reference.empty()) reference = systems.front();
  table.reference = reference;

  std::map<std::string, RatingRow> rows;
  for (const auto& s : systems) rows[s].system = s;
  for (const MatchRecord& m : matches) {
    RatingRow& a = rows[m.system_a];
    RatingRow& b = rows[m.system_b];
    ++a.matches;
    ++b.matches;
    switch (m.verdict) {
      case Verdict::kAWins: ++a.wins; ++b.losses; break;
      case Verdict::kBWins: ++b.wins; ++a.losses; break;
      case Verdict::kTie: ++a.ties; ++b.ties; break;
      case Verdict::kBothNotFunny: ++a.both_not_funny; ++b.both_not_funny; break;
    }
  }
  for (const auto& [system, rating] : ArenaElo(matches, elo)) {
    rows[system].elo = rating;
  }
  try {
    BradleyTerryFit fit = FitBradleyTerry(matches, reference);
    for (size_t i = 0; i < fit.systems.size(); ++i) {
      rows[fit.systems[i]].bt_strength = fit.strength(i);
      rows[fit.systems[i]].bt_log_strength = std::log(fit.strength(i));
    }
    table.bt_iterations = fit.iterations;
    table.bt_final_delta = fit.final_delta;
    table.bt_converged = fit.converged;
  } catch (const Error& e) {
    table.bt_error = e.what();
  }
  for (auto& [system, row] : rows) table.rows.push_back(row);
  std::stable_sort(table.rows.begin(), table.rows.end(),
                   [](const RatingRow& x, const RatingRow& y) {
                     return x.elo > y.elo;
                   });
  return table;
}

namespace {

Json OrNull(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

std::string Fixed(double v, int digits) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(digits) << v;
  return ss.str();
}

std::string FixedOr(const std::optional<double>& v, int digits) {
  return v ? Fixed(*v, digits) : "";
}

std::string PValueText(double p) {
  std::ostringstream ss;
  if (p < 1e-4) {
    ss << std::scientific << std::setprecision(3) << p;
  } else {
    ss << std::fixed << std::setprecision(4) << p;
  }
  return ss.str();
}

}  // namespace

Json RatingTableJson(const RatingTable& table) {
  Json rows = Json::array();
  for (const RatingRow& r : table.rows) {
    rows.push_back({{"system", r.system},
                    {"elo", r.elo},
                    {"bt_strength", OrNull(r.bt_strength)},
                    {"bt_log_strength", OrNull(r.bt_log_strength)},
                    {"matches", r.matches},
                    {"wins", r.wins},
                    {"losses", r.losses},
                    {"ties", r.ties},
                    {"both_not_funny", r.both_not_funny}});
  }
  Json j = {{"systems", rows},
            {"bt_reference", table.reference},
            {"bt_diagnostics",
             {{"iterations", table.bt_iterations},
              {"final_delta", table.bt_final_delta},
              {"converged", table.bt_converged}}}};
  if (!table.bt_error.empty()) j["bt_error"] = table.bt_error;
  return j;
}

std::string RatingTableCsv(const RatingTable& table) {
  std::string out = "framework,elo,bt,bt_log,matches,wins,losses,ties,both_not_funny\n";
  for (const RatingRow& r : table.rows) {
    out += r.system + "," + Fixed(r.elo, 2) + "," + FixedOr(r.bt_strength, 2) +
           "," + FixedOr(r.bt_log_strength, 4) + "," +
           std::to_string(r.matches) + "," + std::to_string(r.wins) + "," +
           std::to_string(r.losses) + "," + std::to_string(r.ties) + "," +
           std::to_string(r.both_not_funny) + "\n";
  }
  return out;
}

std::vector<PairwiseRow> PairwiseTable(std::span<const MatchRecord> matches) {
  std::vector<PairwiseRow> rows;
  std::map<std::pair<std::string, std::string>, size_t> index;
  for (const MatchRecord& m : matches) {
    auto key = std::minmax(m.system_a, m.system_b);
    auto it = index.find({key.first, key.second});
    if (it == index.end()) {
      it = index.emplace(std::make_pair(key.first, key.second), rows.size()).first;
      PairwiseRow row;
      row.system_a = m.system_a;
      row.system_b = m.system_b;
      rows.push_back(row);
    }
    PairwiseRow& row = rows[it->second];
    const bool same = row.system_a == m.system_a;
    ++row.total;
    switch (m.verdict) {
      case Verdict::kAWins: ++(same ? row.wins_a : row.wins_b); break;
      case Verdict::kBWins: ++(same ? row.wins_b : row.wins_a); break;
      case Verdict::kTie: ++row.ties; break;
      case Verdict::kBothNotFunny: ++row.both_not_funny; break;
    }
  }
  for (PairwiseRow& row : rows) {
    const double half = 0.5 * static_cast<double>(row.ties + row.both_not_funny);
    row.rate_a = (static_cast<double>(row.wins_a) + half) / static_cast<double>(row.total);
    row.rate_b = 1.0 - row.rate_a;
    const int64_t decisive = row.wins_a + row.wins_b;
    if (decisive > 0) {
      row.hard_rate_a = static_cast<double>(row.wins_a) / static_cast<double>(decisive);
      row.hard_rate_b = 1.0 - *row.hard_rate_a;
      row.p_value = SignTest(row.wins_a, row.wins_b);
    }
  }
  return rows;
}

Json PairwiseTableJson(const std::vector<PairwiseRow>& rows) {
  Json out = Json::array();
  for (const PairwiseRow& r : rows) {
    out.push_back({{"comparison", r.system_a + " vs " + r.system_b},
                   {"system_a", r.system_a},
                   {"system_b", r.system_b},
                   {"total", r.total},
                   {"wins_a", r.wins_a},
                   {"wins_b", r.wins_b},
                   {"ties", r.ties},
                   {"both_not_funny", r.both_not_funny},
                   {"win_rate_a", r.rate_a},
                   {"win_rate_b", r.rate_b},
                   {"hard_win_rate_a", OrNull(r.hard_rate_a)},
                   {"hard_win_rate_b", OrNull(r.hard_rate_b)},
                   {"p_value", OrNull(r.p_value)}});
  }
  return out;
}

std::string PairwiseTableCsv(const std::vector<PairwiseRow>& rows) {
  std::string out =
      "comparison,total,win_rate_a,win_rate_b,hard_win_rate_a,hard_win_rate_b,"
      "p_value\n";
  for (const PairwiseRow& r : rows) {
    out += r.system_a + " vs " + r.system_b + "," + std::to_string(r.total) +
           "," + Fixed(r.rate_a, 3) + "," + Fixed(r.rate_b, 3) + "," +
           FixedOr(r.hard_rate_a, 3) + "," + FixedOr(r.hard_rate_b, 3) + "," +
           (r.p_value ? PValueText(*r.p_value) : "") + "\n";
  }
  return out;
}

}  // namespace humorchain

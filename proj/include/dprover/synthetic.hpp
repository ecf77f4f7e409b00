#pragma once

// A seeded toy proving world. Every goal owns a stream of tactic clusters;
// all members of a cluster are different strings with the same effect (same
// error message or same subgoal set), and a cluster's members sit next to
// each other at the top of the beam. Goals at level `depth` are closed by any
// successful tactic. Embeddings come from the hash stub keyed on the outcome,
// so tactics with equal outcomes have equal embeddings; predicted times are
// the true execution times.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "dprover/embed.hpp"
#include "dprover/error.hpp"
#include "dprover/search.hpp"

namespace dprover {

struct SyntheticParams {
  std::uint64_t seed = 0;
  std::size_t n_goals = 10;
  std::size_t branching = 2; // max subgoals per successful tactic
  std::size_t depth = 2;     // level at which goals can be closed
  std::size_t cluster_size = 4;
  double error_rate = 0.75;
  std::size_t dim = 64;
  std::size_t error_messages = 6; // distinct error texts per goal

  void validate() const {
    if (n_goals == 0 || branching == 0 || depth == 0 || cluster_size == 0 ||
        dim < 2 || error_messages == 0)
      throw InvalidInput("synthetic world parameters must be positive");
    if (!(error_rate >= 0.0 && error_rate < 1.0))
      throw InvalidInput("error_rate must lie in [0, 1)");
  }
};

namespace synthetic {

struct GoalCoord {
  std::size_t root = 0;
  std::size_t level = 0;
  std::size_t index = 0;
};

inline std::string goal_text(GoalCoord g) {
  return "goal " + std::to_string(g.root) + ":" + std::to_string(g.level) +
         ":" + std::to_string(g.index);
}

inline std::optional<std::size_t> parse_number(std::string_view &s) {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr == s.data())
    return std::nullopt;
  s.remove_prefix(static_cast<std::size_t>(ptr - s.data()));
  return v;
}

inline std::optional<GoalCoord> parse_goal(std::string_view s) {
  if (!s.starts_with("goal "))
    return std::nullopt;
  s.remove_prefix(5);
  GoalCoord g;
  auto r = parse_number(s);
  if (!r || !s.starts_with(":"))
    return std::nullopt;
  s.remove_prefix(1);
  auto l = parse_number(s);
  if (!l || !s.starts_with(":"))
    return std::nullopt;
  s.remove_prefix(1);
  auto i = parse_number(s);
  if (!i || !s.empty())
    return std::nullopt;
  g.root = *r;
  g.level = *l;
  g.index = *i;
  return g;
}

inline constexpr std::array<std::string_view, 10> kVerbs{
    "simp", "linarith", "nlinarith", "norm_num", "rw",
    "apply", "exact", "field_simp", "ring_nf", "omega"};

inline constexpr std::array<std::string_view, 8> kErrors{
    "unknown identifier",
    "type mismatch",
    "linarith failed to find a contradiction",
    "simp made no progress",
    "failed to synthesize instance",
    "rewrite failed, did not find instance of the pattern",
    "norm_num failed to simplify",
    "unsolved goals",
};

/// Tactic text for member `member` of cluster `cluster`.
inline std::string tactic_text(std::size_t cluster, std::size_t member) {
  return std::string(kVerbs[cluster % kVerbs.size()]) + " [lem_" +
         std::to_string(cluster) + "] at h" + std::to_string(member);
}

inline std::optional<std::size_t> parse_cluster(std::string_view tactic) {
  const auto at = tactic.find("[lem_");
  if (at == std::string_view::npos)
    return std::nullopt;
  tactic.remove_prefix(at + 5);
  auto c = parse_number(tactic);
  if (!c || !tactic.starts_with("]"))
    return std::nullopt;
  return c;
}

struct ClusterOutcome {
  TacticOutput output;
  std::string signature; // equal for equal outcomes
};

} // namespace synthetic

/// Shared deterministic rules of a synthetic world.
class SyntheticRules {
public:
  explicit SyntheticRules(SyntheticParams p) : p_(p) { p_.validate(); }

  const SyntheticParams &params() const { return p_; }

  std::optional<synthetic::ClusterOutcome>
  cluster_outcome(const std::string &goal, std::size_t cluster) const {
    const auto coord = synthetic::parse_goal(goal);
    if (!coord || coord->root >= p_.n_goals || coord->level > p_.depth)
      return std::nullopt;
    std::mt19937_64 rng(
        stable_hash(p_.seed, goal, "cluster " + std::to_string(cluster)));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    synthetic::ClusterOutcome out;
    if (unit(rng) < p_.error_rate) {
      const std::size_t which =
          std::uniform_int_distribution<std::size_t>(
              0, std::min(p_.error_messages, synthetic::kErrors.size()) - 1)(rng);
      std::string msg(synthetic::kErrors[which]);
      out.signature = "error\n" + msg;
      out.output = ErrorMessage{std::move(msg)};
      return out;
    }
    Subgoals goals;
    if (coord->level < p_.depth) {
      const std::size_t pool = 2 * p_.branching + 1;
      const std::size_t count =
          std::uniform_int_distribution<std::size_t>(1, p_.branching)(rng);
      std::set<std::size_t> picked;
      std::uniform_int_distribution<std::size_t> pick(0, pool - 1);
      while (picked.size() < count)
        picked.insert(pick(rng));
      for (std::size_t idx : picked)
        goals.goals.push_back(
            synthetic::goal_text({coord->root, coord->level + 1, idx}));
    }
    out.signature = "subgoals";
    for (const auto &g : goals.goals)
      out.signature += "\n" + g;
    out.output = std::move(goals);
    return out;
  }

  /// Hash-stub record for an outcome; its time is the true execution time.
  EmbeddingRecord outcome_record(const std::string &goal_id,
                                 const std::string &signature) const {
    return hash_stub_embed(goal_id, signature, p_.dim, p_.seed);
  }

  std::vector<Proposal> proposals(const std::string &goal,
                                  std::size_t n) const {
    const auto coord = synthetic::parse_goal(goal);
    if (!coord || coord->root >= p_.n_goals || coord->level > p_.depth || n == 0)
      return {};
    const std::size_t clusters = (n + p_.cluster_size - 1) / p_.cluster_size;
    constexpr double gap = 0.5;
    std::vector<Proposal> out;
    out.reserve(clusters * p_.cluster_size);
    for (std::size_t c = 0; c < clusters; ++c) {
      std::mt19937_64 rng(
          stable_hash(p_.seed, goal, "logit " + std::to_string(c)));
      const double base =
          -0.05 - gap * static_cast<double>(c) -
          0.5 * gap * std::uniform_real_distribution<double>(0.0, 1.0)(rng);
      for (std::size_t j = 0; j < p_.cluster_size; ++j)
        out.push_back({synthetic::tactic_text(c, j),
                       base - 0.01 * static_cast<double>(j)});
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const Proposal &a, const Proposal &b) {
                       return a.logit > b.logit;
                     });
    out.resize(std::min(out.size(), n));
    return out;
  }

private:
  SyntheticParams p_;
};

class SyntheticEnvironment final : public Environment {
public:
  explicit SyntheticEnvironment(SyntheticRules rules) : rules_(std::move(rules)) {}

  EnvResponse apply(const std::string &goal_text,
                    const std::string &tactic_text) const override {
    const auto cluster = synthetic::parse_cluster(tactic_text);
    const auto outcome =
        cluster ? rules_.cluster_outcome(goal_text, *cluster) : std::nullopt;
    if (!outcome)
      return {0.01, ErrorMessage{"unknown tactic"}};
    const auto rec = rules_.outcome_record(goal_text, outcome->signature);
    return {rec.pred_time, outcome->output};
  }

private:
  SyntheticRules rules_;
};

class SyntheticSource final : public TacticSource {
public:
  explicit SyntheticSource(SyntheticRules rules) : rules_(std::move(rules)) {}
  std::vector<Proposal> propose(const std::string &goal_text,
                                std::size_t n) const override {
    return rules_.proposals(goal_text, n);
  }

private:
  SyntheticRules rules_;
};

/// Outcome-keyed hash-stub embeddings. The success prediction separates the
/// two statuses: successes land in [0.5, 1], errors in [0, 0.5).
class SyntheticProvider final : public EmbeddingProvider {
public:
  explicit SyntheticProvider(SyntheticRules rules) : rules_(std::move(rules)) {}

  std::vector<EmbeddingRecord>
  embed(const GoalRef &goal, std::span<const std::string> tactics) const override {
    std::vector<EmbeddingRecord> out;
    out.reserve(tactics.size());
    for (const auto &t : tactics) {
      const auto cluster = synthetic::parse_cluster(t);
      const auto outcome =
          cluster ? rules_.cluster_outcome(goal.text, *cluster) : std::nullopt;
      const std::string signature = outcome ? outcome->signature : "unknown\n" + t;
      auto rec = rules_.outcome_record(goal.text, signature);
      const bool success =
          outcome && std::holds_alternative<Subgoals>(outcome->output);
      rec.pred_success = success ? 0.5 + 0.5 * rec.pred_success
                                 : 0.5 * rec.pred_success;
      rec.goal_id = goal.id;
      rec.tactic_text = t;
      out.push_back(std::move(rec));
    }
    return out;
  }
  std::size_t dim() const override { return rules_.params().dim; }

private:
  SyntheticRules rules_;
};

struct SyntheticWorld {
  SyntheticEnvironment environment;
  SyntheticSource source;
  SyntheticProvider provider;
  std::vector<GoalRef> benchmark;
};

inline SyntheticWorld synthetic_world(const SyntheticParams &params) {
  SyntheticRules rules(params);
  std::vector<GoalRef> bench;
  bench.reserve(params.n_goals);
  for (std::size_t r = 0; r < params.n_goals; ++r)
    bench.push_back(
        GoalRef{"syn-" + std::to_string(r), synthetic::goal_text({r, 0, 0})});
  return SyntheticWorld{SyntheticEnvironment(rules), SyntheticSource(rules),
                        SyntheticProvider(rules), std::move(bench)};
}

} // namespace dprover

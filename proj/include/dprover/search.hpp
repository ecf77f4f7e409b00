#pragma once

#include <chrono>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dprover/embed.hpp"
#include "dprover/error.hpp"
#include "dprover/filter.hpp"
#include "dprover/proof_tree.hpp"
#include "dprover/transitions.hpp"

namespace dprover {

struct EnvResponse {
  double time_s = 0.0;
  TacticOutput output;
  int status() const { return std::holds_alternative<Subgoals>(output) ? 1 : 0; }
};

/// The proving environment: applies a tactic to a goal. Implementations
/// signal an unreachable backend with EnvironmentFailure.
class Environment {
public:
  virtual ~Environment() = default;
  virtual EnvResponse apply(const std::string &goal_text,
                            const std::string &tactic_text) const = 0;
  /// Stable identifier for a goal statement (used by providers and logs).
  virtual std::string goal_id(const std::string &goal_text) const {
    return goal_text;
  }
};

struct Proposal {
  std::string text;
  double logit = 0.0;
};

/// The underlying tactic policy: at most n proposals, descending logit.
class TacticSource {
public:
  virtual ~TacticSource() = default;
  virtual std::vector<Proposal> propose(const std::string &goal_text,
                                        std::size_t n) const = 0;
};

inline constexpr const char *kUnrecordedError = "unrecorded";

/// Serves outcomes from a recorded transition log. Pairs the log never saw
/// come back as the error "unrecorded" with zero cost.
class ReplayEnvironment final : public Environment {
public:
  explicit ReplayEnvironment(TransitionLog log) : log_(std::move(log)) {
    for (const auto &r : log_.records())
      ids_.try_emplace(r.goal_text, r.goal_id);
  }

  EnvResponse apply(const std::string &goal_text,
                    const std::string &tactic_text) const override {
    if (const auto *r = log_.find(goal_text, tactic_text))
      return {r->time_s, r->output};
    return {0.0, ErrorMessage{kUnrecordedError}};
  }

  std::string goal_id(const std::string &goal_text) const override {
    const auto it = ids_.find(goal_text);
    return it == ids_.end() ? goal_text : it->second;
  }

  const TransitionLog &log() const { return log_; }

private:
  TransitionLog log_;
  std::map<std::string, std::string> ids_;
};

enum class TimeMode { Simulated, Live };

struct SearchBudget {
  double wall_timeout_s = 600.0;
  std::optional<std::size_t> max_expansions;
  TimeMode mode = TimeMode::Simulated;

  void validate() const {
    if (!(wall_timeout_s > 0.0))
      throw InvalidInput("wall timeout must be positive");
    if (!std::isfinite(wall_timeout_s) && !max_expansions)
      throw InvalidInput("search budget needs a finite bound");
    if (max_expansions && *max_expansions == 0)
      throw InvalidInput("max_expansions must be positive");
  }
};

enum class StopReason {
  Proved,
  Timeout,
  ExpansionLimit,
  FrontierExhausted,
  EnvironmentFailure,
  ProviderFailure,
};

inline std::string_view to_string(StopReason r) {
  switch (r) {
  case StopReason::Proved:
    return "proved";
  case StopReason::Timeout:
    return "timeout";
  case StopReason::ExpansionLimit:
    return "expansion-limit";
  case StopReason::FrontierExhausted:
    return "frontier-exhausted";
  case StopReason::EnvironmentFailure:
    return "environment-failure";
  case StopReason::ProviderFailure:
    return "provider-failure";
  }
  return "?";
}

struct ExpansionRecord {
  std::string node_id;
  std::string goal_text;
  double cum_logprob = 0.0;
  std::size_t proposed = 0;
  std::size_t distinct = 0;
  std::size_t selected = 0;
  std::size_t executed = 0;
  std::size_t succeeded = 0;
  double env_time_s = 0.0;
};

struct AttemptReport {
  std::string attempt_id;
  std::string goal_id;
  std::string strategy;
  bool proved = false;
  StopReason stop = StopReason::FrontierExhausted;
  std::string failure; // message for the *-failure stop reasons
  std::vector<ExpansionRecord> expansions;
  std::size_t env_calls = 0;
  double env_time_s = 0.0;
  std::size_t nodes = 0;
};

inline nlohmann::ordered_json to_json(const AttemptReport &r) {
  nlohmann::ordered_json j;
  j["attempt_id"] = r.attempt_id;
  j["goal_id"] = r.goal_id;
  j["strategy"] = r.strategy;
  j["proved"] = r.proved;
  j["stop"] = std::string(to_string(r.stop));
  if (!r.failure.empty())
    j["failure"] = r.failure;
  j["env_calls"] = r.env_calls;
  j["env_time_s"] = r.env_time_s;
  j["nodes"] = r.nodes;
  auto &ex = j["expansions"] = nlohmann::ordered_json::array();
  for (const auto &e : r.expansions) {
    nlohmann::ordered_json x;
    x["node_id"] = e.node_id;
    x["goal_text"] = e.goal_text;
    x["cum_logprob"] = e.cum_logprob;
    x["proposed"] = e.proposed;
    x["distinct"] = e.distinct;
    x["selected"] = e.selected;
    x["executed"] = e.executed;
    x["succeeded"] = e.succeeded;
    x["env_time_s"] = e.env_time_s;
    ex.push_back(std::move(x));
  }
  return j;
}

inline AttemptReport attempt_report_from_json(const nlohmann::json &j) {
  AttemptReport r;
  r.attempt_id = j.at("attempt_id").get<std::string>();
  r.goal_id = j.at("goal_id").get<std::string>();
  r.strategy = j.value("strategy", std::string{});
  r.proved = j.at("proved").get<bool>();
  r.env_calls = j.value("env_calls", std::size_t{0});
  r.env_time_s = j.value("env_time_s", 0.0);
  r.nodes = j.value("nodes", std::size_t{0});
  r.failure = j.value("failure", std::string{});
  const auto stop = j.value("stop", std::string{"frontier-exhausted"});
  for (auto s : {StopReason::Proved, StopReason::Timeout,
                 StopReason::ExpansionLimit, StopReason::FrontierExhausted,
                 StopReason::EnvironmentFailure, StopReason::ProviderFailure})
    if (to_string(s) == stop)
      r.stop = s;
  if (j.contains("expansions"))
    for (const auto &x : j.at("expansions")) {
      ExpansionRecord e;
      e.node_id = x.at("node_id").get<std::string>();
      e.goal_text = x.value("goal_text", std::string{});
      e.cum_logprob = x.value("cum_logprob", 0.0);
      e.proposed = x.value("proposed", std::size_t{0});
      e.distinct = x.value("distinct", std::size_t{0});
      e.selected = x.value("selected", std::size_t{0});
      e.executed = x.value("executed", std::size_t{0});
      e.succeeded = x.value("succeeded", std::size_t{0});
      e.env_time_s = x.value("env_time_s", 0.0);
      r.expansions.push_back(std::move(e));
    }
  return r;
}

struct SearchOptions {
  std::size_t n_candidates = 64;
  std::string attempt_id = "attempt-0";
  /// Called right before a node is expanded.
  std::function<void(const ProofTree &, NodeIndex)> on_expand;
};

struct SearchResult {
  ProofTree tree;
  AttemptReport report;
  TransitionLog log;
};

inline std::string node_label(NodeIndex i) { return "n" + std::to_string(i); }

namespace detail {

// Open nodes by descending cum_logprob, then insertion order.
struct FrontierKey {
  double cum_logprob;
  NodeIndex node;
  bool operator<(const FrontierKey &o) const {
    if (cum_logprob != o.cum_logprob)
      return cum_logprob > o.cum_logprob;
    return node < o.node;
  }
};

class Clock {
public:
  explicit Clock(TimeMode mode) : mode_(mode) {}
  double elapsed() const {
    if (mode_ == TimeMode::Simulated || !started_)
      return simulated_;
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start_)
        .count();
  }
  void on_call_start() {
    if (!started_) {
      started_ = true;
      start_ = std::chrono::steady_clock::now();
    }
  }
  void charge(double seconds) { simulated_ += seconds; }

private:
  TimeMode mode_;
  bool started_ = false;
  std::chrono::steady_clock::time_point start_;
  double simulated_ = 0.0;
};

} // namespace detail

/// Best-first search over cumulative log probability. Each expansion
/// proposes candidates, embeds them, filters to K and applies the survivors.
template <std::uniform_random_bit_generator Rng>
SearchResult best_first_search(const GoalRef &root, const TacticSource &source,
                               const FilterConfig &filter_cfg,
                               const EmbeddingProvider &provider,
                               const Environment &env,
                               const SearchBudget &budget, Rng &rng,
                               const SearchOptions &opts = {}) {
  budget.validate();
  filter_cfg.validate();

  SearchResult result;
  auto &tree = result.tree;
  auto &report = result.report;
  report.attempt_id = opts.attempt_id;
  report.goal_id = root.id;
  report.strategy = std::string(to_string(filter_cfg.strategy));

  std::set<detail::FrontierKey> frontier;
  const NodeIndex root_node = tree.add_root(root.id, root.text);
  frontier.insert({0.0, root_node});

  detail::Clock clock(budget.mode);
  auto finish = [&](StopReason why) {
    report.stop = why;
    report.proved = tree.root_proved();
    report.nodes = tree.size();
    report.env_time_s = clock.elapsed();
    return std::move(result);
  };

  while (true) {
    if (tree.root_proved())
      return finish(StopReason::Proved);
    if (frontier.empty())
      return finish(StopReason::FrontierExhausted);
    if (budget.max_expansions && report.expansions.size() >= *budget.max_expansions)
      return finish(StopReason::ExpansionLimit);
    if (clock.elapsed() >= budget.wall_timeout_s)
      return finish(StopReason::Timeout);

    const NodeIndex current = frontier.begin()->node;
    frontier.erase(frontier.begin());
    if (opts.on_expand)
      opts.on_expand(tree, current);

    const std::string goal_text = tree.node(current).goal_text;
    const std::string goal_id = tree.node(current).goal_id;
    const double base_logprob = tree.node(current).cum_logprob;

    ExpansionRecord ex;
    ex.node_id = node_label(current);
    ex.goal_text = goal_text;
    ex.cum_logprob = base_logprob;
    tree.set_status(current, NodeStatus::Expanded);

    const auto proposals = source.propose(goal_text, opts.n_candidates);
    ex.proposed = proposals.size();
    if (proposals.empty()) {
      tree.set_status(current, NodeStatus::Failed);
      report.expansions.push_back(std::move(ex));
      continue;
    }

    std::vector<std::string> texts;
    texts.reserve(proposals.size());
    for (const auto &p : proposals)
      texts.push_back(p.text);
    std::vector<EmbeddingRecord> records;
    try {
      records = provider.embed(GoalRef{goal_id, goal_text}, texts);
    } catch (const Error &e) {
      report.failure = e.what();
      report.expansions.push_back(std::move(ex));
      return finish(StopReason::ProviderFailure);
    }

    std::vector<ScoredTactic> candidates;
    candidates.reserve(proposals.size());
    for (std::size_t i = 0; i < proposals.size(); ++i)
      candidates.push_back(ScoredTactic{proposals[i].text, proposals[i].logit,
                                        std::move(records[i].embedding),
                                        records[i].pred_success,
                                        records[i].pred_time});
    const auto chosen = select_tactics(goal_text, candidates, filter_cfg, rng);
    ex.distinct = chosen.distinct;
    ex.selected = chosen.selected.size();

    bool out_of_time = false;
    for (std::size_t idx : chosen.selected) {
      if (clock.elapsed() >= budget.wall_timeout_s) {
        out_of_time = true;
        break;
      }
      const auto &cand = candidates[idx];
      clock.on_call_start();
      EnvResponse response;
      try {
        response = env.apply(goal_text, cand.text);
      } catch (const EnvironmentFailure &e) {
        report.failure = e.what();
        report.expansions.push_back(std::move(ex));
        return finish(StopReason::EnvironmentFailure);
      }
      clock.charge(response.time_s);
      ++report.env_calls;
      ++ex.executed;
      ex.env_time_s += response.time_s;

      TransitionRecord rec{goal_id,   goal_text,         cand.text,
                           response.time_s, response.output, ex.node_id,
                           opts.attempt_id};
      result.log.add(std::move(rec));

      ProofEdge edge;
      edge.source = current;
      edge.tactic_text = cand.text;
      edge.logit = cand.logit;
      edge.time_s = response.time_s;
      if (const auto *err = std::get_if<ErrorMessage>(&response.output)) {
        edge.outcome = *err;
        tree.add_edge(std::move(edge));
        continue;
      }
      ++ex.succeeded;
      const auto &goals = std::get<Subgoals>(response.output).goals;
      std::vector<NodeIndex> children;
      children.reserve(goals.size());
      const double child_logprob = base_logprob + cand.logit;
      for (const auto &g : goals) {
        const NodeIndex *existing = tree.find(g);
        const double before = existing ? tree.node(*existing).cum_logprob : 0.0;
        const auto [child, created] =
            tree.add_or_merge(env.goal_id(g), g, child_logprob);
        const auto &node = tree.node(child);
        if (created) {
          frontier.insert({node.cum_logprob, child});
        } else if (node.status == NodeStatus::Open &&
                   node.cum_logprob != before) {
          frontier.erase({before, child});
          frontier.insert({node.cum_logprob, child});
        }
        children.push_back(child);
      }
      edge.outcome = std::move(children);
      tree.add_edge(std::move(edge));
      // Only expanded nodes can become proved, and those have already left
      // the frontier.
      propagate_proved(tree, current);
      if (tree.root_proved())
        break;
    }

    if (!tree.node(current).proved()) {
      bool any_success = false;
      for (EdgeIndex e : tree.node(current).out_edges)
        any_success = any_success || !tree.edge(e).is_error();
      if (!any_success)
        tree.set_status(current, NodeStatus::Failed);
    }
    report.expansions.push_back(std::move(ex));
    if (out_of_time)
      return finish(StopReason::Timeout);
  }
}

} // namespace dprover

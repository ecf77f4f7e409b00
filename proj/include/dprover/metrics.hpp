#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dprover/embed.hpp"
#include "dprover/error.hpp"
#include "dprover/transitions.hpp"

namespace dprover::metrics {

/// Mean with standard error (sample std, n - 1) over n observations.
struct MetricSummary {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t n = 0;
};

inline MetricSummary summarize(std::span<const double> xs) {
  MetricSummary s;
  s.n = xs.size();
  if (xs.empty())
    return s;
  double sum = 0.0;
  for (double x : xs)
    sum += x;
  s.mean = sum / static_cast<double>(s.n);
  if (s.n > 1) {
    double ss = 0.0;
    for (double x : xs)
      ss += (x - s.mean) * (x - s.mean);
    const double sd = std::sqrt(ss / static_cast<double>(s.n - 1));
    s.std_error = sd / std::sqrt(static_cast<double>(s.n));
  }
  return s;
}

/// Transitions executed at one node, in execution order.
struct NodeGroup {
  std::string attempt_id;
  std::string node_id;
  std::vector<const TransitionRecord *> transitions;
};

/// Groups by (attempt_id, node_id) in order of first appearance.
inline std::vector<NodeGroup> group_by_node(const TransitionLog &log) {
  std::vector<NodeGroup> groups;
  std::map<std::pair<std::string, std::string>, std::size_t> where;
  for (const auto &r : log.records()) {
    auto [it, inserted] =
        where.try_emplace(std::make_pair(r.attempt_id, r.node_id), groups.size());
    if (inserted)
      groups.push_back(NodeGroup{r.attempt_id, r.node_id, {}});
    groups[it->second].transitions.push_back(&r);
  }
  return groups;
}

/// Percentage of goals with a success among their first k attempts.
inline double pass_at_k(const std::vector<std::vector<bool>> &results,
                        std::size_t k) {
  if (k == 0)
    throw InvalidInput("pass@k needs k >= 1");
  if (results.empty())
    throw InvalidInput("pass@k over zero goals");
  std::size_t hits = 0;
  for (std::size_t g = 0; g < results.size(); ++g) {
    if (results[g].size() < k)
      throw InvalidInput("goal " + std::to_string(g) + " has " +
                         std::to_string(results[g].size()) +
                         " attempts, fewer than k = " + std::to_string(k));
    for (std::size_t a = 0; a < k; ++a)
      if (results[g][a]) {
        ++hits;
        break;
      }
  }
  return 100.0 * static_cast<double>(hits) /
         static_cast<double>(results.size());
}

inline MetricSummary success_rate_per_node(const TransitionLog &log) {
  if (log.empty())
    throw InvalidInput("success rate over an empty log");
  std::vector<double> rates;
  for (const auto &g : group_by_node(log)) {
    std::size_t ok = 0;
    for (const auto *t : g.transitions)
      ok += static_cast<std::size_t>(t->status());
    rates.push_back(100.0 * static_cast<double>(ok) /
                    static_cast<double>(g.transitions.size()));
  }
  return summarize(rates);
}

namespace detail {

// Tracks responses already seen at one node. A response is new if it is an
// unseen error text, a subgoal list with an unseen goal, or the first
// "no goals" closing response.
class ResponseTracker {
public:
  bool observe(const TransitionRecord &t) {
    if (const auto *err = t.error())
      return errors_.insert(*err).second;
    const auto &goals = *t.subgoals();
    if (goals.empty()) {
      const bool fresh = !closed_;
      closed_ = true;
      return fresh;
    }
    bool fresh = false;
    for (const auto &g : goals)
      fresh = goals_.insert(g).second || fresh;
    return fresh;
  }

private:
  std::set<std::string> errors_;
  std::set<std::string> goals_;
  bool closed_ = false;
};

} // namespace detail

inline MetricSummary unique_response_rate(const TransitionLog &log) {
  if (log.empty())
    throw InvalidInput("unique response rate over an empty log");
  std::vector<double> rates;
  for (const auto &g : group_by_node(log)) {
    detail::ResponseTracker seen;
    std::size_t unique = 0;
    for (const auto *t : g.transitions)
      unique += seen.observe(*t) ? 1 : 0;
    rates.push_back(100.0 * static_cast<double>(unique) /
                    static_cast<double>(g.transitions.size()));
  }
  return summarize(rates);
}

/// Like unique_response_rate but over successful transitions only; nodes
/// without a success are left out.
inline MetricSummary unique_subgoal_rate(const TransitionLog &log) {
  if (log.empty())
    throw InvalidInput("unique subgoal rate over an empty log");
  std::vector<double> rates;
  for (const auto &g : group_by_node(log)) {
    detail::ResponseTracker seen;
    std::size_t unique = 0, successes = 0;
    for (const auto *t : g.transitions) {
      if (!t->succeeded())
        continue;
      ++successes;
      unique += seen.observe(*t) ? 1 : 0;
    }
    if (successes > 0)
      rates.push_back(100.0 * static_cast<double>(unique) /
                      static_cast<double>(successes));
  }
  return summarize(rates);
}

/// Per-transition execution time in milliseconds.
inline MetricSummary execution_time_stats(const TransitionLog &log) {
  std::vector<double> ms;
  ms.reserve(log.size());
  for (const auto &r : log.records())
    ms.push_back(r.time_s * 1000.0);
  return summarize(ms);
}

/// Marks, per transition, whether it is a success yielding a new subgoal at
/// its node (the unique_subgoal_rate rule). Indexed like log.records().
inline std::vector<bool> unique_subgoal_flags(const TransitionLog &log) {
  std::vector<bool> flags(log.size(), false);
  std::map<std::pair<std::string, std::string>, detail::ResponseTracker> seen;
  for (std::size_t i = 0; i < log.size(); ++i) {
    const auto &r = log.records()[i];
    if (!r.succeeded())
      continue;
    flags[i] = seen[std::make_pair(r.attempt_id, r.node_id)].observe(r);
  }
  return flags;
}

struct NodeEmbeddings {
  std::string node_key;
  std::vector<std::vector<double>> embeddings;
  std::vector<bool> unique_subgoal; // parallel to embeddings
};

struct SimilaritySummary {
  std::vector<std::pair<std::string, double>> node_means;
  double overall_mean = 0.0;
  std::size_t nodes = 0;
};

inline double cosine(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw InvalidInput("cosine: dimension mismatch");
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0.0 || bb == 0.0)
    throw InvalidInput("cosine of a zero vector");
  return ab / std::sqrt(aa * bb);
}

/// Mean pairwise cosine per node (optionally restricted to tactics that
/// produced a new subgoal); nodes with fewer than two members are skipped.
inline SimilaritySummary
embedding_similarity_summary(std::span<const NodeEmbeddings> nodes,
                             bool unique_subgoal_filter) {
  SimilaritySummary out;
  double total = 0.0;
  for (const auto &node : nodes) {
    std::vector<const std::vector<double> *> members;
    for (std::size_t i = 0; i < node.embeddings.size(); ++i)
      if (!unique_subgoal_filter ||
          (i < node.unique_subgoal.size() && node.unique_subgoal[i]))
        members.push_back(&node.embeddings[i]);
    if (members.size() < 2)
      continue;
    double sum = 0.0;
    std::size_t pairs = 0;
    for (std::size_t a = 0; a < members.size(); ++a)
      for (std::size_t b = a + 1; b < members.size(); ++b) {
        sum += cosine(*members[a], *members[b]);
        ++pairs;
      }
    const double mean = sum / static_cast<double>(pairs);
    out.node_means.emplace_back(node.node_key, mean);
    total += mean;
  }
  out.nodes = out.node_means.size();
  if (out.nodes > 0)
    out.overall_mean = total / static_cast<double>(out.nodes);
  return out;
}

/// Joins a log with an embedding provider into per-node embedding groups.
inline std::vector<NodeEmbeddings>
node_embeddings(const TransitionLog &log, const EmbeddingProvider &provider) {
  const auto flags = unique_subgoal_flags(log);
  std::vector<NodeEmbeddings> out;
  std::map<std::pair<std::string, std::string>, std::size_t> where;
  for (std::size_t i = 0; i < log.size(); ++i) {
    const auto &r = log.records()[i];
    auto [it, inserted] = where.try_emplace(
        std::make_pair(r.attempt_id, r.node_id), out.size());
    if (inserted)
      out.push_back(NodeEmbeddings{r.attempt_id + "/" + r.node_id, {}, {}});
    const std::string tactic[] = {r.tactic_text};
    auto rec = provider.embed(GoalRef{r.goal_id, r.goal_text}, tactic);
    out[it->second].embeddings.push_back(std::move(rec.front().embedding));
    out[it->second].unique_subgoal.push_back(flags[i]);
  }
  return out;
}

} // namespace dprover::metrics

#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "dprover/error.hpp"
#include "dprover/transitions.hpp"

namespace dprover {

enum class NodeStatus { Open, Expanded, Proved, Failed };

inline std::string_view to_string(NodeStatus s) {
  switch (s) {
  case NodeStatus::Open:
    return "open";
  case NodeStatus::Expanded:
    return "expanded";
  case NodeStatus::Proved:
    return "proved";
  case NodeStatus::Failed:
    return "failed";
  }
  return "?";
}

using NodeIndex = std::size_t;
using EdgeIndex = std::size_t;

struct ProofEdge {
  NodeIndex source = 0;
  std::string tactic_text;
  double logit = 0.0;
  double time_s = 0.0;
  /// Error, or the child nodes produced (empty: goal closed).
  std::variant<ErrorMessage, std::vector<NodeIndex>> outcome;

  bool is_error() const { return std::holds_alternative<ErrorMessage>(outcome); }
  const std::vector<NodeIndex> &children() const {
    static const std::vector<NodeIndex> none;
    const auto *c = std::get_if<std::vector<NodeIndex>>(&outcome);
    return c ? *c : none;
  }
};

struct ProofNode {
  std::string goal_id;
  std::string goal_text;
  double cum_logprob = 0.0;
  NodeStatus status = NodeStatus::Open;
  std::vector<EdgeIndex> in_edges;  // edges listing this node as a child
  std::vector<EdgeIndex> out_edges; // tactics applied to this goal

  bool proved() const { return status == NodeStatus::Proved; }
};

/// DAG of goals keyed by exact goal text. Node 0 is the root. Node indices
/// double as insertion order.
class ProofTree {
public:
  NodeIndex add_root(std::string goal_id, std::string goal_text) {
    if (!nodes_.empty())
      throw InvalidInput("proof tree already has a root");
    return add_node(std::move(goal_id), std::move(goal_text), 0.0);
  }

  /// Returns the node for `goal_text`, creating it if absent. An existing
  /// node keeps the larger of its current and the offered cum_logprob.
  std::pair<NodeIndex, bool> add_or_merge(std::string goal_id,
                                          std::string goal_text,
                                          double cum_logprob) {
    if (const auto it = by_text_.find(goal_text); it != by_text_.end()) {
      auto &node = nodes_[it->second];
      if (cum_logprob > node.cum_logprob)
        node.cum_logprob = cum_logprob;
      return {it->second, false};
    }
    return {add_node(std::move(goal_id), std::move(goal_text), cum_logprob),
            true};
  }

  EdgeIndex add_edge(ProofEdge edge) {
    if (edge.source >= nodes_.size())
      throw InvalidInput("edge source out of range");
    const EdgeIndex id = edges_.size();
    nodes_[edge.source].out_edges.push_back(id);
    for (NodeIndex c : edge.children()) {
      if (c >= nodes_.size())
        throw InvalidInput("edge child out of range");
      nodes_[c].in_edges.push_back(id);
    }
    edges_.push_back(std::move(edge));
    return id;
  }

  const ProofNode &node(NodeIndex i) const { return nodes_.at(i); }
  ProofNode &node(NodeIndex i) { return nodes_.at(i); }
  const ProofEdge &edge(EdgeIndex i) const { return edges_.at(i); }
  const std::vector<ProofNode> &nodes() const { return nodes_; }
  const std::vector<ProofEdge> &edges() const { return edges_; }
  std::size_t size() const { return nodes_.size(); }
  bool root_proved() const { return !nodes_.empty() && nodes_[0].proved(); }

  const NodeIndex *find(const std::string &goal_text) const {
    const auto it = by_text_.find(goal_text);
    return it == by_text_.end() ? nullptr : &it->second;
  }

  /// Status update that refuses to leave the Proved state.
  void set_status(NodeIndex i, NodeStatus s) {
    auto &node = nodes_.at(i);
    if (node.status == NodeStatus::Proved)
      return;
    node.status = s;
  }

private:
  NodeIndex add_node(std::string goal_id, std::string goal_text,
                     double cum_logprob) {
    const NodeIndex id = nodes_.size();
    by_text_.emplace(goal_text, id);
    nodes_.push_back(ProofNode{std::move(goal_id), std::move(goal_text),
                               cum_logprob, NodeStatus::Open, {}, {}});
    return id;
  }

  std::vector<ProofNode> nodes_;
  std::vector<ProofEdge> edges_;
  std::unordered_map<std::string, NodeIndex> by_text_;
};

/// True when some successful edge out of `i` has every child proved.
inline bool has_proving_edge(const ProofTree &tree, NodeIndex i) {
  for (EdgeIndex e : tree.node(i).out_edges) {
    const auto &edge = tree.edge(e);
    if (edge.is_error())
      continue;
    bool all = true;
    for (NodeIndex c : edge.children())
      all = all && tree.node(c).proved();
    if (all)
      return true;
  }
  return false;
}

/// Re-evaluates `node` and, for every node that becomes proved, its parents,
/// until nothing changes. Returns the nodes newly marked proved.
inline std::vector<NodeIndex> propagate_proved(ProofTree &tree, NodeIndex node) {
  std::vector<NodeIndex> newly;
  std::vector<NodeIndex> work{node};
  while (!work.empty()) {
    const NodeIndex i = work.back();
    work.pop_back();
    if (tree.node(i).proved() || !has_proving_edge(tree, i))
      continue;
    tree.set_status(i, NodeStatus::Proved);
    newly.push_back(i);
    for (EdgeIndex e : tree.node(i).in_edges)
      work.push_back(tree.edge(e).source);
  }
  return newly;
}

} // namespace dprover

#pragma once

// Candidate files: JSON lines of
//   {goal_id, text, logit, embedding: [d floats], pred_success, pred_time}
// where the embedding and predictions may be omitted when a provider will
// supply them.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "dprover/error.hpp"
#include "dprover/filter.hpp"
#include "dprover/search.hpp"

namespace dprover {

struct CandidateRecord {
  std::string goal_id;
  ScoredTactic tactic;
  bool has_scores = false; // embedding + predictions present
};

inline std::vector<CandidateRecord>
read_candidates(const std::filesystem::path &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is)
    throw InvalidInput("cannot open candidate file " + path.string());
  std::vector<CandidateRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos)
      continue;
    try {
      const auto j = nlohmann::json::parse(line);
      CandidateRecord c;
      c.goal_id = j.at("goal_id").get<std::string>();
      c.tactic.text = j.at("text").get<std::string>();
      c.tactic.logit = j.at("logit").get<double>();
      if (j.contains("embedding")) {
        c.tactic.embedding = j.at("embedding").get<std::vector<double>>();
        c.tactic.pred_success = j.at("pred_success").get<double>();
        c.tactic.pred_time = j.at("pred_time").get<double>();
        c.has_scores = true;
      }
      out.push_back(std::move(c));
    } catch (const nlohmann::json::exception &e) {
      throw ParseError(lineno, line.substr(0, 80), e.what());
    }
  }
  return out;
}

inline nlohmann::ordered_json to_json(const CandidateRecord &c) {
  nlohmann::ordered_json j;
  j["goal_id"] = c.goal_id;
  j["text"] = c.tactic.text;
  j["logit"] = c.tactic.logit;
  if (c.has_scores) {
    j["embedding"] = c.tactic.embedding;
    j["pred_success"] = c.tactic.pred_success;
    j["pred_time"] = c.tactic.pred_time;
  }
  return j;
}

/// Replays recorded beam-search output. Goal statements are mapped to the
/// candidate file's goal ids through `ids` (goal_text -> goal_id).
class CandidateFileSource final : public TacticSource {
public:
  CandidateFileSource(const std::vector<CandidateRecord> &records,
                      std::map<std::string, std::string> ids)
      : ids_(std::move(ids)) {
    for (const auto &r : records)
      by_goal_[r.goal_id].push_back({r.tactic.text, r.tactic.logit});
    for (auto &[goal, list] : by_goal_)
      std::stable_sort(list.begin(), list.end(),
                       [](const Proposal &a, const Proposal &b) {
                         return a.logit > b.logit;
                       });
  }

  std::vector<Proposal> propose(const std::string &goal_text,
                                std::size_t n) const override {
    const auto id = ids_.find(goal_text);
    const std::string &key = id == ids_.end() ? goal_text : id->second;
    const auto it = by_goal_.find(key);
    if (it == by_goal_.end())
      return {};
    std::vector<Proposal> out(
        it->second.begin(),
        it->second.begin() +
            static_cast<long>(std::min(n, it->second.size())));
    return out;
  }

private:
  std::map<std::string, std::string> ids_;
  std::map<std::string, std::vector<Proposal>> by_goal_;
};

} // namespace dprover

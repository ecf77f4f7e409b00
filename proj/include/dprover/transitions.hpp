#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "dprover/error.hpp"

namespace dprover {

struct ErrorMessage {
  std::string message;
  friend bool operator==(const ErrorMessage &, const ErrorMessage &) = default;
};

/// Goals produced by a successful tactic; empty means the goal was closed.
struct Subgoals {
  std::vector<std::string> goals;
  friend bool operator==(const Subgoals &, const Subgoals &) = default;
};

using TacticOutput = std::variant<ErrorMessage, Subgoals>;

/// One environment application: (goal, tactic, status, time, output).
/// Status is derived from the output alternative, so the two cannot disagree.
struct TransitionRecord {
  std::string goal_id;
  std::string goal_text;
  std::string tactic_text;
  double time_s = 0.0;
  TacticOutput output = ErrorMessage{};
  std::string node_id;
  std::string attempt_id;

  int status() const { return std::holds_alternative<Subgoals>(output) ? 1 : 0; }
  bool succeeded() const { return status() == 1; }
  const std::vector<std::string> *subgoals() const {
    const auto *s = std::get_if<Subgoals>(&output);
    return s ? &s->goals : nullptr;
  }
  const std::string *error() const {
    const auto *e = std::get_if<ErrorMessage>(&output);
    return e ? &e->message : nullptr;
  }

  friend bool operator==(const TransitionRecord &,
                         const TransitionRecord &) = default;
};

/// Ordered records plus a first-wins (goal_text, tactic_text) index.
class TransitionLog {
public:
  TransitionLog() = default;
  explicit TransitionLog(std::vector<TransitionRecord> records) {
    for (auto &r : records)
      add(std::move(r));
  }

  void add(TransitionRecord record) {
    auto key = std::make_pair(record.goal_text, record.tactic_text);
    if (!index_.try_emplace(std::move(key), records_.size()).second)
      ++duplicates_;
    records_.push_back(std::move(record));
  }

  const std::vector<TransitionRecord> &records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  std::size_t duplicate_count() const { return duplicates_; }

  const TransitionRecord *find(const std::string &goal_text,
                               const std::string &tactic_text) const {
    const auto it = index_.find(std::make_pair(goal_text, tactic_text));
    return it == index_.end() ? nullptr : &records_[it->second];
  }

  friend bool operator==(const TransitionLog &a, const TransitionLog &b) {
    return a.records_ == b.records_;
  }

private:
  std::vector<TransitionRecord> records_;
  std::map<std::pair<std::string, std::string>, std::size_t> index_;
  std::size_t duplicates_ = 0;
};

inline nlohmann::ordered_json to_json(const TransitionRecord &r) {
  nlohmann::ordered_json j;
  j["attempt_id"] = r.attempt_id;
  j["node_id"] = r.node_id;
  j["goal_id"] = r.goal_id;
  j["goal_text"] = r.goal_text;
  j["tactic_text"] = r.tactic_text;
  j["status"] = r.status();
  j["time_s"] = r.time_s;
  nlohmann::ordered_json out;
  if (const auto *e = r.error())
    out["error"] = *e;
  else
    out["subgoals"] = *r.subgoals();
  j["output"] = std::move(out);
  return j;
}

/// Throws std::invalid_argument (with a reason) on schema violations.
inline TransitionRecord transition_from_json(const nlohmann::json &j) {
  TransitionRecord r;
  r.attempt_id = j.value("attempt_id", std::string{});
  r.node_id = j.value("node_id", std::string{});
  r.goal_id = j.at("goal_id").get<std::string>();
  r.goal_text = j.at("goal_text").get<std::string>();
  r.tactic_text = j.at("tactic_text").get<std::string>();
  r.time_s = j.at("time_s").get<double>();
  if (!(r.time_s >= 0.0) || !std::isfinite(r.time_s))
    throw std::invalid_argument("time_s must be non-negative");
  const int status = j.at("status").get<int>();
  const auto &out = j.at("output");
  const bool has_error = out.contains("error");
  const bool has_goals = out.contains("subgoals");
  if (has_error == has_goals)
    throw std::invalid_argument(
        "output must hold exactly one of 'error' or 'subgoals'");
  if (has_error)
    r.output = ErrorMessage{out.at("error").get<std::string>()};
  else
    r.output = Subgoals{out.at("subgoals").get<std::vector<std::string>>()};
  if (status != r.status())
    throw std::invalid_argument("status " + std::to_string(status) +
                                " disagrees with output");
  return r;
}

enum class ReadMode { Strict, Lenient };

struct LoadedLog {
  TransitionLog log;
  std::size_t lines = 0;   // non-blank lines seen
  std::size_t skipped = 0; // malformed lines dropped (lenient mode)
  std::vector<ParseError> problems;
};

inline LoadedLog read_log(std::istream &is, ReadMode mode = ReadMode::Strict) {
  LoadedLog out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos)
      continue;
    ++out.lines;
    try {
      out.log.add(transition_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception &e) {
      ParseError err(lineno, line.substr(0, 80), e.what());
      if (mode == ReadMode::Strict)
        throw err;
      ++out.skipped;
      out.problems.push_back(std::move(err));
    }
  }
  return out;
}

inline LoadedLog read_log(const std::filesystem::path &path,
                          ReadMode mode = ReadMode::Strict) {
  std::ifstream is(path, std::ios::binary);
  if (!is)
    throw InvalidInput("cannot open transition log " + path.string());
  return read_log(is, mode);
}

inline void write_log(std::ostream &os, const TransitionLog &log) {
  for (const auto &r : log.records())
    os << to_json(r).dump() << '\n';
}

inline void write_log(const std::filesystem::path &path,
                      const TransitionLog &log) {
  std::ofstream os(path, std::ios::binary);
  if (!os)
    throw Error("cannot write transition log " + path.string());
  write_log(os, log);
}

/// Random per-transition split; the first part holds round(N * f) records.
/// Relative order is preserved inside each part.
inline std::pair<TransitionLog, TransitionLog>
split_log(const TransitionLog &log, double train_fraction, std::uint64_t seed) {
  if (log.empty())
    throw InvalidInput("cannot split an empty log");
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw InvalidInput("train fraction must lie in (0, 1)");
  const std::size_t n = log.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train = static_cast<std::size_t>(
      std::llround(static_cast<double>(n) * train_fraction));
  std::vector<std::size_t> train(order.begin(),
                                 order.begin() + static_cast<long>(n_train));
  std::vector<std::size_t> test(order.begin() + static_cast<long>(n_train),
                                order.end());
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  TransitionLog a, b;
  for (std::size_t i : train)
    a.add(log.records()[i]);
  for (std::size_t i : test)
    b.add(log.records()[i]);
  return {std::move(a), std::move(b)};
}

/// Exact string match; no whitespace normalisation.
inline std::optional<TransitionRecord>
replay_lookup(const TransitionLog &log, const std::string &goal_text,
              const std::string &tactic_text) {
  if (const auto *r = log.find(goal_text, tactic_text))
    return *r;
  return std::nullopt;
}

} // namespace dprover

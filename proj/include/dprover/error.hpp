#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dprover {

/// Base of every exception thrown by the library. `kind()` is a stable,
/// machine-parseable tag used by the CLI when reporting failures.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string &what) : std::runtime_error(what) {}
  virtual const char *kind() const noexcept { return "error"; }
};

class InvalidInput : public Error {
public:
  using Error::Error;
  const char *kind() const noexcept override { return "invalid-input"; }
};

class InvalidData : public Error {
public:
  using Error::Error;
  const char *kind() const noexcept override { return "invalid-data"; }
};

class NumericalError : public Error {
public:
  NumericalError(const std::string &what, std::size_t order)
      : Error(what + " (matrix order " + std::to_string(order) + ")"),
        order_(order) {}
  std::size_t order() const noexcept { return order_; }
  const char *kind() const noexcept override { return "numerical"; }

private:
  std::size_t order_;
};

/// Requested subset size exceeds the number of strictly positive eigenvalues.
class RankDeficient : public Error {
public:
  RankDeficient(std::size_t requested, std::size_t rank)
      : Error("cannot sample " + std::to_string(requested) +
              " items from a kernel of rank " + std::to_string(rank)),
        requested_(requested), rank_(rank) {}
  std::size_t requested() const noexcept { return requested_; }
  std::size_t rank() const noexcept { return rank_; }
  const char *kind() const noexcept override { return "rank-deficient"; }

private:
  std::size_t requested_;
  std::size_t rank_;
};

class MissingEmbedding : public Error {
public:
  MissingEmbedding(const std::string &goal_id, const std::string &tactic)
      : Error("no embedding for goal '" + goal_id + "', tactic '" + tactic +
              "'"),
        goal_id_(goal_id), tactic_(tactic) {}
  const std::string &goal_id() const noexcept { return goal_id_; }
  const std::string &tactic() const noexcept { return tactic_; }
  const char *kind() const noexcept override { return "missing-embedding"; }

private:
  std::string goal_id_;
  std::string tactic_;
};

class TransportError : public Error {
public:
  TransportError(const std::string &what, int retries)
      : Error(what + " after " + std::to_string(retries) + " retries"),
        retries_(retries) {}
  int retries() const noexcept { return retries_; }
  const char *kind() const noexcept override { return "transport"; }

private:
  int retries_;
};

class ParseError : public Error {
public:
  ParseError(std::size_t line, const std::string &fragment,
             const std::string &reason)
      : Error("line " + std::to_string(line) + ": " + reason + ": " +
              fragment),
        line_(line), fragment_(fragment) {}
  std::size_t line() const noexcept { return line_; }
  const std::string &fragment() const noexcept { return fragment_; }
  const char *kind() const noexcept override { return "parse"; }

private:
  std::size_t line_;
  std::string fragment_;
};

/// Raised by environments whose backend became unreachable mid-attempt.
class EnvironmentFailure : public Error {
public:
  using Error::Error;
  const char *kind() const noexcept override { return "environment"; }
};

/// Bad command line or configuration; the CLI maps this to exit status 2.
class UsageError : public Error {
public:
  using Error::Error;
  const char *kind() const noexcept override { return "usage"; }
};

} // namespace dprover

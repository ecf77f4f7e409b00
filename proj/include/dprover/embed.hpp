#pragma once

// Embedding providers: supply a unit-norm tactic embedding together with a
// predicted success probability and execution time (seconds) for each
// (goal, tactic) pair.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "dprover/error.hpp"

namespace dprover {

inline constexpr std::size_t kDefaultEmbeddingDim = 1472;
inline constexpr double kRenormalizeTolerance = 1e-3;

struct EmbeddingRecord {
  std::string goal_id;
  std::string tactic_text;
  std::vector<double> embedding;
  double pred_success = 0.0;
  double pred_time = 0.0;

  friend bool operator==(const EmbeddingRecord &,
                         const EmbeddingRecord &) = default;
};

enum class ProviderKind { File, HashStub, Remote };

inline ProviderKind parse_provider_kind(std::string_view name) {
  if (name == "file")
    return ProviderKind::File;
  if (name == "hash" || name == "hash-stub" || name == "stub")
    return ProviderKind::HashStub;
  if (name == "remote")
    return ProviderKind::Remote;
  throw InvalidInput("unknown provider kind '" + std::string(name) + "'");
}

struct ProviderConfig {
  ProviderKind kind = ProviderKind::HashStub;
  std::size_t dim = kDefaultEmbeddingDim;
  std::string source; // file path or http://host:port
  std::uint64_t salt = 0;
  int max_retries = 3;
  double request_timeout_s = 30.0;

  void validate() const {
    if (dim == 0)
      throw InvalidInput("embedding dimension must be positive");
    if (kind == ProviderKind::File && !std::filesystem::exists(source))
      throw InvalidInput("embedding file not found: " + source);
    if (kind == ProviderKind::Remote && source.empty())
      throw InvalidInput("remote provider needs an endpoint address");
    if (max_retries < 0)
      throw InvalidInput("max_retries must be non-negative");
  }
};

/// Goal identity as seen by providers: stable id plus the goal statement.
struct GoalRef {
  std::string id;
  std::string text;
};

class EmbeddingProvider {
public:
  virtual ~EmbeddingProvider() = default;
  /// One record per tactic, in order.
  virtual std::vector<EmbeddingRecord>
  embed(const GoalRef &goal, std::span<const std::string> tactics) const = 0;
  virtual std::size_t dim() const = 0;
};

/// Checks dimension and rescales to unit norm; deviations above 1e-3 are
/// treated as corrupt data.
inline void renormalize_embedding(std::vector<double> &v, std::size_t dim,
                                  std::string_view context) {
  if (v.size() != dim)
    throw InvalidData(std::string(context) + ": embedding dimension " +
                      std::to_string(v.size()) + ", expected " +
                      std::to_string(dim));
  double sq = 0.0;
  for (double x : v)
    sq += x * x;
  const double norm = std::sqrt(sq);
  if (!(std::abs(norm - 1.0) <= kRenormalizeTolerance))
    throw InvalidData(std::string(context) + ": embedding norm " +
                      std::to_string(norm) + " is not close to 1");
  for (double &x : v)
    x /= norm;
}

/// FNV-1a over the salt bytes (little endian) and the length-prefixed strings.
inline std::uint64_t stable_hash(std::uint64_t salt, std::string_view a,
                                 std::string_view b) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix_byte = [&h](unsigned char c) {
    h ^= c;
    h *= 0x100000001b3ULL;
  };
  auto mix_u64 = [&](std::uint64_t v) {
    for (int i = 0; i < 8; ++i)
      mix_byte(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
  };
  mix_u64(salt);
  mix_u64(a.size());
  for (char c : a)
    mix_byte(static_cast<unsigned char>(c));
  mix_u64(b.size());
  for (char c : b)
    mix_byte(static_cast<unsigned char>(c));
  return h;
}

/// Deterministic stand-in for a trained encoder/predictor.
inline EmbeddingRecord hash_stub_embed(std::string_view goal,
                                       std::string_view tactic,
                                       std::size_t dim, std::uint64_t salt) {
  if (dim < 2)
    throw InvalidInput("hash stub needs dim >= 2");
  std::mt19937_64 rng(stable_hash(salt, goal, tactic));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  EmbeddingRecord rec;
  rec.goal_id = std::string(goal);
  rec.tactic_text = std::string(tactic);
  rec.embedding.resize(dim);
  double sq = 0.0;
  do {
    sq = 0.0;
    for (double &x : rec.embedding) {
      x = normal(rng);
      sq += x * x;
    }
  } while (sq == 0.0);
  const double norm = std::sqrt(sq);
  for (double &x : rec.embedding)
    x /= norm;
  rec.pred_success = unit(rng);
  rec.pred_time = 0.05 + 0.5 * unit(rng);
  return rec;
}

class HashStubProvider final : public EmbeddingProvider {
public:
  HashStubProvider(std::size_t dim, std::uint64_t salt)
      : dim_(dim), salt_(salt) {}

  std::vector<EmbeddingRecord>
  embed(const GoalRef &goal, std::span<const std::string> tactics) const override {
    std::vector<EmbeddingRecord> out;
    out.reserve(tactics.size());
    for (const auto &t : tactics)
      out.push_back(hash_stub_embed(goal.id, t, dim_, salt_));
    return out;
  }
  std::size_t dim() const override { return dim_; }

private:
  std::size_t dim_;
  std::uint64_t salt_;
};

inline nlohmann::ordered_json to_json(const EmbeddingRecord &r) {
  nlohmann::ordered_json j;
  j["goal_id"] = r.goal_id;
  j["tactic_text"] = r.tactic_text;
  j["embedding"] = r.embedding;
  j["pred_success"] = r.pred_success;
  j["pred_time"] = r.pred_time;
  return j;
}

inline EmbeddingRecord embedding_from_json(const nlohmann::json &j) {
  EmbeddingRecord r;
  r.goal_id = j.at("goal_id").get<std::string>();
  r.tactic_text = j.at("tactic_text").get<std::string>();
  r.embedding = j.at("embedding").get<std::vector<double>>();
  r.pred_success = j.at("pred_success").get<double>();
  r.pred_time = j.at("pred_time").get<double>();
  return r;
}

inline void write_embedding_file(const std::filesystem::path &path,
                                 std::span<const EmbeddingRecord> records) {
  std::ofstream os(path, std::ios::binary);
  if (!os)
    throw Error("cannot write " + path.string());
  for (const auto &r : records)
    os << to_json(r).dump() << '\n';
}

/// Lookup table over an embedding JSON-lines file, keyed by
/// (goal_id, exact tactic text). Embeddings are renormalised on load.
class FileProvider final : public EmbeddingProvider {
public:
  FileProvider(const std::filesystem::path &path, std::size_t dim)
      : dim_(dim) {
    std::ifstream is(path, std::ios::binary);
    if (!is)
      throw InvalidInput("cannot open embedding file " + path.string());
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      if (line.find_first_not_of(" \t\r") == std::string::npos)
        continue;
      EmbeddingRecord rec;
      try {
        rec = embedding_from_json(nlohmann::json::parse(line));
      } catch (const nlohmann::json::exception &e) {
        throw ParseError(lineno, line.substr(0, 80), e.what());
      }
      renormalize_embedding(rec.embedding, dim_,
                            path.string() + ":" + std::to_string(lineno));
      auto key = std::make_pair(rec.goal_id, rec.tactic_text);
      table_.try_emplace(std::move(key), std::move(rec));
    }
  }

  std::vector<EmbeddingRecord>
  embed(const GoalRef &goal, std::span<const std::string> tactics) const override {
    std::vector<EmbeddingRecord> out;
    out.reserve(tactics.size());
    for (const auto &t : tactics) {
      const auto it = table_.find(std::make_pair(goal.id, t));
      if (it == table_.end())
        throw MissingEmbedding(goal.id, t);
      out.push_back(it->second);
    }
    return out;
  }
  std::size_t dim() const override { return dim_; }
  std::size_t size() const { return table_.size(); }

private:
  std::size_t dim_;
  std::map<std::pair<std::string, std::string>, EmbeddingRecord> table_;
};

/// Client for an external inference service:
///   POST /embed {goal, tactics} -> {embeddings, success, time}
class RemoteProvider final : public EmbeddingProvider {
public:
  RemoteProvider(std::string endpoint, std::size_t dim, int max_retries,
                 double timeout_s)
      : endpoint_(std::move(endpoint)), dim_(dim), max_retries_(max_retries),
        timeout_s_(timeout_s) {}

  std::vector<EmbeddingRecord>
  embed(const GoalRef &goal, std::span<const std::string> tactics) const override {
    nlohmann::json body;
    body["goal"] = goal.text;
    body["tactics"] = std::vector<std::string>(tactics.begin(), tactics.end());
    const std::string payload = body.dump();

    std::string last_error = "no attempt made";
    for (int attempt = 0; attempt <= max_retries_; ++attempt) {
      httplib::Client client(endpoint_);
      const auto timeout = std::chrono::duration<double>(timeout_s_);
      client.set_connection_timeout(
          std::chrono::duration_cast<std::chrono::microseconds>(timeout));
      client.set_read_timeout(
          std::chrono::duration_cast<std::chrono::microseconds>(timeout));
      auto res = client.Post("/embed", payload, "application/json");
      if (!res) {
        last_error = "request to " + endpoint_ + " failed: " +
                     httplib::to_string(res.error());
        continue;
      }
      if (res->status != 200) {
        last_error = "service returned HTTP " + std::to_string(res->status);
        continue;
      }
      try {
        return decode(goal, tactics, res->body);
      } catch (const nlohmann::json::exception &e) {
        last_error = std::string("malformed response: ") + e.what();
      } catch (const InvalidData &e) {
        last_error = std::string("malformed response: ") + e.what();
      }
    }
    throw TransportError(last_error, max_retries_);
  }
  std::size_t dim() const override { return dim_; }

private:
  std::vector<EmbeddingRecord> decode(const GoalRef &goal,
                                      std::span<const std::string> tactics,
                                      const std::string &body) const {
    const auto j = nlohmann::json::parse(body);
    const auto &emb = j.at("embeddings");
    const auto &succ = j.at("success");
    const auto &time = j.at("time");
    if (emb.size() != tactics.size() || succ.size() != tactics.size() ||
        time.size() != tactics.size())
      throw InvalidData("response length does not match request");
    std::vector<EmbeddingRecord> out(tactics.size());
    for (std::size_t i = 0; i < tactics.size(); ++i) {
      auto &r = out[i];
      r.goal_id = goal.id;
      r.tactic_text = tactics[i];
      r.embedding = emb[i].get<std::vector<double>>();
      renormalize_embedding(r.embedding, dim_, "remote record " +
                                                   std::to_string(i));
      r.pred_success = succ[i].get<double>();
      r.pred_time = time[i].get<double>();
    }
    return out;
  }

  std::string endpoint_;
  std::size_t dim_;
  int max_retries_;
  double timeout_s_;
};

inline std::unique_ptr<EmbeddingProvider>
make_provider(const ProviderConfig &cfg) {
  cfg.validate();
  switch (cfg.kind) {
  case ProviderKind::File:
    return std::make_unique<FileProvider>(cfg.source, cfg.dim);
  case ProviderKind::HashStub:
    return std::make_unique<HashStubProvider>(cfg.dim, cfg.salt);
  case ProviderKind::Remote:
    return std::make_unique<RemoteProvider>(cfg.source, cfg.dim,
                                            cfg.max_retries,
                                            cfg.request_timeout_s);
  }
  throw InvalidInput("unknown provider kind");
}

inline std::vector<EmbeddingRecord>
embed_batch(const GoalRef &goal, std::span<const std::string> tactics,
            const ProviderConfig &cfg) {
  if (tactics.empty())
    throw InvalidInput("embed_batch: no tactics");
  return make_provider(cfg)->embed(goal, tactics);
}

} // namespace dprover

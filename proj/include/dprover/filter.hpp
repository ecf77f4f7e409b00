#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dprover/dpp.hpp"
#include "dprover/error.hpp"

namespace dprover {

enum class Strategy { Dpp, TopK, Random };

inline std::string_view to_string(Strategy s) {
  switch (s) {
  case Strategy::Dpp:
    return "dpp";
  case Strategy::TopK:
    return "topk";
  case Strategy::Random:
    return "random";
  }
  return "?";
}

inline Strategy parse_strategy(std::string_view name) {
  if (name == "dpp" || name == "DPP")
    return Strategy::Dpp;
  if (name == "topk" || name == "TopK" || name == "top-k")
    return Strategy::TopK;
  if (name == "random" || name == "Random")
    return Strategy::Random;
  throw InvalidInput("unknown strategy '" + std::string(name) + "'");
}

struct FilterConfig {
  std::size_t k = 8;
  double lambda_s = 0.0;   // weight on predicted success
  double lambda_tau = 0.0; // weight on normalised (inverted) time
  double theta = 1.0;      // softmax temperature over policy logits
  Strategy strategy = Strategy::Dpp;

  void validate() const {
    if (k < 1)
      throw InvalidInput("filter size K must be at least 1");
    if (!(theta > 0.0) || !std::isfinite(theta))
      throw InvalidInput("temperature theta must be positive");
    if (!(lambda_s >= 0.0) || !std::isfinite(lambda_s))
      throw InvalidInput("lambda_s must be non-negative");
    if (!(lambda_tau >= 0.0) || !std::isfinite(lambda_tau))
      throw InvalidInput("lambda_tau must be non-negative");
  }
};

struct ScoredTactic {
  std::string text;
  double logit = 0.0;
  std::vector<double> embedding; // unit norm
  double pred_success = 0.0;     // in [0, 1]
  double pred_time = 0.0;        // seconds
};

/// tau_i -> 1 - tau_i / ||tau||_2. An all-zero vector maps to all ones.
inline std::vector<double> normalize_times(std::span<const double> times) {
  double sq = 0.0;
  for (double t : times) {
    if (!(t >= 0.0) || !std::isfinite(t))
      throw InvalidInput("times must be finite and non-negative");
    sq += t * t;
  }
  const double norm = std::sqrt(sq);
  std::vector<double> out(times.size(), 1.0);
  if (norm == 0.0)
    return out;
  for (std::size_t i = 0; i < times.size(); ++i)
    out[i] = (norm - times[i]) / norm;
  return out;
}

inline std::vector<double> softmax_logits(std::span<const double> logits,
                                          double theta) {
  if (logits.empty())
    throw InvalidInput("softmax over an empty list");
  if (!(theta > 0.0))
    throw InvalidInput("temperature theta must be positive");
  for (double l : logits)
    if (!std::isfinite(l))
      throw InvalidInput("logits must be finite");
  const double top = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp((logits[i] - top) / theta);
    total += out[i];
  }
  for (double &p : out)
    p /= total;
  return out;
}

/// q_i = m_i + lambda_s * s_i + lambda_tau * tau_i
inline std::vector<double> quality_scores(std::span<const double> m,
                                          std::span<const double> s,
                                          std::span<const double> tau_norm,
                                          const FilterConfig &cfg) {
  if (m.size() != s.size() || m.size() != tau_norm.size())
    throw InvalidInput("quality_scores: length mismatch (" +
                       std::to_string(m.size()) + ", " +
                       std::to_string(s.size()) + ", " +
                       std::to_string(tau_norm.size()) + ")");
  std::vector<double> q(m.size());
  for (std::size_t i = 0; i < m.size(); ++i)
    q[i] = m[i] + cfg.lambda_s * s[i] + cfg.lambda_tau * tau_norm[i];
  return q;
}

/// Result of a filtering pass, in terms of the caller's candidate indices.
struct FilterOutcome {
  std::vector<std::size_t> selected; // ascending candidate indices
  std::vector<double> quality;       // per candidate; 0 for collapsed duplicates
  std::size_t distinct = 0;          // candidates left after text dedup
  std::size_t dpp_rank = 0;          // kernel rank (DPP strategy only)
  bool filled_from_quality = false;  // K exceeded rank, topped up by quality
};

namespace detail {

inline void check_candidate(const ScoredTactic &t, std::size_t dim,
                            std::string_view goal) {
  if (t.embedding.size() != dim)
    throw InvalidInput("goal '" + std::string(goal) + "': tactic '" + t.text +
                       "' has embedding dimension " +
                       std::to_string(t.embedding.size()) + ", expected " +
                       std::to_string(dim));
  if (!(t.pred_success >= 0.0 && t.pred_success <= 1.0))
    throw InvalidInput("tactic '" + t.text + "': pred_success outside [0,1]");
  if (!(t.pred_time >= 0.0) || !std::isfinite(t.pred_time))
    throw InvalidInput("tactic '" + t.text + "': negative pred_time");
  if (!std::isfinite(t.logit))
    throw InvalidInput("tactic '" + t.text + "': non-finite logit");
}

// Index of the surviving candidate per distinct text (higher logit wins,
// earlier on ties), in input order.
inline std::vector<std::size_t>
distinct_candidates(std::span<const ScoredTactic> candidates) {
  std::unordered_map<std::string_view, std::size_t> best;
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    auto [it, inserted] = best.try_emplace(candidates[i].text, i);
    if (inserted)
      order.push_back(i);
    else if (candidates[i].logit > candidates[it->second].logit)
      it->second = i;
  }
  std::vector<std::size_t> kept;
  kept.reserve(order.size());
  for (std::size_t first : order)
    kept.push_back(best.at(candidates[first].text));
  std::sort(kept.begin(), kept.end());
  return kept;
}

} // namespace detail

/// Scores candidates and picks min(K, distinct) of them with the configured
/// strategy.
template <std::uniform_random_bit_generator Rng>
FilterOutcome select_tactics(std::string_view goal,
                             std::span<const ScoredTactic> candidates,
                             const FilterConfig &cfg, Rng &rng) {
  cfg.validate();
  if (candidates.empty())
    throw InvalidInput("goal '" + std::string(goal) + "': no candidates");
  const std::size_t dim = candidates.front().embedding.size();
  for (const auto &c : candidates)
    detail::check_candidate(c, dim, goal);

  const auto kept = detail::distinct_candidates(candidates);
  const std::size_t n = kept.size();

  std::vector<double> logits(n), success(n), times(n);
  for (std::size_t j = 0; j < n; ++j) {
    const auto &c = candidates[kept[j]];
    logits[j] = c.logit;
    success[j] = c.pred_success;
    times[j] = c.pred_time;
  }
  const auto m = softmax_logits(logits, cfg.theta);
  const auto tau = normalize_times(times);
  const auto q = quality_scores(m, success, tau, cfg);

  FilterOutcome out;
  out.distinct = n;
  out.quality.assign(candidates.size(), 0.0);
  for (std::size_t j = 0; j < n; ++j)
    out.quality[kept[j]] = q[j];

  std::vector<std::size_t> local; // positions into `kept`
  if (n <= cfg.k) {
    local.resize(n);
    std::iota(local.begin(), local.end(), std::size_t{0});
  } else {
    switch (cfg.strategy) {
    case Strategy::TopK: {
      local.resize(n);
      std::iota(local.begin(), local.end(), std::size_t{0});
      std::stable_sort(local.begin(), local.end(),
                       [&](std::size_t a, std::size_t b) {
                         return logits[a] > logits[b];
                       });
      local.resize(cfg.k);
      break;
    }
    case Strategy::Random: {
      std::vector<std::size_t> all(n);
      std::iota(all.begin(), all.end(), std::size_t{0});
      std::sample(all.begin(), all.end(), std::back_inserter(local), cfg.k,
                  rng);
      break;
    }
    case Strategy::Dpp: {
      std::vector<std::vector<double>> rows;
      rows.reserve(n);
      for (std::size_t idx : kept)
        rows.push_back(candidates[idx].embedding);
      const auto bank = dpp::FeatureBank::from_rows(rows, q);
      const auto decomp = dpp::eigendecompose(dpp::build_kernel(bank));
      out.dpp_rank = decomp.rank();
      const std::size_t draw = std::min(cfg.k, out.dpp_rank);
      local = dpp::sample_k_dpp(decomp, draw, rng);
      if (draw < cfg.k) {
        out.filled_from_quality = true;
        std::vector<bool> taken(n, false);
        for (std::size_t j : local)
          taken[j] = true;
        std::vector<std::size_t> rest;
        for (std::size_t j = 0; j < n; ++j)
          if (!taken[j])
            rest.push_back(j);
        std::stable_sort(rest.begin(), rest.end(),
                         [&](std::size_t a, std::size_t b) {
                           return q[a] > q[b];
                         });
        rest.resize(cfg.k - draw);
        local.insert(local.end(), rest.begin(), rest.end());
      }
      break;
    }
    }
  }
  out.selected.reserve(local.size());
  for (std::size_t j : local)
    out.selected.push_back(kept[j]);
  std::sort(out.selected.begin(), out.selected.end());
  return out;
}

template <std::uniform_random_bit_generator Rng>
std::vector<ScoredTactic> filter_tactics(std::string_view goal,
                                         std::span<const ScoredTactic> candidates,
                                         const FilterConfig &cfg, Rng &rng) {
  const auto outcome = select_tactics(goal, candidates, cfg, rng);
  std::vector<ScoredTactic> out;
  out.reserve(outcome.selected.size());
  for (std::size_t i : outcome.selected)
    out.push_back(candidates[i]);
  return out;
}

} // namespace dprover

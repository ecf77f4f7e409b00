#pragma once

// The command layer behind the `dprover` executable. Each command validates
// its configuration (UsageError on bad input), does its work and leaves its
// artifacts on disk.

#include <algorithm>
#include <array>
#include <atomic>
#include <cctype>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "dprover/candidates.hpp"
#include "dprover/dpp.hpp"
#include "dprover/embed.hpp"
#include "dprover/error.hpp"
#include "dprover/filter.hpp"
#include "dprover/metrics.hpp"
#include "dprover/search.hpp"
#include "dprover/synthetic.hpp"
#include "dprover/transitions.hpp"

namespace dprover::commands {

namespace fs = std::filesystem;

// ---------------------------------------------------------------- files ---

inline std::vector<GoalRef> read_benchmark(const fs::path &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is)
    throw UsageError("cannot open benchmark file " + path.string());
  std::vector<GoalRef> goals;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos)
      continue;
    try {
      const auto j = nlohmann::json::parse(line);
      goals.push_back(GoalRef{j.at("goal_id").get<std::string>(),
                              j.at("goal_text").get<std::string>()});
    } catch (const nlohmann::json::exception &e) {
      throw ParseError(lineno, line.substr(0, 80), e.what());
    }
  }
  return goals;
}

inline void write_benchmark(const fs::path &path,
                            const std::vector<GoalRef> &goals) {
  std::ofstream os(path, std::ios::binary);
  for (const auto &g : goals) {
    nlohmann::ordered_json j;
    j["goal_id"] = g.id;
    j["goal_text"] = g.text;
    os << j.dump() << '\n';
  }
}

/// Kernel file: {"order": N, "entries": [row-major N*N floats]}.
inline dpp::Kernel read_kernel_file(const fs::path &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is)
    throw UsageError("cannot open kernel file " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception &e) {
    throw ParseError(1, path.string(), e.what());
  }
  const auto order = j.at("order").get<std::size_t>();
  const auto entries = j.at("entries").get<std::vector<double>>();
  if (entries.size() != order * order)
    throw InvalidInput("kernel file: expected " + std::to_string(order * order) +
                       " entries, found " + std::to_string(entries.size()));
  Eigen::MatrixXd m(static_cast<Eigen::Index>(order),
                    static_cast<Eigen::Index>(order));
  for (std::size_t r = 0; r < order; ++r)
    for (std::size_t c = 0; c < order; ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          entries[r * order + c];
  return dpp::Kernel::from_matrix(std::move(m));
}

inline void write_kernel_file(const fs::path &path, const Eigen::MatrixXd &m) {
  nlohmann::ordered_json j;
  j["order"] = m.rows();
  std::vector<double> entries;
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      entries.push_back(m(r, c));
  j["entries"] = entries;
  std::ofstream(path, std::ios::binary) << j.dump() << '\n';
}

/// File-system safe rendering of a goal id.
inline std::string file_stem(const std::string &id) {
  std::string out;
  for (char c : id)
    out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' ||
            c == '.')
               ? c
               : '_';
  return out.empty() ? "_" : out;
}

// --------------------------------------------------------------- search ---

enum class EnvKind { Synthetic, Replay };

struct RunConfig {
  std::string benchmark; // optional for synthetic runs
  FilterConfig filter;
  std::size_t n_candidates = 64;
  std::size_t attempts = 1;
  std::uint64_t seed = 0;
  double timeout_s = 600.0;
  std::optional<std::size_t> max_expansions;
  std::optional<ProviderConfig> provider; // synthetic runs default to the world's
  EnvKind env = EnvKind::Synthetic;
  SyntheticParams synthetic;
  std::string replay_log;
  std::string candidates;
  std::string out_dir = "dprover-out";
  std::size_t jobs = 1;

  void validate() const {
    try {
      filter.validate();
      if (provider)
        provider->validate();
      if (env == EnvKind::Synthetic)
        synthetic.validate();
    } catch (const InvalidInput &e) {
      throw UsageError(e.what());
    }
    if (attempts < 1)
      throw UsageError("attempts must be at least 1");
    if (n_candidates < 1)
      throw UsageError("n_candidates must be at least 1");
    if (!(timeout_s > 0.0))
      throw UsageError("timeout must be positive");
    if (jobs < 1)
      throw UsageError("jobs must be at least 1");
    if (!benchmark.empty() && !fs::exists(benchmark))
      throw UsageError("benchmark file not found: " + benchmark);
    if (env == EnvKind::Replay) {
      if (benchmark.empty())
        throw UsageError("replay runs need a benchmark file");
      if (replay_log.empty() || !fs::exists(replay_log))
        throw UsageError("replay log not found: " + replay_log);
      if (candidates.empty() || !fs::exists(candidates))
        throw UsageError("candidate file not found: " + candidates);
      if (!provider)
        throw UsageError("replay runs need an embedding provider");
    }
    if (out_dir.empty())
      throw UsageError("output directory must be set");
  }
};

struct SearchSummary {
  std::vector<std::string> goal_ids;
  std::vector<std::vector<bool>> results; // goal x attempt
  std::vector<AttemptReport> reports;
  std::size_t failures = 0; // attempts aborted by environment/provider errors
  double pass_at_1 = 0.0;
  double pass_at_attempts = 0.0;
};

inline nlohmann::ordered_json to_json(const RunConfig &c) {
  nlohmann::ordered_json j;
  j["strategy"] = std::string(to_string(c.filter.strategy));
  j["k"] = c.filter.k;
  j["lambda_s"] = c.filter.lambda_s;
  j["lambda_tau"] = c.filter.lambda_tau;
  j["theta"] = c.filter.theta;
  j["n_candidates"] = c.n_candidates;
  j["attempts"] = c.attempts;
  j["seed"] = c.seed;
  j["timeout_s"] = c.timeout_s;
  if (c.max_expansions)
    j["max_expansions"] = *c.max_expansions;
  j["environment"] = c.env == EnvKind::Synthetic ? "synthetic" : "replay";
  if (c.env == EnvKind::Synthetic) {
    j["synthetic"] = {{"seed", c.synthetic.seed},
                      {"n_goals", c.synthetic.n_goals},
                      {"branching", c.synthetic.branching},
                      {"depth", c.synthetic.depth},
                      {"cluster_size", c.synthetic.cluster_size},
                      {"error_rate", c.synthetic.error_rate},
                      {"dim", c.synthetic.dim}};
  }
  return j;
}

/// Seed for one (goal, attempt) pair, independent of scheduling.
inline std::uint64_t attempt_seed(std::uint64_t seed, std::size_t goal,
                                  std::size_t attempt) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(goal),
                    static_cast<std::uint32_t>(attempt)};
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

inline std::string attempt_id(const std::string &goal_id, std::size_t attempt) {
  return goal_id + "#" + std::to_string(attempt);
}

/// Runs every attempt for every benchmark goal and writes
///   <out>/logs/<goal>.a<n>.jsonl, <out>/reports.jsonl, <out>/summary.json
inline SearchSummary cmd_search(const RunConfig &cfg) {
  cfg.validate();

  std::unique_ptr<SyntheticWorld> world;
  std::unique_ptr<ReplayEnvironment> replay_env;
  std::unique_ptr<CandidateFileSource> replay_source;
  std::unique_ptr<EmbeddingProvider> provider;
  std::vector<GoalRef> goals;

  if (cfg.env == EnvKind::Synthetic) {
    world = std::make_unique<SyntheticWorld>(synthetic_world(cfg.synthetic));
    goals = cfg.benchmark.empty() ? world->benchmark
                                  : read_benchmark(cfg.benchmark);
  } else {
    goals = read_benchmark(cfg.benchmark);
    replay_env = std::make_unique<ReplayEnvironment>(
        read_log(cfg.replay_log, ReadMode::Strict).log);
    std::map<std::string, std::string> ids;
    for (const auto &g : goals)
      ids.emplace(g.text, g.id);
    for (const auto &r : replay_env->log().records())
      ids.emplace(r.goal_text, r.goal_id);
    replay_source = std::make_unique<CandidateFileSource>(
        read_candidates(cfg.candidates), std::move(ids));
  }
  if (goals.empty())
    throw UsageError("benchmark has no goals");
  if (cfg.provider) {
    auto pc = *cfg.provider;
    pc.request_timeout_s = std::min(pc.request_timeout_s, cfg.timeout_s);
    provider = make_provider(pc);
  }

  const Environment &env =
      world ? static_cast<const Environment &>(world->environment)
            : static_cast<const Environment &>(*replay_env);
  const TacticSource &source =
      world ? static_cast<const TacticSource &>(world->source)
            : static_cast<const TacticSource &>(*replay_source);
  const EmbeddingProvider &embedder =
      provider ? *provider : static_cast<const EmbeddingProvider &>(world->provider);

  SearchBudget budget;
  budget.wall_timeout_s = cfg.timeout_s;
  budget.max_expansions = cfg.max_expansions;

  const std::size_t total = goals.size() * cfg.attempts;
  std::vector<SearchResult> results(total);
  std::vector<std::exception_ptr> errors(total);
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t task = next++; task < total; task = next++) {
      const std::size_t g = task / cfg.attempts;
      const std::size_t a = task % cfg.attempts;
      try {
        std::mt19937_64 rng(attempt_seed(cfg.seed, g, a));
        SearchOptions opts;
        opts.n_candidates = cfg.n_candidates;
        opts.attempt_id = attempt_id(goals[g].id, a);
        results[task] = best_first_search(goals[g], source, cfg.filter, embedder,
                                          env, budget, rng, opts);
      } catch (...) {
        errors[task] = std::current_exception();
      }
    }
  };
  {
    std::vector<std::jthread> pool;
    const std::size_t n_threads = std::min(cfg.jobs, total);
    for (std::size_t t = 1; t < n_threads; ++t)
      pool.emplace_back(worker);
    worker();
  }
  for (const auto &e : errors)
    if (e)
      std::rethrow_exception(e);

  const fs::path out(cfg.out_dir);
  fs::create_directories(out / "logs");
  SearchSummary summary;
  summary.results.assign(goals.size(), std::vector<bool>(cfg.attempts, false));
  std::ofstream reports(out / "reports.jsonl", std::ios::binary);
  for (std::size_t task = 0; task < total; ++task) {
    const std::size_t g = task / cfg.attempts;
    const std::size_t a = task % cfg.attempts;
    const auto &res = results[task];
    write_log(out / "logs" /
                  (file_stem(goals[g].id) + ".a" + std::to_string(a) + ".jsonl"),
              res.log);
    reports << to_json(res.report).dump() << '\n';
    summary.results[g][a] = res.report.proved;
    if (res.report.stop == StopReason::EnvironmentFailure ||
        res.report.stop == StopReason::ProviderFailure)
      ++summary.failures;
    summary.reports.push_back(res.report);
  }
  for (const auto &g : goals)
    summary.goal_ids.push_back(g.id);
  summary.pass_at_1 = metrics::pass_at_k(summary.results, 1);
  summary.pass_at_attempts = metrics::pass_at_k(summary.results, cfg.attempts);

  nlohmann::ordered_json s;
  s["config"] = to_json(cfg);
  s["goals"] = goals.size();
  s["attempts"] = cfg.attempts;
  s["pass_at"]["1"] = summary.pass_at_1;
  s["pass_at"][std::to_string(cfg.attempts)] = summary.pass_at_attempts;
  s["failures"] = summary.failures;
  auto &per_goal = s["results"] = nlohmann::ordered_json::object();
  for (std::size_t g = 0; g < goals.size(); ++g)
    per_goal[goals[g].id] = summary.results[g];
  std::ofstream(out / "summary.json", std::ios::binary) << s.dump(2) << '\n';
  return summary;
}

// --------------------------------------------------------------- filter ---

struct FilterCommand {
  std::string candidates;
  std::string output;
  FilterConfig filter;
  std::uint64_t seed = 0;
  std::optional<ProviderConfig> provider; // fills records without embeddings
};

/// Filters each goal's candidate group; returns the number of lines written.
inline std::size_t cmd_filter(const FilterCommand &cmd) {
  try {
    cmd.filter.validate();
  } catch (const InvalidInput &e) {
    throw UsageError(e.what());
  }
  if (!fs::exists(cmd.candidates))
    throw UsageError("candidate file not found: " + cmd.candidates);
  std::vector<CandidateRecord> records;
  try {
    records = read_candidates(cmd.candidates);
  } catch (const ParseError &e) {
    throw UsageError(e.what());
  }
  std::unique_ptr<EmbeddingProvider> provider;
  if (cmd.provider)
    provider = make_provider(*cmd.provider);

  std::vector<std::string> order;
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto [it, inserted] = groups.try_emplace(records[i].goal_id);
    if (inserted)
      order.push_back(records[i].goal_id);
    it->second.push_back(i);
  }

  std::ofstream os(cmd.output, std::ios::binary);
  if (!os)
    throw Error("cannot write " + cmd.output);
  std::size_t written = 0;
  for (std::size_t gi = 0; gi < order.size(); ++gi) {
    const auto &goal = order[gi];
    const auto &idx = groups.at(goal);
    std::vector<ScoredTactic> cands;
    for (std::size_t i : idx) {
      auto &rec = records[i];
      if (!rec.has_scores) {
        if (!provider)
          throw UsageError("candidate '" + rec.tactic.text +
                           "' has no embedding and no provider is configured");
        const std::string texts[] = {rec.tactic.text};
        auto er = provider->embed(GoalRef{goal, goal}, texts).front();
        rec.tactic.embedding = std::move(er.embedding);
        rec.tactic.pred_success = er.pred_success;
        rec.tactic.pred_time = er.pred_time;
        rec.has_scores = true;
      } else {
        renormalize_embedding(rec.tactic.embedding,
                              rec.tactic.embedding.size(),
                              "candidate '" + rec.tactic.text + "'");
      }
      cands.push_back(rec.tactic);
    }
    std::mt19937_64 rng(attempt_seed(cmd.seed, gi, 0));
    const auto outcome = select_tactics(goal, cands, cmd.filter, rng);
    for (std::size_t sel : outcome.selected) {
      auto j = to_json(records[idx[sel]]);
      j["quality"] = outcome.quality[sel];
      j["strategy"] = std::string(to_string(cmd.filter.strategy));
      j["seed"] = cmd.seed;
      os << j.dump() << '\n';
      ++written;
    }
  }
  return written;
}

// ----------------------------------------------------------- sample-dpp ---

struct SampleCommand {
  std::string kernel;
  std::size_t k = 1;
  std::size_t n_samples = 0;
  std::uint64_t seed = 0;
  bool exact = false;
  std::string output;
};

struct SampleResult {
  std::map<dpp::Subset, std::size_t> counts;
  std::optional<dpp::SubsetPmf> pmf;
  std::optional<double> total_variation;
};

/// Writes a header line then one JSON array per sample. With `exact`, the
/// oracle pmf and the empirical TV distance go to <output>.pmf.json.
inline SampleResult cmd_sample_dpp(const SampleCommand &cmd) {
  if (cmd.k < 1)
    throw UsageError("k must be at least 1");
  const auto kernel = read_kernel_file(cmd.kernel);
  if (cmd.k > kernel.order())
    throw UsageError("k = " + std::to_string(cmd.k) + " exceeds kernel order " +
                     std::to_string(kernel.order()));
  if (cmd.exact && kernel.order() > dpp::kMaxOracleOrder)
    throw UsageError("exact pmf refused for order " +
                     std::to_string(kernel.order()) + " (limit " +
                     std::to_string(dpp::kMaxOracleOrder) + ")");
  const auto decomp = dpp::eigendecompose(kernel);
  if (cmd.k > decomp.rank())
    throw RankDeficient(cmd.k, decomp.rank());

  std::ofstream os(cmd.output, std::ios::binary);
  if (!os)
    throw Error("cannot write " + cmd.output);
  nlohmann::ordered_json header;
  header["order"] = kernel.order();
  header["k"] = cmd.k;
  header["n_samples"] = cmd.n_samples;
  header["seed"] = cmd.seed;
  os << header.dump() << '\n';

  SampleResult out;
  std::mt19937_64 rng(cmd.seed);
  for (std::size_t s = 0; s < cmd.n_samples; ++s) {
    auto subset = dpp::sample_k_dpp(decomp, cmd.k, rng);
    os << nlohmann::json(subset).dump() << '\n';
    ++out.counts[std::move(subset)];
  }
  if (cmd.exact) {
    out.pmf = dpp::exact_k_dpp_pmf(kernel, cmd.k);
    out.total_variation = dpp::total_variation(*out.pmf, out.counts, cmd.n_samples);
    nlohmann::ordered_json j;
    j["k"] = cmd.k;
    j["n_samples"] = cmd.n_samples;
    j["total_variation"] = *out.total_variation;
    auto &rows = j["pmf"] = nlohmann::ordered_json::array();
    for (const auto &[subset, p] : *out.pmf) {
      const auto it = out.counts.find(subset);
      const double freq =
          cmd.n_samples == 0 || it == out.counts.end()
              ? 0.0
              : static_cast<double>(it->second) / static_cast<double>(cmd.n_samples);
      rows.push_back({{"subset", subset}, {"p", p}, {"empirical", freq}});
    }
    std::ofstream(cmd.output + ".pmf.json", std::ios::binary) << j.dump(2) << '\n';
  }
  return out;
}

// -------------------------------------------------------------- analyze ---

struct AnalyzeCommand {
  std::vector<std::string> logs;    // files or directories of *.jsonl
  std::vector<std::string> reports; // attempt report JSON-lines files
  std::string embeddings;           // optional embedding file
  std::size_t dim = kDefaultEmbeddingDim;
  std::string output;               // JSON report; empty = none
  std::string table;                // plain-text table; empty = none
};

struct AnalysisReport {
  std::size_t logs = 0;
  std::size_t transitions = 0;
  std::size_t nodes = 0;
  metrics::MetricSummary success_rate;
  metrics::MetricSummary unique_responses;
  metrics::MetricSummary unique_subgoals;
  metrics::MetricSummary execution_time_ms;
  std::map<std::size_t, double> pass_at;
  std::optional<metrics::SimilaritySummary> similarity;
  std::optional<metrics::SimilaritySummary> similarity_unique;
};

inline nlohmann::ordered_json to_json(const metrics::MetricSummary &s) {
  nlohmann::ordered_json j;
  j["mean"] = s.mean;
  j["std_error"] = s.std_error;
  j["n"] = s.n;
  return j;
}

inline nlohmann::ordered_json to_json(const AnalysisReport &r) {
  nlohmann::ordered_json j;
  j["logs"] = r.logs;
  j["transitions"] = r.transitions;
  j["nodes"] = r.nodes;
  j["success_rate"] = to_json(r.success_rate);
  j["unique_responses"] = to_json(r.unique_responses);
  j["unique_subgoals"] = to_json(r.unique_subgoals);
  j["execution_time_ms"] = to_json(r.execution_time_ms);
  if (!r.pass_at.empty()) {
    auto &p = j["pass_at"] = nlohmann::ordered_json::object();
    for (const auto &[k, v] : r.pass_at)
      p[std::to_string(k)] = v;
  }
  auto sim = [](const metrics::SimilaritySummary &s) {
    nlohmann::ordered_json x;
    x["overall_mean"] = s.overall_mean;
    x["nodes"] = s.nodes;
    auto &per = x["node_means"] = nlohmann::ordered_json::object();
    for (const auto &[key, v] : s.node_means)
      per[key] = v;
    return x;
  };
  if (r.similarity)
    j["embedding_similarity"] = sim(*r.similarity);
  if (r.similarity_unique)
    j["embedding_similarity_unique_subgoals"] = sim(*r.similarity_unique);
  return j;
}

inline std::string format_table(const AnalysisReport &r) {
  std::ostringstream os;
  auto row = [&os](const std::string &name, const metrics::MetricSummary &s) {
    os << std::left << std::setw(28) << name << std::right << std::fixed
       << std::setprecision(1) << std::setw(10) << s.mean << "  +- "
       << std::setw(6) << s.std_error << std::setw(8) << s.n << '\n';
  };
  os << std::left << std::setw(28) << "metric" << std::right << std::setw(10)
     << "mean" << std::setw(10) << "se" << std::setw(8) << "n" << '\n';
  row("success rate / node (%)", r.success_rate);
  row("unique responses / node (%)", r.unique_responses);
  row("unique subgoals / node (%)", r.unique_subgoals);
  row("execution time (ms)", r.execution_time_ms);
  for (const auto &[k, v] : r.pass_at)
    os << std::left << std::setw(28) << ("pass@" + std::to_string(k) + " (%)")
       << std::right << std::fixed << std::setprecision(1) << std::setw(10) << v
       << '\n';
  if (r.similarity)
    os << std::left << std::setw(28) << "mean cosine / node" << std::right
       << std::fixed << std::setprecision(3) << std::setw(10)
       << r.similarity->overall_mean << std::setw(18) << r.similarity->nodes
       << '\n';
  if (r.similarity_unique)
    os << std::left << std::setw(28) << "mean cosine (unique sg)" << std::right
       << std::fixed << std::setprecision(3) << std::setw(10)
       << r.similarity_unique->overall_mean << std::setw(18)
       << r.similarity_unique->nodes << '\n';
  return os.str();
}

inline std::vector<fs::path> expand_paths(const std::vector<std::string> &in) {
  std::vector<fs::path> out;
  for (const auto &p : in) {
    if (fs::is_directory(p)) {
      std::vector<fs::path> found;
      for (const auto &e : fs::directory_iterator(p))
        if (e.is_regular_file() && e.path().extension() == ".jsonl")
          found.push_back(e.path());
      std::sort(found.begin(), found.end());
      out.insert(out.end(), found.begin(), found.end());
    } else {
      out.emplace_back(p);
    }
  }
  return out;
}

inline AnalysisReport cmd_analyze(const AnalyzeCommand &cmd) {
  const auto paths = expand_paths(cmd.logs);
  if (paths.empty())
    throw UsageError("no transition logs given");

  TransitionLog merged;
  std::map<std::string, std::string> owner; // attempt_id -> file
  for (const auto &p : paths) {
    if (!fs::exists(p))
      throw UsageError("transition log not found: " + p.string());
    auto loaded = read_log(p, ReadMode::Strict);
    std::set<std::string> here;
    for (auto r : loaded.log.records()) {
      if (r.attempt_id.empty())
        r.attempt_id = p.stem().string();
      here.insert(r.attempt_id);
      merged.add(std::move(r));
    }
    for (const auto &id : here) {
      const auto [it, inserted] = owner.emplace(id, p.string());
      if (!inserted)
        throw Error("attempt id '" + id + "' appears in both " + it->second +
                    " and " + p.string());
    }
  }

  AnalysisReport report;
  report.logs = paths.size();
  report.transitions = merged.size();
  report.nodes = metrics::group_by_node(merged).size();
  if (!merged.empty()) {
    report.success_rate = metrics::success_rate_per_node(merged);
    report.unique_responses = metrics::unique_response_rate(merged);
    report.unique_subgoals = metrics::unique_subgoal_rate(merged);
  }
  report.execution_time_ms = metrics::execution_time_stats(merged);

  if (!cmd.reports.empty()) {
    std::vector<std::string> goal_order;
    std::map<std::string, std::vector<bool>> per_goal;
    for (const auto &p : expand_paths(cmd.reports)) {
      std::ifstream is(p, std::ios::binary);
      if (!is)
        throw UsageError("cannot open report file " + p.string());
      std::string line;
      std::size_t lineno = 0;
      while (std::getline(is, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
          continue;
        AttemptReport r;
        try {
          r = attempt_report_from_json(nlohmann::json::parse(line));
        } catch (const nlohmann::json::exception &e) {
          throw ParseError(lineno, line.substr(0, 80), e.what());
        }
        auto [it, inserted] = per_goal.try_emplace(r.goal_id);
        if (inserted)
          goal_order.push_back(r.goal_id);
        it->second.push_back(r.proved);
      }
    }
    if (!goal_order.empty()) {
      std::vector<std::vector<bool>> matrix;
      std::size_t min_attempts = SIZE_MAX;
      for (const auto &g : goal_order) {
        matrix.push_back(per_goal.at(g));
        min_attempts = std::min(min_attempts, matrix.back().size());
      }
      for (std::size_t k = 1; k <= min_attempts; ++k)
        report.pass_at[k] = metrics::pass_at_k(matrix, k);
    }
  }

  if (!cmd.embeddings.empty()) {
    FileProvider provider(cmd.embeddings, cmd.dim);
    const auto groups = metrics::node_embeddings(merged, provider);
    report.similarity = metrics::embedding_similarity_summary(groups, false);
    report.similarity_unique = metrics::embedding_similarity_summary(groups, true);
  }

  if (!cmd.output.empty())
    std::ofstream(cmd.output, std::ios::binary) << to_json(report).dump(2) << '\n';
  if (!cmd.table.empty())
    std::ofstream(cmd.table, std::ios::binary) << format_table(report);
  return report;
}

} // namespace dprover::commands

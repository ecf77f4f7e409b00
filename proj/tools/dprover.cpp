// dprover: proof search with k-DPP tactic filtering.
//
//   dprover search     run seeded best-first search attempts over a benchmark
//   dprover filter     filter a candidate file down to K tactics per goal
//   dprover sample-dpp draw k-DPP samples from a kernel file
//   dprover analyze    compute per-node metrics from transition logs
//
// Exit status: 0 success, 1 runtime failure, 2 usage or configuration error.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dprover/commands.hpp"

namespace {

using namespace dprover;
using namespace dprover::commands;

struct ProviderFlags {
  std::string kind;
  std::string source;
  std::size_t dim = kDefaultEmbeddingDim;
  std::uint64_t salt = 0;
  int retries = 3;

  void attach(CLI::App *app) {
    app->add_option("--provider", kind,
                    "Embedding provider: file, hash or remote");
    app->add_option("--provider-source", source,
                    "Embedding file path or http://host:port endpoint");
    app->add_option("--dim", dim, "Embedding dimension")->capture_default_str();
    app->add_option("--salt", salt, "Hash-stub salt")->capture_default_str();
    app->add_option("--retries", retries, "Remote retry bound")
        ->capture_default_str();
  }

  std::optional<ProviderConfig> config() const {
    if (kind.empty())
      return std::nullopt;
    ProviderConfig pc;
    pc.kind = parse_provider_kind(kind);
    pc.source = source;
    pc.dim = dim;
    pc.salt = salt;
    pc.max_retries = retries;
    return pc;
  }
};

struct FilterFlags {
  std::size_t k = 8;
  double lambda_s = 0.0;
  double lambda_tau = 0.0;
  double theta = 1.0;
  std::string strategy = "dpp";

  void attach(CLI::App *app) {
    app->add_option("--k", k, "Filter size K")->capture_default_str();
    app->add_option("--lambda-s", lambda_s, "Error weight")
        ->capture_default_str();
    app->add_option("--lambda-tau", lambda_tau, "Time weight")
        ->capture_default_str();
    app->add_option("--theta", theta, "Logit temperature")
        ->capture_default_str();
    app->add_option("--strategy", strategy, "dpp, topk or random")
        ->capture_default_str();
  }

  FilterConfig config() const {
    FilterConfig cfg;
    cfg.k = k;
    cfg.lambda_s = lambda_s;
    cfg.lambda_tau = lambda_tau;
    cfg.theta = theta;
    cfg.strategy = parse_strategy(strategy);
    return cfg;
  }
};

int fail(const char *kind, const std::string &what, int code) {
  std::cerr << "error: " << kind << ": " << what << '\n';
  return code;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Proof search with k-DPP tactic filtering"};
  app.require_subcommand(1);

  // search
  // Config files hold a [search] section; flags on the command line win.
  app.set_config("--config", "", "TOML/INI run configuration");
  app.allow_config_extras(CLI::config_extras_mode::error);

  auto *search = app.add_subcommand("search", "Run best-first search attempts");
  search->fallthrough();
  RunConfig run;
  FilterFlags search_filter;
  ProviderFlags search_provider;
  std::string env_kind = "synthetic";
  std::size_t max_expansions = 0;
  search_filter.attach(search);
  search_provider.attach(search);
  search->add_option("--benchmark", run.benchmark,
                     "JSON-lines benchmark of {goal_id, goal_text}");
  search->add_option("--n-candidates", run.n_candidates,
                     "Candidates proposed per expansion")
      ->capture_default_str();
  search->add_option("--attempts", run.attempts, "Attempts per goal")
      ->capture_default_str();
  search->add_option("--seed", run.seed, "Base seed")->capture_default_str();
  search->add_option("--timeout", run.timeout_s,
                     "Environment time budget per attempt (s)")
      ->capture_default_str();
  search->add_option("--max-expansions", max_expansions,
                     "Expansion bound per attempt (0 = none)");
  search->add_option("--env", env_kind, "synthetic or replay")
      ->capture_default_str();
  search->add_option("--replay-log", run.replay_log,
                     "Transition log backing the replay environment");
  search->add_option("--candidates", run.candidates,
                     "Candidate file backing the replay tactic source");
  search->add_option("--world-seed", run.synthetic.seed, "Synthetic world seed");
  search->add_option("--goals", run.synthetic.n_goals, "Synthetic root goals")
      ->capture_default_str();
  search->add_option("--branching", run.synthetic.branching,
                     "Synthetic max subgoals per tactic")
      ->capture_default_str();
  search->add_option("--depth", run.synthetic.depth, "Synthetic proof depth")
      ->capture_default_str();
  search->add_option("--cluster-size", run.synthetic.cluster_size,
                     "Synthetic redundant-cluster size")
      ->capture_default_str();
  search->add_option("--error-rate", run.synthetic.error_rate,
                     "Synthetic tactic error rate")
      ->capture_default_str();
  search->add_option("--world-dim", run.synthetic.dim,
                     "Synthetic embedding dimension")
      ->capture_default_str();
  search->add_option("--out", run.out_dir, "Output directory")
      ->envname("DPROVER_OUT_DIR")
      ->capture_default_str();
  search->add_option("--jobs", run.jobs, "Parallel attempts")
      ->envname("DPROVER_JOBS")
      ->capture_default_str();

  // filter
  auto *filter = app.add_subcommand("filter", "Filter a candidate file");
  FilterCommand filter_cmd;
  FilterFlags filter_flags;
  ProviderFlags filter_provider;
  filter_flags.attach(filter);
  filter_provider.attach(filter);
  filter->add_option("candidates", filter_cmd.candidates, "Candidate file")
      ->required();
  filter->add_option("--out", filter_cmd.output, "Output file")->required();
  filter->add_option("--seed", filter_cmd.seed, "Seed")->capture_default_str();

  // sample-dpp
  auto *sample = app.add_subcommand("sample-dpp", "Sample from a k-DPP kernel");
  SampleCommand sample_cmd;
  sample->add_option("kernel", sample_cmd.kernel, "Kernel JSON file")
      ->required();
  sample->add_option("--k", sample_cmd.k, "Subset size")->required();
  sample->add_option("--samples", sample_cmd.n_samples, "Number of samples")
      ->capture_default_str();
  sample->add_option("--seed", sample_cmd.seed, "Seed")->capture_default_str();
  sample->add_flag("--exact", sample_cmd.exact,
                   "Also write the exact pmf and TV distance (N <= 12)");
  sample->add_option("--out", sample_cmd.output, "Sample file")->required();

  // analyze
  auto *analyze = app.add_subcommand("analyze", "Compute metrics from logs");
  AnalyzeCommand analyze_cmd;
  analyze->add_option("logs", analyze_cmd.logs,
                      "Transition log files or directories");
  analyze->add_option("--reports", analyze_cmd.reports,
                      "Attempt report files (for Pass@k)");
  analyze->add_option("--embeddings", analyze_cmd.embeddings,
                      "Embedding file for cosine-similarity summaries");
  analyze->add_option("--dim", analyze_cmd.dim, "Embedding dimension")
      ->capture_default_str();
  analyze->add_option("--out", analyze_cmd.output, "JSON report path");
  analyze->add_option("--table", analyze_cmd.table,
                      "Plain-text table path (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    return fail("usage", e.what(), 2);
  }

  try {
    if (*search) {
      run.filter = search_filter.config();
      run.provider = search_provider.config();
      if (env_kind == "synthetic")
        run.env = EnvKind::Synthetic;
      else if (env_kind == "replay")
        run.env = EnvKind::Replay;
      else
        throw UsageError("unknown environment '" + env_kind + "'");
      if (max_expansions > 0)
        run.max_expansions = max_expansions;
      const auto summary = cmd_search(run);
      std::cout << "goals " << summary.goal_ids.size() << "  pass@1 "
                << summary.pass_at_1;
      if (run.attempts > 1)
        std::cout << "  pass@" << run.attempts << ' ' << summary.pass_at_attempts;
      std::cout << '\n';
      if (summary.failures > 0)
        return fail("runtime",
                    std::to_string(summary.failures) +
                        " attempts aborted; partial artifacts in " +
                        run.out_dir,
                    1);
    } else if (*filter) {
      filter_cmd.filter = filter_flags.config();
      filter_cmd.provider = filter_provider.config();
      const auto n = cmd_filter(filter_cmd);
      std::cout << "wrote " << n << " candidates to " << filter_cmd.output
                << '\n';
    } else if (*sample) {
      const auto res = cmd_sample_dpp(sample_cmd);
      std::cout << "wrote " << sample_cmd.n_samples << " samples to "
                << sample_cmd.output << '\n';
      if (res.total_variation)
        std::cout << "total variation " << *res.total_variation << '\n';
    } else if (*analyze) {
      const auto report = cmd_analyze(analyze_cmd);
      if (analyze_cmd.table.empty())
        std::cout << format_table(report);
    }
  } catch (const UsageError &e) {
    return fail(e.kind(), e.what(), 2);
  } catch (const InvalidInput &e) {
    // Invalid flag values surface here before any work starts.
    return fail("usage", e.what(), 2);
  } catch (const Error &e) {
    return fail(e.kind(), e.what(), 1);
  } catch (const std::exception &e) {
    return fail("runtime", e.what(), 1);
  }
  return 0;
}

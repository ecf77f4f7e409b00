#include <catch2/catch.hpp>

#include "dprover/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <random>

using namespace dprover;
using namespace dprover::metrics;

namespace {

TransitionRecord at(std::string node, TacticOutput out, double t = 0.1,
                    std::string attempt = "a#0") {
  return TransitionRecord{"g", "⊢ g", "tac", t, std::move(out), std::move(node),
                          std::move(attempt)};
}

TacticOutput sg(std::vector<std::string> goals) { return Subgoals{std::move(goals)}; }
TacticOutput err(std::string m) { return ErrorMessage{std::move(m)}; }

TransitionLog hand_fixture() {
  return TransitionLog({at("n0", sg({"A"})), at("n0", sg({"A"})), at("n0", sg({"B"})),
                        at("n0", err("x")), at("n0", err("x"))});
}

} // namespace

TEST_CASE("summarize", "[metrics]") {
  const std::vector<double> two{100.0, 0.0};
  const auto s = summarize(two);
  CHECK(s.mean == 50.0);
  CHECK(s.std_error == Approx(50.0).epsilon(1e-15));
  CHECK(s.n == 2);
  const std::vector<double> one{42.0};
  CHECK(summarize(one).std_error == 0.0);
  CHECK(summarize(std::vector<double>{}).n == 0);
}

TEST_CASE("pass_at_k examples", "[metrics]") {
  CHECK(pass_at_k({{true, false}, {false, false}}, 2) == 50.0);
  CHECK(pass_at_k({{false, false}, {false, false}}, 2) == 0.0);
  CHECK(pass_at_k({{true, false}, {false, true}, {false, false}, {true, true}}, 1) == 50.0);
  CHECK_THROWS_AS(pass_at_k({{true}, {false, true}}, 2), InvalidInput);
  CHECK_THROWS_AS(pass_at_k({}, 1), InvalidInput);
  CHECK_THROWS_AS(pass_at_k({{true}}, 0), InvalidInput);
}

TEST_CASE("pass_at_k is monotone in k", "[metrics][property]") {
  std::mt19937_64 rng(1);
  std::bernoulli_distribution coin(0.2);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::vector<bool>> results(1 + rng() % 10, std::vector<bool>(6));
    for (auto &row : results)
      for (std::size_t a = 0; a < row.size(); ++a)
        row[a] = coin(rng);
    double previous = 0.0;
    for (std::size_t k = 1; k <= 6; ++k) {
      const double v = pass_at_k(results, k);
      REQUIRE(v >= previous);
      REQUIRE(v <= 100.0);
      previous = v;
    }
  }
}

TEST_CASE("success_rate_per_node examples", "[metrics]") {
  const auto one = success_rate_per_node(TransitionLog(
      {at("n0", sg({})), at("n0", err("e")), at("n0", err("f")), at("n0", err("e"))}));
  CHECK(one.mean == 25.0);
  CHECK(one.n == 1);
  const auto two = success_rate_per_node(TransitionLog({at("n0", sg({})), at("n1", err("e"))}));
  CHECK(two.mean == 50.0);
  CHECK(two.std_error == Approx(50.0).epsilon(1e-15));
  CHECK_THROWS_AS(success_rate_per_node(TransitionLog{}), InvalidInput);
}

TEST_CASE("unique response and subgoal rates", "[metrics]") {
  SECTION("hand enumerated node") {
    const auto log = hand_fixture();
    CHECK(unique_response_rate(log).mean == 60.0);
    CHECK(unique_subgoal_rate(log).mean == 200.0 / 3.0);
    CHECK(std::round(unique_subgoal_rate(log).mean * 10.0) / 10.0 == 66.7);
  }
  SECTION("overlapping successes") {
    const TransitionLog log({at("n0", sg({"A"})), at("n0", sg({"A"})), at("n0", sg({"A", "B"}))});
    CHECK(unique_subgoal_rate(log).mean == 200.0 / 3.0);
  }
  SECTION("all distinct and single transitions") {
    CHECK(unique_response_rate(TransitionLog({at("n0", err("a")), at("n0", err("b")),
                                              at("n0", sg({"C"}))}))
              .mean == 100.0);
    CHECK(unique_response_rate(TransitionLog({at("n0", err("a"))})).mean == 100.0);
    CHECK(unique_subgoal_rate(TransitionLog({at("n0", sg({"C"}))})).mean == 100.0);
  }
  SECTION("nodes without successes are excluded") {
    const TransitionLog log({at("n0", err("a")), at("n1", sg({"C"})), at("n1", sg({"C"}))});
    const auto s = unique_subgoal_rate(log);
    CHECK(s.n == 1);
    CHECK(s.mean == 50.0);
    CHECK(unique_response_rate(log).n == 2);
  }
  SECTION("uniqueness is scoped per node and per attempt") {
    const TransitionLog log({at("n0", err("a")), at("n1", err("a")), at("n0", err("a"), 0.1, "b#0")});
    CHECK(unique_response_rate(log).mean == 100.0);
    CHECK(group_by_node(log).size() == 3);
  }
  SECTION("repeated closing responses count once") {
    const TransitionLog log({at("n0", sg({})), at("n0", sg({}))});
    CHECK(unique_response_rate(log).mean == 50.0);
  }
}

TEST_CASE("execution_time_stats", "[metrics]") {
  CHECK(execution_time_stats(TransitionLog({at("n0", err("a"), 0.1), at("n0", err("a"), 0.3)})).mean ==
        200.0);
  CHECK(execution_time_stats(TransitionLog({at("n0", err("a"), 0.206)})).mean == Approx(206.0));
  CHECK(execution_time_stats(hand_fixture()).n == 5);
}

TEST_CASE("metric invariants under permutation", "[metrics][property]") {
  std::mt19937_64 rng(5);
  std::vector<TransitionRecord> records;
  // Errors and disjoint singleton subgoals: duplicate groups are well defined.
  for (int i = 0; i < 60; ++i) {
    const std::string node = "n" + std::to_string(i % 6);
    const int v = static_cast<int>(rng() % 5);
    records.push_back(at(node, i % 3 ? err("e" + std::to_string(v)) : sg({"G" + std::to_string(v)}),
                         0.01 * static_cast<double>(rng() % 50)));
  }
  const TransitionLog base(records);
  const auto success = success_rate_per_node(base);
  const auto unique = unique_response_rate(base);
  const auto unique_sg = unique_subgoal_rate(base);
  const auto time = execution_time_stats(base);
  CHECK(unique.mean >= 0.0);
  CHECK(unique.mean <= 100.0);
  for (int trial = 0; trial < 20; ++trial) {
    // Shuffle within nodes while keeping node first-appearance order.
    std::vector<TransitionRecord> shuffled;
    for (int n = 0; n < 6; ++n) {
      std::vector<TransitionRecord> group;
      for (const auto &r : records)
        if (r.node_id == "n" + std::to_string(n))
          group.push_back(r);
      std::shuffle(group.begin(), group.end(), rng);
      shuffled.insert(shuffled.end(), group.begin(), group.end());
    }
    const TransitionLog log(shuffled);
    CHECK(success_rate_per_node(log).mean == Approx(success.mean).epsilon(1e-12));
    CHECK(unique_response_rate(log).mean == Approx(unique.mean).epsilon(1e-12));
    CHECK(unique_subgoal_rate(log).mean == Approx(unique_sg.mean).epsilon(1e-12));
    CHECK(execution_time_stats(log).mean == Approx(time.mean).epsilon(1e-12));
  }
  const auto again = unique_response_rate(TransitionLog(records));
  CHECK(again.mean == unique.mean);
  CHECK(again.std_error == unique.std_error);
}

TEST_CASE("embedding similarity summary", "[metrics]") {
  std::vector<NodeEmbeddings> nodes{
      {"orth", {{1, 0}, {0, 1}}, {true, true}},
      {"same", {{0.6, 0.8}, {0.6, 0.8}, {1, 0}}, {true, true, false}},
      {"single", {{1, 0}}, {true}},
  };
  const auto all = embedding_similarity_summary(nodes, false);
  REQUIRE(all.nodes == 2);
  CHECK(all.node_means[0].second == 0.0);
  CHECK(all.node_means[1].second == Approx((1.0 + 0.6 + 0.6) / 3.0));
  const auto unique = embedding_similarity_summary(nodes, true);
  REQUIRE(unique.nodes == 2);
  CHECK(unique.node_means[1].second == Approx(1.0));
  CHECK(unique.overall_mean == Approx(0.5));
  CHECK_THROWS_AS(cosine(std::vector<double>{1, 0}, std::vector<double>{1}), InvalidInput);
}

#include <catch2/catch.hpp>

#include "dprover/transitions.hpp"

#include <algorithm>
#include <filesystem>
#include <sstream>

using namespace dprover;
namespace fs = std::filesystem;

namespace {

const fs::path data_dir{DPROVER_TEST_DATA};

TransitionRecord make(std::string goal, std::string tactic, TacticOutput out,
                      double t = 0.1, std::string node = "n0") {
  return TransitionRecord{"id-" + goal, goal, std::move(tactic), t,
                          std::move(out), std::move(node), "a#0"};
}

TransitionLog numbered_log(std::size_t n) {
  TransitionLog log;
  for (std::size_t i = 0; i < n; ++i)
    log.add(make("g" + std::to_string(i % 7), "t" + std::to_string(i),
                 i % 4 ? TacticOutput{ErrorMessage{"e"}} : TacticOutput{Subgoals{}},
                 0.001 * static_cast<double>(i)));
  return log;
}

} // namespace

TEST_CASE("round trip preserves unicode and multi-line output", "[transitions]") {
  TransitionLog log;
  log.add(make("x : ℝ,\nh₀ : 0 < x\n⊢ √x ≥ 0", "positivity", Subgoals{}));
  log.add(make("⊢ ∀ ε > 0, ∃ δ", "intro ε hε",
               Subgoals{{"ε : ℝ,\nhε : ε > 0\n⊢ ∃ δ", "⊢ \"quoted\" \\ goal"}}, 0.25));
  log.add(make("⊢ a", "exact h", ErrorMessage{"type mismatch\n  h\nhas type\n  b : Prop"}, 1e-7));
  std::stringstream ss;
  write_log(ss, log);
  const std::string text = ss.str();
  CHECK(std::count(text.begin(), text.end(), '\n') == 3);
  const auto loaded = read_log(ss);
  CHECK(loaded.skipped == 0);
  CHECK(loaded.log == log);
  CHECK(loaded.log.records()[1].subgoals()->size() == 2);
}

TEST_CASE("read_log modes", "[transitions][errors]") {
  std::stringstream ss;
  write_log(ss, numbered_log(4));
  std::string text = ss.str();
  // Corrupt line 3 and add a blank line.
  std::vector<std::string> lines;
  std::stringstream in(text);
  for (std::string l; std::getline(in, l);)
    lines.push_back(l);
  lines[2] = R"({"goal_id":"g","goal_text":"g","tactic_text":"t","status":1,"time_s":0.1,"output":{"error":"x"}})";
  std::string corrupted;
  for (const auto &l : lines)
    corrupted += l + "\n\n";

  SECTION("lenient skips and tallies") {
    std::stringstream s(corrupted);
    const auto loaded = read_log(s, ReadMode::Lenient);
    CHECK(loaded.log.size() == 3);
    CHECK(loaded.skipped == 1);
    CHECK(loaded.lines == 4);
    REQUIRE(loaded.problems.size() == 1);
    CHECK(loaded.problems[0].line() == 5);
  }
  SECTION("strict aborts with the line number") {
    std::stringstream s(corrupted);
    try {
      read_log(s, ReadMode::Strict);
      FAIL("expected ParseError");
    } catch (const ParseError &e) {
      CHECK(e.line() == 5);
      CHECK_THAT(e.what(), Catch::Contains("disagrees"));
    }
  }
  SECTION("schema violations") {
    for (const char *bad : {
             R"({"goal_text":"g","tactic_text":"t","status":0,"time_s":0.1,"output":{"error":"x"}})",
             R"({"goal_id":"g","goal_text":"g","tactic_text":"t","status":0,"time_s":-1,"output":{"error":"x"}})",
             R"({"goal_id":"g","goal_text":"g","tactic_text":"t","status":0,"time_s":0.1,"output":{}})",
             R"({"goal_id":"g","goal_text":"g","tactic_text":"t","status":1,"time_s":0.1,"output":{"error":"x","subgoals":[]}})",
             "[1, 2",
         }) {
      std::stringstream s(std::string(bad) + "\n");
      CHECK_THROWS_AS(read_log(s, ReadMode::Strict), ParseError);
    }
  }
}

TEST_CASE("index is first-wins over (goal, tactic)", "[transitions]") {
  TransitionLog log;
  log.add(make("g", "simp", ErrorMessage{"first"}));
  log.add(make("g", "simp", ErrorMessage{"second"}));
  log.add(make("g", "ring", Subgoals{}));
  CHECK(log.size() == 3);
  CHECK(log.duplicate_count() == 1);
  CHECK(*log.find("g", "simp")->error() == "first");
}

TEST_CASE("three-record fixture resolves every key", "[transitions]") {
  const auto loaded = read_log(data_dir / "minif2f_style.jsonl");
  TransitionLog three(std::vector<TransitionRecord>(loaded.log.records().begin(),
                                                    loaded.log.records().begin() + 3));
  for (const auto &r : three.records()) {
    const auto hit = replay_lookup(three, r.goal_text, r.tactic_text);
    REQUIRE(hit);
    CHECK(hit->time_s == r.time_s);
    CHECK(hit->status() == r.status());
  }
}

TEST_CASE("split_log", "[transitions]") {
  const auto log = numbered_log(100);
  const auto [train, test] = split_log(log, 0.95, 42);
  CHECK(train.size() == 95);
  CHECK(test.size() == 5);

  const auto [train2, test2] = split_log(log, 0.95, 42);
  CHECK(train == train2);
  CHECK(test == test2);
  const auto [train3, test3] = split_log(log, 0.95, 43);
  CHECK_FALSE(test == test3);

  std::vector<std::string> all;
  for (const auto *part : {&train, &test})
    for (const auto &r : part->records())
      all.push_back(r.tactic_text);
  std::vector<std::string> original;
  for (const auto &r : log.records())
    original.push_back(r.tactic_text);
  std::sort(all.begin(), all.end());
  std::sort(original.begin(), original.end());
  CHECK(all == original);

  CHECK_THROWS_AS(split_log(TransitionLog{}, 0.5, 0), InvalidInput);
  CHECK_THROWS_AS(split_log(log, 1.0, 0), InvalidInput);
}

TEST_CASE("replay_lookup is exact", "[transitions]") {
  TransitionLog log;
  log.add(make("⊢ a ∧ b", "constructor", Subgoals{{"⊢ a", "⊢ b"}}));
  CHECK(replay_lookup(log, "⊢ a ∧ b", "constructor"));
  CHECK_FALSE(replay_lookup(log, "⊢ a ∧ b", "split"));
  CHECK_FALSE(replay_lookup(log, "⊢ a ∧ b", "constructor "));
  CHECK_FALSE(replay_lookup(log, "⊢ a ∧  b", "constructor"));
}

TEST_CASE("bundled miniF2F-style fixture has the expected error rate", "[transitions]") {
  const auto loaded = read_log(data_dir / "minif2f_style.jsonl");
  REQUIRE(loaded.log.size() >= 20);
  std::size_t errors = 0;
  for (const auto &r : loaded.log.records()) {
    CHECK((r.status() == 1) == (r.subgoals() != nullptr));
    errors += r.succeeded() ? 0 : 1;
  }
  const double rate = static_cast<double>(errors) / static_cast<double>(loaded.log.size());
  CHECK(rate == Approx(0.75).margin(0.05));
}

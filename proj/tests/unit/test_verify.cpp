#include <doctest.h>

#include <set>
#include <string>

#include "tpp/equation.hpp"
#include "tpp/error.hpp"
#include "tpp/testing.hpp"
#include "tpp/verify.hpp"

using namespace tpp;
using namespace tpp::eq;

namespace {

std::vector<InputSpec> args(int n) {
  return std::vector<InputSpec>(static_cast<std::size_t>(n), InputSpec{TensorDesc::dense(2, 2)});
}

struct FaultGuard {
  FaultGuard() { testing::set_reverse_reduce(true); }
  ~FaultGuard() { testing::set_reverse_reduce(false); }
};

}  // namespace

TEST_SUITE("verify") {

TEST_CASE("brute force minimum on small trees") {
  CHECK(verify::brute_force_min_temps(parse_equation("relu(T0)", args(1))) == 1);
  CHECK(verify::brute_force_min_temps(parse_equation("T0 + T1", args(2))) == 1);
  CHECK(verify::brute_force_min_temps(parse_equation("(T0 + T1) * (T2 - T3)", args(4))) == 2);
  CHECK(verify::brute_force_min_temps(parse_equation("((T0 + T1) * (T2 - T3)) + ((T0 * T1) - (T2 + T3))", args(4))) == 3);
  // A left-deep chain never holds two intermediates.
  CHECK(verify::brute_force_min_temps(parse_equation("((T0 + T1) * T2) - T3", args(4))) == 1);
}

TEST_CASE("planner meets the brute force minimum on random trees") {
  verify::Rng rng(11);
  for (int i = 0; i < 200; ++i) {
    CAPTURE(i);
    const ExecPlan p = compile(verify::random_tree(rng, 1 + i % 8, i % 3 != 0));
    CHECK(p.temp_count == verify::brute_force_min_temps(p.tree));
    CHECK(verify::recursive_score(p.tree, p.tree.root) == p.tree.node(p.tree.root).score);
    CHECK(verify::validate_plan(p).empty());
  }
}

TEST_CASE("random tree has the requested size") {
  verify::Rng rng(2);
  for (int n = 1; n <= 12; ++n) CHECK(verify::random_tree(rng, n).internal_count() == n);
}

TEST_CASE("validate_plan catches a clobbered input") {
  ExecPlan p = compile(parse_equation("(T0 + T1) * (T2 - T3)", args(4)));
  REQUIRE(verify::validate_plan(p).empty());
  // Make the second step overwrite the first step's still-live result.
  REQUIRE(p.steps.size() == 3);
  REQUIRE(p.steps[1].output.kind == Binding::Kind::Temp);
  p.steps[1].output.index = p.steps[0].output.index;
  p.steps[1].temp_id = p.steps[0].temp_id;
  CHECK_FALSE(verify::validate_plan(p).empty());
}

TEST_CASE("suite registry covers every criterion once") {
  std::set<int> crits;
  std::set<std::string> names;
  for (const auto& s : verify::suites()) {
    CHECK(names.insert(s.name).second);
    if (s.criterion > 0) CHECK(crits.insert(s.criterion).second);
    CHECK(s.time_limit > 0);
  }
  CHECK(crits.size() == 13);
  CHECK(*crits.begin() == 1);
  CHECK(*crits.rbegin() == 13);
}

TEST_CASE("unknown suite names are rejected") {
  CHECK_THROWS_AS(verify::run(verify::Config{}, {"no-such-suite"}), Error);
}

TEST_CASE("suite results are deterministic per seed") {
  verify::Config cfg;
  cfg.seed = 42;
  const std::vector<std::string> only{"equation-minimality", "approx-budgets", "dropout-stats"};
  const auto a = verify::run(cfg, only);
  const auto b = verify::run(cfg, only);
  REQUIRE(a.size() == 3);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].pass);
    CHECK(a[i].measured == b[i].measured);
    CHECK(a[i].detail == b[i].detail);
  }
}

TEST_CASE("reversed reduction breaks fidelity but not minimality") {
  const std::vector<std::string> only{"equation-minimality", "fusion-fidelity"};
  {
    FaultGuard g;
    CHECK(testing::reverse_reduce());
    const auto r = verify::run(verify::Config{}, only);
    REQUIRE(r.size() == 2);
    CHECK(r[0].pass);
    CHECK_FALSE(r[1].pass);
    CHECK(r[1].measured > 0);
  }
  CHECK_FALSE(testing::reverse_reduce());
  const auto r = verify::run(verify::Config{}, only);
  CHECK(r[0].pass);
  CHECK(r[1].pass);
}

TEST_CASE("report formats") {
  const auto r = verify::run(verify::Config{}, {"equation-worked-example"});
  const std::string text = verify::format_text(r);
  CHECK(text.find("PASS [ 1] equation-worked-example") != std::string::npos);
  const std::string json = verify::format_json(r, verify::Config{});
  CHECK(json.find("\"equation-worked-example\"") != std::string::npos);
  const std::string csv = verify::format_csv(r);
  CHECK(csv.find("equation-worked-example") != std::string::npos);
}

}  // TEST_SUITE

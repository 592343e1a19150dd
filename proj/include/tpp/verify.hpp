#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "tpp/equation.hpp"
#include "tpp/tensor.hpp"

// Conformance suites and the independent oracles they compare against.
namespace tpp::verify {

struct Config {
  std::uint64_t seed = 1;
  int threads = 0;
  int max_nodes = 9;  // internal-node bound for random planner trees
};

struct Result {
  std::string name;
  int criterion = 0;  // acceptance criterion number, 0 for extra module checks
  bool pass = false;
  double measured = 0.0;  // worst observed error, mismatch count or metric
  double budget = 0.0;
  std::string metric;     // what `measured` is
  std::string detail;
  double seconds = 0.0;
  double time_limit = 0.0;
};

struct Suite {
  std::string name;
  int criterion = 0;
  std::string description;
  double time_limit = 0.0;  // seconds
  std::function<Result(const Config&)> run;
};

const std::vector<Suite>& suites();
// Runs the selected suites (all when `only` is empty); unknown names throw.
std::vector<Result> run(const Config& cfg, const std::vector<std::string>& only = {});

// ---- oracles ----

using Rng = std::mt19937_64;

// Minimum over every topological evaluation order of the peak number of live
// intermediate values, where a node writing over one of its inputs needs no
// extra slot. Exponential; trees of up to ~20 internal nodes.
int brute_force_min_temps(const eq::EqTree& tree);

// Register score recomputed by direct recursion from the root.
int recursive_score(const eq::EqTree& tree, int node);

// Checks a plan step by step: every input is live when read, no live value is
// overwritten, every step's slot matches its node, recycled slots are free.
// Returns an empty string when valid.
std::string validate_plan(const eq::ExecPlan& plan);

// Scalar interpreter: each node materialized in its own tensor, elements read
// and written one at a time. Covers the kinds random_equation produces.
Tensor interpret(const eq::EqTree& tree, std::span<const TensorView> args);

struct RandomEquation {
  eq::EqTree tree;
  std::vector<Tensor> args;
  std::vector<TensorView> views() const;
};

struct EquationShape {
  int max_internal = 9;
  bool elementwise_only = false;
  bool allow_broadcast = true;
  DType dtype = DType::FP32;
  bool mixed_dtypes = false;  // occasionally mix FP32 and FP64 leaves
  std::int64_t max_dim = 12;
};
RandomEquation random_equation(Rng& rng, const EquationShape& shape);

// Shape-free tree of exactly `internal` internal nodes over 2x2 FP32 leaves,
// arities drawn from {1, 2, 3} (or {1, 2} when !ternary).
eq::EqTree random_tree(Rng& rng, int internal, bool ternary = true);

void fill_normal(Rng& rng, const TensorView& v, double mean = 0.0, double stddev = 1.0);

std::string format_text(const std::vector<Result>& results);
std::string format_json(const std::vector<Result>& results, const Config& cfg);
std::string format_csv(const std::vector<Result>& results);

}  // namespace tpp::verify

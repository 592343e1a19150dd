#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "tpp/ops.hpp"

namespace tpp::eq {

struct NodeOp {
  OpKind kind = UnaryKind::IDENTITY;
  OpFlags flags{};
  bool operator==(const NodeOp&) const = default;
};

struct EqNode {
  int id = -1;
  std::optional<NodeOp> op;  // empty for leaves
  std::vector<int> children;
  int arg_slot = -1;         // leaves only
  TensorDesc out{};          // leaf: declared argument desc; internal: inferred (dense)
  int score = 0;
  int timestamp = -1;
  int temp_id = -1;

  bool is_leaf() const noexcept { return !op.has_value(); }
  bool operator==(const EqNode&) const = default;
};

struct EqTree {
  std::vector<EqNode> nodes;
  int root = -1;
  std::vector<InputSpec> args;  // by argument slot

  const EqNode& node(int id) const { return nodes.at(static_cast<std::size_t>(id)); }
  EqNode& node(int id) { return nodes.at(static_cast<std::size_t>(id)); }
  int internal_count() const noexcept;
  bool operator==(const EqTree&) const = default;
};

class TreeBuilder {
 public:
  explicit TreeBuilder(std::vector<InputSpec> args);
  int leaf(int arg_slot);
  int unary(UnaryKind k, int child, const OpFlags& flags = {});
  int binary(BinaryKind k, int left, int right, const OpFlags& flags = {});
  int ternary(TernaryKind k, int left, int mid, int right, const OpFlags& flags = {});
  int op(const NodeOp& op, std::vector<int> children);
  // Validates single-parent tree shape rooted at `root` and infers shapes.
  EqTree build(int root) const;

 private:
  std::vector<InputSpec> args_;
  std::vector<EqNode> nodes_;
};

// Grammar:
//   expr   := term (('+' | '-') term)*
//   term   := factor (('*' | '/' | 'matmul') factor)*
//   factor := name '(' expr (',' expr)* ')' | 'T' digits | '(' expr ')'
// '*' is elementwise. Function names cover the elementwise unary kinds,
// transpose, reduce_<sum|sumsq|max|min|mul>_<rows|cols|all>, gather_cols,
// max/min, muladd/nmuladd/gemm. An approximation may be selected with a
// suffix, e.g. tanh:minimax(T0).
EqTree parse_equation(std::string_view text, std::vector<InputSpec> args);
// Number of argument slots referenced by an equation (max Tn + 1).
int count_arguments(std::string_view text);

void assign_register_score(EqTree& tree);

struct Binding {
  enum class Kind : std::uint8_t { Arg, Temp, Out };
  Kind kind = Kind::Arg;
  int index = -1;       // argument slot or temp slot
  int node = -1;        // producing tree node
  std::int64_t rows = 0, cols = 0;  // logical read extent
  bool operator==(const Binding&) const = default;
};

struct PlanStep {
  int timestamp = 0;
  int node = -1;
  NodeOp op{};
  std::vector<Binding> inputs;
  Binding output{};
  int temp_id = -1;
  std::vector<int> recycled;
  bool fused_gather = false;  // reduce-sum over gathered columns run as one primitive
  bool absorbed = false;      // gather step folded into its parent
  bool operator==(const PlanStep&) const = default;
};

struct ExecPlan {
  EqTree tree;
  std::vector<PlanStep> steps;
  int temp_count = 0;
  std::size_t slot_bytes = 0;   // largest intermediate
  std::size_t temp_bytes = 0;   // sum over slots of their largest occupant
  std::size_t naive_bytes = 0;  // sum over all internal node outputs
  bool operator==(const ExecPlan&) const = default;
};

// Scores must be assigned first.
ExecPlan create_execution_plan(const EqTree& scored);
ExecPlan compile(EqTree tree);

struct Buffered {};
struct TileFused {
  std::int64_t tile_m = 32, tile_n = 32;
};
struct Hybrid {
  std::int64_t tile_m = 32, tile_n = 32;
};
using EvalStrategy = std::variant<Buffered, TileFused, Hybrid>;

enum class NodeMode : std::uint8_t { Leaf, Buffered, Fused };

bool tile_fusable(const ExecPlan& plan);
// HYBRID assignment: elementwise internal nodes fuse, the rest are buffered.
std::vector<NodeMode> hybrid_assignment(const ExecPlan& plan);

struct EvalOptions {
  bool poison_recycled = false;  // fill recycled slots with NaN after each step
  int threads = 0;
};

void evaluate(const ExecPlan& plan, const EvalStrategy& strategy, std::span<const TensorView> args,
              const TensorView& out, const EvalOptions& opts = {});

enum class PlanFormat : std::uint8_t { Json, Dot };
std::string export_plan(const ExecPlan& plan, PlanFormat format);
ExecPlan import_plan_json(std::string_view text);

std::string op_label(const NodeOp& op);

}  // namespace tpp::eq

#include <algorithm>
#include <set>

#include "tpp/equation.hpp"
#include "tpp/error.hpp"

namespace tpp::eq {

namespace {

// Registers needed to evaluate a subtree when children are visited in
// decreasing order of need. Equals the register score for unary and binary
// nodes; for ternary nodes the score's floor of 3 can overstate it.
std::vector<int> exact_need(const EqTree& t) {
  std::vector<int> need(t.nodes.size(), 0);
  for (const auto& n : t.nodes) {
    if (n.is_leaf()) continue;
    std::vector<int> v;
    for (int c : n.children)
      if (!t.node(c).is_leaf()) v.push_back(need[static_cast<std::size_t>(c)]);
    std::sort(v.begin(), v.end(), std::greater<>());
    int r = 1;
    for (std::size_t k = 0; k < v.size(); ++k) r = std::max(r, static_cast<int>(k) + v[k]);
    need[static_cast<std::size_t>(n.id)] = r;
  }
  return need;
}

bool is_sum_rows_reduce(const NodeOp& op) {
  const auto* u = std::get_if<UnaryKind>(&op.kind);
  return u && *u == UnaryKind::REDUCE && op.flags.reduce.op == ReduceOp::Sum &&
         op.flags.reduce.axis == ReduceAxis::Rows && !op.flags.reduce.squared;
}

bool is_gather_cols(const NodeOp& op) {
  const auto* u = std::get_if<UnaryKind>(&op.kind);
  return u && *u == UnaryKind::GATHER && op.flags.index_axis == IndexAxis::Cols;
}

class Planner {
 public:
  explicit Planner(const EqTree& t) : need_(exact_need(t)) { plan_.tree = t; }

  ExecPlan run() {
    EqTree& t = plan_.tree;
    for (auto& n : t.nodes) {
      n.timestamp = -1;
      n.temp_id = -1;
    }
    visit(t.root);
    plan_.temp_count = next_id_;
    mark_idioms();
    size();
    return std::move(plan_);
  }

 private:
  int reserve() {
    if (!free_.empty()) {
      const int id = *free_.begin();
      free_.erase(free_.begin());
      return id;
    }
    return next_id_++;
  }

  void visit(int id) {
    EqTree& t = plan_.tree;
    if (t.node(id).is_leaf()) return;
    std::vector<int> order = t.node(id).children;
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return need_[static_cast<std::size_t>(a)] > need_[static_cast<std::size_t>(b)];
    });
    for (int c : order) visit(c);

    EqNode& n = t.node(id);
    n.timestamp = ts_++;
    auto leaf = [&](std::size_t k) { return t.node(n.children[k]).is_leaf(); };
    auto tmp = [&](std::size_t k) { return t.node(n.children[k]).temp_id; };
    std::vector<int> recycled;
    auto recycle = [&](std::size_t k) {
      if (leaf(k)) return;
      free_.insert(tmp(k));
      recycled.push_back(tmp(k));
    };
    const std::size_t ar = n.children.size();
    bool all_leaves = true;
    for (std::size_t k = 0; k < ar; ++k) all_leaves = all_leaves && leaf(k);
    if (all_leaves) {
      n.temp_id = reserve();
    } else if (ar == 1) {
      n.temp_id = tmp(0);
    } else if (ar == 2) {
      if (!leaf(0)) {
        n.temp_id = tmp(0);
        recycle(1);
      } else {
        n.temp_id = tmp(1);
        recycle(0);
      }
    } else if (!leaf(0)) {
      n.temp_id = tmp(0);
      recycle(1);
      recycle(2);
    } else if (!leaf(2)) {
      n.temp_id = tmp(2);
      recycle(1);
      recycle(0);
    } else {
      n.temp_id = tmp(1);
      recycle(0);
      recycle(2);
    }

    PlanStep s;
    s.timestamp = n.timestamp;
    s.node = id;
    s.op = *n.op;
    for (int c : n.children) {
      const EqNode& ch = t.node(c);
      Binding b;
      b.kind = ch.is_leaf() ? Binding::Kind::Arg : Binding::Kind::Temp;
      b.index = ch.is_leaf() ? ch.arg_slot : ch.temp_id;
      b.node = c;
      b.rows = ch.out.rows;
      b.cols = ch.out.cols;
      s.inputs.push_back(b);
    }
    s.output.kind = id == t.root ? Binding::Kind::Out : Binding::Kind::Temp;
    s.output.index = id == t.root ? 0 : n.temp_id;
    s.output.node = id;
    s.output.rows = n.out.rows;
    s.output.cols = n.out.cols;
    s.temp_id = n.temp_id;
    s.recycled = std::move(recycled);
    plan_.steps.push_back(std::move(s));
  }

  // Sum over gathered columns runs as one fused primitive on the argument.
  void mark_idioms() {
    const EqTree& t = plan_.tree;
    std::vector<int> step_of(t.nodes.size(), -1);
    for (std::size_t i = 0; i < plan_.steps.size(); ++i)
      step_of[static_cast<std::size_t>(plan_.steps[i].node)] = static_cast<int>(i);
    for (auto& s : plan_.steps) {
      if (!is_sum_rows_reduce(s.op)) continue;
      const EqNode& g = t.node(t.node(s.node).children[0]);
      if (g.is_leaf() || !is_gather_cols(*g.op)) continue;
      const EqNode& src = t.node(g.children[0]);
      if (!src.is_leaf()) continue;
      PlanStep& gs = plan_.steps[static_cast<std::size_t>(step_of[static_cast<std::size_t>(g.id)])];
      gs.absorbed = true;
      s.fused_gather = true;
      s.inputs[0] = gs.inputs[0];
    }
  }

  void size() {
    const EqTree& t = plan_.tree;
    std::vector<std::size_t> per_slot(static_cast<std::size_t>(plan_.temp_count), 0);
    for (const auto& n : t.nodes) {
      if (n.is_leaf()) continue;
      const std::size_t b = n.out.bytes();
      plan_.naive_bytes += b;
      plan_.slot_bytes = std::max(plan_.slot_bytes, b);
      auto& s = per_slot[static_cast<std::size_t>(n.temp_id)];
      s = std::max(s, b);
    }
    for (std::size_t b : per_slot) plan_.temp_bytes += b;
  }

  std::vector<int> need_;
  ExecPlan plan_;
  std::set<int> free_;
  int next_id_ = 0;
  int ts_ = 0;
};

}  // namespace

ExecPlan create_execution_plan(const EqTree& scored) {
  if (scored.root < 0 || scored.node(scored.root).is_leaf())
    fail(Errc::invalid_spec, "cannot plan an equation without operations");
  return Planner(scored).run();
}

ExecPlan compile(EqTree tree) {
  assign_register_score(tree);
  return create_execution_plan(tree);
}

bool tile_fusable(const ExecPlan& plan) {
  for (const auto& n : plan.tree.nodes)
    if (!n.is_leaf() && !is_elementwise(n.op->kind)) return false;
  return true;
}

std::vector<NodeMode> hybrid_assignment(const ExecPlan& plan) {
  std::vector<NodeMode> m;
  m.reserve(plan.tree.nodes.size());
  for (const auto& n : plan.tree.nodes)
    m.push_back(n.is_leaf() ? NodeMode::Leaf : is_elementwise(n.op->kind) ? NodeMode::Fused : NodeMode::Buffered);
  return m;
}

}  // namespace tpp::eq

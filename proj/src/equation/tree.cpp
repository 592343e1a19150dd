#include <algorithm>
#include <string>

#include "tpp/equation.hpp"
#include "tpp/error.hpp"

namespace tpp::eq {

namespace {

// Kinds whose output needs a companion buffer of its own; an equation has
// nowhere to put it.
bool writes_companion(const NodeOp& op) {
  if (const auto* u = std::get_if<UnaryKind>(&op.kind)) {
    switch (*u) {
      case UnaryKind::UNPACK:
      case UnaryKind::DROPOUT:
      case UnaryKind::PRNG: return true;
      case UnaryKind::RELU: return op.flags.bitmask_out;
      default: return false;
    }
  }
  if (const auto* b = std::get_if<BinaryKind>(&op.kind)) return *b == BinaryKind::COMPARE;
  return std::get<TernaryKind>(op.kind) == TernaryKind::BRGEMM;
}

std::string dims(const TensorDesc& d) { return std::to_string(d.rows) + "x" + std::to_string(d.cols); }

TensorDesc infer_node(const EqTree& t, const EqNode& n) {
  const NodeOp& op = *n.op;
  if (writes_companion(op))
    fail(Errc::unsupported, std::string(to_string(op.kind)) + " produces a companion output and cannot appear in an equation");
  std::vector<InputSpec> in;
  for (int c : n.children) {
    const EqNode& ch = t.node(c);
    InputSpec s;
    s.desc = ch.out;
    if (ch.is_leaf()) {
      const InputSpec& a = t.args.at(static_cast<std::size_t>(ch.arg_slot));
      s.companion = a.companion;
      s.companion_count = a.companion_count;
    }
    in.push_back(s);
  }
  if (is_elementwise(op.kind)) {
    // Broadcast join: every extent either matches the result or is 1.
    std::int64_t R = 1, C = 1;
    for (const auto& s : in) {
      R = std::max(R, s.desc.rows);
      C = std::max(C, s.desc.cols);
    }
    for (auto& s : in) {
      if ((s.desc.rows != R && s.desc.rows != 1) || (s.desc.cols != C && s.desc.cols != 1))
        fail(Errc::shape_mismatch, std::string(to_string(op.kind)) + ": cannot broadcast " + dims(s.desc) + " to " +
                                       std::to_string(R) + "x" + std::to_string(C));
      const bool rb = s.desc.rows == 1 && R > 1, cb = s.desc.cols == 1 && C > 1;
      s.desc.bcast = rb && cb ? Bcast::Scalar : rb ? Bcast::Row : cb ? Bcast::Col : Bcast::None;
      s.desc.rows = R;
      s.desc.cols = C;
    }
  }
  KernelSpec ks{op.kind, in, op.flags};
  return infer_output(ks);
}

}  // namespace

int EqTree::internal_count() const noexcept {
  return static_cast<int>(std::count_if(nodes.begin(), nodes.end(), [](const EqNode& n) { return !n.is_leaf(); }));
}

TreeBuilder::TreeBuilder(std::vector<InputSpec> args) : args_(std::move(args)) {}

int TreeBuilder::leaf(int arg_slot) {
  if (arg_slot < 0 || static_cast<std::size_t>(arg_slot) >= args_.size())
    fail(Errc::invalid_spec, "argument slot T" + std::to_string(arg_slot) + " is not declared");
  EqNode n;
  n.id = static_cast<int>(nodes_.size());
  n.arg_slot = arg_slot;
  n.out = args_[static_cast<std::size_t>(arg_slot)].desc;
  nodes_.push_back(n);
  return n.id;
}

int TreeBuilder::unary(UnaryKind k, int child, const OpFlags& flags) { return op({k, flags}, {child}); }
int TreeBuilder::binary(BinaryKind k, int left, int right, const OpFlags& flags) {
  return op({k, flags}, {left, right});
}
int TreeBuilder::ternary(TernaryKind k, int left, int mid, int right, const OpFlags& flags) {
  return op({k, flags}, {left, mid, right});
}

int TreeBuilder::op(const NodeOp& o, std::vector<int> children) {
  if (static_cast<int>(children.size()) != arity(o.kind))
    fail(Errc::invalid_spec, std::string(to_string(o.kind)) + " takes " + std::to_string(arity(o.kind)) +
                                 " operands, got " + std::to_string(children.size()));
  const int id = static_cast<int>(nodes_.size());
  for (int c : children)
    if (c < 0 || c >= id) fail(Errc::invalid_spec, "child id " + std::to_string(c) + " does not exist yet");
  EqNode n;
  n.id = id;
  n.op = o;
  n.children = std::move(children);
  nodes_.push_back(n);
  return id;
}

EqTree TreeBuilder::build(int root) const {
  if (root < 0 || static_cast<std::size_t>(root) >= nodes_.size()) fail(Errc::invalid_spec, "root id out of range");
  if (nodes_[static_cast<std::size_t>(root)].is_leaf())
    fail(Errc::invalid_spec, "the root of an equation must be an operation, not a bare argument");
  std::vector<int> parents(nodes_.size(), 0);
  std::vector<char> reach(nodes_.size(), 0);
  std::vector<int> stack{root};
  reach[static_cast<std::size_t>(root)] = 1;
  while (!stack.empty()) {
    const int id = stack.back();
    stack.pop_back();
    for (int c : nodes_[static_cast<std::size_t>(id)].children) {
      if (++parents[static_cast<std::size_t>(c)] > 1)
        fail(Errc::invalid_spec, "node " + std::to_string(c) + " has more than one parent; equations are trees");
      reach[static_cast<std::size_t>(c)] = 1;
      stack.push_back(c);
    }
  }
  // Renumber reachable nodes in creation order, which is topological.
  std::vector<int> remap(nodes_.size(), -1);
  EqTree t;
  t.args = args_;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (!reach[i]) continue;
    remap[i] = static_cast<int>(t.nodes.size());
    EqNode n = nodes_[i];
    n.id = remap[i];
    for (int& c : n.children) c = remap[static_cast<std::size_t>(c)];
    t.nodes.push_back(std::move(n));
  }
  t.root = remap[static_cast<std::size_t>(root)];
  for (auto& n : t.nodes) {
    if (n.is_leaf()) {
      if (n.out.bcast != Bcast::None)
        fail(Errc::invalid_spec, "argument T" + std::to_string(n.arg_slot) + " must be declared without broadcast");
      n.out.validate();
      continue;
    }
    n.out = infer_node(t, n);
  }
  return t;
}

void assign_register_score(EqTree& t) {
  // Children precede parents in node order.
  for (auto& n : t.nodes) {
    if (n.is_leaf()) {
      n.score = 0;
      continue;
    }
    auto v = [&](std::size_t k) { return t.node(n.children[k]).score; };
    auto leaf = [&](std::size_t k) { return t.node(n.children[k]).is_leaf(); };
    switch (n.children.size()) {
      case 1: n.score = leaf(0) ? 1 : v(0); break;
      case 2: n.score = v(0) == v(1) ? v(0) + 1 : std::max(v(0), v(1)); break;
      default: n.score = (leaf(0) && leaf(1) && leaf(2)) ? 1 : std::max({3, v(0), v(1), v(2)}); break;
    }
  }
}

}  // namespace tpp::eq

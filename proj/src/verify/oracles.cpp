#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>

#include "tpp/approx.hpp"
#include "tpp/error.hpp"
#include "tpp/verify.hpp"

namespace tpp::verify {

using eq::EqNode;
using eq::EqTree;

int brute_force_min_temps(const EqTree& t) {
  std::vector<int> internal;
  std::vector<int> pos(t.nodes.size(), -1);
  for (const auto& n : t.nodes)
    if (!n.is_leaf()) {
      pos[static_cast<std::size_t>(n.id)] = static_cast<int>(internal.size());
      internal.push_back(n.id);
    }
  const int k = static_cast<int>(internal.size());
  if (k == 0) return 0;
  if (k > 24) fail(Errc::invalid_spec, "brute force limited to 24 internal nodes");

  std::vector<std::uint32_t> kids(static_cast<std::size_t>(k), 0);
  std::vector<int> parent(static_cast<std::size_t>(k), -1);
  for (int a = 0; a < k; ++a)
    for (int c : t.node(internal[static_cast<std::size_t>(a)]).children) {
      const int b = pos[static_cast<std::size_t>(c)];
      if (b < 0) continue;
      kids[static_cast<std::size_t>(a)] |= 1u << b;
      parent[static_cast<std::size_t>(b)] = a;
    }

  // dp[S]: best peak over orders that have evaluated exactly the set S.
  const std::uint32_t full = (k == 32) ? ~0u : ((1u << k) - 1u);
  constexpr int kInf = 1 << 20;
  std::vector<int> dp(static_cast<std::size_t>(full) + 1, kInf);
  dp[0] = 0;
  for (std::uint32_t S = 1; S <= full; ++S) {
    bool closed = true;
    int live = 0;
    for (int a = 0; a < k && closed; ++a) {
      if (!(S >> a & 1u)) continue;
      if ((kids[static_cast<std::size_t>(a)] & S) != kids[static_cast<std::size_t>(a)]) closed = false;
      const int p = parent[static_cast<std::size_t>(a)];
      if (p < 0 || !(S >> p & 1u)) ++live;
    }
    if (!closed) continue;
    int best = kInf;
    for (int a = 0; a < k; ++a) {
      if (!(S >> a & 1u)) continue;
      const int p = parent[static_cast<std::size_t>(a)];
      if (p >= 0 && (S >> p & 1u)) continue;  // a must be the last one evaluated
      best = std::min(best, dp[S & ~(1u << a)]);
    }
    dp[S] = std::max(live, best);
  }
  return dp[full];
}

int recursive_score(const EqTree& t, int id) {
  const EqNode& n = t.node(id);
  if (n.is_leaf()) return 0;
  std::vector<int> v;
  bool all_leaves = true;
  for (int c : n.children) {
    v.push_back(recursive_score(t, c));
    all_leaves = all_leaves && t.node(c).is_leaf();
  }
  if (v.size() == 1) return all_leaves ? 1 : v[0];
  if (v.size() == 2) return v[0] == v[1] ? v[0] + 1 : std::max(v[0], v[1]);
  if (all_leaves) return 1;
  return std::max({3, v[0], v[1], v[2]});
}

std::string validate_plan(const eq::ExecPlan& plan) {
  const EqTree& t = plan.tree;
  std::map<int, int> holder;  // slot -> node whose value it holds
  std::vector<char> done(t.nodes.size(), 0);
  auto err = [](const eq::PlanStep& s, const std::string& m) {
    return "step t=" + std::to_string(s.timestamp) + " node " + std::to_string(s.node) + ": " + m;
  };
  int expected_t = 0;
  std::set<int> used;
  for (const auto& s : plan.steps) {
    if (s.timestamp != expected_t++) return err(s, "timestamps not consecutive");
    const EqNode& n = t.node(s.node);
    if (n.is_leaf()) return err(s, "step evaluates a leaf");
    if (done[static_cast<std::size_t>(s.node)]) return err(s, "node evaluated twice");
    if (s.temp_id < 0 || s.temp_id >= plan.temp_count) return err(s, "temp id out of range");
    if (s.temp_id != n.temp_id) return err(s, "step slot differs from node slot");
    used.insert(s.temp_id);
    if (s.inputs.size() != n.children.size()) return err(s, "input count differs from arity");
    std::vector<int> freed;
    for (std::size_t k = 0; k < n.children.size(); ++k) {
      const EqNode& c = t.node(n.children[k]);
      if (c.is_leaf()) continue;
      if (!done[static_cast<std::size_t>(c.id)]) return err(s, "child evaluated later");
      auto it = holder.find(c.temp_id);
      if (it == holder.end() || it->second != c.id) return err(s, "child value no longer live");
      freed.push_back(c.temp_id);
    }
    for (int r : s.recycled)
      if (std::find(freed.begin(), freed.end(), r) == freed.end()) return err(s, "recycles a slot it does not own");
    auto it = holder.find(s.temp_id);
    if (it != holder.end() && std::find(freed.begin(), freed.end(), s.temp_id) == freed.end())
      return err(s, "overwrites live slot " + std::to_string(s.temp_id));
    for (int f : freed) holder.erase(f);
    holder[s.temp_id] = s.node;
    done[static_cast<std::size_t>(s.node)] = 1;
    const bool root = s.node == t.root;
    if (root != (s.output.kind == eq::Binding::Kind::Out)) return err(s, "only the root writes the output");
  }
  for (const auto& n : t.nodes)
    if (!n.is_leaf() && !done[static_cast<std::size_t>(n.id)]) return "node " + std::to_string(n.id) + " never evaluated";
  if (holder.size() != 1 || holder.begin()->second != t.root) return "values other than the root left live";
  if (static_cast<int>(used.size()) != plan.temp_count) return "temp_count differs from slots used";
  return {};
}

// ---- scalar interpreter ----

namespace {

template <class T>
T tanh_of(T x, Approx a) {
  if (a == Approx::Exact) return std::tanh(x);
  if (a == Approx::Minimax) return approx::tanh_minimax(x);
  return approx::tanh_pade78(x);
}

template <class T>
T unary_of(UnaryKind k, Approx a, T x) {
  switch (k) {
    case UnaryKind::IDENTITY: return x;
    case UnaryKind::ZERO: return T(0);
    case UnaryKind::SQUARE: return x * x;
    case UnaryKind::INC: return x + T(1);
    case UnaryKind::DEC: return x - T(1);
    case UnaryKind::SQRT: return std::sqrt(x);
    case UnaryKind::RECIPROCAL: return T(1) / x;
    case UnaryKind::RSQRT: return T(1) / std::sqrt(x);
    case UnaryKind::EXP: return a == Approx::Exact ? std::exp(x) : approx::exp_taylor(x);
    case UnaryKind::TANH: return tanh_of(x, a);
    case UnaryKind::RELU: return x > T(0) ? x : T(0);
    case UnaryKind::SIGMOID:
      if (a == Approx::Exact) return T(1) / (T(1) + std::exp(-x));
      return (tanh_of(x * T(0.5), a) + T(1)) * T(0.5);
    case UnaryKind::GELU: return a == Approx::Minimax ? approx::gelu_minimax(x) : approx::gelu_exact(x);
    default: fail(Errc::unsupported, "interpreter: unsupported unary kind " + std::string(to_string(k)));
  }
}

template <class T>
T binary_of(BinaryKind k, T x, T y) {
  switch (k) {
    case BinaryKind::ADD: return x + y;
    case BinaryKind::SUB: return x - y;
    case BinaryKind::MUL: return x * y;
    case BinaryKind::DIV: return x / y;
    case BinaryKind::MAX: return x > y ? x : y;
    case BinaryKind::MIN: return x < y ? x : y;
    default: fail(Errc::unsupported, "interpreter: unsupported binary kind " + std::string(to_string(k)));
  }
}

template <class T>
T combine(ReduceOp op, T acc, T x) {
  switch (op) {
    case ReduceOp::Sum: return acc + x;
    case ReduceOp::Mul: return acc * x;
    case ReduceOp::Min: return x < acc ? x : acc;
    case ReduceOp::Max: return x > acc ? x : acc;
  }
  return acc;
}

template <class T>
T reduce_identity(ReduceOp op) {
  switch (op) {
    case ReduceOp::Sum: return T(0);
    case ReduceOp::Mul: return T(1);
    case ReduceOp::Min: return std::numeric_limits<T>::infinity();
    case ReduceOp::Max: return -std::numeric_limits<T>::infinity();
  }
  return T(0);
}

// Broadcast read: unit dims of v repeat.
double at(const TensorView& v, std::int64_t i, std::int64_t j) {
  return load_element(v, v.desc.rows == 1 ? 0 : i, v.desc.cols == 1 ? 0 : j);
}

template <class T>
void node_compute(const eq::NodeOp& op, const std::vector<TensorView>& in, const TensorView& out) {
  const std::int64_t M = out.desc.rows, N = out.desc.cols;
  auto ld = [&](std::size_t k, std::int64_t i, std::int64_t j) { return static_cast<T>(at(in[k], i, j)); };
  if (const auto* u = std::get_if<UnaryKind>(&op.kind)) {
    if (*u == UnaryKind::REDUCE) {
      const ReduceSpec r = op.flags.reduce;
      const TensorView& x = in[0];
      auto val = [&](std::int64_t i, std::int64_t j) {
        const T v = static_cast<T>(load_element(x, i, j));
        return r.squared ? v * v : v;
      };
      const std::int64_t R = x.desc.rows, C = x.desc.cols;
      if (r.axis == ReduceAxis::Rows) {
        for (std::int64_t i = 0; i < R; ++i) {
          T acc = reduce_identity<T>(r.op);
          for (std::int64_t j = 0; j < C; ++j) acc = combine(r.op, acc, val(i, j));
          store_element(out, i, 0, static_cast<double>(acc));
        }
      } else if (r.axis == ReduceAxis::Cols) {
        for (std::int64_t j = 0; j < C; ++j) {
          T acc = reduce_identity<T>(r.op);
          for (std::int64_t i = 0; i < R; ++i) acc = combine(r.op, acc, val(i, j));
          store_element(out, 0, j, static_cast<double>(acc));
        }
      } else {
        T acc = reduce_identity<T>(r.op);
        for (std::int64_t j = 0; j < C; ++j)
          for (std::int64_t i = 0; i < R; ++i) acc = combine(r.op, acc, val(i, j));
        store_element(out, 0, 0, static_cast<double>(acc));
      }
      return;
    }
    if (*u == UnaryKind::TRANSFORM) {
      if (op.flags.transform.kind != TransformKind::Transpose)
        fail(Errc::unsupported, "interpreter: only transpose transforms");
      for (std::int64_t j = 0; j < N; ++j)
        for (std::int64_t i = 0; i < M; ++i) store_element(out, i, j, load_element(in[0], j, i));
      return;
    }
    if (*u == UnaryKind::GATHER && op.flags.index_axis == IndexAxis::Cols) {
      const Companion& c = in[0].secondary;
      for (std::int64_t j = 0; j < N; ++j)
        for (std::int64_t i = 0; i < M; ++i) store_element(out, i, j, load_element(in[0], i, c.index_data()[j]));
      return;
    }
    for (std::int64_t j = 0; j < N; ++j)
      for (std::int64_t i = 0; i < M; ++i)
        store_element(out, i, j, static_cast<double>(unary_of<T>(*u, op.flags.approx, ld(0, i, j))));
    return;
  }
  if (const auto* b = std::get_if<BinaryKind>(&op.kind)) {
    if (*b == BinaryKind::MATMUL) {
      const std::int64_t K = in[0].desc.cols;
      for (std::int64_t j = 0; j < N; ++j)
        for (std::int64_t i = 0; i < M; ++i) {
          T acc = T(0);
          for (std::int64_t k = 0; k < K; ++k)
            acc += static_cast<T>(load_element(in[0], i, k)) * static_cast<T>(load_element(in[1], k, j));
          store_element(out, i, j, static_cast<double>(acc));
        }
      return;
    }
    for (std::int64_t j = 0; j < N; ++j)
      for (std::int64_t i = 0; i < M; ++i)
        store_element(out, i, j, static_cast<double>(binary_of<T>(*b, ld(0, i, j), ld(1, i, j))));
    return;
  }
  const auto t = std::get<TernaryKind>(op.kind);
  if (t != TernaryKind::MULADD && t != TernaryKind::NMULADD)
    fail(Errc::unsupported, "interpreter: unsupported ternary kind");
  for (std::int64_t j = 0; j < N; ++j)
    for (std::int64_t i = 0; i < M; ++i) {
      const T p = ld(0, i, j) * ld(1, i, j);
      const T c = ld(2, i, j);
      store_element(out, i, j, static_cast<double>(t == TernaryKind::MULADD ? c + p : c - p));
    }
}

bool compute_fp64(const eq::NodeOp& op, const std::vector<TensorView>& in, const TensorDesc& out) {
  if (const auto* b = std::get_if<BinaryKind>(&op.kind); b && *b == BinaryKind::MATMUL)
    return in[0].desc.dtype == DType::FP64;
  if (const auto* u = std::get_if<UnaryKind>(&op.kind); u && *u == UnaryKind::REDUCE)
    return in[0].desc.dtype == DType::FP64;
  if (out.dtype == DType::FP64) return true;
  for (const auto& v : in)
    if (v.desc.dtype == DType::FP64) return true;
  return false;
}

}  // namespace

Tensor interpret(const EqTree& t, std::span<const TensorView> args) {
  std::vector<Tensor> vals(t.nodes.size());
  auto view_of = [&](int id) {
    const EqNode& n = t.node(id);
    return n.is_leaf() ? args[static_cast<std::size_t>(n.arg_slot)] : vals[static_cast<std::size_t>(id)].view();
  };
  for (const auto& n : t.nodes) {
    if (n.is_leaf()) continue;
    std::vector<TensorView> in;
    for (int c : n.children) in.push_back(view_of(c));
    Tensor out(n.out);
    if (compute_fp64(*n.op, in, n.out))
      node_compute<double>(*n.op, in, out.view());
    else
      node_compute<float>(*n.op, in, out.view());
    vals[static_cast<std::size_t>(n.id)] = std::move(out);
  }
  return std::move(vals[static_cast<std::size_t>(t.root)]);
}

// ---- random inputs ----

void fill_normal(Rng& rng, const TensorView& v, double mean, double stddev) {
  std::normal_distribution<double> nd(mean, stddev);
  for (std::int64_t j = 0; j < v.desc.phys_cols(); ++j)
    for (std::int64_t i = 0; i < v.desc.phys_rows(); ++i) store_element(v, i, j, nd(rng));
}

std::vector<TensorView> RandomEquation::views() const {
  std::vector<TensorView> v;
  for (const auto& a : args) v.push_back(a.view());
  return v;
}

namespace {

int uniform(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }
bool coin(Rng& rng, double p) { return std::bernoulli_distribution(p)(rng); }

// Splits n into `parts` non-negative integers.
std::vector<int> split(Rng& rng, int n, int parts) {
  std::vector<int> r(static_cast<std::size_t>(parts), 0);
  for (int i = 0; i < n; ++i) ++r[static_cast<std::size_t>(uniform(rng, 0, parts - 1))];
  return r;
}

const UnaryKind kUnary[] = {UnaryKind::IDENTITY, UnaryKind::SQUARE, UnaryKind::INC,     UnaryKind::DEC,
                            UnaryKind::SQRT,     UnaryKind::RECIPROCAL, UnaryKind::RSQRT, UnaryKind::EXP,
                            UnaryKind::TANH,     UnaryKind::RELU,   UnaryKind::SIGMOID, UnaryKind::GELU};
const BinaryKind kBinary[] = {BinaryKind::ADD, BinaryKind::SUB, BinaryKind::MUL,
                              BinaryKind::DIV, BinaryKind::MAX, BinaryKind::MIN};

Approx random_approx(Rng& rng, UnaryKind k) {
  switch (k) {
    case UnaryKind::TANH:
    case UnaryKind::SIGMOID: {
      const Approx a[] = {Approx::Default, Approx::Exact, Approx::Pade, Approx::Minimax};
      return a[uniform(rng, 0, 3)];
    }
    case UnaryKind::GELU: return coin(rng, 0.5) ? Approx::Minimax : Approx::Default;
    case UnaryKind::EXP: return coin(rng, 0.5) ? Approx::Exact : Approx::Default;
    default: return Approx::Default;
  }
}

class Generator {
 public:
  Generator(Rng& rng, const EquationShape& s) : rng_(rng), s_(s) {}

  RandomEquation make() {
    const std::int64_t r = dim(), c = dim();
    const int internal = uniform(rng_, 1, s_.max_internal);
    const int root = gen(internal, r, c, s_.dtype);
    eq::TreeBuilder b(specs_);
    std::vector<int> ids(protos_.size(), -1);
    for (std::size_t p = 0; p < protos_.size(); ++p) {
      const Proto& pr = protos_[p];
      if (pr.slot >= 0) {
        ids[p] = b.leaf(pr.slot);
      } else {
        std::vector<int> ch;
        for (int c2 : pr.children) ch.push_back(ids[static_cast<std::size_t>(c2)]);
        ids[p] = b.op(pr.op, ch);
      }
    }
    RandomEquation e;
    e.tree = b.build(ids[static_cast<std::size_t>(root)]);
    for (const auto& sp : specs_) {
      Tensor t(sp.desc);
      fill_normal(rng_, t.view());
      e.args.push_back(std::move(t));
    }
    return e;
  }

 private:
  struct Proto {
    eq::NodeOp op{};
    std::vector<int> children;
    int slot = -1;
  };

  std::int64_t dim() { return coin(rng_, 0.2) ? 1 : uniform(rng_, 1, static_cast<int>(s_.max_dim)); }

  DType leaf_dtype(DType want) {
    if (s_.mixed_dtypes && coin(rng_, 0.3)) return want == DType::FP32 ? DType::FP64 : DType::FP32;
    return want;
  }

  int leaf(std::int64_t r, std::int64_t c, DType dt) {
    const TensorDesc d = TensorDesc::dense(r, c, dt);
    int slot = -1;
    if (coin(rng_, 0.2))
      for (std::size_t k = 0; k < specs_.size(); ++k)
        if (specs_[k].desc == d) slot = static_cast<int>(k);
    if (slot < 0) {
      slot = static_cast<int>(specs_.size());
      specs_.push_back(InputSpec{d});
    }
    protos_.push_back(Proto{{}, {}, slot});
    return static_cast<int>(protos_.size()) - 1;
  }

  // Elementwise operand that may be broadcast along unit dims.
  int operand(int budget, std::int64_t r, std::int64_t c, DType dt, bool may_broadcast) {
    if (budget == 0 && may_broadcast && s_.allow_broadcast && coin(rng_, 0.4)) {
      switch (uniform(rng_, 0, 2)) {
        case 0: return leaf(1, c, leaf_dtype(dt));
        case 1: return leaf(r, 1, leaf_dtype(dt));
        default: return leaf(1, 1, leaf_dtype(dt));
      }
    }
    return gen(budget, r, c, dt);
  }

  int push(const eq::NodeOp& op, std::vector<int> children) {
    protos_.push_back(Proto{op, std::move(children), -1});
    return static_cast<int>(protos_.size()) - 1;
  }

  int gen(int budget, std::int64_t r, std::int64_t c, DType dt) {
    if (budget == 0) return leaf(r, c, s_.elementwise_only ? leaf_dtype(dt) : dt);
    const int rest = budget - 1;
    std::vector<int> choices = {0, 1, 2};  // unary, binary, ternary elementwise
    if (!s_.elementwise_only) {
      choices.push_back(3);  // transpose
      choices.push_back(4);  // matmul
      if (c == 1 || r == 1) choices.push_back(5);  // reduce
    }
    const int pick = choices[static_cast<std::size_t>(uniform(rng_, 0, static_cast<int>(choices.size()) - 1))];
    eq::NodeOp op;
    switch (pick) {
      case 0: {
        const UnaryKind k = kUnary[uniform(rng_, 0, static_cast<int>(std::size(kUnary)) - 1)];
        op.kind = k;
        op.flags.approx = random_approx(rng_, k);
        const int a = gen(rest, r, c, dt);
        return push(op, {a});
      }
      case 1: {
        op.kind = kBinary[uniform(rng_, 0, static_cast<int>(std::size(kBinary)) - 1)];
        const auto p = split(rng_, rest, 2);
        const int a = gen(p[0], r, c, dt);
        const int b = operand(p[1], r, c, dt, true);
        return push(op, {a, b});
      }
      case 2: {
        op.kind = coin(rng_, 0.5) ? TernaryKind::MULADD : TernaryKind::NMULADD;
        const auto p = split(rng_, rest, 3);
        // The full-shape operand may sit in any position.
        const int full = uniform(rng_, 0, 2);
        std::vector<int> ch;
        for (int k = 0; k < 3; ++k) ch.push_back(operand(p[static_cast<std::size_t>(k)], r, c, dt, k != full));
        return push(op, ch);
      }
      case 3: {
        op.kind = UnaryKind::TRANSFORM;
        op.flags.transform.kind = TransformKind::Transpose;
        const int a = gen(rest, c, r, dt);
        return push(op, {a});
      }
      case 4: {
        op.kind = BinaryKind::MATMUL;
        const std::int64_t k = dim();
        const auto p = split(rng_, rest, 2);
        const int a = gen(p[0], r, k, dt);
        const int b = gen(p[1], k, c, dt);
        return push(op, {a, b});
      }
      default: {
        op.kind = UnaryKind::REDUCE;
        const ReduceOp ops[] = {ReduceOp::Sum, ReduceOp::Sum, ReduceOp::Max, ReduceOp::Min, ReduceOp::Mul};
        op.flags.reduce.op = ops[uniform(rng_, 0, 4)];
        op.flags.reduce.squared = op.flags.reduce.op == ReduceOp::Sum && coin(rng_, 0.3);
        std::int64_t ir = r, ic = c;
        if (r == 1 && c == 1 && coin(rng_, 0.4)) {
          op.flags.reduce.axis = ReduceAxis::All;
          ir = dim();
          ic = dim();
        } else if (c == 1) {
          op.flags.reduce.axis = ReduceAxis::Rows;
          ic = uniform(rng_, 1, static_cast<int>(s_.max_dim));
        } else {
          op.flags.reduce.axis = ReduceAxis::Cols;
          ir = uniform(rng_, 1, static_cast<int>(s_.max_dim));
        }
        const int a = gen(rest, ir, ic, dt);
        return push(op, {a});
      }
    }
  }

  Rng& rng_;
  const EquationShape& s_;
  std::vector<InputSpec> specs_;
  std::vector<Proto> protos_;
};

}  // namespace

RandomEquation random_equation(Rng& rng, const EquationShape& shape) { return Generator(rng, shape).make(); }

eq::EqTree random_tree(Rng& rng, int internal, bool ternary) {
  std::vector<InputSpec> args;
  struct P {
    int arity = 0;
    std::vector<int> children;
  };
  std::vector<P> protos;
  std::function<int(int)> gen = [&](int n) -> int {
    if (n == 0) {
      protos.push_back(P{0, {}});
      return static_cast<int>(protos.size()) - 1;
    }
    const int a = uniform(rng, 1, ternary ? 3 : 2);
    const auto parts = split(rng, n - 1, a);
    std::vector<int> ch;
    for (int p : parts) ch.push_back(gen(p));
    protos.push_back(P{a, ch});
    return static_cast<int>(protos.size()) - 1;
  };
  const int root = gen(internal);
  int leaves = 0;
  for (const auto& p : protos) leaves += p.arity == 0;
  eq::TreeBuilder b(std::vector<InputSpec>(static_cast<std::size_t>(leaves), InputSpec{TensorDesc::dense(2, 2)}));
  std::vector<int> ids(protos.size());
  int slot = 0;
  for (std::size_t i = 0; i < protos.size(); ++i) {
    const P& p = protos[i];
    std::vector<int> ch;
    for (int c : p.children) ch.push_back(ids[static_cast<std::size_t>(c)]);
    switch (p.arity) {
      case 0: ids[i] = b.leaf(slot++); break;
      case 1: ids[i] = b.unary(UnaryKind::TANH, ch[0]); break;
      case 2: ids[i] = b.binary(BinaryKind::ADD, ch[0], ch[1]); break;
      default: ids[i] = b.ternary(TernaryKind::MULADD, ch[0], ch[1], ch[2]); break;
    }
  }
  return b.build(ids[static_cast<std::size_t>(root)]);
}

}  // namespace tpp::verify

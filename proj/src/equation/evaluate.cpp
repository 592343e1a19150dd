#include <omp.h>

#include <algorithm>
#include <cstring>
#include <set>

#include "ops/detail.hpp"
#include "tpp/equation.hpp"
#include "tpp/error.hpp"

namespace tpp::eq {

namespace {

using Buffer = std::vector<double>;  // 8-byte aligned raw storage

Buffer make_buffer(std::size_t bytes) { return Buffer((bytes + 7) / 8 + 1); }

TensorView raw_view(const TensorDesc& d, void* p) { return TensorView{d, p, {}, {}}; }

void poison(Buffer& b) { std::memset(b.data(), 0xFF, b.size() * sizeof(double)); }

// A kernel may read its input at the output location only when it is an
// elementwise map over identically laid out, non-broadcast data.
bool in_place_safe(const NodeOp& op, const TensorView& in, const TensorView& out) {
  if (!detail::ranges_overlap(in, out)) return true;
  return is_elementwise(op.kind) && in.data == out.data && in.desc.bcast == Bcast::None &&
         in.desc.ld == out.desc.ld && in.desc.dtype == out.desc.dtype;
}

void run_node(const NodeOp& op, std::vector<TensorView> in, const TensorView& out) {
  if (is_elementwise(op.kind))
    for (auto& v : in)
      if (v.desc.rows != out.desc.rows || v.desc.cols != out.desc.cols) v = v.broadcast_to(out.desc.rows, out.desc.cols);
  bool safe = true;
  for (const auto& v : in) safe = safe && in_place_safe(op, v, out);
  if (safe) {
    execute(op.kind, op.flags, in, out);
    return;
  }
  Tensor scratch(out.desc.rows, out.desc.cols, out.desc.dtype);
  execute(op.kind, op.flags, in, scratch.view());
  const std::size_t w = byte_width(out.desc.dtype);
  for (std::int64_t j = 0; j < out.desc.cols; ++j)
    std::memcpy(out.bytes() + static_cast<std::size_t>(j * out.desc.ld) * w,
                scratch.raw().data() + static_cast<std::size_t>(j * out.desc.rows) * w, static_cast<std::size_t>(out.desc.rows) * w);
}

void run_step(const PlanStep& s, const std::vector<TensorView>& in, const TensorView& out) {
  if (s.fused_gather) {
    gather_reduce_cols(in[0], out);
    return;
  }
  run_node(s.op, in, out);
}

void check_args(const ExecPlan& plan, std::span<const TensorView> args, const TensorView& out) {
  const EqTree& t = plan.tree;
  if (args.size() < t.args.size())
    fail(Errc::invalid_spec, "equation expects " + std::to_string(t.args.size()) + " arguments, got " +
                                 std::to_string(args.size()));
  for (const auto& n : t.nodes) {
    if (!n.is_leaf()) continue;
    const TensorDesc& got = args[static_cast<std::size_t>(n.arg_slot)].desc;
    if (!got.same_shape(n.out) || got.dtype != n.out.dtype || got.bcast != Bcast::None)
      fail(Errc::shape_mismatch, "argument T" + std::to_string(n.arg_slot) + " does not match its declaration");
    if (args[static_cast<std::size_t>(n.arg_slot)].data == nullptr) fail(Errc::invalid_spec, "null argument buffer");
  }
  const TensorDesc& want = t.node(t.root).out;
  if (!out.desc.same_shape(want) || out.desc.dtype != want.dtype || out.desc.bcast != Bcast::None)
    fail(Errc::shape_mismatch, "output view does not match the equation result");
}

// Runs the elementwise region rooted at `root` tile by tile. `region[id]`
// marks the nodes computed inside; every other child is read through
// `frontier`, a full-size view.
template <class Frontier>
void run_region(const ExecPlan& plan, int root, const std::vector<char>& region, Frontier&& frontier,
                const TensorView& dst, std::int64_t tile_m, std::int64_t tile_n, const EvalOptions& opts) {
  if (tile_m <= 0 || tile_n <= 0) fail(Errc::invalid_spec, "tile extents must be positive");
  const EqTree& t = plan.tree;
  const std::int64_t R = dst.desc.rows, C = dst.desc.cols;
  const std::int64_t tm = (R + tile_m - 1) / tile_m, tn = (C + tile_n - 1) / tile_n;
  std::vector<const PlanStep*> steps;
  for (const auto& s : plan.steps)
    if (region[static_cast<std::size_t>(s.node)]) steps.push_back(&s);
  const std::size_t slot_bytes = static_cast<std::size_t>(tile_m * tile_n) * 8;
  const int threads = opts.threads > 0 ? opts.threads : omp_get_max_threads();
  const std::int64_t ntiles = tm * tn;

  auto region_of = [](const TensorDesc& d, std::int64_t i0, std::int64_t j0, std::int64_t h, std::int64_t w) {
    return std::array<std::int64_t, 4>{d.rows == 1 ? 0 : i0, d.cols == 1 ? 0 : j0, d.rows == 1 ? 1 : h,
                                       d.cols == 1 ? 1 : w};
  };

  std::exception_ptr err;
#pragma omp parallel num_threads(threads) if (ntiles > 1)
  {
    std::vector<Buffer> slots(static_cast<std::size_t>(plan.temp_count));
    for (auto& b : slots) b = make_buffer(slot_bytes);
#pragma omp for schedule(static)
    for (std::int64_t tile = 0; tile < ntiles; ++tile) {
      if (err) continue;
      try {
        const std::int64_t i0 = (tile % tm) * tile_m, j0 = (tile / tm) * tile_n;
        const std::int64_t h = std::min(tile_m, R - i0), w = std::min(tile_n, C - j0);
        auto slot_view = [&](int node) {
          const EqNode& n = t.node(node);
          const auto r = region_of(n.out, i0, j0, h, w);
          TensorDesc d = TensorDesc::dense(r[2], r[3], n.out.dtype);
          return raw_view(d, slots[static_cast<std::size_t>(n.temp_id)].data());
        };
        for (const PlanStep* s : steps) {
          std::vector<TensorView> in;
          for (const auto& b : s->inputs) {
            if (region[static_cast<std::size_t>(b.node)]) {
              in.push_back(slot_view(b.node));
            } else {
              const TensorView full = frontier(b);
              const auto r = region_of(full.desc, i0, j0, h, w);
              in.push_back(full.block(r[0], r[1], r[2], r[3]));
            }
          }
          const TensorView o = s->node == root ? dst.block(i0, j0, h, w) : slot_view(s->node);
          run_step(*s, in, o);
          if (opts.poison_recycled)
            for (int r : s->recycled) poison(slots[static_cast<std::size_t>(r)]);
        }
      } catch (...) {
#pragma omp critical
        if (!err) err = std::current_exception();
      }
    }
  }
  if (err) std::rethrow_exception(err);
}

void eval_buffered(const ExecPlan& plan, std::span<const TensorView> args, const TensorView& out,
                   const EvalOptions& opts) {
  const EqTree& t = plan.tree;
  std::vector<Buffer> slots(static_cast<std::size_t>(plan.temp_count));
  for (auto& b : slots) b = make_buffer(plan.slot_bytes);
  auto temp_view = [&](int node) {
    const EqNode& n = t.node(node);
    return raw_view(n.out, slots[static_cast<std::size_t>(n.temp_id)].data());
  };
  for (const auto& s : plan.steps) {
    if (s.absorbed) continue;
    std::vector<TensorView> in;
    for (const auto& b : s.inputs)
      in.push_back(b.kind == Binding::Kind::Arg ? args[static_cast<std::size_t>(b.index)] : temp_view(b.node));
    const TensorView o = s.output.kind == Binding::Kind::Out ? out : temp_view(s.node);
    run_step(s, in, o);
    if (opts.poison_recycled)
      for (int r : s.recycled) poison(slots[static_cast<std::size_t>(r)]);
  }
}

void eval_hybrid(const ExecPlan& plan, std::int64_t tile_m, std::int64_t tile_n, std::span<const TensorView> args,
                 const TensorView& out, const EvalOptions& opts) {
  const EqTree& t = plan.tree;
  const auto modes = hybrid_assignment(plan);
  std::vector<int> parent(t.nodes.size(), -1);
  for (const auto& n : t.nodes)
    for (int c : n.children) parent[static_cast<std::size_t>(c)] = n.id;
  auto mode = [&](int id) { return modes[static_cast<std::size_t>(id)]; };
  auto region_root = [&](int id) {
    while (parent[static_cast<std::size_t>(id)] >= 0 && mode(parent[static_cast<std::size_t>(id)]) == NodeMode::Fused)
      id = parent[static_cast<std::size_t>(id)];
    return id;
  };

  // Materialized values (buffered nodes and region roots) get buffers from a
  // liveness-managed pool, independent of the plan's fused temp slots.
  std::vector<Buffer> pool;
  std::set<int> free_ids;
  std::vector<int> holder(t.nodes.size(), -1);
  auto acquire = [&](int node) {
    int id;
    if (!free_ids.empty()) {
      id = *free_ids.begin();
      free_ids.erase(free_ids.begin());
    } else {
      id = static_cast<int>(pool.size());
      pool.push_back(make_buffer(plan.slot_bytes));
    }
    holder[static_cast<std::size_t>(node)] = id;
  };
  auto release = [&](int node) {
    const int id = holder[static_cast<std::size_t>(node)];
    if (id < 0) return;
    holder[static_cast<std::size_t>(node)] = -1;
    free_ids.insert(id);
    if (opts.poison_recycled) poison(pool[static_cast<std::size_t>(id)]);
  };
  auto value = [&](const Binding& b) -> TensorView {
    if (b.kind == Binding::Kind::Arg) return args[static_cast<std::size_t>(b.index)];
    const int id = holder[static_cast<std::size_t>(b.node)];
    if (id < 0) fail(Errc::invalid_spec, "hybrid evaluation read an unmaterialized value");
    return raw_view(t.node(b.node).out, pool[static_cast<std::size_t>(id)].data());
  };
  auto dest = [&](int node) {
    if (node == t.root) return out;
    acquire(node);
    return raw_view(t.node(node).out, pool[static_cast<std::size_t>(holder[static_cast<std::size_t>(node)])].data());
  };

  for (const auto& s : plan.steps) {
    if (s.absorbed) continue;
    if (mode(s.node) == NodeMode::Buffered) {
      std::vector<TensorView> in;
      for (const auto& b : s.inputs) in.push_back(value(b));
      run_step(s, in, dest(s.node));
      for (const auto& b : s.inputs)
        if (b.kind == Binding::Kind::Temp) release(b.node);
      continue;
    }
    if (region_root(s.node) != s.node) continue;
    std::vector<char> region(t.nodes.size(), 0);
    for (const auto& n : t.nodes)
      if (mode(n.id) == NodeMode::Fused && region_root(n.id) == s.node) region[static_cast<std::size_t>(n.id)] = 1;
    const TensorView d = dest(s.node);
    run_region(plan, s.node, region, value, d, tile_m, tile_n, opts);
    for (const auto& n : t.nodes) {
      if (!region[static_cast<std::size_t>(n.id)]) continue;
      for (int c : n.children)
        if (!region[static_cast<std::size_t>(c)]) release(c);
    }
  }
}

}  // namespace

void evaluate(const ExecPlan& plan, const EvalStrategy& strategy, std::span<const TensorView> args,
              const TensorView& out, const EvalOptions& opts) {
  if (plan.steps.empty()) fail(Errc::invalid_spec, "empty plan");
  check_args(plan, args, out);
  if (std::holds_alternative<Buffered>(strategy)) return eval_buffered(plan, args, out, opts);
  if (const auto* tf = std::get_if<TileFused>(&strategy)) {
    if (!tile_fusable(plan))
      fail(Errc::strategy_illegal, "tile fusion requires every operation to be elementwise");
    std::vector<char> region(plan.tree.nodes.size(), 0);
    for (const auto& n : plan.tree.nodes) region[static_cast<std::size_t>(n.id)] = !n.is_leaf();
    auto frontier = [&](const Binding& b) { return args[static_cast<std::size_t>(b.index)]; };
    return run_region(plan, plan.tree.root, region, frontier, out, tf->tile_m, tf->tile_n, opts);
  }
  const auto& h = std::get<Hybrid>(strategy);
  eval_hybrid(plan, h.tile_m, h.tile_n, args, out, opts);
}

}  // namespace tpp::eq

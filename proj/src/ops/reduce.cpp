#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "detail.hpp"

namespace tpp {

namespace testing {
void set_reverse_reduce(bool on) { detail::g_reverse_reduce.store(on); }
bool reverse_reduce() { return detail::g_reverse_reduce.load(); }
}  // namespace testing

namespace {

template <class A>
A identity_of(ReduceOp op) {
  switch (op) {
    case ReduceOp::Sum: return A(0);
    case ReduceOp::Mul: return A(1);
    case ReduceOp::Min: return std::numeric_limits<A>::infinity();
    case ReduceOp::Max: return -std::numeric_limits<A>::infinity();
  }
  return A(0);
}

template <class A>
inline A combine(ReduceOp op, A acc, A x) {
  switch (op) {
    case ReduceOp::Sum: return acc + x;
    case ReduceOp::Mul: return acc * x;
    case ReduceOp::Min: return x < acc ? x : acc;
    case ReduceOp::Max: return x > acc ? x : acc;
  }
  return acc;
}

template <class A>
void reduce_impl(const TensorView& in, const ReduceSpec& s, const TensorView& out) {
  const std::int64_t M = in.desc.rows, N = in.desc.cols;
  const bool rev = detail::g_reverse_reduce.load(std::memory_order_relaxed);
  std::vector<A> col(static_cast<std::size_t>(M));
  auto load = [&](std::int64_t j) {
    detail::load_col<A>(in, 0, j, M, col.data());
    if (s.squared)
      for (auto& x : col) x = x * x;
  };
  switch (s.axis) {
    case ReduceAxis::Rows: {
      std::vector<A> acc(static_cast<std::size_t>(M), identity_of<A>(s.op));
      for (std::int64_t jj = 0; jj < N; ++jj) {
        load(rev ? N - 1 - jj : jj);
        for (std::int64_t i = 0; i < M; ++i)
          acc[static_cast<std::size_t>(i)] = combine(s.op, acc[static_cast<std::size_t>(i)], col[static_cast<std::size_t>(i)]);
      }
      detail::store_col<A>(out, 0, 0, M, acc.data());
      return;
    }
    case ReduceAxis::Cols: {
      for (std::int64_t j = 0; j < N; ++j) {
        load(j);
        A acc = identity_of<A>(s.op);
        for (std::int64_t ii = 0; ii < M; ++ii)
          acc = combine(s.op, acc, col[static_cast<std::size_t>(rev ? M - 1 - ii : ii)]);
        detail::store_col<A>(out, 0, j, 1, &acc);
      }
      return;
    }
    case ReduceAxis::All: {
      A acc = identity_of<A>(s.op);
      for (std::int64_t jj = 0; jj < N; ++jj) {
        load(rev ? N - 1 - jj : jj);
        for (std::int64_t ii = 0; ii < M; ++ii)
          acc = combine(s.op, acc, col[static_cast<std::size_t>(rev ? M - 1 - ii : ii)]);
      }
      detail::store_col<A>(out, 0, 0, 1, &acc);
      return;
    }
  }
}

}  // namespace

namespace detail {

void run_reduce(const TensorView& in, const ReduceSpec& spec, const TensorView& out) {
  if (in.desc.dtype == DType::FP64)
    reduce_impl<double>(in, spec, out);
  else
    reduce_impl<float>(in, spec, out);
}

}  // namespace detail

void reduce(const TensorView& in, const ReduceSpec& spec, const TensorView& out) {
  OpFlags f;
  f.reduce = spec;
  apply_unary(UnaryKind::REDUCE, f, in, out);
}

namespace {

void check_indices(const Companion& c, std::int64_t bound, const char* what) {
  if (c.kind != CompanionKind::Indices || c.data == nullptr)
    fail(Errc::missing_companion, std::string(what) + " needs an index companion");
  const std::int64_t* idx = c.index_data();
  for (std::int64_t p = 0; p < c.count; ++p)
    if (idx[p] < 0 || idx[p] >= bound)
      fail(Errc::out_of_bounds, std::string(what) + ": index " + std::to_string(idx[p]) + " outside [0, " +
                                    std::to_string(bound) + ")");
}

template <class A>
void gather_reduce_impl(const TensorView& in, const TensorView& out) {
  const std::int64_t M = in.desc.rows;
  const std::int64_t* idx = in.secondary.index_data();
  std::vector<A> acc(static_cast<std::size_t>(M), A(0));
  std::vector<A> col(static_cast<std::size_t>(M));
  for (std::int64_t p = 0; p < in.secondary.count; ++p) {
    detail::load_col<A>(in, 0, idx[p], M, col.data());
    for (std::int64_t i = 0; i < M; ++i) acc[static_cast<std::size_t>(i)] += col[static_cast<std::size_t>(i)];
  }
  detail::store_col<A>(out, 0, 0, M, acc.data());
}

template <class A>
inline A apply_bin(BinaryKind k, A x, A y) {
  switch (k) {
    case BinaryKind::ADD: return x + y;
    case BinaryKind::SUB: return x - y;
    case BinaryKind::MUL: return x * y;
    case BinaryKind::DIV: return x / y;
    case BinaryKind::MAX: return x > y ? x : y;
    case BinaryKind::MIN: return x < y ? x : y;
    default: return x;
  }
}

template <class A>
void binary_reduce_impl(BinaryKind bk, ReduceOp op, const TensorView& a, const TensorView& b, const TensorView& out) {
  const std::int64_t F = a.desc.rows;
  const std::int64_t* ia = a.secondary.index_data();
  const std::int64_t* ib = b.secondary.index_data();
  std::vector<A> acc(static_cast<std::size_t>(F), identity_of<A>(op));
  std::vector<A> x(static_cast<std::size_t>(F)), y(static_cast<std::size_t>(F));
  for (std::int64_t p = 0; p < a.secondary.count; ++p) {
    detail::load_col<A>(a, 0, ia[p], F, x.data());
    detail::load_col<A>(b, 0, ib[p], F, y.data());
    for (std::int64_t i = 0; i < F; ++i) {
      auto& r = acc[static_cast<std::size_t>(i)];
      r = combine(op, r, apply_bin(bk, x[static_cast<std::size_t>(i)], y[static_cast<std::size_t>(i)]));
    }
  }
  detail::store_col<A>(out, 0, 0, F, acc.data());
}

}  // namespace

void gather_reduce_cols(const TensorView& in, const TensorView& out) {
  if (in.desc.bcast != Bcast::None) fail(Errc::invalid_spec, "gather_reduce input must not be broadcast");
  if (!is_floating(in.desc.dtype)) fail(Errc::dtype_mismatch, "gather_reduce requires floating data");
  check_indices(in.secondary, in.desc.cols, "gather_reduce");
  if (in.secondary.count < 1) fail(Errc::invalid_spec, "gather_reduce needs at least one index");
  const DType acc = in.desc.dtype == DType::FP64 ? DType::FP64 : DType::FP32;
  if (out.desc.rows != in.desc.rows || out.desc.cols != 1 || !is_floating(out.desc.dtype))
    fail(Errc::shape_mismatch, "gather_reduce output must be rows x 1");
  if (acc == DType::FP64)
    gather_reduce_impl<double>(in, out);
  else
    gather_reduce_impl<float>(in, out);
}

void binary_reduce_cols(BinaryKind binary, ReduceOp op, const TensorView& a, const TensorView& b,
                        const TensorView& out) {
  switch (binary) {
    case BinaryKind::ADD: case BinaryKind::SUB: case BinaryKind::MUL: case BinaryKind::DIV:
    case BinaryKind::MAX: case BinaryKind::MIN: break;
    default: fail(Errc::unsupported, "binary_reduce takes an elementwise binary op");
  }
  if (op == ReduceOp::Mul) fail(Errc::unsupported, "binary_reduce reduces with sum, max or min");
  if (a.desc.bcast != Bcast::None || b.desc.bcast != Bcast::None)
    fail(Errc::invalid_spec, "binary_reduce tables must not be broadcast");
  if (a.desc.rows != b.desc.rows) fail(Errc::shape_mismatch, "binary_reduce feature lengths differ");
  if (a.desc.dtype != b.desc.dtype || !is_floating(a.desc.dtype))
    fail(Errc::dtype_mismatch, "binary_reduce tables must share a floating dtype");
  check_indices(a.secondary, a.desc.cols, "binary_reduce");
  check_indices(b.secondary, b.desc.cols, "binary_reduce");
  if (a.secondary.count != b.secondary.count) fail(Errc::shape_mismatch, "binary_reduce index lists differ in length");
  if (out.desc.rows != a.desc.rows || out.desc.cols != 1) fail(Errc::shape_mismatch, "binary_reduce output is F x 1");
  if (a.desc.dtype == DType::FP64)
    binary_reduce_impl<double>(binary, op, a, b, out);
  else
    binary_reduce_impl<float>(binary, op, a, b, out);
}

}  // namespace tpp

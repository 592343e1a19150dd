#include <cstring>
#include <string>
#include <vector>

#include "detail.hpp"

namespace tpp {

namespace {

using detail::copy_elem;

void zero_fill(const TensorView& out) {
  const std::size_t w = byte_width(out.desc.dtype);
  for (std::int64_t j = 0; j < out.desc.cols; ++j)
    std::memset(out.bytes() + static_cast<std::size_t>(j * out.desc.ld) * w, 0,
                static_cast<std::size_t>(out.desc.rows) * w);
}

void transpose(const TensorView& in, const TensorView& out) {
  constexpr std::int64_t B = 32;
  const std::int64_t M = in.desc.rows, N = in.desc.cols;
  for (std::int64_t jb = 0; jb < N; jb += B)
    for (std::int64_t ib = 0; ib < M; ib += B)
      for (std::int64_t j = jb; j < std::min(N, jb + B); ++j)
        for (std::int64_t i = ib; i < std::min(M, ib + B); ++i) copy_elem(in, i, j, out, j, i);
}

void vnni(const TensorView& in, int alpha, const TensorView& out) {
  zero_fill(out);
  const std::int64_t R = in.desc.rows, C = in.desc.cols;
  for (std::int64_t c = 0; c < C; ++c)
    for (std::int64_t r = 0; r < R; ++r) copy_elem(in, r, c, out, r * alpha + c % alpha, c / alpha);
}

void vnni_to_vnnit(const TensorView& in, const TransformSpec& t, const TensorView& out) {
  zero_fill(out);
  const int a1 = t.alpha1, a0 = t.alpha0;
  const std::int64_t R = in.desc.rows / a1, C = t.logical_cols;
  for (std::int64_t c = 0; c < C; ++c)
    for (std::int64_t r = 0; r < R; ++r)
      copy_elem(in, r * a1 + c % a1, c / a1, out, c * a0 + r % a0, r / a0);
}

void check_index_list(const Companion& c, std::int64_t bound, const char* what) {
  if (c.kind != CompanionKind::Indices || c.data == nullptr)
    fail(Errc::missing_companion, std::string(what) + " needs an index companion");
  for (std::int64_t p = 0; p < c.count; ++p) {
    const std::int64_t v = c.index_data()[p];
    if (v < 0 || v >= bound)
      fail(Errc::out_of_bounds, std::string(what) + ": index " + std::to_string(v) + " outside [0, " +
                                    std::to_string(bound) + ")");
  }
}

void check_pairs(const std::int64_t* pairs, std::int64_t k, std::int64_t rows, std::int64_t cols, const char* what) {
  for (std::int64_t p = 0; p < k; ++p) {
    const std::int64_t r = pairs[2 * p], c = pairs[2 * p + 1];
    if (r < 0 || r >= rows || c < 0 || c >= cols)
      fail(Errc::out_of_bounds, std::string(what) + ": offset (" + std::to_string(r) + ", " + std::to_string(c) +
                                    ") outside " + std::to_string(rows) + "x" + std::to_string(cols));
  }
}

// dense (i, j) of an R x C side <-> linear p = i + j*R
void gather2d(const TensorView& in, const std::int64_t* pairs, std::int64_t k, const TensorView& out) {
  check_pairs(pairs, k, in.desc.rows, in.desc.cols, "gather2d");
  const std::int64_t R = out.desc.rows;
  for (std::int64_t p = 0; p < k; ++p) copy_elem(in, pairs[2 * p], pairs[2 * p + 1], out, p % R, p / R);
}

void scatter2d(const TensorView& in, const std::int64_t* pairs, std::int64_t k, const TensorView& out) {
  check_pairs(pairs, k, out.desc.rows, out.desc.cols, "scatter2d");
  const std::int64_t R = in.desc.rows;
  for (std::int64_t p = 0; p < k; ++p) copy_elem(in, p % R, p / R, out, pairs[2 * p], pairs[2 * p + 1]);
}

std::vector<std::int64_t> strided_pairs(const StridedSpec& s, std::int64_t rows, std::int64_t cols) {
  std::vector<std::int64_t> pairs(static_cast<std::size_t>(2 * rows * cols));
  for (std::int64_t j = 0; j < cols; ++j)
    for (std::int64_t i = 0; i < rows; ++i) {
      const std::size_t p = static_cast<std::size_t>(i + j * rows);
      pairs[2 * p] = s.row0 + i * s.row_stride;
      pairs[2 * p + 1] = s.col0 + j * s.col_stride;
    }
  return pairs;
}

}  // namespace

namespace detail {

void run_movement(UnaryKind kind, const OpFlags& f, const TensorView& in, const TensorView& out) {
  if (detail::ranges_overlap(in, out) && kind != UnaryKind::REPLICATE_COLS)
    fail(Errc::aliasing, std::string(to_string(kind)) + " cannot run in place");
  switch (kind) {
    case UnaryKind::TRANSFORM:
      switch (f.transform.kind) {
        case TransformKind::Transpose: return transpose(in, out);
        case TransformKind::Vnni: return vnni(in, f.transform.alpha0, out);
        case TransformKind::VnniToVnniT: return vnni_to_vnnit(in, f.transform, out);
      }
      return;
    case UnaryKind::REPLICATE_COLS:
      for (std::int64_t j = 0; j < out.desc.cols; ++j)
        for (std::int64_t i = 0; i < out.desc.rows; ++i) copy_elem(in, i, 0, out, i, j);
      return;
    case UnaryKind::GATHER: {
      const bool rows = f.index_axis == IndexAxis::Rows;
      check_index_list(in.secondary, rows ? in.desc.rows : in.desc.cols, "gather");
      const std::int64_t* idx = in.secondary.index_data();
      for (std::int64_t j = 0; j < out.desc.cols; ++j)
        for (std::int64_t i = 0; i < out.desc.rows; ++i)
          rows ? copy_elem(in, idx[i], j, out, i, j) : copy_elem(in, i, idx[j], out, i, j);
      return;
    }
    case UnaryKind::SCATTER: {
      const bool rows = f.index_axis == IndexAxis::Rows;
      check_index_list(in.secondary, rows ? out.desc.rows : out.desc.cols, "scatter");
      const std::int64_t* idx = in.secondary.index_data();
      // Ascending source order: with duplicate indices the last writer wins.
      if (rows) {
        for (std::int64_t p = 0; p < in.desc.rows; ++p)
          for (std::int64_t j = 0; j < in.desc.cols; ++j) copy_elem(in, p, j, out, idx[p], j);
      } else {
        for (std::int64_t p = 0; p < in.desc.cols; ++p)
          for (std::int64_t i = 0; i < in.desc.rows; ++i) copy_elem(in, i, p, out, i, idx[p]);
      }
      return;
    }
    case UnaryKind::GATHER2D:
      return gather2d(in, in.secondary.index_data(), in.secondary.count, out);
    case UnaryKind::SCATTER2D:
      return scatter2d(in, in.secondary.index_data(), in.secondary.count, out);
    case UnaryKind::STRIDED_LOAD: {
      const auto pairs = strided_pairs(f.strided, out.desc.rows, out.desc.cols);
      return gather2d(in, pairs.data(), out.desc.rows * out.desc.cols, out);
    }
    case UnaryKind::STRIDED_STORE: {
      const auto pairs = strided_pairs(f.strided, in.desc.rows, in.desc.cols);
      return scatter2d(in, pairs.data(), in.desc.rows * in.desc.cols, out);
    }
    default: fail(Errc::invalid_spec, "not a data-movement kind");
  }
}

bool ranges_overlap(const TensorView& a, const TensorView& b) {
  if (a.data == nullptr || b.data == nullptr || a.desc.dtype == DType::BIT || b.desc.dtype == DType::BIT) return false;
  const auto* a0 = a.bytes();
  const auto* a1 = a0 + a.desc.bytes();
  const auto* b0 = b.bytes();
  const auto* b1 = b0 + b.desc.bytes();
  return a0 < b1 && b0 < a1;
}

}  // namespace detail

void transform(const TensorView& in, const TransformSpec& spec, const TensorView& out) {
  OpFlags f;
  f.transform = spec;
  apply_unary(UnaryKind::TRANSFORM, f, in, out);
}

void replicate_cols(const TensorView& in, std::int64_t times, const TensorView& out) {
  OpFlags f;
  f.out_cols = times;
  apply_unary(UnaryKind::REPLICATE_COLS, f, in, out);
}

void gather_scatter(const TensorView& in, GatherMode mode, const TensorView& out) {
  OpFlags f;
  switch (mode) {
    case GatherMode::GatherRows:
      f.index_axis = IndexAxis::Rows;
      return apply_unary(UnaryKind::GATHER, f, in, out);
    case GatherMode::GatherCols:
      f.index_axis = IndexAxis::Cols;
      return apply_unary(UnaryKind::GATHER, f, in, out);
    case GatherMode::ScatterRows:
      f.index_axis = IndexAxis::Rows;
      f.out_rows = out.desc.rows;
      return apply_unary(UnaryKind::SCATTER, f, in, out);
    case GatherMode::ScatterCols:
      f.index_axis = IndexAxis::Cols;
      f.out_cols = out.desc.cols;
      return apply_unary(UnaryKind::SCATTER, f, in, out);
    case GatherMode::Gather2D:
      f.out_rows = out.desc.rows;
      f.out_cols = out.desc.cols;
      return apply_unary(UnaryKind::GATHER2D, f, in, out);
    case GatherMode::Scatter2D:
      f.out_rows = out.desc.rows;
      f.out_cols = out.desc.cols;
      return apply_unary(UnaryKind::SCATTER2D, f, in, out);
  }
}

void shuffle_network_transpose(const std::uint32_t* in, std::uint32_t* out, int n,
                               std::vector<std::vector<std::uint32_t>>* trace) {
  if (n != 4 && n != 8 && n != 16) fail(Errc::invalid_spec, "shuffle transpose supports 4x4, 8x8 and 16x16 tiles");
  const auto N = static_cast<std::size_t>(n);
  // Register r holds column r of the column-major tile.
  std::vector<std::uint32_t> cur(in, in + N * N), nxt(N * N);
  int stages = 0;
  while ((1 << stages) < n) ++stages;
  for (int s = 0; s < stages; ++s) {
    const std::size_t w = std::size_t{1} << s;  // interleave width
    const std::size_t d = std::size_t{1} << s;  // partner distance
    std::size_t p = 0;
    for (std::size_t a = 0; a < N; ++a) {
      if (a & d) continue;
      const std::uint32_t* ra = &cur[a * N];
      const std::uint32_t* rb = &cur[(a + d) * N];
      std::uint32_t* lo = &nxt[(2 * p) * N];
      std::uint32_t* hi = &nxt[(2 * p + 1) * N];
      for (std::size_t g = 0; g < N / (2 * w); ++g)
        for (std::size_t e = 0; e < w; ++e) {
          lo[2 * g * w + e] = ra[g * w + e];
          lo[2 * g * w + w + e] = rb[g * w + e];
          hi[2 * g * w + e] = ra[N / 2 + g * w + e];
          hi[2 * g * w + w + e] = rb[N / 2 + g * w + e];
        }
      ++p;
    }
    cur.swap(nxt);
    if (trace) trace->push_back(cur);
  }
  std::memcpy(out, cur.data(), N * N * sizeof(std::uint32_t));
}

}  // namespace tpp

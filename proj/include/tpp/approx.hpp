#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

namespace tpp::approx {

// Rational tanh: odd numerator of degree 7 over even denominator of degree 8.
struct PadeRational {
  std::array<double, 8> p{};  // p[k] multiplies x^k
  std::array<double, 9> q{};  // q[k] multiplies x^k
  double clamp = 5.0;         // |x| > clamp saturates to +-1
  std::array<float, 8> pf{};
  std::array<float, 9> qf{};
};

// Taylor coefficients t[0..n) of tanh, from t' = 1 - t^2.
std::vector<long double> tanh_taylor(int n);

// Pade [L/M] from Taylor coefficients c[0..L+M]; q[0] normalized to 1.
void pade_from_taylor(std::span<const long double> c, int L, int M, std::vector<long double>& p,
                      std::vector<long double>& q);

const PadeRational& tanh_pade78_coeffs();

struct MinimaxTable {
  std::string function;   // "tanh" or "erf"
  double range = 0.0;     // |x| >= range saturates to sign(x) * saturation
  double saturation = 1.0;
  int top_code = 0;       // 2*exponent + msb of the last interval
  std::array<std::array<double, 4>, 16> c{};
  std::array<std::array<float, 4>, 16> cf{};
  std::array<double, 16> lo{};  // interval bounds in |x|
  std::array<double, 16> hi{};
  double max_abs_error = 0.0;   // measured after fitting
};

const MinimaxTable& tanh_minimax_table();
const MinimaxTable& erf_minimax_table();

// 2^y ~ 1 + c1 y + c2 y^2 + c3 y^3 on |y| <= 0.5; c0 stays exactly 1.
struct ExpDecomposition {
  double log2e = 1.4426950408889634;
  std::array<double, 4> c{};
  std::array<float, 4> cf{};
  double max_rel_error = 0.0;  // of the cubic for 2^y, measured after fitting
};

const ExpDecomposition& exp_decomposition();
// Plain truncated Taylor cubic of 2^y, kept for reporting.
std::array<double, 4> exp_taylor_cubic() noexcept;

// All coefficient tables as a JSON document (schema in docs/approx_tables.md).
std::string tables_json(int indent = 2);

// Minimax polynomial fit of `degree` on [a, b] against f with weight w via
// Lawson's iteratively reweighted least squares. If fix_c0 is set, the
// constant term is pinned to c0_value.
struct FitResult {
  std::vector<double> coeffs;  // monomial in x
  double max_weighted_error = 0.0;
};
template <class F, class W>
FitResult lawson_fit(F&& f, W&& w, double a, double b, int degree, bool fix_c0 = false, double c0_value = 0.0,
                     int grid = 801, int iterations = 400);

// ---- evaluation ----

template <class T>
inline T tanh_pade78(T x) {
  const auto& pr = tanh_pade78_coeffs();
  const T ax = std::fabs(x);
  if (!(ax <= static_cast<T>(pr.clamp))) {
    if (std::isnan(x)) return x;
    return std::copysign(T(1), x);
  }
  const T x2 = ax * ax;
  T num, den;
  if constexpr (std::is_same_v<T, float>) {
    num = ax * (pr.pf[1] + x2 * (pr.pf[3] + x2 * (pr.pf[5] + x2 * pr.pf[7])));
    den = pr.qf[0] + x2 * (pr.qf[2] + x2 * (pr.qf[4] + x2 * (pr.qf[6] + x2 * pr.qf[8])));
  } else {
    num = ax * (pr.p[1] + x2 * (pr.p[3] + x2 * (pr.p[5] + x2 * pr.p[7])));
    den = pr.q[0] + x2 * (pr.q[2] + x2 * (pr.q[4] + x2 * (pr.q[6] + x2 * pr.q[8])));
  }
  const T r = num * (T(1) / den);
  return std::copysign(r, x);
}

// Interval code 2*e + msb of a non-negative value (e unbiased exponent,
// msb the leading stored mantissa bit); zero and subnormals give the minimum.
inline int magnitude_code(float ax) noexcept {
  const std::uint32_t b = std::bit_cast<std::uint32_t>(ax);
  const int e = static_cast<int>((b >> 23) & 0xFF) - 127;
  const int msb = static_cast<int>((b >> 22) & 1u);
  return 2 * e + msb;
}
inline int magnitude_code(double ax) noexcept {
  const std::uint64_t b = std::bit_cast<std::uint64_t>(ax);
  const int e = static_cast<int>((b >> 52) & 0x7FF) - 1023;
  const int msb = static_cast<int>((b >> 51) & 1u);
  return 2 * e + msb;
}

template <class T>
inline int minimax_index(const MinimaxTable& t, T ax) noexcept {
  const int idx = magnitude_code(ax) - (t.top_code - 15);
  return idx < 0 ? 0 : (idx > 15 ? 15 : idx);
}

template <class T>
inline T minimax_eval(const MinimaxTable& t, T x) {
  const T ax = std::fabs(x);
  if (std::isnan(x)) return x;
  if (ax >= static_cast<T>(t.range)) return std::copysign(static_cast<T>(t.saturation), x);
  const int i = minimax_index(t, ax);
  T r;
  if constexpr (std::is_same_v<T, float>) {
    const auto& c = t.cf[i];
    r = c[0] + ax * (c[1] + ax * (c[2] + ax * c[3]));
  } else {
    const auto& c = t.c[i];
    r = c[0] + ax * (c[1] + ax * (c[2] + ax * c[3]));
  }
  return std::copysign(r, x);
}

template <class T>
inline T pow2i(int n) noexcept {
  if constexpr (std::is_same_v<T, float>) {
    return std::bit_cast<float>(static_cast<std::uint32_t>(n + 127) << 23);
  } else {
    return std::bit_cast<double>(static_cast<std::uint64_t>(n + 1023) << 52);
  }
}

template <class T>
inline T exp_taylor(T x) {
  if (std::isnan(x)) return x;
  if (x > T(88)) return std::numeric_limits<T>::infinity();
  if (x < T(-87)) return T(0);
  const auto& d = exp_decomposition();
  T t, c1, c2, c3;
  if constexpr (std::is_same_v<T, float>) {
    t = x * static_cast<float>(d.log2e);
    c1 = d.cf[1], c2 = d.cf[2], c3 = d.cf[3];
  } else {
    t = x * d.log2e;
    c1 = d.c[1], c2 = d.c[2], c3 = d.c[3];
  }
  const T n = std::nearbyint(t);
  const T y = t - n;
  const T p = T(1) + y * (c1 + y * (c2 + y * c3));
  return p * pow2i<T>(static_cast<int>(n));
}

template <class T>
inline T tanh_minimax(T x) {
  return minimax_eval(tanh_minimax_table(), x);
}

template <class T>
inline T sigmoid_from_tanh(T t) {
  return (t + T(1)) * T(0.5);
}

template <class T>
inline T gelu_exact(T x) {
  return T(0.5) * x * (T(1) + std::erf(x * static_cast<T>(0.70710678118654752440)));
}

template <class T>
inline T gelu_minimax(T x) {
  return T(0.5) * x * (T(1) + minimax_eval(erf_minimax_table(), x * static_cast<T>(0.70710678118654752440)));
}

// dGELU/dx = Phi(x) + x * phi(x)
template <class T>
inline T gelu_grad(T x) {
  const T cdf = T(0.5) * (T(1) + std::erf(x * static_cast<T>(0.70710678118654752440)));
  const T pdf = std::exp(T(-0.5) * x * x) * static_cast<T>(0.39894228040143267794);
  return cdf + x * pdf;
}

// ---- Lawson fit (template body) ----

namespace detail {
bool solve_dense(std::vector<long double>& a, std::vector<long double>& b, int n);
}

template <class F, class W>
FitResult lawson_fit(F&& f, W&& w, double a, double b, int degree, bool fix_c0, double c0_value, int grid,
                     int iterations) {
  // Work in t = (x - mid) / half on [-1, 1] for conditioning, then expand.
  const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
  const int n = degree + 1;
  std::vector<double> xs(static_cast<std::size_t>(grid));
  for (int i = 0; i < grid; ++i) {
    const double th = std::numbers::pi * (grid - 1 - i) / (grid - 1);
    xs[static_cast<std::size_t>(i)] = mid + half * std::cos(th);
  }
  std::vector<double> fx(xs.size()), wx(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    fx[i] = f(xs[i]);
    wx[i] = w(xs[i]);
  }
  // With c0 pinned in x, subtract it and fit sum_{k>=1} c_k x^k directly in x.
  const bool local = !fix_c0;
  const int k0 = fix_c0 ? 1 : 0;
  const int m = n - k0;
  std::vector<long double> phi(xs.size() * static_cast<std::size_t>(m));
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const long double t = local ? (xs[i] - mid) / half : xs[i];
    long double pw = k0 ? t : 1.0L;
    for (int k = 0; k < m; ++k, pw *= t) phi[i * static_cast<std::size_t>(m) + static_cast<std::size_t>(k)] = pw;
  }
  std::vector<double> u(xs.size(), 1.0 / static_cast<double>(xs.size()));
  std::vector<long double> sol(static_cast<std::size_t>(m), 0.0L);
  auto eval_at = [&](std::size_t i) {
    long double s = fix_c0 ? c0_value : 0.0L;
    for (int k = 0; k < m; ++k)
      s += sol[static_cast<std::size_t>(k)] * phi[i * static_cast<std::size_t>(m) + static_cast<std::size_t>(k)];
    return static_cast<double>(s);
  };
  std::vector<double> e(xs.size());
  for (int it = 0; it < iterations; ++it) {
    std::vector<long double> ata(static_cast<std::size_t>(m * m), 0.0L), atb(static_cast<std::size_t>(m), 0.0L);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const long double wi = static_cast<long double>(u[i]) * wx[i] * wx[i];
      const long double target = fx[i] - (fix_c0 ? c0_value : 0.0);
      const long double* row = &phi[i * static_cast<std::size_t>(m)];
      for (int r = 0; r < m; ++r) {
        atb[static_cast<std::size_t>(r)] += wi * row[r] * target;
        for (int c = 0; c < m; ++c) ata[static_cast<std::size_t>(r * m + c)] += wi * row[r] * row[c];
      }
    }
    if (!detail::solve_dense(ata, atb, m)) break;
    sol = atb;
    double total = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      e[i] = std::fabs(wx[i] * (fx[i] - eval_at(i)));
      total += u[i] * e[i];
    }
    if (total <= 0.0) break;
    for (std::size_t i = 0; i < xs.size(); ++i) u[i] = u[i] * e[i] / total;
  }
  // Expand to monomials in x.
  std::vector<long double> mono(static_cast<std::size_t>(n), 0.0L);
  if (local) {
    // sum_k s_k ((x - mid)/half)^k
    for (int k = 0; k < n; ++k) {
      const long double sk = sol[static_cast<std::size_t>(k)] / std::pow(static_cast<long double>(half), k);
      long double binom = 1.0L;
      for (int j = 0; j <= k; ++j) {
        // coefficient of x^j in (x - mid)^k
        mono[static_cast<std::size_t>(j)] +=
            sk * binom * std::pow(static_cast<long double>(-mid), k - j);
        binom = binom * (k - j) / (j + 1);
      }
    }
  } else {
    mono[0] = c0_value;
    for (int k = 1; k < n; ++k) mono[static_cast<std::size_t>(k)] = sol[static_cast<std::size_t>(k - 1)];
  }
  FitResult out;
  out.coeffs.assign(mono.begin(), mono.end());
  double worst = 0.0;
  for (int i = 0; i <= 20000; ++i) {
    const double x = a + (b - a) * i / 20000.0;
    long double s = 0.0L;
    for (int k = n - 1; k >= 0; --k) s = s * x + mono[static_cast<std::size_t>(k)];
    worst = std::max(worst, std::fabs(w(x) * (f(x) - static_cast<double>(s))));
  }
  out.max_weighted_error = worst;
  return out;
}

}  // namespace tpp::approx

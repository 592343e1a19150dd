#include "tpp/approx.hpp"

#include <boost/multiprecision/cpp_int.hpp>
#include <json.hpp>

#include <cmath>
#include <stdexcept>
#include <utility>

namespace tpp::approx {

namespace detail {

bool solve_dense(std::vector<long double>& a, std::vector<long double>& b, int n) {
  const auto N = static_cast<std::size_t>(n);
  for (std::size_t col = 0; col < N; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < N; ++r)
      if (std::fabs(a[r * N + col]) > std::fabs(a[piv * N + col])) piv = r;
    if (a[piv * N + col] == 0.0L) return false;
    if (piv != col) {
      for (std::size_t c = 0; c < N; ++c) std::swap(a[col * N + c], a[piv * N + c]);
      std::swap(b[col], b[piv]);
    }
    for (std::size_t r = col + 1; r < N; ++r) {
      const long double f = a[r * N + col] / a[col * N + col];
      if (f == 0.0L) continue;
      for (std::size_t c = col; c < N; ++c) a[r * N + c] -= f * a[col * N + c];
      b[r] -= f * b[col];
    }
  }
  for (std::size_t i = N; i-- > 0;) {
    long double s = b[i];
    for (std::size_t c = i + 1; c < N; ++c) s -= a[i * N + c] * b[c];
    b[i] = s / a[i * N + i];
  }
  return true;
}

}  // namespace detail

std::vector<long double> tanh_taylor(int n) {
  std::vector<long double> a(static_cast<std::size_t>(std::max(n, 2)), 0.0L);
  a[1] = 1.0L;
  // (k+1) a_{k+1} = [k == 0] - sum_{i+j=k} a_i a_j
  for (int k = 1; k + 1 < n; ++k) {
    long double s = 0.0L;
    for (int i = 0; i <= k; ++i) s += a[static_cast<std::size_t>(i)] * a[static_cast<std::size_t>(k - i)];
    a[static_cast<std::size_t>(k + 1)] = -s / (k + 1);
  }
  a.resize(static_cast<std::size_t>(n));
  return a;
}

void pade_from_taylor(std::span<const long double> c, int L, int M, std::vector<long double>& p,
                      std::vector<long double>& q) {
  auto coef = [&](int k) { return k < 0 ? 0.0L : c[static_cast<std::size_t>(k)]; };
  // sum_{j=1..M} q_j c_{k-j} = -c_k for k = L+1 .. L+M
  std::vector<long double> a(static_cast<std::size_t>(M * M)), b(static_cast<std::size_t>(M));
  for (int r = 0; r < M; ++r) {
    const int k = L + 1 + r;
    for (int j = 1; j <= M; ++j) a[static_cast<std::size_t>(r * M + j - 1)] = coef(k - j);
    b[static_cast<std::size_t>(r)] = -coef(k);
  }
  q.assign(static_cast<std::size_t>(M + 1), 0.0L);
  q[0] = 1.0L;
  if (M > 0) {
    if (!detail::solve_dense(a, b, M)) throw std::runtime_error("singular Pade system");
    for (int j = 1; j <= M; ++j) q[static_cast<std::size_t>(j)] = b[static_cast<std::size_t>(j - 1)];
  }
  p.assign(static_cast<std::size_t>(L + 1), 0.0L);
  for (int k = 0; k <= L; ++k) {
    long double s = 0.0L;
    for (int j = 0; j <= std::min(k, M); ++j) s += q[static_cast<std::size_t>(j)] * coef(k - j);
    p[static_cast<std::size_t>(k)] = s;
  }
}

namespace {

using Rational = boost::multiprecision::cpp_rational;

// Exact tanh Taylor coefficients and [L/M] Pade solve over the rationals.
void tanh_pade_exact(int L, int M, std::vector<Rational>& p, std::vector<Rational>& q) {
  const int n = L + M + 1;
  std::vector<Rational> c(static_cast<std::size_t>(n), Rational(0));
  c[1] = 1;
  for (int k = 1; k + 1 < n; ++k) {
    Rational s = 0;
    for (int i = 0; i <= k; ++i) s += c[static_cast<std::size_t>(i)] * c[static_cast<std::size_t>(k - i)];
    c[static_cast<std::size_t>(k + 1)] = -s / (k + 1);
  }
  auto coef = [&](int k) { return k < 0 ? Rational(0) : c[static_cast<std::size_t>(k)]; };
  const auto N = static_cast<std::size_t>(M);
  std::vector<Rational> a(N * N), b(N);
  for (int r = 0; r < M; ++r) {
    const int k = L + 1 + r;
    for (int j = 1; j <= M; ++j) a[static_cast<std::size_t>(r * M + j - 1)] = coef(k - j);
    b[static_cast<std::size_t>(r)] = -coef(k);
  }
  for (std::size_t col = 0; col < N; ++col) {
    std::size_t piv = col;
    while (piv < N && a[piv * N + col] == 0) ++piv;
    if (piv == N) throw std::runtime_error("singular Pade system");
    if (piv != col) {
      for (std::size_t cc = 0; cc < N; ++cc) std::swap(a[col * N + cc], a[piv * N + cc]);
      std::swap(b[col], b[piv]);
    }
    for (std::size_t r = col + 1; r < N; ++r) {
      if (a[r * N + col] == 0) continue;
      const Rational f = a[r * N + col] / a[col * N + col];
      for (std::size_t cc = col; cc < N; ++cc) a[r * N + cc] -= f * a[col * N + cc];
      b[r] -= f * b[col];
    }
  }
  for (std::size_t i = N; i-- > 0;) {
    Rational s = b[i];
    for (std::size_t cc = i + 1; cc < N; ++cc) s -= a[i * N + cc] * b[cc];
    b[i] = s / a[i * N + i];
  }
  q.assign(N + 1, Rational(0));
  q[0] = 1;
  for (std::size_t j = 1; j <= N; ++j) q[j] = b[j - 1];
  p.assign(static_cast<std::size_t>(L + 1), Rational(0));
  for (int k = 0; k <= L; ++k)
    for (int j = 0; j <= std::min(k, M); ++j)
      p[static_cast<std::size_t>(k)] += q[static_cast<std::size_t>(j)] * coef(k - j);
}

}  // namespace

const PadeRational& tanh_pade78_coeffs() {
  static const PadeRational r = [] {
    std::vector<Rational> p, q;
    tanh_pade_exact(7, 8, p, q);
    PadeRational out;
    for (std::size_t k = 0; k < 8; ++k) out.p[k] = p[k].convert_to<double>();
    for (std::size_t k = 0; k < 9; ++k) out.q[k] = q[k].convert_to<double>();
    for (std::size_t k = 0; k < 8; ++k) out.pf[k] = p[k].convert_to<float>();
    for (std::size_t k = 0; k < 9; ++k) out.qf[k] = q[k].convert_to<float>();
    return out;
  }();
  return r;
}

namespace {

double code_lo(int code) {
  const int e = code >> 1, msb = code & 1;
  return std::ldexp(1.0 + 0.5 * msb, e);
}

template <class F>
MinimaxTable fit_table(std::string name, F f, double range, int top_code) {
  MinimaxTable t;
  t.function = std::move(name);
  t.range = range;
  t.saturation = 1.0;
  t.top_code = top_code;
  const int first = top_code - 15;
  for (int i = 0; i < 16; ++i) {
    const auto u = static_cast<std::size_t>(i);
    t.lo[u] = i == 0 ? 0.0 : code_lo(first + i);
    t.hi[u] = i == 15 ? range : code_lo(first + i + 1);
    const auto fit = lawson_fit(f, [](double) { return 1.0; }, t.lo[u], t.hi[u], 3, false, 0.0, 401, 200);
    for (std::size_t k = 0; k < 4; ++k) {
      t.c[u][k] = fit.coeffs[k];
      t.cf[u][k] = static_cast<float>(fit.coeffs[k]);
    }
  }
  double worst = 0.0;
  for (int i = 0; i <= 200000; ++i) {
    const double x = range * i / 200000.0;
    worst = std::max(worst, std::fabs(minimax_eval(t, x) - f(x)));
  }
  t.max_abs_error = worst;
  return t;
}

}  // namespace

const MinimaxTable& tanh_minimax_table() {
  static const MinimaxTable t = fit_table("tanh", [](double x) { return std::tanh(x); }, 4.0, 3);
  return t;
}

const MinimaxTable& erf_minimax_table() {
  static const MinimaxTable t = fit_table("erf", [](double x) { return std::erf(x); }, 6.0, 4);
  return t;
}

const ExpDecomposition& exp_decomposition() {
  static const ExpDecomposition d = [] {
    ExpDecomposition out;
    const auto fit = lawson_fit([](double y) { return std::exp2(y); }, [](double y) { return 1.0 / std::exp2(y); },
                                -0.5, 0.5, 3, true, 1.0);
    for (std::size_t k = 0; k < 4; ++k) {
      out.c[k] = fit.coeffs[k];
      out.cf[k] = static_cast<float>(fit.coeffs[k]);
    }
    out.max_rel_error = fit.max_weighted_error;
    return out;
  }();
  return d;
}

std::array<double, 4> exp_taylor_cubic() noexcept {
  const double l = std::numbers::ln2;
  return {1.0, l, l * l / 2.0, l * l * l / 6.0};
}

std::string tables_json(int indent) {
  using nlohmann::json;
  const auto& pr = tanh_pade78_coeffs();
  json j;
  j["pade_tanh"] = {{"numerator", pr.p}, {"denominator", pr.q}, {"clamp", pr.clamp}};
  auto table = [](const MinimaxTable& t) {
    json iv = json::array();
    for (std::size_t i = 0; i < 16; ++i) iv.push_back({{"lo", t.lo[i]}, {"hi", t.hi[i]}, {"coeffs", t.c[i]}});
    return json{{"function", t.function},   {"range", t.range},
                {"saturation", t.saturation}, {"top_code", t.top_code},
                {"max_abs_error", t.max_abs_error}, {"intervals", iv}};
  };
  j["minimax"] = json::array({table(tanh_minimax_table()), table(erf_minimax_table())});
  const auto& e = exp_decomposition();
  j["exp"] = {{"log2e", e.log2e}, {"coeffs", e.c}, {"max_rel_error", e.max_rel_error}};
  return j.dump(indent);
}

}  // namespace tpp::approx

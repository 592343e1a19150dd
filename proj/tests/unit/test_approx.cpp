#include <cmath>
#include <limits>

#include "doctest.h"
#include "json.hpp"
#include "tpp/approx.hpp"
#include "tpp/ops.hpp"

using namespace tpp;
namespace ap = tpp::approx;

TEST_SUITE("approx") {
  TEST_CASE("tanh taylor series") {
    const auto t = ap::tanh_taylor(8);
    CHECK(t[0] == 0.0L);
    CHECK(t[1] == 1.0L);
    CHECK(static_cast<double>(t[3]) == doctest::Approx(-1.0 / 3.0).epsilon(1e-15));
    CHECK(static_cast<double>(t[5]) == doctest::Approx(2.0 / 15.0).epsilon(1e-15));
    CHECK(static_cast<double>(t[7]) == doctest::Approx(-17.0 / 315.0).epsilon(1e-15));
  }

  TEST_CASE("pade 7/8 coefficients match the exact rational form") {
    // tanh ~ (x + 2/15 x^3 + 2/585 x^5 + 4/225225 x^7) /
    //        (1 + 7/15 x^2 + 1/39 x^4 + 2/6435 x^6 + 1/2027025 x^8)
    const auto& pr = ap::tanh_pade78_coeffs();
    const double p[8] = {0, 1, 0, 2.0 / 15, 0, 2.0 / 585, 0, 4.0 / 225225};
    const double q[9] = {1, 0, 7.0 / 15, 0, 1.0 / 39, 0, 2.0 / 6435, 0, 1.0 / 2027025};
    for (int k = 0; k < 8; ++k) CHECK(pr.p[static_cast<std::size_t>(k)] == doctest::Approx(p[k]).epsilon(1e-14));
    for (int k = 0; k < 9; ++k) CHECK(pr.q[static_cast<std::size_t>(k)] == doctest::Approx(q[k]).epsilon(1e-14));
  }

  TEST_CASE("pade solver reproduces a known approximant") {
    // exp: [1/1] is (1 + x/2) / (1 - x/2).
    const long double c[] = {1.0L, 1.0L, 0.5L};
    std::vector<long double> p, q;
    ap::pade_from_taylor(c, 1, 1, p, q);
    CHECK(static_cast<double>(p[0]) == doctest::Approx(1.0));
    CHECK(static_cast<double>(p[1]) == doctest::Approx(0.5));
    CHECK(static_cast<double>(q[0]) == doctest::Approx(1.0));
    CHECK(static_cast<double>(q[1]) == doctest::Approx(-0.5));
  }

  TEST_CASE("pade tanh is odd and zero at zero") {
    CHECK(ap::tanh_pade78(0.0f) == 0.0f);
    CHECK(ap::tanh_pade78(0.0) == 0.0);
    for (int i = 0; i <= 1000; ++i) {
      const float a = -7.0f + 0.014f * static_cast<float>(i);
      REQUIRE(std::bit_cast<std::uint32_t>(ap::tanh_pade78(-a)) ==
              std::bit_cast<std::uint32_t>(-ap::tanh_pade78(a)));
    }
    CHECK(ap::tanh_pade78(100.0f) == 1.0f);
    CHECK(std::isnan(ap::tanh_pade78(std::numeric_limits<float>::quiet_NaN())));
  }

  TEST_CASE("pade tanh error on [-5, 5]") {
    double worst = 0.0;
    const int n = 1000000;
    for (int i = 0; i < n; ++i) {
      const double x = -5.0 + 10.0 * i / (n - 1);
      worst = std::max(worst, std::fabs(ap::tanh_pade78(x) - std::tanh(x)));
    }
    CHECK(worst <= 1e-5);
  }

  TEST_CASE("minimax tables") {
    const auto& t = ap::tanh_minimax_table();
    CHECK(std::fabs(ap::tanh_minimax(0.0f)) <= 1e-4f);
    CHECK(t.max_abs_error <= 2e-3);
    for (std::size_t i = 0; i < 16; ++i) {
      CHECK(t.lo[i] < t.hi[i]);
      if (i > 0) CHECK(t.lo[i] == t.hi[i - 1]);
    }
    CHECK(ap::tanh_minimax(-3.0) == -ap::tanh_minimax(3.0));
    CHECK(ap::tanh_minimax(50.0f) == 1.0f);
  }

  TEST_CASE("minimax tanh error on [-4, 4]") {
    double worst = 0.0;
    const int n = 1000000;
    for (int i = 0; i < n; ++i) {
      const float x = static_cast<float>(-4.0 + 8.0 * i / (n - 1));
      worst = std::max(worst, std::fabs(static_cast<double>(ap::tanh_minimax(x)) - std::tanh(static_cast<double>(x))));
    }
    CHECK(worst <= 2e-3);
  }

  TEST_CASE("minimax gelu asymptotes") {
    CHECK(ap::gelu_minimax(0.0f) == 0.0f);
    for (float x : {6.0f, 10.0f, 30.0f}) CHECK(std::fabs(ap::gelu_minimax(x) - x) <= 1e-3f * x);
    CHECK(std::fabs(ap::gelu_minimax(-30.0f)) <= 1e-3f);
  }

  TEST_CASE("interval index follows exponent and leading mantissa bit") {
    CHECK(ap::magnitude_code(1.0f) == 0);
    CHECK(ap::magnitude_code(1.5f) == 1);
    CHECK(ap::magnitude_code(2.0f) == 2);
    CHECK(ap::magnitude_code(0.75f) == -1);
    CHECK(ap::magnitude_code(1.0) == ap::magnitude_code(1.0f));
    const auto& t = ap::tanh_minimax_table();
    CHECK(ap::minimax_index(t, 0.0f) == 0);
    CHECK(ap::minimax_index(t, 1e9f) == 15);
  }

  TEST_CASE("exp decomposition") {
    CHECK(ap::exp_taylor(0.0f) == 1.0f);
    CHECK(ap::exp_taylor(0.0) == 1.0);
    CHECK(std::fabs(ap::exp_taylor(std::log(2.0)) - 2.0) / 2.0 <= 1e-4);
    CHECK(ap::exp_taylor(100.0f) == std::numeric_limits<float>::infinity());
    CHECK(ap::exp_taylor(-100.0f) == 0.0f);
    CHECK(ap::exp_decomposition().c[0] == 1.0);
    const auto tc = ap::exp_taylor_cubic();
    CHECK(tc[1] == doctest::Approx(std::log(2.0)));
  }

  TEST_CASE("exp relative error on [-10, 10]") {
    double worst = 0.0;
    const int n = 1000000;
    for (int i = 0; i < n; ++i) {
      const double x = -10.0 + 20.0 * i / (n - 1);
      worst = std::max(worst, std::fabs(ap::exp_taylor(x) - std::exp(x)) / std::exp(x));
    }
    CHECK(worst <= 3e-4);
  }

  TEST_CASE("sigmoid through tanh") {
    auto sig = [](double x) { return ap::sigmoid_from_tanh(ap::tanh_pade78(x / 2.0)); };
    CHECK(sig(0.0) == 0.5);
    CHECK(sig(1e6) == 1.0);
    CHECK(sig(-1e6) == 0.0);
    double worst = 0.0;
    for (int i = 0; i <= 200000; ++i) {
      const double x = -10.0 + 20.0 * i / 200000.0;
      worst = std::max(worst, std::fabs(sig(x) - 1.0 / (1.0 + std::exp(-x))));
    }
    CHECK(worst <= 1.1e-5);
  }

  TEST_CASE("primitives select the approximation by flag") {
    Tensor x(1, 3), y(1, 3);
    x.data<float>()[0] = -1.25f;
    x.data<float>()[1] = 0.3f;
    x.data<float>()[2] = 2.5f;
    OpFlags pade, minimax, exact;
    pade.approx = Approx::Pade;
    minimax.approx = Approx::Minimax;
    exact.approx = Approx::Exact;
    apply_unary(UnaryKind::TANH, pade, x.view(), y.view());
    for (int i = 0; i < 3; ++i) CHECK(y.data<float>()[i] == ap::tanh_pade78(x.data<float>()[i]));
    apply_unary(UnaryKind::TANH, minimax, x.view(), y.view());
    for (int i = 0; i < 3; ++i) CHECK(y.data<float>()[i] == ap::tanh_minimax(x.data<float>()[i]));
    apply_unary(UnaryKind::TANH, exact, x.view(), y.view());
    for (int i = 0; i < 3; ++i) CHECK(y.data<float>()[i] == std::tanh(x.data<float>()[i]));
    // Default tanh is the Pade form.
    apply_unary(UnaryKind::TANH, {}, x.view(), y.view());
    CHECK(y.data<float>()[1] == ap::tanh_pade78(0.3f));
  }

  TEST_CASE("backward primitives apply the local derivative") {
    Tensor x(1, 3, DType::FP64), g = Tensor::filled(1, 3, 2.0, DType::FP64), dx(1, 3, DType::FP64);
    x.data<double>()[0] = -0.8;
    x.data<double>()[1] = 0.1;
    x.data<double>()[2] = 1.7;
    TensorView gin = g.view();
    gin.secondary = Companion::tensor(x.view().data, x.desc());
    OpFlags exact;
    exact.approx = Approx::Exact;
    apply_unary(UnaryKind::TANH_INV, exact, gin, dx.view());
    for (int i = 0; i < 3; ++i) {
      const double t = std::tanh(x.data<double>()[i]);
      CHECK(dx.data<double>()[i] == doctest::Approx(2.0 * (1.0 - t * t)).epsilon(1e-12));
    }
    apply_unary(UnaryKind::GELU_INV, {}, gin, dx.view());
    for (int i = 0; i < 3; ++i) CHECK(dx.data<double>()[i] == doctest::Approx(2.0 * ap::gelu_grad(x.data<double>()[i])));
    CHECK_THROWS_AS(apply_unary(UnaryKind::TANH_INV, {}, g.view(), dx.view()), Error);
  }

  TEST_CASE("coefficient tables serialize") {
    const auto j = nlohmann::json::parse(ap::tables_json());
    CHECK(j["pade_tanh"]["numerator"].size() == 8);
    CHECK(j["pade_tanh"]["denominator"].size() == 9);
    REQUIRE(j["minimax"].size() == 2);
    CHECK(j["minimax"][0]["function"] == "tanh");
    CHECK(j["minimax"][1]["function"] == "erf");
    CHECK(j["minimax"][0]["intervals"].size() == 16);
    CHECK(j["exp"]["coeffs"].size() == 4);
  }
}

#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "tpsf/zernike.hpp"

using namespace tpsf;
using namespace tpsf::zernike;

namespace {

double factorial(int k) { return std::tgamma(k + 1.0); }

// Textbook sum, one term per s.
double radial_by_sum(int n, int m, double rho) {
  if ((n - m) % 2 != 0) return 0.0;
  double r = 0.0;
  for (int s = 0; s <= (n - m) / 2; ++s) {
    const double c = (s % 2 ? -1.0 : 1.0) * factorial(n - s) /
                     (factorial(s) * factorial((n + m) / 2 - s) * factorial((n - m) / 2 - s));
    r += c * std::pow(rho, n - 2 * s);
  }
  return r;
}

}  // namespace

TEST_SUITE("zernike") {
  TEST_CASE("single index examples") {
    CHECK(single_index(0, 0) == 0);
    CHECK(single_index(4, 0) == 12);
    CHECK(single_index(3, -3) == 6);
    CHECK(single_index(1, -1) == 1);
    CHECK(single_index(6, 6) == 27);
  }

  TEST_CASE("invalid index pairs are rejected") {
    CHECK_THROWS_AS(single_index(2, 3), IndexingError);
    CHECK_THROWS_AS(single_index(3, 0), IndexingError);
    CHECK_THROWS_AS(single_index(-1, 1), IndexingError);
    CHECK_THROWS_AS(double_index(-1), IndexingError);
  }

  TEST_CASE("double index agrees with brute-force search") {
    CHECK(double_index(0).n == 0);
    CHECK(double_index(0).m == 0);
    for (int q = 0; q <= 65; ++q) {
      int found = 0, fn = 0, fm = 0;
      for (int n = 0; n <= 10; ++n) {
        for (int m = -n; m <= n; m += 2) {
          if ((n * (n + 2) + m) / 2 == q) {
            ++found;
            fn = n;
            fm = m;
          }
        }
      }
      REQUIRE(found == 1);
      const auto nm = double_index(q);
      CHECK(nm.n == fn);
      CHECK(nm.m == fm);
    }
    CHECK(double_index(12).n == 4);
    CHECK(double_index(12).m == 0);
    CHECK(double_index(27).n == 6);
    CHECK(double_index(27).m == 6);
  }

  TEST_CASE("index round trip up to q = 100") {
    for (int q = 0; q <= 100; ++q) {
      const auto nm = double_index(q);
      CHECK(single_index(nm.n, nm.m) == q);
      CHECK(ZernikeIndex::from_q(q) == ZernikeIndex::from_nm(nm.n, nm.m));
    }
  }

  TEST_CASE("radial polynomial values") {
    for (double rho : {0.0, 0.3, 1.0}) CHECK(radial_poly(0, 0, rho) == 1.0);
    CHECK(radial_poly(2, 0, 1.0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(radial_poly(3, 1, 0.5) == doctest::Approx(-0.625).epsilon(1e-15));
    CHECK(radial_poly(3, 0, 0.5) == 0.0);
    CHECK_THROWS_AS(radial_poly(2, 0, 1.5), DomainError);
    CHECK_THROWS_AS(radial_poly(2, 0, -0.1), DomainError);
  }

  TEST_CASE("radial polynomial matches the factorial sum") {
    for (int n = 0; n <= 10; ++n) {
      for (int m = n % 2; m <= n; m += 2) {
        for (double rho : {0.0, 0.1, 0.37, 0.5, 0.81, 1.0}) {
          CHECK(radial_poly(n, m, rho) == doctest::Approx(radial_by_sum(n, m, rho)).epsilon(1e-12));
        }
      }
    }
  }

  TEST_CASE("evaluate") {
    CHECK(evaluate(ZernikeIndex::from_q(0), 0.4, 1.1) == 1.0);
    CHECK(evaluate(ZernikeIndex::from_q(4), 1.0, 0.0) == doctest::Approx(1.0));
    for (double phi : {0.2, 1.0, 2.5}) {
      const double a = evaluate(ZernikeIndex::from_q(6), 0.7, phi);
      const double b = evaluate(ZernikeIndex::from_q(6), 0.7, phi + std::numbers::pi);
      CHECK(a != 0.0);
      CHECK(b == doctest::Approx(-a).epsilon(1e-12));
    }
  }

  TEST_CASE("angular parity classification") {
    CHECK(is_angularly_even(4));
    CHECK_FALSE(is_angularly_even(6));
    CHECK(is_angularly_even(0));
    CHECK(is_angularly_even(12));
    CHECK_FALSE(is_angularly_even(1));
  }

  TEST_CASE("modify") {
    const auto z = modify(CoefficientSet{});
    CHECK(z.modified());
    for (double v : z.values()) CHECK(v == 0.0);

    std::vector<double> v(kNumModes, 0.0);
    v[0] = 1.0;
    v[1] = -2.0;
    v[2] = 3.0;
    v[4] = -0.7;
    v[6] = -0.7;
    const auto m = modify(CoefficientSet(v));
    CHECK(m[0] == 0.0);
    CHECK(m[1] == 0.0);
    CHECK(m[2] == 0.0);
    CHECK(m[4] == 0.7);
    CHECK(m[6] == -0.7);
    CHECK_THROWS_AS(modify(m), ContractError);
    CHECK(m.predicted_terms().size() == kNumPredicted);
  }

  TEST_CASE("disk grid is point symmetric") {
    const UnitDiskGrid g(64, 32);
    CHECK(point_reflect(g.mask()) == g.mask());
    for (std::size_t k = 0; k < g.count(); ++k) CHECK(g.rho()[k] <= 1.0);
  }

  TEST_CASE("basis columns") {
    const UnitDiskGrid g(64, 32);
    const auto one = basis_matrix(1, g);
    CHECK(one.cols() == 1);
    CHECK(one.rows() == static_cast<Eigen::Index>(g.count()));
    CHECK((one.array() == 1.0).all());

    std::vector<double> c(kNumModes, 0.0);
    c[12] = 1.0;
    const auto s = synthesize_phase(CoefficientSet(c), g);
    CHECK(point_reflect(s.data) == s.data);
  }

  TEST_CASE("gram matrix is near diagonal") {
    const UnitDiskGrid g(512, 512);
    const auto b = basis_matrix(kNumModes, g);
    const Eigen::MatrixXd gram = b.transpose() * b / static_cast<double>(g.count());
    double worst = 0.0;
    for (int i = 0; i < kNumModes; ++i) {
      for (int j = 0; j < kNumModes; ++j) {
        if (i != j) worst = std::max(worst, std::abs(gram(i, j)));
      }
    }
    CHECK(worst < 1e-3);
  }

  TEST_CASE("synthesize") {
    const UnitDiskGrid g(64, 32);
    const auto zero = synthesize_phase(CoefficientSet{}, g);
    for (double v : zero.data.values()) CHECK(v == 0.0);

    std::vector<double> c(kNumModes, 0.0);
    c[4] = 1.0;
    const auto s = synthesize_phase(CoefficientSet(c), g);
    for (std::size_t k = 0; k < g.count(); ++k) {
      CHECK(s.data[g.pixels()[k]] == doctest::Approx(evaluate(ZernikeIndex::from_q(4), g.rho()[k], g.phi()[k])));
    }
    std::size_t outside = 0;
    for (std::size_t i = 0; i < s.data.size(); ++i) {
      if (!g.mask()[i]) {
        ++outside;
        CHECK(s.data[i] == 0.0);
      }
    }
    CHECK(outside > 0);
  }
}

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "tpsf/imaging.hpp"
#include "tpsf/seeds.hpp"
#include "tpsf/turbulence.hpp"

using namespace tpsf;
using namespace tpsf::turbulence;
namespace fs = std::filesystem;

namespace {

zernike::CoefficientSet random_set(std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, scale);
  std::vector<double> a(zernike::kNumModes);
  for (double& v : a) v = nd(rng);
  return zernike::CoefficientSet(a);
}

// Coefficient covariance from the structure function alone:
//   cov(a_i, a_j) = -1/2 sum_x sum_x' P_i(x) D(|x - x'|) P_j(x'),
// P the least-squares projector. Rows of P for q >= 1 sum to zero, so the
// unknown constant of the phase covariance drops out.
Eigen::MatrixXd covariance_oracle(int pupil_px, double d_over_r0) {
  const zernike::UnitDiskGrid g(2 * pupil_px, pupil_px);
  const Eigen::MatrixXd b = zernike::basis_matrix(zernike::kNumModes, g);
  const Eigen::MatrixXd p = (b.transpose() * b).ldlt().solve(b.transpose());
  const double r0_px = pupil_px / d_over_r0;
  const int n = g.size();
  const auto count = static_cast<Eigen::Index>(g.count());
  Eigen::MatrixXd d(count, count);
  for (Eigen::Index i = 0; i < count; ++i) {
    const auto pi = static_cast<long>(g.pixels()[static_cast<std::size_t>(i)]);
    for (Eigen::Index j = 0; j < count; ++j) {
      const auto pj = static_cast<long>(g.pixels()[static_cast<std::size_t>(j)]);
      const double r = std::hypot(static_cast<double>(pi / n - pj / n), static_cast<double>(pi % n - pj % n));
      d(i, j) = 6.88 * std::pow(r / r0_px, 5.0 / 3.0);
    }
  }
  return -0.5 * p * d * p.transpose();
}

}  // namespace

TEST_SUITE("turbulence") {
  TEST_CASE("screen spec defaults and validation") {
    const ScreenSpec s;
    CHECK(s.wavelength_m == 0.5e-6);
    CHECK(s.pupil_diameter_m == 0.4);
    CHECK(ScreenSpec::from_ratio(5.0, 1).d_over_r0() == doctest::Approx(5.0));

    ScreenSpec bad;
    bad.fried_parameter_m = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = ScreenSpec{};
    bad.wavelength_m = -1.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    CHECK_THROWS_AS(kolmogorov_screen(ScreenSpec::from_ratio(5.0, 1, 300, 150)), ConfigError);
  }

  TEST_CASE("screens are deterministic in the seed") {
    const auto a = kolmogorov_screen(ScreenSpec::from_ratio(5.0, 42, 128, 64));
    const auto b = kolmogorov_screen(ScreenSpec::from_ratio(5.0, 42, 128, 64));
    const auto c = kolmogorov_screen(ScreenSpec::from_ratio(5.0, 43, 128, 64));
    CHECK(a.data == b.data);
    CHECK_FALSE(a.data == c.data);
    for (double v : a.data.values()) CHECK(std::isfinite(v));
  }

  TEST_CASE("screen amplitude scales as r0^(-5/6) for a fixed seed") {
    const auto a = kolmogorov_screen(ScreenSpec::from_ratio(5.0, 9, 128, 64));
    const auto b = kolmogorov_screen(ScreenSpec::from_ratio(10.0, 9, 128, 64));
    const double k = std::pow(2.0, 5.0 / 6.0);
    for (std::size_t i = 0; i < a.data.size(); i += 97) CHECK(b.data[i] == doctest::Approx(k * a.data[i]).epsilon(1e-9));
  }

  TEST_CASE("piston removal and masking") {
    const zernike::UnitDiskGrid g(128, 64);
    auto s = kolmogorov_screen(ScreenSpec::from_ratio(5.0, 3, 128, 64));
    remove_piston(s, g);
    double mean = 0.0;
    for (std::size_t p : g.pixels()) mean += s.data[p];
    CHECK(std::abs(mean / static_cast<double>(g.count())) < 1e-12);
    apply_mask(s, g);
    for (std::size_t i = 0; i < s.data.size(); ++i) {
      if (!g.mask()[i]) CHECK(s.data[i] == 0.0);
    }
  }

  TEST_CASE("fit inverts synthesis") {
    const zernike::UnitDiskGrid g(512, 256);
    const ZernikeFitter f(g);
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      const auto c = random_set(seed);
      const auto back = f.fit(zernike::synthesize_phase(c, g));
      CHECK_FALSE(back.modified());
      for (int q = 0; q < zernike::kNumModes; ++q) CHECK(std::abs(back[q] - c[q]) <= 1e-6);
    }
  }

  TEST_CASE("fit is linear") {
    const zernike::UnitDiskGrid g(128, 64);
    const ZernikeFitter f(g);
    auto s = kolmogorov_screen(ScreenSpec::from_ratio(6.0, 5, 128, 64));
    const auto a = f.fit(s);
    for (double& v : s.data.storage()) v *= -2.5;
    const auto b = f.fit(s);
    for (int q = 0; q < zernike::kNumModes; ++q) CHECK(std::abs(b[q] + 2.5 * a[q]) <= 1e-9);
  }

  TEST_CASE("pure term fits to a one-hot vector") {
    const zernike::UnitDiskGrid g(128, 64);
    const ZernikeFitter f(g);
    for (int q = 0; q < zernike::kNumModes; ++q) {
      std::vector<double> c(zernike::kNumModes, 0.0);
      c[q] = 1.0;
      const auto a = f.fit(zernike::synthesize_phase(zernike::CoefficientSet(c), g));
      for (int k = 0; k < zernike::kNumModes; ++k) {
        if (k == q) {
          CHECK(a[k] == doctest::Approx(1.0).epsilon(1e-8));
        } else {
          CHECK(std::abs(a[k]) <= 1e-8);
        }
      }
    }
  }

  TEST_CASE("fit residual shrinks as modes are added") {
    const zernike::UnitDiskGrid g(256, 128);
    auto s = kolmogorov_screen(ScreenSpec::from_ratio(8.0, 11, 256, 128));
    remove_piston(s, g);
    double prev = 1e300;
    for (int q : {3, 6, 10, 15, 21, 28}) {
      const ZernikeFitter f(g, q);
      const double r = f.residual_rms(s, f.fit(s));
      CHECK(r < prev);
      prev = r;
    }
  }

  TEST_CASE("same-order variance ratios match the structure-function oracle") {
    constexpr int kScreens = 500;
    const zernike::UnitDiskGrid g(256, 128);
    const ZernikeFitter f(g);
    std::vector<double> var(zernike::kNumModes, 0.0);
    for (int i = 0; i < kScreens; ++i) {
      auto s = kolmogorov_screen(ScreenSpec::from_ratio(5.0, derive_seed({0xC0, static_cast<std::uint64_t>(i)}), 256, 128));
      remove_piston(s, g);
      const auto a = f.fit(s);
      for (int q = 0; q < zernike::kNumModes; ++q) var[q] += a[q] * a[q] / kScreens;
    }
    const Eigen::MatrixXd cov = covariance_oracle(40, 5.0);
    const int pairs[][2] = {{1, 2}, {3, 4}, {3, 5}, {6, 7}, {7, 8}, {8, 9}, {10, 12}, {11, 13}, {12, 14}, {16, 18}, {24, 27}};
    for (const auto& pr : pairs) {
      const double mc = var[pr[0]] / var[pr[1]];
      const double oracle = cov(pr[0], pr[0]) / cov(pr[1], pr[1]);
      INFO("q=" << pr[0] << " q'=" << pr[1] << " monte carlo " << mc << " oracle " << oracle);
      CHECK(std::abs(mc / oracle - 1.0) <= 0.25);
    }
    // Absolute tilt variance against the same oracle, loosely.
    CHECK(var[1] / cov(1, 1) == doctest::Approx(1.0).epsilon(0.25));
  }

  TEST_CASE("reconstruct modified") {
    const zernike::UnitDiskGrid g(64, 32);
    const auto zero = reconstruct_modified(zernike::modify(zernike::CoefficientSet{}), g);
    for (double v : zero.data.values()) CHECK(v == 0.0);

    std::vector<double> c(zernike::kNumModes, 0.0);
    c[4] = 0.7;
    const auto m = zernike::modify(zernike::CoefficientSet(c));
    const auto s = reconstruct_modified(m, g);
    for (std::size_t k = 0; k < g.count(); ++k) {
      CHECK(s.data[g.pixels()[k]] ==
            doctest::Approx(0.7 * zernike::evaluate(zernike::ZernikeIndex::from_q(4), g.rho()[k], g.phi()[k])));
    }
    CHECK_THROWS_AS(reconstruct_modified(zernike::CoefficientSet(c), g), ContractError);
  }

  // One even-n term at a time, with all odd-n terms present: restoring its
  // sign leaves the PSF unchanged.
  TEST_CASE("modified reconstruction keeps the PSF for every even term sign") {
    const zernike::UnitDiskGrid g(128, 64);
    const ZernikeFitter f(g);
    const auto pupil = imaging::Pupil::from_grid(g);
    const auto base = random_set(77, 0.8);
    for (int q = zernike::kFirstPredicted; q < zernike::kNumModes; ++q) {
      if (!zernike::is_angularly_even(q)) continue;
      std::vector<double> c(zernike::kNumModes, 0.0);
      for (int k = zernike::kFirstPredicted; k < zernike::kNumModes; ++k) {
        if (!zernike::is_angularly_even(k)) c[k] = base[k];
      }
      c[q] = -std::abs(base[q]) - 0.2;
      const auto modified = zernike::modify(zernike::CoefficientSet(c));
      const auto a = imaging::psf(pupil, reconstruct_modified(modified, f));
      const auto b = imaging::psf(pupil, zernike::synthesize_phase(zernike::CoefficientSet(c), g, f.basis()));
      double peak = 0.0, worst = 0.0;
      for (std::size_t i = 0; i < a.data.size(); ++i) {
        peak = std::max(peak, a.data[i]);
        worst = std::max(worst, std::abs(a.data[i] - b.data[i]));
      }
      INFO("q=" << q);
      CHECK(worst / peak <= 1e-9);
    }
  }

  TEST_CASE("screen file round trip") {
    const fs::path p = fs::temp_directory_path() / "tpsf_unit_screen.tpsf";
    const auto s = kolmogorov_screen(ScreenSpec::from_ratio(4.0, 8, 64, 32));
    write_screen(p, s);
    const auto back = read_screen(p);
    REQUIRE(back.spec.has_value());
    CHECK(back.spec->seed == 8);
    CHECK(back.spec->grid_size == 64);
    CHECK(back.spec->fried_parameter_m == s.spec->fried_parameter_m);
    for (std::size_t i = 0; i < s.data.size(); ++i) CHECK(back.data[i] == static_cast<double>(static_cast<float>(s.data[i])));

    const auto size = fs::file_size(p);
    fs::resize_file(p, size - 3);
    CHECK_THROWS_AS(read_screen(p), FormatError);
    {
      std::ofstream os(p, std::ios::binary | std::ios::trunc);
      os << "NOPE0000";
    }
    CHECK_THROWS_AS(read_screen(p), FormatError);
    fs::remove(p);
  }
}

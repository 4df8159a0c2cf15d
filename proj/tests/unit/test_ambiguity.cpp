#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "tpsf/ambiguity.hpp"

using namespace tpsf;
using namespace tpsf::ambiguity;
namespace fs = std::filesystem;

namespace {

const imaging::Pupil& pupil512() {
  static const auto p = imaging::Pupil::circular(512, 256);
  return p;
}

double max_abs_diff(const RealGrid& a, const RealGrid& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_SUITE("ambiguity") {
  TEST_CASE("even term sign pair is identical") {
    const auto [plus, minus] = sign_pair_psf(12, 5.0, pupil512());
    const auto r = compare_pair(12, 5.0, plus, minus);
    CHECK(r.classified_even);
    CHECK(r.pass);
    CHECK(r.invariance_distance <= 1e-10);
  }

  TEST_CASE("odd term sign pair differs") {
    const auto [plus, minus] = sign_pair_psf(6, 5.0, pupil512());
    const auto r = compare_pair(6, 5.0, plus, minus);
    CHECK_FALSE(r.classified_even);
    CHECK(r.pass);
    CHECK(r.l2_distance > 1e-3);
  }

  TEST_CASE("zero amplitude gives identical pairs for every term") {
    const auto p = imaging::Pupil::circular(128, 64);
    for (int q = 0; q < 28; ++q) {
      const auto [plus, minus] = sign_pair_psf(q, 0.0, p);
      CHECK(max_abs_diff(plus.data, minus.data) == 0.0);
    }
  }

  TEST_CASE("parity decomposition") {
    const auto even = field_parity_decomposition(12, 5.0, pupil512());
    CHECK(even.outside_fraction <= 1e-18);
    const auto odd = field_parity_decomposition(6, 5.0, pupil512());
    CHECK(odd.outside_fraction <= 1e-18);
    // Both parts carry real energy, so the check is not vacuous.
    CHECK(even.transform.imag_even > 1e-3);
    CHECK(odd.transform.real_odd > 1e-3);

    const auto flat = field_parity_decomposition(12, 0.0, pupil512());
    CHECK(flat.transform.real_even == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(flat.transform.real_odd + flat.transform.imag_even + flat.transform.imag_odd <= 1e-18);
  }

  TEST_CASE("sweep over q = 3..27 passes") {
    std::vector<int> qs;
    for (int q = 3; q <= 27; ++q) qs.push_back(q);
    const auto reports = verify_all(qs, {0.5, 2.0, 5.0}, pupil512());
    REQUIRE(reports.size() == 75);
    for (const auto& r : reports) {
      INFO("q=" << r.q << " a=" << r.amplitude);
      CHECK(r.pass);
      CHECK(r.classified_even == zernike::is_angularly_even(r.q));
      if (r.classified_even) {
        CHECK(r.invariance_distance <= 1e-10);
      } else {
        CHECK(r.l2_distance > 1e-3);
        CHECK(r.reflection_distance <= 1e-10);
      }
    }
    CHECK(reports.front().q == 3);
    CHECK(reports.back().q == 27);
    CHECK(reports.back().amplitude == 5.0);
    CHECK_THROWS_AS(verify_all({}, {1.0}, pupil512()), ConfigError);
  }

  TEST_CASE("flipping every even term at once keeps the PSF") {
    const zernike::UnitDiskGrid g(256, 128);
    const auto p = imaging::Pupil::from_grid(g);
    std::mt19937_64 rng(3);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::vector<double> c(zernike::kNumModes, 0.0), neg(zernike::kNumModes, 0.0);
    for (int q = 3; q < zernike::kNumModes; ++q) {
      if (zernike::is_angularly_even(q)) {
        c[q] = nd(rng);
        neg[q] = -c[q];
      }
    }
    const auto a = imaging::psf(p, zernike::synthesize_phase(zernike::CoefficientSet(c), g));
    const auto b = imaging::psf(p, zernike::synthesize_phase(zernike::CoefficientSet(neg), g));
    CHECK(max_abs_diff(a.data, b.data) <= 1e-12);
  }

  TEST_CASE("odd term pair are point reflections") {
    const auto p = imaging::Pupil::circular(256, 128);
    for (int q : {1, 7, 17, 20}) {
      const auto [plus, minus] = sign_pair_psf(q, 2.0, p);
      CHECK(max_abs_diff(minus.data, point_reflect(plus.data)) <= 1e-12);
      CHECK(max_abs_diff(minus.data, plus.data) > 1e-6);
    }
  }

  TEST_CASE("csv export") {
    const fs::path path = fs::temp_directory_path() / "tpsf_unit_ambiguity.csv";
    const auto reports = verify_all({4, 7}, {1.0}, imaging::Pupil::circular(128, 64));
    write_csv(path, reports);
    std::ifstream is(path);
    std::string header, line;
    std::getline(is, header);
    CHECK(header == "q,n,m,amplitude,invariance_distance,l2_distance,classified_even,pass,reflection_distance");
    int rows = 0;
    while (std::getline(is, line)) ++rows;
    CHECK(rows == 2);
    fs::remove(path);
  }
}

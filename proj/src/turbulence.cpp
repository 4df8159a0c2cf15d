#include "tpsf/turbulence.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <string>

#include "tpsf/binary_io.hpp"
#include "tpsf/fft.hpp"

namespace tpsf {

void ScreenSpec::validate() const {
  if (!fft::is_power_of_two(grid_size)) {
    throw ConfigError("screen grid size must be a power of two (got " + std::to_string(grid_size) + ")");
  }
  if (pupil_px <= 0 || pupil_px > grid_size) {
    throw ConfigError("pupil diameter in pixels must lie in (0, grid size]");
  }
  if (!(pupil_diameter_m > 0.0) || !(fried_parameter_m > 0.0) || !(wavelength_m > 0.0)) {
    throw ConfigError("screen spec needs D > 0, r0 > 0 and lambda > 0");
  }
  if (!std::isfinite(d_over_r0())) throw ConfigError("D/r0 must be finite");
}

ScreenSpec ScreenSpec::from_ratio(double d_over_r0, std::uint64_t seed, int grid_size, int pupil_px) {
  ScreenSpec s;
  s.grid_size = grid_size;
  s.pupil_px = pupil_px;
  s.fried_parameter_m = s.pupil_diameter_m / d_over_r0;
  s.seed = seed;
  return s;
}

}  // namespace tpsf

namespace tpsf::turbulence {

namespace {

constexpr double kPsdScale = 0.023;
constexpr int kSubharmonicLevels = 3;

double kolmogorov_psd(double r0, double f) {
  return kPsdScale * std::pow(r0, -5.0 / 3.0) * std::pow(f, -11.0 / 3.0);
}

// Mean PSD over the square frequency cell of width w centred on (fx, fy).
// Subharmonic cells sit next to the f^{-11/3} singularity, where the centre
// value underestimates the cell's power by tens of percent.
double cell_mean_psd(double r0, double fx, double fy, double w) {
  constexpr int kSub = 16;
  double sum = 0.0;
  for (int i = 0; i < kSub; ++i) {
    const double ux = fx + ((i + 0.5) / kSub - 0.5) * w;
    for (int j = 0; j < kSub; ++j) {
      const double uy = fy + ((j + 0.5) / kSub - 0.5) * w;
      sum += kolmogorov_psd(r0, std::hypot(ux, uy));
    }
  }
  return sum / (kSub * kSub);
}

}  // namespace

PhaseScreen kolmogorov_screen(const ScreenSpec& spec) {
  spec.validate();
  const int n = spec.grid_size;
  const double dx = spec.pixel_scale_m();
  const double extent = n * dx;
  const double r0 = spec.fried_parameter_m;

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  // High-frequency part: complex white noise shaped by sqrt(PSD) * df, laid out
  // directly in DFT index order.
  const double df = 1.0 / extent;
  fft::ComplexGrid spectrum(n);
  for (int r = 0; r < n; ++r) {
    const int kr = r < n / 2 ? r : r - n;
    for (int c = 0; c < n; ++c) {
      const int kc = c < n / 2 ? c : c - n;
      const double re = gauss(rng);
      const double im = gauss(rng);
      if (kr == 0 && kc == 0) continue;
      const double f = df * std::hypot(static_cast<double>(kr), static_cast<double>(kc));
      const double amp = std::sqrt(kolmogorov_psd(r0, f)) * df;
      spectrum(r, c) = fft::Complex(re, im) * amp;
    }
  }
  fft::inverse(spectrum);

  PhaseScreen screen{RealGrid(n), spec};
  for (std::size_t i = 0; i < screen.data.size(); ++i) screen.data[i] = spectrum[i].real();

  // Subharmonics: 3x3 frequency lattices at spacing 1/(3^p * extent).
  RealGrid low(n, 0.0);
  std::vector<fft::Complex> ex(n), ey(n);
  for (int p = 1; p <= kSubharmonicLevels; ++p) {
    const double dfp = 1.0 / (std::pow(3.0, p) * extent);
    for (int iy = -1; iy <= 1; ++iy) {
      for (int ix = -1; ix <= 1; ++ix) {
        const double re = gauss(rng);
        const double im = gauss(rng);
        if (ix == 0 && iy == 0) continue;
        const double fx = ix * dfp;
        const double fy = iy * dfp;
        const double amp = std::sqrt(cell_mean_psd(r0, fx, fy, dfp)) * dfp;
        const fft::Complex cn(re * amp, im * amp);
        for (int k = 0; k < n; ++k) {
          const double pos = (k - n / 2) * dx;
          ex[k] = std::polar(1.0, 2.0 * std::numbers::pi * fx * pos);
          ey[k] = std::polar(1.0, 2.0 * std::numbers::pi * fy * pos);
        }
        for (int r = 0; r < n; ++r) {
          const fft::Complex row_term = cn * ey[r];
          for (int c = 0; c < n; ++c) low(r, c) += (row_term * ex[c]).real();
        }
      }
    }
  }
  double mean = 0.0;
  for (double v : low.values()) mean += v;
  mean /= static_cast<double>(low.size());
  for (std::size_t i = 0; i < screen.data.size(); ++i) screen.data[i] += low[i] - mean;
  return screen;
}

void remove_piston(PhaseScreen& screen, const zernike::UnitDiskGrid& grid) {
  if (screen.data.side() != grid.size()) throw ContractError("remove_piston: grid size mismatch");
  double mean = 0.0;
  for (std::size_t idx : grid.pixels()) mean += screen.data[idx];
  mean /= static_cast<double>(grid.count());
  for (double& v : screen.data.values()) v -= mean;
}

void apply_mask(PhaseScreen& screen, const zernike::UnitDiskGrid& grid) {
  if (screen.data.side() != grid.size()) throw ContractError("apply_mask: grid size mismatch");
  const auto& mask = grid.mask();
  for (std::size_t i = 0; i < screen.data.size(); ++i) {
    if (mask[i] == 0) screen.data[i] = 0.0;
  }
}

ZernikeFitter::ZernikeFitter(const zernike::UnitDiskGrid& grid, int num_modes)
    : grid_(grid), num_modes_(num_modes), basis_(zernike::basis_matrix(num_modes, grid)) {
  const Eigen::MatrixXd normal = basis_.transpose() * basis_;
  normal_.compute(normal);
  if (normal_.info() != Eigen::Success) throw NumericalError("Zernike normal matrix factorization failed");
  const Eigen::VectorXd d = normal_.vectorD().cwiseAbs();
  if (d.minCoeff() <= 1e-12 * d.maxCoeff()) {
    throw NumericalError("Zernike normal matrix is rank deficient on this grid (" + std::to_string(grid.count()) +
                         " pixels, " + std::to_string(num_modes) + " modes)");
  }
}

zernike::CoefficientSet ZernikeFitter::fit(const PhaseScreen& screen) const {
  if (screen.data.side() != grid_.size()) throw ContractError("fit_zernike: screen and grid sizes differ");
  const auto& px = grid_.pixels();
  Eigen::VectorXd samples(static_cast<Eigen::Index>(px.size()));
  for (std::size_t i = 0; i < px.size(); ++i) samples[static_cast<Eigen::Index>(i)] = screen.data[px[i]];
  const Eigen::VectorXd a = normal_.solve(basis_.transpose() * samples);
  return zernike::CoefficientSet(std::vector<double>(a.data(), a.data() + a.size()), false);
}

double ZernikeFitter::residual_rms(const PhaseScreen& screen, const zernike::CoefficientSet& coeffs) const {
  if (static_cast<int>(coeffs.size()) != num_modes_) throw ContractError("residual_rms: coefficient count mismatch");
  const auto& px = grid_.pixels();
  const Eigen::Map<const Eigen::VectorXd> a(coeffs.values().data(), num_modes_);
  const Eigen::VectorXd model = basis_ * a;
  double ss = 0.0;
  for (std::size_t i = 0; i < px.size(); ++i) {
    const double e = screen.data[px[i]] - model[static_cast<Eigen::Index>(i)];
    ss += e * e;
  }
  return std::sqrt(ss / static_cast<double>(px.size()));
}

zernike::CoefficientSet fit_zernike(const PhaseScreen& screen, const zernike::UnitDiskGrid& grid, int num_modes) {
  return ZernikeFitter(grid, num_modes).fit(screen);
}

PhaseScreen reconstruct_modified(const zernike::CoefficientSet& coeffs, const zernike::UnitDiskGrid& grid) {
  if (!coeffs.modified()) throw ContractError("reconstruct_modified: coefficient set is not modified");
  return zernike::synthesize_phase(coeffs, grid);
}

PhaseScreen reconstruct_modified(const zernike::CoefficientSet& coeffs, const ZernikeFitter& fitter) {
  if (!coeffs.modified()) throw ContractError("reconstruct_modified: coefficient set is not modified");
  if (static_cast<int>(coeffs.size()) != fitter.num_modes()) {
    throw ContractError("reconstruct_modified: coefficient count does not match the fitter basis");
  }
  return zernike::synthesize_phase(coeffs, fitter.grid(), fitter.basis());
}

void write_screen(const std::filesystem::path& path, const PhaseScreen& screen) {
  const ScreenSpec spec = screen.spec.value_or(ScreenSpec{});
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  io::write_magic(os, "TPSF");
  io::write_le<std::uint32_t>(os, kScreenFormatVersion);
  io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(screen.data.side()));
  io::write_le<double>(os, spec.pupil_diameter_m);
  io::write_le<double>(os, spec.fried_parameter_m);
  io::write_le<double>(os, spec.wavelength_m);
  io::write_le<std::uint64_t>(os, spec.seed);
  for (double v : screen.data.values()) io::write_le<float>(os, static_cast<float>(v));
  if (!os) throw IoError("write failed: " + path.string());
}

PhaseScreen read_screen(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  io::Reader rd(is, path.string());
  rd.expect_magic("TPSF");
  const std::uint64_t version_at = rd.offset();
  if (rd.le<std::uint32_t>() != kScreenFormatVersion) rd.fail("unsupported TPSF version", version_at);
  const std::uint64_t size_at = rd.offset();
  const auto n = rd.le<std::uint32_t>();
  if (n == 0 || n > 65536) rd.fail("implausible grid size", size_at);
  ScreenSpec spec;
  spec.grid_size = static_cast<int>(n);
  spec.pupil_px = static_cast<int>(n / 2 > 0 ? n / 2 : 1);
  spec.pupil_diameter_m = rd.le<double>();
  spec.fried_parameter_m = rd.le<double>();
  spec.wavelength_m = rd.le<double>();
  spec.seed = rd.le<std::uint64_t>();
  PhaseScreen screen{RealGrid(static_cast<int>(n)), spec};
  for (double& v : screen.data.values()) v = rd.le<float>();
  return screen;
}

}  // namespace tpsf::turbulence

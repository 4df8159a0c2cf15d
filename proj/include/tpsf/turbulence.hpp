#pragma once

#include <filesystem>
#include <memory>

#include <Eigen/Dense>

#include "tpsf/grid.hpp"
#include "tpsf/zernike.hpp"

namespace tpsf::turbulence {

/// Kolmogorov phase screen by FFT spectral filtering plus three levels of
/// subharmonics for the low spatial frequencies.
///
/// Phase PSD: 0.023 r0^{-5/3} f^{-11/3} (f in cycles per metre). The screen
/// spans grid_size * pixel_scale_m metres; deterministic in spec.seed.
/// Throws ConfigError for an invalid spec or a grid size that is not a power of two.
PhaseScreen kolmogorov_screen(const ScreenSpec& spec);

/// Subtracts the mean over the masked-in pixels (piston) from the whole screen.
void remove_piston(PhaseScreen& screen, const zernike::UnitDiskGrid& grid);

/// Zeroes every pixel outside the grid's pupil mask.
void apply_mask(PhaseScreen& screen, const zernike::UnitDiskGrid& grid);

/// Least-squares Zernike fit a = (B^T B)^{-1} B^T phi on a fixed grid.
///
/// The basis and the factorization of its normal matrix are built once and
/// are read-only afterwards, so one fitter can be shared across threads.
class ZernikeFitter {
 public:
  ZernikeFitter(const zernike::UnitDiskGrid& grid, int num_modes = zernike::kNumModes);

  int num_modes() const noexcept { return num_modes_; }
  const zernike::UnitDiskGrid& grid() const noexcept { return grid_; }
  const Eigen::MatrixXd& basis() const noexcept { return basis_; }

  zernike::CoefficientSet fit(const PhaseScreen& screen) const;
  /// RMS of phi - B a over the masked-in pixels.
  double residual_rms(const PhaseScreen& screen, const zernike::CoefficientSet& coeffs) const;

 private:
  zernike::UnitDiskGrid grid_;
  int num_modes_;
  Eigen::MatrixXd basis_;
  Eigen::LDLT<Eigen::MatrixXd> normal_;
};

zernike::CoefficientSet fit_zernike(const PhaseScreen& screen, const zernike::UnitDiskGrid& grid,
                                    int num_modes = zernike::kNumModes);

/// Phase screen of a modified coefficient set. Throws ContractError for an unmodified set.
PhaseScreen reconstruct_modified(const zernike::CoefficientSet& coeffs, const zernike::UnitDiskGrid& grid);
PhaseScreen reconstruct_modified(const zernike::CoefficientSet& coeffs, const ZernikeFitter& fitter);

// Screen dump ("TPSF"): little-endian magic, u32 version, u32 N, f64 D, f64 r0,
// f64 lambda, u64 seed, then N*N float32 radians row-major.
inline constexpr std::uint32_t kScreenFormatVersion = 1;
void write_screen(const std::filesystem::path& path, const PhaseScreen& screen);
PhaseScreen read_screen(const std::filesystem::path& path);

}  // namespace tpsf::turbulence

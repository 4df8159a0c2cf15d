#pragma once

// Numerical checks of the intensity sign ambiguity: with a real-even pupil,
// PSF(+a Z_q) == PSF(-a Z_q) for even radial order n, while for odd n the two
// PSFs are point reflections of each other and differ.

#include <filesystem>
#include <utility>
#include <vector>

#include "tpsf/imaging.hpp"

namespace tpsf::ambiguity {

struct AmbiguityReport {
  int q = 0;
  int n = 0;
  int m = 0;
  double amplitude = 0.0;
  /// max |PSF(+a) - PSF(-a)| over pixels.
  double invariance_distance = 0.0;
  /// ||PSF(+a) - PSF(-a)||_2 / ||PSF(+a)||_2.
  double l2_distance = 0.0;
  /// max |PSF(-a) - reflect(PSF(+a))| over pixels.
  double reflection_distance = 0.0;
  bool classified_even = false;
  bool pass = false;
};

/// Energy fractions of the four parity parts of a complex grid.
struct ParityFractions {
  double real_even = 0.0;
  double real_odd = 0.0;
  double imag_even = 0.0;
  double imag_odd = 0.0;
};

struct ParityReport {
  int q = 0;
  double amplitude = 0.0;
  bool classified_even = false;
  ParityFractions pupil_field;
  ParityFractions transform;
  /// Transform energy fraction outside {real-even, imag-even} for even n,
  /// outside {real-even, real-odd} for odd n.
  double outside_fraction = 0.0;
};

/// Minimum amplitude at which odd-n sign pairs must be distinguishable.
inline constexpr double kDistinguishAmplitude = 0.5;
inline constexpr double kDistinguishThreshold = 1e-3;
inline constexpr double kDefaultTolerance = 1e-10;

/// Phase a * Z_q on the pupil grid.
PhaseScreen single_term_phase(int q, double amplitude, const imaging::Pupil& pupil);

std::pair<IntensityImage, IntensityImage> sign_pair_psf(int q, double amplitude, const imaging::Pupil& pupil);

ParityFractions parity_fractions(const Grid2D<std::complex<double>>& field);

ParityReport field_parity_decomposition(int q, double amplitude, const imaging::Pupil& pupil);

AmbiguityReport compare_pair(int q, double amplitude, const IntensityImage& plus, const IntensityImage& minus,
                             double tol = kDefaultTolerance);

/// One report per (q, amplitude), computed in parallel; output order is q-major.
std::vector<AmbiguityReport> verify_all(const std::vector<int>& q_range, const std::vector<double>& amplitudes,
                                        const imaging::Pupil& pupil, double tol = kDefaultTolerance);

/// Columns: q,n,m,amplitude,invariance_distance,l2_distance,classified_even,pass,reflection_distance
void write_csv(const std::filesystem::path& path, const std::vector<AmbiguityReport>& reports);

}  // namespace tpsf::ambiguity

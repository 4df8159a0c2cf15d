#pragma once

#include <complex>
#include <cstdint>
#include <filesystem>

#include "tpsf/grid.hpp"
#include "tpsf/zernike.hpp"

namespace tpsf::imaging {

/// Binary circular aperture centred on pixel (N/2, N/2); real and even.
struct Pupil {
  int grid_size = 0;
  int diameter_px = 0;
  Grid2D<unsigned char> mask;

  static Pupil circular(int grid_size, int diameter_px);
  static Pupil from_grid(const zernike::UnitDiskGrid& grid);
};

struct NoiseSpec {
  double peak_photons = 4000.0;
  double readout_sigma = 10.0;
  std::uint64_t seed = 0;

  static NoiseSpec low(std::uint64_t seed) { return {4000.0, 10.0, seed}; }
  static NoiseSpec high(std::uint64_t seed) { return {15000.0, 100.0, seed}; }
};

/// |DFT{p e^{j phi}}|^2, zero frequency moved to pixel (N/2, N/2), unit total energy.
IntensityImage psf(const Pupil& pupil, const PhaseScreen& phase);

/// Complex pupil-plane field p e^{j phi}.
Grid2D<std::complex<double>> pupil_field(const Pupil& pupil, const PhaseScreen& phase);

/// Circular convolution of an object with a centred PSF via the transform-domain
/// product. Negative round-off is clamped to zero. A delta at (N/2, N/2)
/// reproduces the PSF.
IntensityImage image_object(const IntensityImage& object, const IntensityImage& psf);

/// Scales the image maximum to noise.peak_photons, draws Poisson counts per
/// pixel and adds zero-mean Gaussian readout noise. The result is in
/// photoelectrons and may contain negative values from the readout term.
IntensityImage apply_noise(const IntensityImage& image, const NoiseSpec& noise);

/// Central side x side window; pixel N/2 of the input maps to pixel side/2.
IntensityImage center_crop(const IntensityImage& image, int side);

/// (x - min) / (max - min). Throws DegenerateInputError for a constant image.
IntensityImage min_max_normalize(const IntensityImage& image);

/// Unit pixel at (N/2, N/2).
IntensityImage point_object(int grid_size);
/// Zero-pads a small object into an N x N grid, centred on (N/2, N/2).
IntensityImage embed_object(const RealGrid& object, int grid_size);

double total_energy(const IntensityImage& image);

// Inspection exports. PGM is binary P5 with maxval 65535 (16-bit big-endian
// samples), the image min-max scaled onto [0, 65535]. CSV is one row per line.
void write_pgm(const std::filesystem::path& path, const IntensityImage& image);
void write_csv(const std::filesystem::path& path, const IntensityImage& image);

}  // namespace tpsf::imaging

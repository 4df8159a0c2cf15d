#include "tpsf/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <random>

#include "tpsf/fft.hpp"

namespace tpsf::imaging {

Pupil Pupil::circular(int grid_size, int diameter_px) {
  return from_grid(zernike::UnitDiskGrid(grid_size, diameter_px));
}

Pupil Pupil::from_grid(const zernike::UnitDiskGrid& grid) {
  return {grid.size(), grid.pupil_diameter_px(), grid.mask()};
}

Grid2D<std::complex<double>> pupil_field(const Pupil& pupil, const PhaseScreen& phase) {
  if (phase.data.side() != pupil.grid_size || pupil.mask.side() != pupil.grid_size) {
    throw ContractError("psf: phase grid and pupil grid differ in size");
  }
  fft::ComplexGrid field(pupil.grid_size);
  for (std::size_t i = 0; i < field.size(); ++i) {
    if (pupil.mask[i] != 0) field[i] = std::polar(1.0, phase.data[i]);
  }
  return field;
}

IntensityImage psf(const Pupil& pupil, const PhaseScreen& phase) {
  fft::ComplexGrid field = pupil_field(pupil, phase);
  fft::forward(field);
  RealGrid power(pupil.grid_size);
  double total = 0.0;
  for (std::size_t i = 0; i < field.size(); ++i) {
    power[i] = std::norm(field[i]);
    total += power[i];
  }
  if (!(total > 0.0)) throw DegenerateInputError("psf: empty pupil");
  for (double& v : power.values()) v /= total;
  return {fft::fftshift(power)};
}

IntensityImage image_object(const IntensityImage& object, const IntensityImage& kernel) {
  const int n = object.pixels_per_side();
  if (kernel.pixels_per_side() != n) throw ContractError("image_object: object and PSF sizes differ");
  fft::ComplexGrid obj(n), ker(n);
  const RealGrid centred = fft::ifftshift(kernel.data);
  for (std::size_t i = 0; i < obj.size(); ++i) {
    obj[i] = object.data[i];
    ker[i] = centred[i];
  }
  fft::forward(obj);
  fft::forward(ker);
  for (std::size_t i = 0; i < obj.size(); ++i) obj[i] *= ker[i];
  fft::inverse(obj);
  const double scale = 1.0 / (static_cast<double>(n) * n);
  IntensityImage out{RealGrid(n)};
  for (std::size_t i = 0; i < obj.size(); ++i) out.data[i] = std::max(0.0, obj[i].real() * scale);
  return out;
}

IntensityImage apply_noise(const IntensityImage& image, const NoiseSpec& noise) {
  if (!(noise.peak_photons > 0.0) || !(noise.readout_sigma >= 0.0)) {
    throw ConfigError("noise spec needs peak_photons > 0 and readout_sigma >= 0");
  }
  const auto values = image.data.values();
  const double peak = values.empty() ? 0.0 : *std::max_element(values.begin(), values.end());
  if (!(peak > 0.0)) throw ContractError("apply_noise: image maximum must be positive");
  const double scale = noise.peak_photons / peak;

  std::mt19937_64 rng(noise.seed);
  std::normal_distribution<double> readout(0.0, noise.readout_sigma > 0.0 ? noise.readout_sigma : 1.0);
  IntensityImage out{RealGrid(image.pixels_per_side())};
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double mean = std::max(0.0, values[i] * scale);
    double counts = 0.0;
    if (mean > 0.0) {
      std::poisson_distribution<long long> shot(mean);
      counts = static_cast<double>(shot(rng));
    }
    const double read = readout(rng);
    out.data[i] = counts + (noise.readout_sigma > 0.0 ? read : 0.0);
  }
  return out;
}

IntensityImage center_crop(const IntensityImage& image, int side) {
  const int n = image.pixels_per_side();
  if (side <= 0 || side > n) {
    throw DomainError("center_crop: side " + std::to_string(side) + " not in (0, " + std::to_string(n) + "]");
  }
  const int start = n / 2 - side / 2;
  IntensityImage out{RealGrid(side)};
  for (int r = 0; r < side; ++r) {
    for (int c = 0; c < side; ++c) out.data(r, c) = image.data(start + r, start + c);
  }
  return out;
}

IntensityImage min_max_normalize(const IntensityImage& image) {
  const auto values = image.data.values();
  if (values.empty()) throw DegenerateInputError("min_max_normalize: empty image");
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double min = *lo;
  const double range = *hi - min;
  if (!(range > 0.0)) throw DegenerateInputError("min_max_normalize: constant image");
  IntensityImage out{RealGrid(image.pixels_per_side())};
  for (std::size_t i = 0; i < values.size(); ++i) out.data[i] = (values[i] - min) / range;
  return out;
}

IntensityImage point_object(int grid_size) {
  IntensityImage out{RealGrid(grid_size)};
  out.data(grid_size / 2, grid_size / 2) = 1.0;
  return out;
}

IntensityImage embed_object(const RealGrid& object, int grid_size) {
  const int s = object.side();
  if (s > grid_size) throw ContractError("embed_object: object larger than the grid");
  IntensityImage out{RealGrid(grid_size)};
  const int start = grid_size / 2 - s / 2;
  for (int r = 0; r < s; ++r) {
    for (int c = 0; c < s; ++c) out.data(start + r, start + c) = object(r, c);
  }
  return out;
}

double total_energy(const IntensityImage& image) {
  double sum = 0.0;
  for (double v : image.data.values()) sum += v;
  return sum;
}

void write_pgm(const std::filesystem::path& path, const IntensityImage& image) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  const int n = image.pixels_per_side();
  os << "P5\n" << n << ' ' << n << "\n65535\n";
  const auto values = image.data.values();
  double lo = 0.0, hi = 0.0;
  if (!values.empty()) {
    const auto [a, b] = std::minmax_element(values.begin(), values.end());
    lo = *a;
    hi = *b;
  }
  const double range = hi > lo ? hi - lo : 1.0;
  for (double v : values) {
    const auto s = static_cast<std::uint16_t>(std::lround(std::clamp((v - lo) / range, 0.0, 1.0) * 65535.0));
    const char bytes[2] = {static_cast<char>(s >> 8), static_cast<char>(s & 0xFF)};
    os.write(bytes, 2);
  }
  if (!os) throw IoError("write failed: " + path.string());
}

void write_csv(const std::filesystem::path& path, const IntensityImage& image) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  const int n = image.pixels_per_side();
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) os << (c ? "," : "") << image.data(r, c);
    os << '\n';
  }
  if (!os) throw IoError("write failed: " + path.string());
}

}  // namespace tpsf::imaging

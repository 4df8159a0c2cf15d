#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "tpsf/errors.hpp"

namespace tpsf {

/// Square, row-major grid of values.
template <typename T>
class Grid2D {
 public:
  Grid2D() = default;
  explicit Grid2D(int side, T fill = T{}) : side_(side), data_(checked_area(side), fill) {}
  Grid2D(int side, std::vector<T> values) : side_(side), data_(std::move(values)) {
    if (data_.size() != checked_area(side)) {
      throw ContractError("Grid2D: value count does not match side*side");
    }
  }

  int side() const noexcept { return side_; }
  std::size_t size() const noexcept { return data_.size(); }

  T& operator()(int row, int col) noexcept { return data_[index(row, col)]; }
  const T& operator()(int row, int col) const noexcept { return data_[index(row, col)]; }
  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }
  std::vector<T>& storage() noexcept { return data_; }
  const std::vector<T>& storage() const noexcept { return data_; }

  bool operator==(const Grid2D&) const = default;

 private:
  static std::size_t checked_area(int side) {
    if (side < 0) throw ContractError("Grid2D: negative side");
    return static_cast<std::size_t>(side) * static_cast<std::size_t>(side);
  }
  std::size_t index(int row, int col) const noexcept {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(side_) + static_cast<std::size_t>(col);
  }

  int side_ = 0;
  std::vector<T> data_;
};

using RealGrid = Grid2D<double>;

/// Point reflection about pixel (N/2, N/2): (r, c) -> ((N - r) mod N, (N - c) mod N).
/// On an even grid this is the same map as index negation in the DFT.
template <typename T>
Grid2D<T> point_reflect(const Grid2D<T>& g) {
  const int n = g.side();
  Grid2D<T> out(n);
  for (int r = 0; r < n; ++r) {
    const int rr = (n - r) % n;
    for (int c = 0; c < n; ++c) out(rr, (n - c) % n) = g(r, c);
  }
  return out;
}

/// Parameters of a Kolmogorov phase screen.
struct ScreenSpec {
  int grid_size = 512;
  /// Pupil diameter in pixels; the sample spacing is pupil_diameter_m / pupil_px.
  int pupil_px = 256;
  double pupil_diameter_m = 0.4;
  double fried_parameter_m = 0.08;
  double wavelength_m = 0.5e-6;
  std::uint64_t seed = 0;

  double d_over_r0() const { return pupil_diameter_m / fried_parameter_m; }
  double pixel_scale_m() const { return pupil_diameter_m / pupil_px; }
  /// Throws ConfigError when any field is out of range.
  void validate() const;

  static ScreenSpec from_ratio(double d_over_r0, std::uint64_t seed, int grid_size = 512, int pupil_px = 256);
};

/// Real phase values in radians on a square grid.
struct PhaseScreen {
  RealGrid data;
  std::optional<ScreenSpec> spec;
};

/// Non-negative intensity samples on a square grid.
struct IntensityImage {
  RealGrid data;
  int pixels_per_side() const noexcept { return data.side(); }
};

}  // namespace tpsf

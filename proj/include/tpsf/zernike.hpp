#pragma once

// Zernike polynomials in the unnormalized OSA/ANSI convention:
//   Z_n^m(rho, phi) = R_n^|m|(rho) cos(m phi)   m >= 0
//                   = R_n^|m|(rho) sin(m phi)   m <  0
// with single index q = (n(n+2) + m) / 2.

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "tpsf/grid.hpp"

namespace tpsf::zernike {

/// Number of modes carried through the pipeline (q = 0..27, radial orders 0..6).
inline constexpr int kNumModes = 28;
/// Piston, tip and tilt are zeroed in the modified set.
inline constexpr int kFirstPredicted = 3;
inline constexpr int kNumPredicted = kNumModes - kFirstPredicted;

struct ZernikeIndex {
  int q = 0;
  int n = 0;
  int m = 0;

  static ZernikeIndex from_nm(int n, int m);
  static ZernikeIndex from_q(int q);
  bool operator==(const ZernikeIndex&) const = default;
};

/// q = (n(n+2)+m)/2. Throws IndexingError unless n >= |m| and n - |m| is even.
int single_index(int n, int m);

struct RadialAngular {
  int n;
  int m;
};
/// Inverse of single_index. Throws IndexingError for q < 0.
RadialAngular double_index(int q);

/// R_n^{|m|}(rho); zero when n - |m| is odd. Throws DomainError for rho outside [0, 1].
double radial_poly(int n, int m_abs, double rho);

/// Z_q at polar coordinates on the unit disk.
double evaluate(const ZernikeIndex& index, double rho, double phi);

/// Even radial order. n and m share parity so this also means even m.
bool is_angularly_even(int q);

/// Ordered Zernike coefficients a_q in radians.
class CoefficientSet {
 public:
  CoefficientSet() : values_(kNumModes, 0.0) {}
  explicit CoefficientSet(std::vector<double> values, bool modified = false);

  std::size_t size() const noexcept { return values_.size(); }
  bool modified() const noexcept { return modified_; }
  double operator[](std::size_t q) const { return values_.at(q); }
  const std::vector<double>& values() const noexcept { return values_; }

  /// Returns a_3..a_{Q-1}; the network label for a 28-mode set.
  std::vector<double> predicted_terms() const;

 private:
  std::vector<double> values_;
  bool modified_ = false;
};

/// Zeroes piston/tip/tilt and replaces every even-n coefficient with its absolute value.
/// Throws ContractError when the input is already modified.
CoefficientSet modify(const CoefficientSet& coeffs);

/// Pixel sampling of the unit disk on an N x N grid.
///
/// The pupil centre sits on pixel (N/2, N/2) and rho = r / (d/2). A pixel is
/// masked in when rho <= 1 and its point reflection (N - row, N - col) is also
/// on the grid, so the mask is exactly point-symmetric.
class UnitDiskGrid {
 public:
  UnitDiskGrid(int size, int pupil_diameter_px);

  int size() const noexcept { return size_; }
  int pupil_diameter_px() const noexcept { return diameter_; }
  std::size_t count() const noexcept { return pixels_.size(); }

  /// Flat row-major indices of the masked-in pixels, in increasing order.
  const std::vector<std::size_t>& pixels() const noexcept { return pixels_; }
  const std::vector<double>& rho() const noexcept { return rho_; }
  const std::vector<double>& phi() const noexcept { return phi_; }
  const Grid2D<unsigned char>& mask() const noexcept { return mask_; }

 private:
  int size_;
  int diameter_;
  std::vector<std::size_t> pixels_;
  std::vector<double> rho_;
  std::vector<double> phi_;
  Grid2D<unsigned char> mask_;
};

/// Column q holds Z_q sampled on the masked-in pixels of the grid.
Eigen::MatrixXd basis_matrix(int num_modes, const UnitDiskGrid& grid);

/// Weighted sum of Zernike terms; zero outside the pupil.
PhaseScreen synthesize_phase(const CoefficientSet& coeffs, const UnitDiskGrid& grid);
/// Same, with a precomputed basis (rows = grid.count(), cols = coeffs.size()).
PhaseScreen synthesize_phase(const CoefficientSet& coeffs, const UnitDiskGrid& grid, const Eigen::MatrixXd& basis);

}  // namespace tpsf::zernike

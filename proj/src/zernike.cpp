#include "tpsf/zernike.hpp"

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <string>

namespace tpsf::zernike {

namespace {

constexpr int kExactFactorialLimit = 20;

std::uint64_t factorial_u64(int n) {
  std::uint64_t f = 1;
  for (int i = 2; i <= n; ++i) f *= static_cast<std::uint64_t>(i);
  return f;
}

double binomial(int n, int k) {
  double b = 1.0;
  for (int i = 1; i <= k; ++i) b = b * (n - k + i) / i;
  return b;
}

// |(n-p)! / (p! ((n+m)/2-p)! ((n-m)/2-p)!)|, a multinomial coefficient.
double radial_term_magnitude(int n, int m_abs, int p) {
  const int k = (n + m_abs) / 2 - p;
  const int l = (n - m_abs) / 2 - p;
  if (n <= kExactFactorialLimit) {
    // Sequential division stays exact: every intermediate is itself a multinomial.
    std::uint64_t v = factorial_u64(n - p);
    v /= factorial_u64(p);
    v /= factorial_u64(k);
    v /= factorial_u64(l);
    return static_cast<double>(v);
  }
  return binomial(n - p, p) * binomial(n - 2 * p, k);
}

void check_pair(int n, int m) {
  if (n < 0 || std::abs(m) > n || (n - std::abs(m)) % 2 != 0) {
    throw IndexingError("invalid Zernike pair (n=" + std::to_string(n) + ", m=" + std::to_string(m) + ")");
  }
}

}  // namespace

ZernikeIndex ZernikeIndex::from_nm(int n, int m) { return {single_index(n, m), n, m}; }

ZernikeIndex ZernikeIndex::from_q(int q) {
  const auto [n, m] = double_index(q);
  return {q, n, m};
}

int single_index(int n, int m) {
  check_pair(n, m);
  return (n * (n + 2) + m) / 2;
}

RadialAngular double_index(int q) {
  if (q < 0) throw IndexingError("negative Zernike index " + std::to_string(q));
  // Row n of the pyramid holds q in [n(n+1)/2, n(n+1)/2 + n].
  int n = static_cast<int>((std::sqrt(8.0 * q + 1.0) - 1.0) / 2.0);
  while (n * (n + 1) / 2 > q) --n;
  while ((n + 1) * (n + 2) / 2 <= q) ++n;
  const int m = 2 * q - n * (n + 2);
  return {n, m};
}

double radial_poly(int n, int m_abs, double rho) {
  if (!(rho >= 0.0 && rho <= 1.0)) {
    throw DomainError("radial_poly: rho=" + std::to_string(rho) + " outside [0, 1]");
  }
  if (n < 0 || m_abs < 0 || m_abs > n) {
    throw IndexingError("radial_poly: invalid (n=" + std::to_string(n) + ", |m|=" + std::to_string(m_abs) + ")");
  }
  if ((n - m_abs) % 2 != 0) return 0.0;

  double sum = 0.0;
  const int terms = (n - m_abs) / 2;
  for (int p = 0; p <= terms; ++p) {
    const double c = radial_term_magnitude(n, m_abs, p);
    const double term = c * std::pow(rho, n - 2 * p);
    sum += (p % 2 == 0) ? term : -term;
  }
  return sum;
}

double evaluate(const ZernikeIndex& index, double rho, double phi) {
  const double r = radial_poly(index.n, std::abs(index.m), rho);
  return index.m >= 0 ? r * std::cos(index.m * phi) : r * std::sin(index.m * phi);
}

bool is_angularly_even(int q) { return double_index(q).n % 2 == 0; }

CoefficientSet::CoefficientSet(std::vector<double> values, bool modified)
    : values_(std::move(values)), modified_(modified) {
  if (values_.empty()) throw ContractError("CoefficientSet: empty coefficient list");
  if (modified_) {
    if (values_.size() < kFirstPredicted) throw ContractError("CoefficientSet: modified set needs q = 0..2");
    for (int q = 0; q < kFirstPredicted; ++q) {
      if (values_[q] != 0.0) throw ContractError("CoefficientSet: modified set has nonzero piston/tip/tilt");
    }
    for (std::size_t q = 0; q < values_.size(); ++q) {
      if (is_angularly_even(static_cast<int>(q)) && values_[q] < 0.0) {
        throw ContractError("CoefficientSet: modified set has negative even-n coefficient at q=" + std::to_string(q));
      }
    }
  }
}

std::vector<double> CoefficientSet::predicted_terms() const {
  if (values_.size() <= kFirstPredicted) return {};
  return {values_.begin() + kFirstPredicted, values_.end()};
}

CoefficientSet modify(const CoefficientSet& coeffs) {
  if (coeffs.modified()) throw ContractError("modify: coefficient set is already modified");
  std::vector<double> v = coeffs.values();
  for (std::size_t q = 0; q < v.size(); ++q) {
    if (q < kFirstPredicted) {
      v[q] = 0.0;
    } else if (is_angularly_even(static_cast<int>(q))) {
      v[q] = std::abs(v[q]);
    }
  }
  return CoefficientSet(std::move(v), true);
}

UnitDiskGrid::UnitDiskGrid(int size, int pupil_diameter_px)
    : size_(size), diameter_(pupil_diameter_px), mask_(size > 0 ? size : 0, 0) {
  if (size <= 0 || pupil_diameter_px <= 0 || pupil_diameter_px > size) {
    throw ConfigError("UnitDiskGrid: need 0 < pupil diameter <= grid size (got d=" +
                      std::to_string(pupil_diameter_px) + ", N=" + std::to_string(size) + ")");
  }
  const int centre = size / 2;
  const double radius = 0.5 * pupil_diameter_px;
  for (int row = 0; row < size; ++row) {
    for (int col = 0; col < size; ++col) {
      const int dy = centre - row;  // y up
      const int dx = col - centre;
      const bool reflectable = (row == 0 ? centre == 0 : true) && (col == 0 ? centre == 0 : true);
      if (!reflectable) continue;
      const double rho = std::hypot(static_cast<double>(dx), static_cast<double>(dy)) / radius;
      if (rho > 1.0) continue;
      pixels_.push_back(static_cast<std::size_t>(row) * size + col);
      rho_.push_back(rho);
      phi_.push_back(std::atan2(static_cast<double>(dy), static_cast<double>(dx)));
      mask_(row, col) = 1;
    }
  }
}

Eigen::MatrixXd basis_matrix(int num_modes, const UnitDiskGrid& grid) {
  if (num_modes < 1) throw ContractError("basis_matrix: need at least one mode");
  const auto rows = static_cast<Eigen::Index>(grid.count());
  Eigen::MatrixXd b(rows, num_modes);
  for (int q = 0; q < num_modes; ++q) {
    const ZernikeIndex idx = ZernikeIndex::from_q(q);
    for (Eigen::Index i = 0; i < rows; ++i) {
      b(i, q) = evaluate(idx, grid.rho()[i], grid.phi()[i]);
    }
  }
  return b;
}

PhaseScreen synthesize_phase(const CoefficientSet& coeffs, const UnitDiskGrid& grid) {
  return synthesize_phase(coeffs, grid, basis_matrix(static_cast<int>(coeffs.size()), grid));
}

PhaseScreen synthesize_phase(const CoefficientSet& coeffs, const UnitDiskGrid& grid, const Eigen::MatrixXd& basis) {
  if (basis.cols() != static_cast<Eigen::Index>(coeffs.size()) ||
      basis.rows() != static_cast<Eigen::Index>(grid.count())) {
    throw ContractError("synthesize_phase: basis shape does not match coefficients/grid");
  }
  const Eigen::Map<const Eigen::VectorXd> a(coeffs.values().data(), static_cast<Eigen::Index>(coeffs.size()));
  const Eigen::VectorXd samples = basis * a;
  PhaseScreen out{RealGrid(grid.size()), std::nullopt};
  const auto& px = grid.pixels();
  for (std::size_t i = 0; i < px.size(); ++i) out.data[px[i]] = samples[static_cast<Eigen::Index>(i)];
  return out;
}

}  // namespace tpsf::zernike

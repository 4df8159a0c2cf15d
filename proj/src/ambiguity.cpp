#include "tpsf/ambiguity.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>

#include "tpsf/fft.hpp"

namespace tpsf::ambiguity {

namespace {

double max_abs_diff(const RealGrid& a, const RealGrid& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

}  // namespace

PhaseScreen single_term_phase(int q, double amplitude, const imaging::Pupil& pupil) {
  if (q < 0) throw IndexingError("single_term_phase: negative index");
  if (!std::isfinite(amplitude)) throw DomainError("single_term_phase: amplitude must be finite");
  const zernike::UnitDiskGrid grid(pupil.grid_size, pupil.diameter_px);
  const zernike::ZernikeIndex idx = zernike::ZernikeIndex::from_q(q);
  PhaseScreen phase{RealGrid(pupil.grid_size), std::nullopt};
  const auto& px = grid.pixels();
  for (std::size_t i = 0; i < px.size(); ++i) {
    phase.data[px[i]] = amplitude * zernike::evaluate(idx, grid.rho()[i], grid.phi()[i]);
  }
  return phase;
}

std::pair<IntensityImage, IntensityImage> sign_pair_psf(int q, double amplitude, const imaging::Pupil& pupil) {
  PhaseScreen plus = single_term_phase(q, amplitude, pupil);
  PhaseScreen minus = plus;
  for (double& v : minus.data.values()) v = -v;
  return {imaging::psf(pupil, plus), imaging::psf(pupil, minus)};
}

ParityFractions parity_fractions(const Grid2D<std::complex<double>>& field) {
  // Even/odd parts by averaging with the point-reflected copy.
  const auto reflected = point_reflect(field);
  ParityFractions f;
  double total = 0.0;
  for (std::size_t i = 0; i < field.size(); ++i) {
    const std::complex<double> even = 0.5 * (field[i] + reflected[i]);
    const std::complex<double> odd = 0.5 * (field[i] - reflected[i]);
    f.real_even += even.real() * even.real();
    f.imag_even += even.imag() * even.imag();
    f.real_odd += odd.real() * odd.real();
    f.imag_odd += odd.imag() * odd.imag();
    total += std::norm(field[i]);
  }
  if (total > 0.0) {
    f.real_even /= total;
    f.real_odd /= total;
    f.imag_even /= total;
    f.imag_odd /= total;
  }
  return f;
}

ParityReport field_parity_decomposition(int q, double amplitude, const imaging::Pupil& pupil) {
  const PhaseScreen phase = single_term_phase(q, amplitude, pupil);
  auto field = imaging::pupil_field(pupil, phase);
  ParityReport r;
  r.q = q;
  r.amplitude = amplitude;
  r.classified_even = zernike::is_angularly_even(q);
  r.pupil_field = parity_fractions(field);
  fft::forward(field);
  r.transform = parity_fractions(field);
  r.outside_fraction = r.classified_even ? r.transform.real_odd + r.transform.imag_odd
                                         : r.transform.imag_even + r.transform.imag_odd;
  return r;
}

AmbiguityReport compare_pair(int q, double amplitude, const IntensityImage& plus, const IntensityImage& minus,
                             double tol) {
  AmbiguityReport r;
  r.q = q;
  const auto [n, m] = zernike::double_index(q);
  r.n = n;
  r.m = m;
  r.amplitude = amplitude;
  r.classified_even = zernike::is_angularly_even(q);
  r.invariance_distance = max_abs_diff(plus.data, minus.data);
  double diff2 = 0.0, norm2 = 0.0;
  for (std::size_t i = 0; i < plus.data.size(); ++i) {
    const double d = plus.data[i] - minus.data[i];
    diff2 += d * d;
    norm2 += plus.data[i] * plus.data[i];
  }
  r.l2_distance = norm2 > 0.0 ? std::sqrt(diff2 / norm2) : 0.0;
  r.reflection_distance = max_abs_diff(point_reflect(plus.data), minus.data);
  if (r.classified_even) {
    r.pass = r.invariance_distance <= tol;
  } else {
    r.pass = r.reflection_distance <= tol &&
             (std::abs(amplitude) < kDistinguishAmplitude || r.l2_distance > kDistinguishThreshold);
  }
  return r;
}

std::vector<AmbiguityReport> verify_all(const std::vector<int>& q_range, const std::vector<double>& amplitudes,
                                        const imaging::Pupil& pupil, double tol) {
  if (q_range.empty() || amplitudes.empty()) throw ConfigError("verify_all: empty q or amplitude list");
  const auto total = static_cast<long>(q_range.size() * amplitudes.size());
  std::vector<AmbiguityReport> reports(static_cast<std::size_t>(total));
#pragma omp parallel for schedule(dynamic)
  for (long k = 0; k < total; ++k) {
    const int q = q_range[static_cast<std::size_t>(k) / amplitudes.size()];
    const double a = amplitudes[static_cast<std::size_t>(k) % amplitudes.size()];
    const auto [plus, minus] = sign_pair_psf(q, a, pupil);
    reports[static_cast<std::size_t>(k)] = compare_pair(q, a, plus, minus, tol);
  }
  return reports;
}

void write_csv(const std::filesystem::path& path, const std::vector<AmbiguityReport>& reports) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << "q,n,m,amplitude,invariance_distance,l2_distance,classified_even,pass,reflection_distance\n";
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const auto& r : reports) {
    os << r.q << ',' << r.n << ',' << r.m << ',' << r.amplitude << ',' << r.invariance_distance << ','
       << r.l2_distance << ',' << (r.classified_even ? 1 : 0) << ',' << (r.pass ? 1 : 0) << ','
       << r.reflection_distance << '\n';
  }
  if (!os) throw IoError("write failed: " + path.string());
}

}  // namespace tpsf::ambiguity

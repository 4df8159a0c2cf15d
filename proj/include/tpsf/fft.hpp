#pragma once

#include <complex>
#include <vector>

#include "tpsf/grid.hpp"

namespace tpsf::fft {

using Complex = std::complex<double>;
using ComplexGrid = Grid2D<Complex>;

/// In-place 2D DFT, unnormalized, forward sign -1.
void forward(ComplexGrid& g);
/// In-place 2D inverse DFT, unnormalized (no 1/N^2), sign +1.
void inverse(ComplexGrid& g);

/// Moves index 0 to index N/2 along both axes (even N).
template <typename T>
Grid2D<T> fftshift(const Grid2D<T>& g) {
  const int n = g.side();
  const int h = n / 2;
  Grid2D<T> out(n);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) out((r + h) % n, (c + h) % n) = g(r, c);
  }
  return out;
}

template <typename T>
Grid2D<T> ifftshift(const Grid2D<T>& g) {
  const int n = g.side();
  const int h = n - n / 2;
  Grid2D<T> out(n);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) out((r + h) % n, (c + h) % n) = g(r, c);
  }
  return out;
}

bool is_power_of_two(int n);

}  // namespace tpsf::fft

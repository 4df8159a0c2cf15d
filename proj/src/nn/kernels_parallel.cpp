#include <algorithm>
#include <vector>

#include <Eigen/Core>

#include "tpsf/nn/kernels.hpp"

namespace tpsf::nn::parallel {

namespace {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

// Work is split into fixed-size blocks so the floating-point summation order
// does not depend on how many threads run.
constexpr int kRowBlock = 16;

// Rows are (channel, di, dj), columns are output pixels.
template <typename T>
void im2col(const T* x, Shape in, int k, T* col) {
  const int p = k / 2;
  const int H = in.h, W = in.w;
  for (int ci = 0; ci < in.c; ++ci) {
    for (int i = 0; i < k; ++i) {
      for (int j = 0; j < k; ++j) {
        T* row = col + (static_cast<std::size_t>((ci * k + i) * k + j)) * H * W;
        const int c0 = std::max(0, p - j);
        const int c1 = std::min(W, W + p - j);
        for (int r = 0; r < H; ++r) {
          T* dst = row + static_cast<std::size_t>(r) * W;
          const int rr = r + i - p;
          if (rr < 0 || rr >= H) {
            std::fill(dst, dst + W, T(0));
            continue;
          }
          const T* src = x + (static_cast<std::size_t>(ci) * H + rr) * W;
          std::fill(dst, dst + c0, T(0));
          for (int c = c0; c < c1; ++c) dst[c] = src[c + j - p];
          std::fill(dst + c1, dst + W, T(0));
        }
      }
    }
  }
}

}  // namespace

template <typename T>
void conv_forward(const T* x, int batch, Shape in, const T* w, const T* b, int cout, int k, T* y) {
  const int hw = in.h * in.w;
  const int ckk = in.c * k * k;
  const Eigen::Map<const Mat<T>> wm(w, cout, ckk);
  const Eigen::Map<const Vec<T>> bias(b, cout);
#pragma omp parallel
  {
    Mat<T> col(ckk, hw);
#pragma omp for schedule(static)
    for (int n = 0; n < batch; ++n) {
      im2col(x + static_cast<std::size_t>(n) * in.size(), in, k, col.data());
      Eigen::Map<Mat<T>> ym(y + static_cast<std::size_t>(n) * cout * hw, cout, hw);
      ym.noalias() = wm * col;
      ym.colwise() += bias;
    }
  }
}

// The input gradient is a same-size convolution of dy with the kernel
// transposed over channels and rotated by 180 degrees.
template <typename T>
void conv_backward(const T* x, int batch, Shape in, const T* w, int cout, int k, const T* dy, T* dx, T* dw, T* db) {
  const int hw = in.h * in.w;
  const int ckk = in.c * k * k;
  const int okk = cout * k * k;
  const std::size_t wsize = static_cast<std::size_t>(cout) * ckk;
  const Shape out_shape{cout, in.h, in.w};
  Mat<T> wflip(dx != nullptr ? in.c : 0, okk);
  if (dx != nullptr) {
    for (int o = 0; o < cout; ++o) {
      for (int ci = 0; ci < in.c; ++ci) {
        for (int i = 0; i < k; ++i) {
          for (int j = 0; j < k; ++j) {
            wflip(ci, (o * k + i) * k + j) = w[((o * in.c + ci) * k + (k - 1 - i)) * k + (k - 1 - j)];
          }
        }
      }
    }
  }
  std::vector<T> dw_part(static_cast<std::size_t>(batch) * wsize);
  std::vector<T> db_part(static_cast<std::size_t>(batch) * cout);
#pragma omp parallel
  {
    Mat<T> col(ckk, hw);
    Mat<T> gcol(dx != nullptr ? okk : 0, dx != nullptr ? hw : 0);
#pragma omp for schedule(static)
    for (int n = 0; n < batch; ++n) {
      const T* dyn = dy + static_cast<std::size_t>(n) * cout * hw;
      im2col(x + static_cast<std::size_t>(n) * in.size(), in, k, col.data());
      const Eigen::Map<const Mat<T>> g(dyn, cout, hw);
      Eigen::Map<Mat<T>> dwn(dw_part.data() + n * wsize, cout, ckk);
      dwn.noalias() = g * col.transpose();
      // Plain loop: Eigen's vectorized reductions peel by pointer alignment,
      // which would make the sum order depend on the allocation address.
      for (int o = 0; o < cout; ++o) {
        const T* row = dyn + static_cast<std::size_t>(o) * hw;
        T acc = 0;
        for (int i = 0; i < hw; ++i) acc += row[i];
        db_part[static_cast<std::size_t>(n) * cout + o] = acc;
      }
      if (dx != nullptr) {
        im2col(dyn, out_shape, k, gcol.data());
        Eigen::Map<Mat<T>>(dx + static_cast<std::size_t>(n) * in.size(), in.c, hw).noalias() = wflip * gcol;
      }
    }
    // Sum the per-sample partials in sample order.
#pragma omp for schedule(static)
    for (std::size_t i = 0; i < wsize; ++i) {
      T acc = 0;
      for (int n = 0; n < batch; ++n) acc += dw_part[n * wsize + i];
      dw[i] = acc;
    }
  }
  for (int o = 0; o < cout; ++o) {
    T acc = 0;
    for (int n = 0; n < batch; ++n) acc += db_part[static_cast<std::size_t>(n) * cout + o];
    db[o] = acc;
  }
}

template <typename T>
void maxpool_forward(const T* x, int batch, Shape in, int window, T* y) {
  const int oh = in.h / window, ow = in.w / window;
  const long planes = static_cast<long>(batch) * in.c;
#pragma omp parallel for schedule(static)
  for (long pl = 0; pl < planes; ++pl) {
    const T* xs = x + pl * in.h * in.w;
    T* ys = y + pl * oh * ow;
    for (int r = 0; r < oh; ++r) {
      for (int c = 0; c < ow; ++c) {
        T best = xs[(r * window) * in.w + c * window];
        for (int i = 0; i < window; ++i) {
          const T* src = xs + (r * window + i) * in.w + c * window;
          for (int j = 0; j < window; ++j) best = std::max(best, src[j]);
        }
        ys[r * ow + c] = best;
      }
    }
  }
}

template <typename T>
void maxpool_backward(const T* x, int batch, Shape in, int window, const T* dy, T* dx) {
  const int oh = in.h / window, ow = in.w / window;
  const long planes = static_cast<long>(batch) * in.c;
#pragma omp parallel for schedule(static)
  for (long pl = 0; pl < planes; ++pl) {
    const T* xs = x + pl * in.h * in.w;
    T* dxs = dx + pl * in.h * in.w;
    const T* dys = dy + pl * oh * ow;
    std::fill(dxs, dxs + in.h * in.w, T(0));
    for (int r = 0; r < oh; ++r) {
      for (int c = 0; c < ow; ++c) {
        int arg = (r * window) * in.w + c * window;
        for (int i = 0; i < window; ++i) {
          for (int j = 0; j < window; ++j) {
            const int idx = (r * window + i) * in.w + c * window + j;
            if (xs[idx] > xs[arg]) arg = idx;
          }
        }
        dxs[arg] += dys[r * ow + c];
      }
    }
  }
}

template <typename T>
void dense_forward(const T* x, int batch, int in, const T* w, const T* b, int out, T* y) {
  const Eigen::Map<const Mat<T>> wm(w, out, in);
  const Eigen::Map<const Vec<T>> bias(b, out);
  const int blocks = (batch + kRowBlock - 1) / kRowBlock;
#pragma omp parallel for schedule(static)
  for (int blk = 0; blk < blocks; ++blk) {
    const int n0 = blk * kRowBlock;
    const int rows = std::min(kRowBlock, batch - n0);
    const Eigen::Map<const Mat<T>> xm(x + static_cast<std::size_t>(n0) * in, rows, in);
    Eigen::Map<Mat<T>> ym(y + static_cast<std::size_t>(n0) * out, rows, out);
    ym.noalias() = xm * wm.transpose();
    ym.rowwise() += bias.transpose();
  }
}

template <typename T>
void dense_backward(const T* x, int batch, int in, const T* w, int out, const T* dy, T* dx, T* dw, T* db) {
  const Eigen::Map<const Mat<T>> wm(w, out, in);
  const Eigen::Map<const Mat<T>> xm(x, batch, in);
  const Eigen::Map<const Mat<T>> gm(dy, batch, out);
  const int out_blocks = (out + kRowBlock - 1) / kRowBlock;
  const int batch_blocks = (batch + kRowBlock - 1) / kRowBlock;
#pragma omp parallel
  {
#pragma omp for schedule(static) nowait
    for (int blk = 0; blk < out_blocks; ++blk) {
      const int o0 = blk * kRowBlock;
      const int rows = std::min(kRowBlock, out - o0);
      Eigen::Map<Mat<T>> dwm(dw + static_cast<std::size_t>(o0) * in, rows, in);
      dwm.noalias() = gm.middleCols(o0, rows).transpose() * xm;
      for (int o = o0; o < o0 + rows; ++o) {
        T acc = 0;
        for (int n = 0; n < batch; ++n) acc += dy[static_cast<std::size_t>(n) * out + o];
        db[o] = acc;
      }
    }
    if (dx != nullptr) {
#pragma omp for schedule(static)
      for (int blk = 0; blk < batch_blocks; ++blk) {
        const int n0 = blk * kRowBlock;
        const int rows = std::min(kRowBlock, batch - n0);
        Eigen::Map<Mat<T>> dxm(dx + static_cast<std::size_t>(n0) * in, rows, in);
        dxm.noalias() = gm.middleRows(n0, rows) * wm;
      }
    }
  }
}

template <typename T>
void relu_forward(const T* x, std::size_t n, T* y) {
#pragma omp parallel for simd schedule(static)
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
}

template <typename T>
void relu_backward(const T* y, const T* dy, std::size_t n, T* dx) {
#pragma omp parallel for simd schedule(static)
  for (std::size_t i = 0; i < n; ++i) dx[i] = y[i] > T(0) ? dy[i] : T(0);
}

#define TPSF_INSTANTIATE(T)                                                                                   \
  template void conv_forward<T>(const T*, int, Shape, const T*, const T*, int, int, T*);                     \
  template void conv_backward<T>(const T*, int, Shape, const T*, int, int, const T*, T*, T*, T*);            \
  template void maxpool_forward<T>(const T*, int, Shape, int, T*);                                            \
  template void maxpool_backward<T>(const T*, int, Shape, int, const T*, T*);                                 \
  template void dense_forward<T>(const T*, int, int, const T*, const T*, int, T*);                           \
  template void dense_backward<T>(const T*, int, int, const T*, int, const T*, T*, T*, T*);                  \
  template void relu_forward<T>(const T*, std::size_t, T*);                                                   \
  template void relu_backward<T>(const T*, const T*, std::size_t, T*);

TPSF_INSTANTIATE(float)
TPSF_INSTANTIATE(double)
#undef TPSF_INSTANTIATE

}  // namespace tpsf::nn::parallel

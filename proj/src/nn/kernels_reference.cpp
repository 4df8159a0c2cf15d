#include <algorithm>
#include <cstring>

#include "tpsf/nn/kernels.hpp"

namespace tpsf::nn::reference {

template <typename T>
void conv_forward(const T* x, int batch, Shape in, const T* w, const T* b, int cout, int k, T* y) {
  const int p = k / 2;
  const int H = in.h, W = in.w, C = in.c;
  for (int n = 0; n < batch; ++n) {
    const T* xs = x + static_cast<std::size_t>(n) * in.size();
    T* ys = y + static_cast<std::size_t>(n) * cout * H * W;
    for (int o = 0; o < cout; ++o) {
      for (int r = 0; r < H; ++r) {
        for (int c = 0; c < W; ++c) {
          T acc = b[o];
          for (int ci = 0; ci < C; ++ci) {
            for (int i = 0; i < k; ++i) {
              const int rr = r + i - p;
              if (rr < 0 || rr >= H) continue;
              for (int j = 0; j < k; ++j) {
                const int cc = c + j - p;
                if (cc < 0 || cc >= W) continue;
                acc += w[((o * C + ci) * k + i) * k + j] * xs[(ci * H + rr) * W + cc];
              }
            }
          }
          ys[(o * H + r) * W + c] = acc;
        }
      }
    }
  }
}

template <typename T>
void conv_backward(const T* x, int batch, Shape in, const T* w, int cout, int k, const T* dy, T* dx, T* dw, T* db) {
  const int p = k / 2;
  const int H = in.h, W = in.w, C = in.c;
  std::fill(dw, dw + static_cast<std::size_t>(cout) * C * k * k, T(0));
  std::fill(db, db + cout, T(0));
  if (dx != nullptr) std::fill(dx, dx + static_cast<std::size_t>(batch) * in.size(), T(0));
  for (int n = 0; n < batch; ++n) {
    const T* xs = x + static_cast<std::size_t>(n) * in.size();
    const T* dys = dy + static_cast<std::size_t>(n) * cout * H * W;
    T* dxs = dx != nullptr ? dx + static_cast<std::size_t>(n) * in.size() : nullptr;
    for (int o = 0; o < cout; ++o) {
      for (int r = 0; r < H; ++r) {
        for (int c = 0; c < W; ++c) {
          const T g = dys[(o * H + r) * W + c];
          db[o] += g;
          for (int ci = 0; ci < C; ++ci) {
            for (int i = 0; i < k; ++i) {
              const int rr = r + i - p;
              if (rr < 0 || rr >= H) continue;
              for (int j = 0; j < k; ++j) {
                const int cc = c + j - p;
                if (cc < 0 || cc >= W) continue;
                const std::size_t wi = static_cast<std::size_t>(((o * C + ci) * k + i) * k + j);
                const std::size_t xi = static_cast<std::size_t>((ci * H + rr) * W + cc);
                dw[wi] += g * xs[xi];
                if (dxs != nullptr) dxs[xi] += g * w[wi];
              }
            }
          }
        }
      }
    }
  }
}

template <typename T>
void maxpool_forward(const T* x, int batch, Shape in, int window, T* y) {
  const int oh = in.h / window, ow = in.w / window;
  for (int n = 0; n < batch; ++n) {
    for (int ch = 0; ch < in.c; ++ch) {
      const T* xs = x + (static_cast<std::size_t>(n) * in.c + ch) * in.h * in.w;
      T* ys = y + (static_cast<std::size_t>(n) * in.c + ch) * oh * ow;
      for (int r = 0; r < oh; ++r) {
        for (int c = 0; c < ow; ++c) {
          T best = xs[(r * window) * in.w + c * window];
          for (int i = 0; i < window; ++i) {
            for (int j = 0; j < window; ++j) best = std::max(best, xs[(r * window + i) * in.w + c * window + j]);
          }
          ys[r * ow + c] = best;
        }
      }
    }
  }
}

// The gradient goes to the first maximal element of each window in row-major order.
template <typename T>
void maxpool_backward(const T* x, int batch, Shape in, int window, const T* dy, T* dx) {
  const int oh = in.h / window, ow = in.w / window;
  std::fill(dx, dx + static_cast<std::size_t>(batch) * in.size(), T(0));
  for (int n = 0; n < batch; ++n) {
    for (int ch = 0; ch < in.c; ++ch) {
      const std::size_t plane = (static_cast<std::size_t>(n) * in.c + ch);
      const T* xs = x + plane * in.h * in.w;
      T* dxs = dx + plane * in.h * in.w;
      const T* dys = dy + plane * oh * ow;
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
}

template <typename T>
void dense_forward(const T* x, int batch, int in, const T* w, const T* b, int out, T* y) {
  for (int n = 0; n < batch; ++n) {
    for (int o = 0; o < out; ++o) {
      T acc = b[o];
      for (int i = 0; i < in; ++i) acc += w[static_cast<std::size_t>(o) * in + i] * x[static_cast<std::size_t>(n) * in + i];
      y[static_cast<std::size_t>(n) * out + o] = acc;
    }
  }
}

template <typename T>
void dense_backward(const T* x, int batch, int in, const T* w, int out, const T* dy, T* dx, T* dw, T* db) {
  std::fill(dw, dw + static_cast<std::size_t>(out) * in, T(0));
  std::fill(db, db + out, T(0));
  if (dx != nullptr) std::fill(dx, dx + static_cast<std::size_t>(batch) * in, T(0));
  for (int n = 0; n < batch; ++n) {
    for (int o = 0; o < out; ++o) {
      const T g = dy[static_cast<std::size_t>(n) * out + o];
      db[o] += g;
      for (int i = 0; i < in; ++i) {
        dw[static_cast<std::size_t>(o) * in + i] += g * x[static_cast<std::size_t>(n) * in + i];
        if (dx != nullptr) dx[static_cast<std::size_t>(n) * in + i] += g * w[static_cast<std::size_t>(o) * in + i];
      }
    }
  }
}

template <typename T>
void relu_forward(const T* x, std::size_t n, T* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
}

template <typename T>
void relu_backward(const T* y, const T* dy, std::size_t n, T* dx) {
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

}  // namespace tpsf::nn::reference

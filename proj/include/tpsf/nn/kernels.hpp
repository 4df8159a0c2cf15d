#pragma once

// Layer kernels on batches stored sample-major, channels-first (NCHW).
// Backward kernels sum parameter gradients over the batch and overwrite the
// gradient buffers. A null dx skips the input gradient.
//
// `reference` is a plain serial implementation kept as the test oracle;
// `parallel` splits work across OpenMP threads (im2col + GEMM for conv) and
// reduces per-sample partial sums in sample order, so its results do not
// depend on the thread count.

#include <cstddef>

#include "tpsf/nn/architecture.hpp"

namespace tpsf::nn {

enum class Backend { reference, parallel };

#define TPSF_NN_KERNEL_DECLS                                                                                     \
  template <typename T>                                                                                         \
  void conv_forward(const T* x, int batch, Shape in, const T* w, const T* b, int cout, int k, T* y);            \
  template <typename T>                                                                                         \
  void conv_backward(const T* x, int batch, Shape in, const T* w, int cout, int k, const T* dy, T* dx, T* dw,   \
                     T* db);                                                                                    \
  template <typename T>                                                                                         \
  void maxpool_forward(const T* x, int batch, Shape in, int window, T* y);                                      \
  template <typename T>                                                                                         \
  void maxpool_backward(const T* x, int batch, Shape in, int window, const T* dy, T* dx);                       \
  template <typename T>                                                                                         \
  void dense_forward(const T* x, int batch, int in, const T* w, const T* b, int out, T* y);                     \
  template <typename T>                                                                                         \
  void dense_backward(const T* x, int batch, int in, const T* w, int out, const T* dy, T* dx, T* dw, T* db);   \
  template <typename T>                                                                                         \
  void relu_forward(const T* x, std::size_t n, T* y);                                                           \
  template <typename T>                                                                                         \
  void relu_backward(const T* y, const T* dy, std::size_t n, T* dx);

namespace reference {
TPSF_NN_KERNEL_DECLS
}  // namespace reference

namespace parallel {
TPSF_NN_KERNEL_DECLS
}  // namespace parallel

#undef TPSF_NN_KERNEL_DECLS

}  // namespace tpsf::nn

#include "tpsf/nn/network.hpp"

#include <cmath>
#include <random>

namespace tpsf::nn {

namespace {

template <typename T>
struct Kernels {
  Backend backend;

  void conv_forward(const T* x, int batch, Shape in, const T* w, const T* b, int cout, int k, T* y) const {
    backend == Backend::reference ? reference::conv_forward(x, batch, in, w, b, cout, k, y)
                                  : parallel::conv_forward(x, batch, in, w, b, cout, k, y);
  }
  void conv_backward(const T* x, int batch, Shape in, const T* w, int cout, int k, const T* dy, T* dx, T* dw,
                     T* db) const {
    backend == Backend::reference ? reference::conv_backward(x, batch, in, w, cout, k, dy, dx, dw, db)
                                  : parallel::conv_backward(x, batch, in, w, cout, k, dy, dx, dw, db);
  }
  void maxpool_forward(const T* x, int batch, Shape in, int window, T* y) const {
    backend == Backend::reference ? reference::maxpool_forward(x, batch, in, window, y)
                                  : parallel::maxpool_forward(x, batch, in, window, y);
  }
  void maxpool_backward(const T* x, int batch, Shape in, int window, const T* dy, T* dx) const {
    backend == Backend::reference ? reference::maxpool_backward(x, batch, in, window, dy, dx)
                                  : parallel::maxpool_backward(x, batch, in, window, dy, dx);
  }
  void dense_forward(const T* x, int batch, int in, const T* w, const T* b, int out, T* y) const {
    backend == Backend::reference ? reference::dense_forward(x, batch, in, w, b, out, y)
                                  : parallel::dense_forward(x, batch, in, w, b, out, y);
  }
  void dense_backward(const T* x, int batch, int in, const T* w, int out, const T* dy, T* dx, T* dw, T* db) const {
    backend == Backend::reference ? reference::dense_backward(x, batch, in, w, out, dy, dx, dw, db)
                                  : parallel::dense_backward(x, batch, in, w, out, dy, dx, dw, db);
  }
  void relu_forward(const T* x, std::size_t n, T* y) const {
    backend == Backend::reference ? reference::relu_forward(x, n, y) : parallel::relu_forward(x, n, y);
  }
  void relu_backward(const T* y, const T* dy, std::size_t n, T* dx) const {
    backend == Backend::reference ? reference::relu_backward(y, dy, n, dx) : parallel::relu_backward(y, dy, n, dx);
  }
};

}  // namespace

template <typename T>
Network<T>::Network(Architecture arch, Shape input, std::uint64_t seed)
    : arch_(std::move(arch)), input_(input), shapes_(infer_shapes(arch_, input)), seed_(seed) {
  std::mt19937_64 rng(seed);
  Shape in = input_;
  for (std::size_t i = 0; i < arch_.size(); ++i) {
    const LayerSpec& l = arch_[i];
    if (!l.has_params()) {
      slot_.push_back(-1);
      in = shapes_[i];
      continue;
    }
    slot_.push_back(static_cast<int>(params_.size()));
    Tensor<T> w, b;
    int fan_in = 0;
    if (l.kind == LayerKind::conv) {
      w.dims = {l.units, in.c, l.kernel, l.kernel};
      fan_in = in.c * l.kernel * l.kernel;
    } else {
      w.dims = {l.units, static_cast<int>(in.size())};
      fan_in = static_cast<int>(in.size());
    }
    std::size_t count = 1;
    for (int d : w.dims) count *= static_cast<std::size_t>(d);
    const double limit = std::sqrt(6.0 / fan_in);
    std::uniform_real_distribution<double> u(-limit, limit);
    w.data.resize(count);
    for (T& v : w.data) v = static_cast<T>(u(rng));
    b.dims = {l.units};
    b.data.assign(static_cast<std::size_t>(l.units), T(0));
    params_.push_back(std::move(w));
    params_.push_back(std::move(b));
    in = shapes_[i];
  }
}

template <typename T>
std::size_t Network<T>::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto& t : params_) n += t.size();
  return n;
}

template <typename T>
std::vector<Tensor<T>> Network<T>::zeros_like() const {
  std::vector<Tensor<T>> z;
  z.reserve(params_.size());
  for (const auto& t : params_) z.push_back(Tensor<T>{t.dims, std::vector<T>(t.size(), T(0))});
  return z;
}

template <typename T>
void Network<T>::run_forward(const T* x, int batch, Backend backend, std::vector<std::vector<T>>& acts) const {
  if (batch <= 0) throw ContractError("forward: batch must be positive");
  const Kernels<T> k{backend};
  acts.resize(arch_.size());
  const T* in_data = x;
  Shape in = input_;
  for (std::size_t i = 0; i < arch_.size(); ++i) {
    const LayerSpec& l = arch_[i];
    auto& out = acts[i];
    out.resize(static_cast<std::size_t>(batch) * shapes_[i].size());
    switch (l.kind) {
      case LayerKind::conv: {
        const auto& w = params_[static_cast<std::size_t>(slot_[i])];
        const auto& b = params_[static_cast<std::size_t>(slot_[i]) + 1];
        k.conv_forward(in_data, batch, in, w.data.data(), b.data.data(), l.units, l.kernel, out.data());
        break;
      }
      case LayerKind::dense: {
        const auto& w = params_[static_cast<std::size_t>(slot_[i])];
        const auto& b = params_[static_cast<std::size_t>(slot_[i]) + 1];
        k.dense_forward(in_data, batch, static_cast<int>(in.size()), w.data.data(), b.data.data(), l.units,
                        out.data());
        break;
      }
      case LayerKind::maxpool:
        k.maxpool_forward(in_data, batch, in, l.kernel, out.data());
        break;
      case LayerKind::relu:
        k.relu_forward(in_data, out.size(), out.data());
        break;
    }
    in_data = out.data();
    in = shapes_[i];
  }
}

template <typename T>
std::vector<T> Network<T>::forward(const T* x, int batch, Backend backend) const {
  std::vector<std::vector<T>> acts;
  run_forward(x, batch, backend, acts);
  return std::move(acts.back());
}

template <typename T>
std::vector<std::vector<T>> Network<T>::activations(const T* x, int batch, Backend backend) const {
  std::vector<std::vector<T>> acts;
  run_forward(x, batch, backend, acts);
  return acts;
}

template <typename T>
T loss_mse(const T* pred, const T* labels, std::size_t n) {
  if (n == 0) throw ContractError("loss_mse: empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(pred[i]) - static_cast<double>(labels[i]);
    s += d * d;
  }
  return static_cast<T>(s / static_cast<double>(n));
}

template <typename T>
T Network<T>::backward(const T* x, const T* labels, int batch, std::vector<Tensor<T>>& grads, Backend backend) const {
  std::vector<std::vector<T>> acts;
  run_forward(x, batch, backend, acts);
  const Kernels<T> k{backend};
  if (grads.size() != params_.size()) grads = zeros_like();

  const auto& pred = acts.back();
  const T loss = loss_mse(pred.data(), labels, pred.size());
  std::vector<T> g(pred.size());
  const T scale = T(2) / static_cast<T>(pred.size());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = scale * (pred[i] - labels[i]);

  std::vector<T> dx;
  for (std::size_t li = arch_.size(); li-- > 0;) {
    const LayerSpec& l = arch_[li];
    const T* in_data = li == 0 ? x : acts[li - 1].data();
    const Shape in = li == 0 ? input_ : shapes_[li - 1];
    const bool need_dx = li > 0;
    dx.assign(need_dx ? static_cast<std::size_t>(batch) * in.size() : 0, T(0));
    T* dx_ptr = need_dx ? dx.data() : nullptr;
    switch (l.kind) {
      case LayerKind::conv: {
        const auto s = static_cast<std::size_t>(slot_[li]);
        k.conv_backward(in_data, batch, in, params_[s].data.data(), l.units, l.kernel, g.data(), dx_ptr,
                        grads[s].data.data(), grads[s + 1].data.data());
        break;
      }
      case LayerKind::dense: {
        const auto s = static_cast<std::size_t>(slot_[li]);
        k.dense_backward(in_data, batch, static_cast<int>(in.size()), params_[s].data.data(), l.units, g.data(),
                         dx_ptr, grads[s].data.data(), grads[s + 1].data.data());
        break;
      }
      case LayerKind::maxpool:
        if (need_dx) k.maxpool_backward(in_data, batch, in, l.kernel, g.data(), dx_ptr);
        break;
      case LayerKind::relu:
        if (need_dx) k.relu_backward(acts[li].data(), g.data(), g.size(), dx_ptr);
        break;
    }
    if (need_dx) g.swap(dx);
  }
  return loss;
}

template class Network<float>;
template class Network<double>;
template float loss_mse<float>(const float*, const float*, std::size_t);
template double loss_mse<double>(const double*, const double*, std::size_t);

}  // namespace tpsf::nn

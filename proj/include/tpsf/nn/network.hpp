#pragma once

#include <cstdint>
#include <vector>

#include "tpsf/nn/architecture.hpp"
#include "tpsf/nn/kernels.hpp"

namespace tpsf::nn {

template <typename T>
struct Tensor {
  std::vector<int> dims;
  std::vector<T> data;

  std::size_t size() const noexcept { return data.size(); }
  bool operator==(const Tensor&) const = default;
};

/// Weights and biases of a layer chain. Parametric layers own two tensors,
/// weight then bias: conv [out, in, k, k] and [out]; dense [out, in] and [out].
template <typename T>
class Network {
 public:
  /// Fan-in scaled uniform weights, limit sqrt(6 / fan_in), zero biases.
  Network(Architecture arch, Shape input, std::uint64_t seed);

  const Architecture& architecture() const noexcept { return arch_; }
  Shape input_shape() const noexcept { return input_; }
  const std::vector<Shape>& shapes() const noexcept { return shapes_; }
  std::size_t output_size() const noexcept { return shapes_.back().size(); }
  std::uint64_t seed() const noexcept { return seed_; }

  std::vector<Tensor<T>>& params() noexcept { return params_; }
  const std::vector<Tensor<T>>& params() const noexcept { return params_; }
  std::size_t parameter_count() const noexcept;
  /// Index of the weight tensor of layer i in params(), or -1.
  int param_slot(std::size_t layer) const { return slot_.at(layer); }

  /// Outputs for `batch` samples stored back to back.
  std::vector<T> forward(const T* x, int batch, Backend backend = Backend::parallel) const;

  /// Output of every layer for the batch (entry i is the output of layer i).
  std::vector<std::vector<T>> activations(const T* x, int batch, Backend backend = Backend::parallel) const;

  /// Mean squared error of the batch; fills `grads` (same layout as params())
  /// with the gradient of that loss.
  T backward(const T* x, const T* labels, int batch, std::vector<Tensor<T>>& grads,
             Backend backend = Backend::parallel) const;

  /// Zero tensors shaped like params().
  std::vector<Tensor<T>> zeros_like() const;

 private:
  void run_forward(const T* x, int batch, Backend backend, std::vector<std::vector<T>>& acts) const;

  Architecture arch_;
  Shape input_;
  std::vector<Shape> shapes_;
  std::uint64_t seed_;
  std::vector<Tensor<T>> params_;
  std::vector<int> slot_;
};

/// Mean over all elements of (pred - labels)^2.
template <typename T>
T loss_mse(const T* pred, const T* labels, std::size_t n);

/// Same architecture and values at another precision.
template <typename U, typename T>
Network<U> network_cast(const Network<T>& net) {
  Network<U> out(net.architecture(), net.input_shape(), net.seed());
  for (std::size_t i = 0; i < net.params().size(); ++i) {
    const auto& src = net.params()[i].data;
    auto& dst = out.params()[i].data;
    for (std::size_t j = 0; j < src.size(); ++j) dst[j] = static_cast<U>(src[j]);
  }
  return out;
}

extern template class Network<float>;
extern template class Network<double>;

}  // namespace tpsf::nn

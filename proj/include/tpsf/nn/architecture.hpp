#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "tpsf/errors.hpp"

namespace tpsf::nn {

enum class LayerKind { conv, relu, maxpool, dense };

/// One layer of the chain. conv: `units` output channels, `kernel` x `kernel`
/// window, stride 1, zero padding that keeps the spatial size (odd kernels).
/// maxpool: non-overlapping `kernel` x `kernel` windows, floor on remainders.
/// dense: `units` outputs; the first dense layer flattens its input (C, H, W).
struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  int units = 0;
  int kernel = 0;

  static LayerSpec conv(int channels, int kernel) { return {LayerKind::conv, channels, kernel}; }
  static LayerSpec relu() { return {LayerKind::relu, 0, 0}; }
  static LayerSpec maxpool(int window) { return {LayerKind::maxpool, 0, window}; }
  static LayerSpec dense(int units) { return {LayerKind::dense, units, 0}; }

  bool has_params() const noexcept { return kind == LayerKind::conv || kind == LayerKind::dense; }
  bool operator==(const LayerSpec&) const = default;
};

/// Activation shape of one sample, channels-first. Flat vectors use (n, 1, 1).
struct Shape {
  int c = 1;
  int h = 1;
  int w = 1;
  std::size_t size() const noexcept {
    return static_cast<std::size_t>(c) * static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
  }
  bool operator==(const Shape&) const = default;
};

using Architecture = std::vector<LayerSpec>;

/// conv32(5) relu conv32(5) relu pool5 conv64(3) relu pool3 conv64(3) relu
/// conv64(3) relu pool3 dense2000 relu dense512 relu dense25.
Architecture default_architecture();
inline constexpr Shape kDefaultInput{1, 100, 100};

/// Output shape of every layer (entry i is the output of layer i). Throws
/// ConfigError when the chain does not type-check.
std::vector<Shape> infer_shapes(const Architecture& arch, Shape input);

/// FNV-1a over the input shape and layer list.
std::uint64_t architecture_hash(const Architecture& arch, Shape input);

std::string describe(const Architecture& arch, Shape input);

nlohmann::json to_json(const Architecture& arch);
Architecture architecture_from_json(const nlohmann::json& j);

}  // namespace tpsf::nn

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "json.hpp"
#include "tpsf/dataset.hpp"
#include "tpsf/nn/network.hpp"

namespace tpsf::nn {

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int batch_size = 100;
  int epochs = 20;
  std::uint64_t seed = 0;
  Backend backend = Backend::parallel;
  /// Clamp even-n predictions at zero before computing evaluation MSE.
  bool clamp_even = false;
  Architecture architecture = default_architecture();

  void validate() const;
};

nlohmann::json to_json(const TrainConfig& c);
/// Missing keys keep their defaults; unknown keys are rejected.
TrainConfig train_config_from_json(const nlohmann::json& j);

template <typename T>
struct AdamState {
  std::vector<Tensor<T>> m;
  std::vector<Tensor<T>> v;
  std::uint64_t step = 0;

  static AdamState for_network(const Network<T>& net) { return {net.zeros_like(), net.zeros_like(), 0}; }
};

/// Bias-corrected Adam update in place.
template <typename T>
void adam_step(std::vector<Tensor<T>>& params, const std::vector<Tensor<T>>& grads, AdamState<T>& state,
               const TrainConfig& config);

/// Images and labels of one split, packed for batching.
struct Samples {
  int image_side = dataset::kImageSide;
  int label_length = dataset::kLabelLength;
  std::vector<float> images;  // size() * side * side
  std::vector<float> labels;  // size() * label_length
  std::vector<double> ratios;

  std::size_t size() const noexcept { return ratios.size(); }
  static Samples from_records(const std::vector<dataset::SampleRecord>& records);
  Samples subset(const std::vector<std::size_t>& indices) const;
};

struct EpochStats {
  int epoch = 0;
  double train_mse = 0.0;  // mean mini-batch loss over the epoch
  double val_mse = 0.0;
};

struct TrainResult {
  Network<float> best;  // parameters with the lowest validation MSE
  AdamState<float> best_state;
  std::vector<EpochStats> history;
  int best_epoch = 0;
  double best_val_mse = 0.0;
};

TrainResult train(const Samples& train_split, const Samples& val_split, const TrainConfig& config,
                  const std::function<void(const EpochStats&)>& on_epoch = {});

/// Maps `batch` packed images to `batch` packed 25-vectors.
using Predictor = std::function<std::vector<float>(const float* images, int batch)>;

struct RatioError {
  double d_over_r0 = 0.0;
  std::size_t count = 0;
  double mse = 0.0;
};

struct EvalReport {
  double overall_mse = 0.0;
  std::vector<RatioError> per_ratio;        // ascending D/r0
  std::vector<double> per_coefficient_mse;  // index k is q = k + 3
  std::vector<float> predictions;           // size() * label_length, after clamping
};

EvalReport evaluate(const Predictor& predict, const Samples& split, bool clamp_even, int batch_size = 100);
EvalReport evaluate(const Network<float>& net, const Samples& split, bool clamp_even,
                    Backend backend = Backend::parallel);

/// eval_summary.csv (scope, d_over_r0, count, mse), eval_coefficients.csv
/// (q, mse) and eval_samples.csv (actual vs predicted for the first test
/// sample of every D/r0).
void write_eval_csv(const std::filesystem::path& dir, const EvalReport& report, const Samples& split);
void write_history_csv(const std::filesystem::path& path, const std::vector<EpochStats>& history);

// Checkpoint ("TPSN"), little-endian: magic, u32 version, u64 architecture
// hash, u32 tensor count, then per tensor u32 rank, u32 dims[rank], f32 data;
// the Adam first and second moments follow in the same layout, then u64 step.
void save_checkpoint(const std::filesystem::path& path, const Network<float>& net, const AdamState<float>& state);

struct Checkpoint {
  Network<float> net;
  AdamState<float> state;
};
/// Throws FormatError when the file does not match `arch` and `input`.
Checkpoint load_checkpoint(const std::filesystem::path& path, const Architecture& arch,
                           Shape input = kDefaultInput);

}  // namespace tpsf::nn

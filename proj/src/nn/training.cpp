#include "tpsf/nn/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <numeric>
#include <random>

#include "tpsf/binary_io.hpp"
#include "tpsf/seeds.hpp"
#include "tpsf/zernike.hpp"

namespace tpsf::nn {

namespace {

constexpr std::uint32_t kCheckpointVersion = 1;
constexpr std::uint64_t kShuffleTag = 0x5348554646ULL;  // "SHUFF"

const char* backend_name(Backend b) { return b == Backend::reference ? "reference" : "parallel"; }

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) throw ConfigError("betas must lie in (0, 1)");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  if (batch_size <= 0) throw ConfigError("batch_size must be positive");
  if (epochs <= 0) throw ConfigError("epochs must be positive");
  infer_shapes(architecture, kDefaultInput);
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"epsilon", c.epsilon},
          {"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"seed", c.seed},
          {"backend", backend_name(c.backend)},
          {"clamp_even", c.clamp_even},
          {"architecture", to_json(c.architecture)}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("train config must be a JSON object");
  static const char* known[] = {"learning_rate", "beta1",   "beta2",      "epsilon",     "batch_size",
                                "epochs",        "seed",    "backend",    "clamp_even", "architecture"};
  for (const auto& [key, value] : j.items()) {
    if (std::find_if(std::begin(known), std::end(known), [&](const char* k) { return key == k; }) == std::end(known)) {
      throw ConfigError("unknown train config key '" + key + "'");
    }
  }
  TrainConfig c;
  try {
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.epsilon = j.value("epsilon", c.epsilon);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.epochs = j.value("epochs", c.epochs);
    c.seed = j.value("seed", c.seed);
    c.clamp_even = j.value("clamp_even", c.clamp_even);
    if (j.contains("backend")) {
      const auto b = j.at("backend").get<std::string>();
      if (b == "reference") {
        c.backend = Backend::reference;
      } else if (b == "parallel") {
        c.backend = Backend::parallel;
      } else {
        throw ConfigError("backend must be 'reference' or 'parallel'");
      }
    }
    if (j.contains("architecture")) c.architecture = architecture_from_json(j.at("architecture"));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

template <typename T>
void adam_step(std::vector<Tensor<T>>& params, const std::vector<Tensor<T>>& grads, AdamState<T>& state,
               const TrainConfig& config) {
  if (grads.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ContractError("adam_step: parameter, gradient and state tensor counts differ");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const T b1 = static_cast<T>(config.beta1);
  const T b2 = static_cast<T>(config.beta2);
  const T c1 = static_cast<T>(1.0 / (1.0 - std::pow(config.beta1, t)));
  const T c2 = static_cast<T>(1.0 / (1.0 - std::pow(config.beta2, t)));
  const T lr = static_cast<T>(config.learning_rate);
  const T eps = static_cast<T>(config.epsilon);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i].data;
    const auto& g = grads[i].data;
    auto& m = state.m[i].data;
    auto& v = state.v[i].data;
    if (g.size() != p.size() || m.size() != p.size() || v.size() != p.size()) {
      throw ContractError("adam_step: tensor shape mismatch");
    }
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = b1 * m[k] + (T(1) - b1) * g[k];
      v[k] = b2 * v[k] + (T(1) - b2) * g[k] * g[k];
      p[k] -= lr * (m[k] * c1) / (std::sqrt(v[k] * c2) + eps);
    }
  }
}

template void adam_step<float>(std::vector<Tensor<float>>&, const std::vector<Tensor<float>>&, AdamState<float>&,
                               const TrainConfig&);
template void adam_step<double>(std::vector<Tensor<double>>&, const std::vector<Tensor<double>>&,
                                AdamState<double>&, const TrainConfig&);

Samples Samples::from_records(const std::vector<dataset::SampleRecord>& records) {
  Samples s;
  const std::size_t px = static_cast<std::size_t>(s.image_side) * s.image_side;
  s.images.reserve(records.size() * px);
  s.labels.reserve(records.size() * static_cast<std::size_t>(s.label_length));
  for (const auto& r : records) {
    if (r.image.size() != px) throw ContractError("Samples: record image has the wrong size");
    s.images.insert(s.images.end(), r.image.begin(), r.image.end());
    s.labels.insert(s.labels.end(), r.label.begin(), r.label.end());
    s.ratios.push_back(r.d_over_r0);
  }
  return s;
}

Samples Samples::subset(const std::vector<std::size_t>& indices) const {
  Samples s;
  s.image_side = image_side;
  s.label_length = label_length;
  const std::size_t px = static_cast<std::size_t>(image_side) * image_side;
  const auto ll = static_cast<std::size_t>(label_length);
  for (std::size_t i : indices) {
    if (i >= size()) throw ContractError("Samples::subset: index out of range");
    s.images.insert(s.images.end(), images.begin() + static_cast<long>(i * px), images.begin() + static_cast<long>((i + 1) * px));
    s.labels.insert(s.labels.end(), labels.begin() + static_cast<long>(i * ll), labels.begin() + static_cast<long>((i + 1) * ll));
    s.ratios.push_back(ratios[i]);
  }
  return s;
}

TrainResult train(const Samples& train_split, const Samples& val_split, const TrainConfig& config,
                  const std::function<void(const EpochStats&)>& on_epoch) {
  config.validate();
  if (train_split.size() == 0) throw ConfigError("training split is empty");
  if (val_split.size() == 0) throw ConfigError("validation split is empty");
  const Shape input{1, train_split.image_side, train_split.image_side};

  Network<float> net(config.architecture, input, config.seed);
  if (net.output_size() != static_cast<std::size_t>(train_split.label_length)) {
    throw ConfigError("network output size does not match the label length");
  }
  AdamState<float> state = AdamState<float>::for_network(net);
  auto grads = net.zeros_like();

  TrainResult result{net, state, {}, 0, std::numeric_limits<double>::infinity()};
  const std::size_t n = train_split.size();
  const std::size_t px = input.size();
  const auto ll = static_cast<std::size_t>(train_split.label_length);
  std::vector<std::size_t> order(n);
  std::vector<float> xb, yb;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(derive_seed({config.seed, kShuffleTag, static_cast<std::uint64_t>(epoch)}));
    std::shuffle(order.begin(), order.end(), rng);

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t bs = std::min(static_cast<std::size_t>(config.batch_size), n - start);
      xb.resize(bs * px);
      yb.resize(bs * ll);
      for (std::size_t k = 0; k < bs; ++k) {
        const std::size_t i = order[start + k];
        std::copy_n(train_split.images.begin() + static_cast<long>(i * px), px, xb.begin() + static_cast<long>(k * px));
        std::copy_n(train_split.labels.begin() + static_cast<long>(i * ll), ll, yb.begin() + static_cast<long>(k * ll));
      }
      const float loss = net.backward(xb.data(), yb.data(), static_cast<int>(bs), grads, config.backend);
      if (!std::isfinite(loss)) throw NumericalError("training loss became non-finite at epoch " + std::to_string(epoch));
      adam_step(net.params(), grads, state, config);
      loss_sum += static_cast<double>(loss) * static_cast<double>(bs);
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_mse = loss_sum / static_cast<double>(n);
    stats.val_mse = evaluate(net, val_split, false, config.backend).overall_mse;
    result.history.push_back(stats);
    if (stats.val_mse < result.best_val_mse) {
      result.best_val_mse = stats.val_mse;
      result.best_epoch = epoch;
      result.best = net;
      result.best_state = state;
    }
    if (on_epoch) on_epoch(stats);
  }
  return result;
}

EvalReport evaluate(const Predictor& predict, const Samples& split, bool clamp_even, int batch_size) {
  if (split.size() == 0) throw ConfigError("evaluation split is empty");
  if (batch_size <= 0) throw ConfigError("batch_size must be positive");
  const std::size_t px = static_cast<std::size_t>(split.image_side) * split.image_side;
  const auto ll = static_cast<std::size_t>(split.label_length);
  EvalReport rep;
  rep.predictions.resize(split.size() * ll);
  for (std::size_t start = 0; start < split.size(); start += static_cast<std::size_t>(batch_size)) {
    const std::size_t bs = std::min(static_cast<std::size_t>(batch_size), split.size() - start);
    const auto out = predict(split.images.data() + start * px, static_cast<int>(bs));
    if (out.size() != bs * ll) throw ContractError("evaluate: predictor returned the wrong number of outputs");
    std::copy(out.begin(), out.end(), rep.predictions.begin() + static_cast<long>(start * ll));
  }
  if (clamp_even) {
    for (std::size_t i = 0; i < split.size(); ++i) {
      for (std::size_t k = 0; k < ll; ++k) {
        if (zernike::is_angularly_even(static_cast<int>(k) + zernike::kFirstPredicted)) {
          rep.predictions[i * ll + k] = std::max(0.0f, rep.predictions[i * ll + k]);
        }
      }
    }
  }

  std::map<double, std::pair<std::size_t, double>> by_ratio;
  rep.per_coefficient_mse.assign(ll, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < split.size(); ++i) {
    double se = 0.0;
    for (std::size_t k = 0; k < ll; ++k) {
      const double d = static_cast<double>(rep.predictions[i * ll + k]) - static_cast<double>(split.labels[i * ll + k]);
      se += d * d;
      rep.per_coefficient_mse[k] += d * d;
    }
    total += se;
    auto& slot = by_ratio[split.ratios[i]];
    slot.first += 1;
    slot.second += se;
  }
  rep.overall_mse = total / static_cast<double>(split.size() * ll);
  for (double& v : rep.per_coefficient_mse) v /= static_cast<double>(split.size());
  for (const auto& [ratio, acc] : by_ratio) {
    rep.per_ratio.push_back({ratio, acc.first, acc.second / static_cast<double>(acc.first * ll)});
  }
  return rep;
}

EvalReport evaluate(const Network<float>& net, const Samples& split, bool clamp_even, Backend backend) {
  const Predictor p = [&](const float* images, int batch) { return net.forward(images, batch, backend); };
  return evaluate(p, split, clamp_even);
}

void write_eval_csv(const std::filesystem::path& dir, const EvalReport& report, const Samples& split) {
  std::filesystem::create_directories(dir);
  const auto open = [](const std::filesystem::path& p) {
    std::ofstream os(p, std::ios::trunc);
    if (!os) throw IoError("cannot open " + p.string() + " for writing");
    os << std::setprecision(std::numeric_limits<double>::max_digits10);
    return os;
  };
  {
    auto os = open(dir / "eval_summary.csv");
    os << "scope,d_over_r0,count,mse\n";
    os << "overall,," << split.size() << ',' << report.overall_mse << '\n';
    for (const auto& r : report.per_ratio) os << "ratio," << r.d_over_r0 << ',' << r.count << ',' << r.mse << '\n';
  }
  {
    auto os = open(dir / "eval_coefficients.csv");
    os << "q,mse\n";
    for (std::size_t k = 0; k < report.per_coefficient_mse.size(); ++k) {
      os << k + zernike::kFirstPredicted << ',' << report.per_coefficient_mse[k] << '\n';
    }
  }
  {
    auto os = open(dir / "eval_samples.csv");
    os << "sample,d_over_r0,q,actual,predicted\n";
    const auto ll = static_cast<std::size_t>(split.label_length);
    std::vector<double> seen;
    for (std::size_t i = 0; i < split.size(); ++i) {
      if (std::find(seen.begin(), seen.end(), split.ratios[i]) != seen.end()) continue;
      seen.push_back(split.ratios[i]);
      for (std::size_t k = 0; k < ll; ++k) {
        os << i << ',' << split.ratios[i] << ',' << k + zernike::kFirstPredicted << ',' << split.labels[i * ll + k]
           << ',' << report.predictions[i * ll + k] << '\n';
      }
    }
  }
}

void write_history_csv(const std::filesystem::path& path, const std::vector<EpochStats>& history) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os << std::setprecision(std::numeric_limits<double>::max_digits10);
  os << "epoch,train_mse,val_mse\n";
  for (const auto& h : history) os << h.epoch << ',' << h.train_mse << ',' << h.val_mse << '\n';
  if (!os) throw IoError("write failed: " + path.string());
}

namespace {

void write_tensors(std::ostream& os, const std::vector<Tensor<float>>& tensors) {
  for (const auto& t : tensors) {
    io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(t.dims.size()));
    for (int d : t.dims) io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(d));
    for (float v : t.data) io::write_le<float>(os, v);
  }
}

void read_tensors(io::Reader& rd, std::vector<Tensor<float>>& tensors) {
  for (auto& t : tensors) {
    const std::uint64_t at = rd.offset();
    const auto rank = rd.le<std::uint32_t>();
    if (rank != t.dims.size()) rd.fail("tensor rank does not match the architecture", at);
    for (int d : t.dims) {
      const std::uint64_t dim_at = rd.offset();
      if (rd.le<std::uint32_t>() != static_cast<std::uint32_t>(d)) {
        rd.fail("tensor dimension does not match the architecture", dim_at);
      }
    }
    for (float& v : t.data) v = rd.le<float>();
  }
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Network<float>& net, const AdamState<float>& state) {
  if (state.m.size() != net.params().size() || state.v.size() != net.params().size()) {
    throw ContractError("save_checkpoint: Adam state does not match the network");
  }
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  io::write_magic(os, "TPSN");
  io::write_le<std::uint32_t>(os, kCheckpointVersion);
  io::write_le<std::uint64_t>(os, architecture_hash(net.architecture(), net.input_shape()));
  io::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(net.params().size()));
  write_tensors(os, net.params());
  write_tensors(os, state.m);
  write_tensors(os, state.v);
  io::write_le<std::uint64_t>(os, state.step);
  if (!os) throw IoError("write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const Architecture& arch, Shape input) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint " + path.string());
  io::Reader rd(is, path.string());
  rd.expect_magic("TPSN");
  if (rd.le<std::uint32_t>() != kCheckpointVersion) rd.fail("unsupported TPSN version", 4);
  if (rd.le<std::uint64_t>() != architecture_hash(arch, input)) {
    rd.fail("architecture hash does not match the configured network", 8);
  }
  Checkpoint cp{Network<float>(arch, input, 0), {}};
  if (rd.le<std::uint32_t>() != cp.net.params().size()) rd.fail("tensor count does not match the architecture", 16);
  cp.state = AdamState<float>::for_network(cp.net);
  read_tensors(rd, cp.net.params());
  read_tensors(rd, cp.state.m);
  read_tensors(rd, cp.state.v);
  cp.state.step = rd.le<std::uint64_t>();
  return cp;
}

}  // namespace tpsf::nn

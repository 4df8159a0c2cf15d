#include "tpsf/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <iomanip>
#include <random>
#include <sstream>

#include <boost/crc.hpp>

#include "tpsf/binary_io.hpp"
#include "tpsf/seeds.hpp"

namespace tpsf::dataset {

namespace {

constexpr std::uint64_t kScreenTag = 0x5343524545ULL;  // "SCREE"
constexpr std::uint64_t kNoiseTag = 0x4E4F495345ULL;   // "NOISE"
constexpr std::uint64_t kObjectTag = 0x4F424A4543ULL;  // "OBJEC"
constexpr int kMaxAttempts = 16;
constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

using CrcXz = boost::crc_optimal<64, 0x42F0E1EBA9EA3693ULL, ~0ULL, ~0ULL, true, true>;

std::size_t floor_count(std::size_t n, double fraction) {
  return static_cast<std::size_t>(std::floor(static_cast<double>(n) * fraction + 1e-9));
}

const char* source_name(ObjectSource s) { return s == ObjectSource::point ? "point" : "emnist"; }
const char* label_mode_name(LabelMode m) { return m == LabelMode::modified ? "modified" : "signed"; }

bool is_degenerate(const RealGrid& object) {
  return std::none_of(object.values().begin(), object.values().end(), [](double v) { return v > 0.0; });
}

}  // namespace

SplitCounts split_counts(std::size_t samples, const SplitFractions& f) {
  SplitCounts c;
  c.val = floor_count(samples, f.val);
  c.test = floor_count(samples, f.test);
  if (c.val + c.test > samples) throw ConfigError("split fractions leave no room for training samples");
  c.train = samples - c.val - c.test;
  return c;
}

ScenarioConfig ScenarioConfig::for_scenario(int id, std::uint64_t master_seed) {
  ScenarioConfig c;
  c.scenario_id = id;
  c.master_seed = master_seed;
  switch (id) {
    case 1:
      break;
    case 2:
      c.object_source = ObjectSource::emnist;
      break;
    case 3:
      c.object_source = ObjectSource::emnist;
      c.noise = imaging::NoiseSpec::low(0);
      break;
    case 4:
      c.object_source = ObjectSource::emnist;
      c.noise = imaging::NoiseSpec::high(0);
      break;
    default:
      throw ConfigError("scenario must be 1, 2, 3 or 4 (got " + std::to_string(id) + ")");
  }
  return c;
}

void ScenarioConfig::validate() const {
  if (scenario_id < 1 || scenario_id > 4) throw ConfigError("scenario must be 1..4");
  if (d_over_r0_values.empty()) throw ConfigError("d_over_r0 list is empty");
  for (double r : d_over_r0_values) {
    if (!(r > 0.0) || !std::isfinite(r)) throw ConfigError("D/r0 values must be finite and positive");
  }
  if (samples_per_ratio == 0) throw ConfigError("samples_per_ratio must be positive");
  const double sum = split.train + split.val + split.test;
  if (split.train < 0 || split.val < 0 || split.test < 0 || std::abs(sum - 1.0) > 1e-6) {
    throw ConfigError("split fractions must be non-negative and sum to 1");
  }
  if (noise && (!(noise->peak_photons > 0.0) || !(noise->readout_sigma >= 0.0))) {
    throw ConfigError("noise needs peak_photons > 0 and readout_sigma >= 0");
  }
  if (object_source == ObjectSource::emnist && emnist_images.empty()) {
    throw ConfigError("emnist object source needs emnist_images");
  }
  if (crop_side <= 0 || crop_side > grid_size) throw ConfigError("crop_side must lie in (0, grid_size]");
  ScreenSpec probe = ScreenSpec::from_ratio(d_over_r0_values.front(), 0, grid_size, pupil_px);
  probe.validate();
}

nlohmann::json to_json(const ScenarioConfig& c) {
  nlohmann::json j;
  j["scenario"] = c.scenario_id;
  j["d_over_r0"] = c.d_over_r0_values;
  j["samples_per_ratio"] = c.samples_per_ratio;
  j["split"] = {{"train", c.split.train}, {"val", c.split.val}, {"test", c.split.test}};
  if (c.noise) {
    j["noise"] = {{"peak_photons", c.noise->peak_photons}, {"readout_sigma", c.noise->readout_sigma}};
  } else {
    j["noise"] = nullptr;
  }
  j["object_source"] = source_name(c.object_source);
  j["emnist_images"] = c.emnist_images.string();
  j["emnist_labels"] = c.emnist_labels.string();
  j["master_seed"] = c.master_seed;
  j["label_mode"] = label_mode_name(c.label_mode);
  j["grid_size"] = c.grid_size;
  j["pupil_px"] = c.pupil_px;
  j["crop_side"] = c.crop_side;
  return j;
}

ScenarioConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("scenario config must be a JSON object");
  static const char* known[] = {"scenario",      "d_over_r0",     "samples_per_ratio", "split",    "noise",
                                "object_source", "emnist_images", "emnist_labels",     "master_seed",
                                "label_mode",    "grid_size",     "pupil_px",          "crop_side"};
  for (const auto& [key, value] : j.items()) {
    if (std::find_if(std::begin(known), std::end(known), [&](const char* k) { return key == k; }) == std::end(known)) {
      throw ConfigError("unknown scenario config key '" + key + "'");
    }
  }
  try {
    ScenarioConfig c = ScenarioConfig::for_scenario(j.value("scenario", 1));
    if (j.contains("d_over_r0")) c.d_over_r0_values = j.at("d_over_r0").get<std::vector<double>>();
    if (j.contains("samples_per_ratio")) c.samples_per_ratio = j.at("samples_per_ratio").get<std::size_t>();
    if (j.contains("split")) {
      const auto& s = j.at("split");
      c.split = {s.at("train").get<double>(), s.at("val").get<double>(), s.at("test").get<double>()};
    }
    if (j.contains("noise")) {
      if (j.at("noise").is_null()) {
        c.noise.reset();
      } else {
        c.noise = imaging::NoiseSpec{j.at("noise").at("peak_photons").get<double>(),
                                     j.at("noise").at("readout_sigma").get<double>(), 0};
      }
    }
    if (j.contains("object_source")) {
      const auto s = j.at("object_source").get<std::string>();
      if (s == "point") {
        c.object_source = ObjectSource::point;
      } else if (s == "emnist") {
        c.object_source = ObjectSource::emnist;
      } else {
        throw ConfigError("object_source must be 'point' or 'emnist'");
      }
    }
    if (j.contains("emnist_images")) c.emnist_images = j.at("emnist_images").get<std::string>();
    if (j.contains("emnist_labels")) c.emnist_labels = j.at("emnist_labels").get<std::string>();
    if (j.contains("master_seed")) c.master_seed = j.at("master_seed").get<std::uint64_t>();
    if (j.contains("label_mode")) {
      const auto m = j.at("label_mode").get<std::string>();
      if (m == "modified") {
        c.label_mode = LabelMode::modified;
      } else if (m == "signed") {
        c.label_mode = LabelMode::signed_coefficients;
      } else {
        throw ConfigError("label_mode must be 'modified' or 'signed'");
      }
    }
    if (j.contains("grid_size")) c.grid_size = j.at("grid_size").get<int>();
    if (j.contains("pupil_px")) c.pupil_px = j.at("pupil_px").get<int>();
    if (j.contains("crop_side")) c.crop_side = j.at("crop_side").get<int>();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("scenario config: ") + e.what());
  }
}

std::vector<RealGrid> load_emnist(const std::filesystem::path& images_path, const std::filesystem::path& labels_path) {
  std::ifstream is(images_path, std::ios::binary);
  if (!is) throw IoError("cannot open " + images_path.string());
  io::Reader rd(is, images_path.string());
  if (rd.be<std::uint32_t>() != kIdxImagesMagic) rd.fail("bad IDX image magic (expected 0x00000803)", 0);
  const auto count = rd.be<std::uint32_t>();
  const auto rows = rd.be<std::uint32_t>();
  const auto cols = rd.be<std::uint32_t>();
  if (rows != cols || rows == 0 || rows > 4096) rd.fail("IDX objects must be square", 8);

  std::vector<RealGrid> objects;
  objects.reserve(count);
  std::vector<unsigned char> pixels(static_cast<std::size_t>(rows) * cols);
  for (std::uint32_t k = 0; k < count; ++k) {
    rd.read_bytes(pixels.data(), pixels.size());
    RealGrid g(static_cast<int>(rows));
    for (std::size_t i = 0; i < pixels.size(); ++i) g[i] = pixels[i] / 255.0;
    objects.push_back(std::move(g));
  }

  if (!labels_path.empty()) {
    std::ifstream ls(labels_path, std::ios::binary);
    if (!ls) throw IoError("cannot open " + labels_path.string());
    io::Reader lr(ls, labels_path.string());
    if (lr.be<std::uint32_t>() != kIdxLabelsMagic) lr.fail("bad IDX label magic (expected 0x00000801)", 0);
    if (lr.be<std::uint32_t>() != count) lr.fail("label count does not match image count", 4);
  }
  return objects;
}

SampleGenerator::SampleGenerator(const ScenarioConfig& config)
    : config_(config),
      grid_(config.grid_size, config.pupil_px),
      fitter_(grid_, zernike::kNumModes),
      pupil_(imaging::Pupil::from_grid(grid_)) {
  config_.validate();
}

std::uint64_t SampleGenerator::sample_seed(double d_over_r0, std::size_t index) const {
  return derive_seed({config_.master_seed, static_cast<std::uint64_t>(config_.scenario_id), seed_word(d_over_r0),
                      static_cast<std::uint64_t>(index)});
}

SampleRecord SampleGenerator::generate(double d_over_r0, std::size_t index, const RealGrid* object,
                                       std::uint32_t object_id) const {
  return generate_traced(d_over_r0, index, object, object_id, nullptr);
}

SampleRecord SampleGenerator::generate_traced(double d_over_r0, std::size_t index, const RealGrid* object,
                                              std::uint32_t object_id, Trace* trace) const {
  const std::uint64_t record_seed = sample_seed(d_over_r0, index);
  IntensityImage embedded;
  if (object != nullptr) embedded = imaging::embed_object(*object, config_.grid_size);

  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    const std::uint64_t screen_seed = derive_seed({config_.master_seed, seed_word(d_over_r0),
                                                   static_cast<std::uint64_t>(index),
                                                   static_cast<std::uint64_t>(attempt), kScreenTag});
    PhaseScreen screen = turbulence::kolmogorov_screen(
        ScreenSpec::from_ratio(d_over_r0, screen_seed, config_.grid_size, config_.pupil_px));
    turbulence::remove_piston(screen, grid_);
    const zernike::CoefficientSet fitted = fitter_.fit(screen);
    const zernike::CoefficientSet modified = zernike::modify(fitted);
    const PhaseScreen modified_screen = turbulence::reconstruct_modified(modified, fitter_);
    const IntensityImage h = imaging::psf(pupil_, modified_screen);

    IntensityImage frame = object != nullptr ? imaging::image_object(embedded, h) : h;
    IntensityImage normalized;
    try {
      if (config_.noise) {
        imaging::NoiseSpec ns = *config_.noise;
        ns.seed = derive_seed({record_seed, static_cast<std::uint64_t>(attempt), kNoiseTag});
        frame = imaging::apply_noise(frame, ns);
      }
      normalized = imaging::min_max_normalize(imaging::center_crop(frame, config_.crop_side));
    } catch (const DegenerateInputError&) {
      continue;
    } catch (const ContractError&) {
      continue;  // all-zero frame before the noise draw
    }

    SampleRecord rec;
    rec.image.resize(normalized.data.size());
    for (std::size_t i = 0; i < rec.image.size(); ++i) rec.image[i] = static_cast<float>(normalized.data[i]);
    const auto& source = config_.label_mode == LabelMode::modified ? modified.values() : fitted.values();
    for (int k = 0; k < kLabelLength; ++k) rec.label[k] = static_cast<float>(source[zernike::kFirstPredicted + k]);
    rec.d_over_r0 = d_over_r0;
    rec.object_id = object != nullptr ? object_id : kPointObjectId;
    rec.seed = record_seed;
    if (trace != nullptr) *trace = Trace{screen, fitted, modified, modified_screen, h, frame};
    return rec;
  }
  throw DegenerateInputError("sample generation produced only degenerate frames (D/r0=" + std::to_string(d_over_r0) +
                             ", index=" + std::to_string(index) + ")");
}

SampleRecord generate_sample(const ScenarioConfig& config, double d_over_r0, const RealGrid* object,
                             std::size_t index) {
  return SampleGenerator(config).generate(d_over_r0, index, object, 0);
}

nlohmann::json DatasetManifest::to_json() const {
  nlohmann::json j;
  j["format_version"] = format_version;
  j["scenario"] = config.scenario_id;
  j["ratios"] = config.d_over_r0_values;
  j["counts"] = {{"train", counts.train}, {"val", counts.val}, {"test", counts.test}};
  nlohmann::json sums = nlohmann::json::object();
  for (const auto& [file, crc] : checksums) sums[file] = to_hex(crc);
  j["checksums"] = sums;
  j["config"] = dataset::to_json(config);
  return j;
}

DatasetManifest DatasetManifest::from_json(const nlohmann::json& j) {
  try {
    DatasetManifest m;
    m.format_version = j.at("format_version").get<std::uint32_t>();
    m.config = config_from_json(j.at("config"));
    const auto& c = j.at("counts");
    m.counts = {c.at("train").get<std::size_t>(), c.at("val").get<std::size_t>(), c.at("test").get<std::size_t>()};
    for (const auto& [file, hex] : j.at("checksums").items()) {
      m.checksums[file] = std::stoull(hex.get<std::string>(), nullptr, 16);
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("manifest: ") + e.what());
  }
}

DatasetManifest read_manifest(const std::filesystem::path& dir) {
  const auto path = dir / kManifestName;
  std::ifstream is(path);
  if (!is) throw IoError("missing manifest: " + path.string());
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("cannot parse " + path.string() + ": " + e.what());
  }
  return DatasetManifest::from_json(j);
}

DatasetManifest generate_dataset(const ScenarioConfig& config, const std::filesystem::path& out_dir) {
  config.validate();
  const SplitCounts per_ratio = split_counts(config.samples_per_ratio, config.split);

  // Object pool: non-degenerate objects in a seeded order; index i of every
  // ratio uses pool[i], so splits draw from disjoint slices of the pool.
  std::vector<RealGrid> objects;
  std::vector<std::uint32_t> pool;
  if (config.object_source == ObjectSource::emnist) {
    objects = load_emnist(config.emnist_images, config.emnist_labels);
    for (std::uint32_t i = 0; i < objects.size(); ++i) {
      if (!is_degenerate(objects[i])) pool.push_back(i);
    }
    std::mt19937_64 rng(derive_seed({config.master_seed, kObjectTag}));
    std::shuffle(pool.begin(), pool.end(), rng);
    if (pool.size() < config.samples_per_ratio) {
      throw ConfigError("object pool has " + std::to_string(pool.size()) + " usable objects, need " +
                        std::to_string(config.samples_per_ratio));
    }
  }

  std::filesystem::create_directories(out_dir);
  const std::filesystem::path files[3] = {out_dir / kSplitFiles[0], out_dir / kSplitFiles[1], out_dir / kSplitFiles[2]};
  const auto manifest_path = out_dir / kManifestName;
  const auto cleanup = [&] {
    std::error_code ec;
    for (const auto& f : files) std::filesystem::remove(f, ec);
    std::filesystem::remove(manifest_path, ec);
    std::filesystem::remove(out_dir / (std::string(kManifestName) + ".tmp"), ec);
  };
  cleanup();

  DatasetManifest manifest;
  manifest.config = config;
  const std::size_t ratios = config.d_over_r0_values.size();
  manifest.counts = {per_ratio.train * ratios, per_ratio.val * ratios, per_ratio.test * ratios};

  try {
    const SampleGenerator generator(config);
    RecordWriter writers[3] = {RecordWriter(files[0], static_cast<std::uint32_t>(manifest.counts.train)),
                               RecordWriter(files[1], static_cast<std::uint32_t>(manifest.counts.val)),
                               RecordWriter(files[2], static_cast<std::uint32_t>(manifest.counts.test))};
    std::vector<SampleRecord> batch(config.samples_per_ratio);
    for (double ratio : config.d_over_r0_values) {
      std::exception_ptr failure;
      const auto n = static_cast<long>(config.samples_per_ratio);
#pragma omp parallel for schedule(dynamic, 4)
      for (long i = 0; i < n; ++i) {
        try {
          const RealGrid* object = nullptr;
          std::uint32_t id = kPointObjectId;
          if (!pool.empty()) {
            id = pool[static_cast<std::size_t>(i)];
            object = &objects[id];
          }
          batch[static_cast<std::size_t>(i)] = generator.generate(ratio, static_cast<std::size_t>(i), object, id);
        } catch (...) {
#pragma omp critical(tpsf_dataset_failure)
          if (!failure) failure = std::current_exception();
        }
      }
      if (failure) std::rethrow_exception(failure);
      for (std::size_t i = 0; i < batch.size(); ++i) {
        const int split = i < per_ratio.train ? 0 : (i < per_ratio.train + per_ratio.val ? 1 : 2);
        writers[split].append(batch[i]);
      }
    }
    for (auto& w : writers) w.close();
    for (int s = 0; s < 3; ++s) manifest.checksums[kSplitFiles[s]] = crc64(files[s]);

    const auto tmp = out_dir / (std::string(kManifestName) + ".tmp");
    {
      std::ofstream os(tmp, std::ios::trunc);
      os << manifest.to_json().dump(2) << '\n';
      if (!os) throw IoError("cannot write " + tmp.string());
    }
    std::filesystem::rename(tmp, manifest_path);
  } catch (...) {
    cleanup();
    throw;
  }
  return manifest;
}

RecordWriter::RecordWriter(const std::filesystem::path& path, std::uint32_t record_count)
    : path_(path), os_(path, std::ios::binary | std::ios::trunc), expected_(record_count) {
  if (!os_) throw IoError("cannot open " + path.string() + " for writing");
  io::write_magic(os_, "TPSD");
  io::write_le<std::uint32_t>(os_, kFormatVersion);
  io::write_le<std::uint32_t>(os_, record_count);
  io::write_le<std::uint16_t>(os_, static_cast<std::uint16_t>(kImageSide));
  io::write_le<std::uint16_t>(os_, static_cast<std::uint16_t>(kLabelLength));
}

void RecordWriter::append(const SampleRecord& r) {
  if (r.image.size() != static_cast<std::size_t>(kImageSide) * kImageSide) {
    throw ContractError("RecordWriter: image must be " + std::to_string(kImageSide) + "x" + std::to_string(kImageSide));
  }
  if (written_ == expected_) throw ContractError("RecordWriter: more records than declared in the header");
  for (float v : r.image) io::write_le<float>(os_, v);
  for (float v : r.label) io::write_le<float>(os_, v);
  io::write_le<double>(os_, r.d_over_r0);
  io::write_le<std::uint32_t>(os_, r.object_id);
  io::write_le<std::uint64_t>(os_, r.seed);
  ++written_;
}

void RecordWriter::close() {
  os_.flush();
  if (!os_) throw IoError("write failed: " + path_.string());
  if (written_ != expected_) {
    throw ContractError("RecordWriter: wrote " + std::to_string(written_) + " of " + std::to_string(expected_) +
                        " declared records");
  }
  os_.close();
}

void write_records(const std::filesystem::path& path, const std::vector<SampleRecord>& records) {
  RecordWriter w(path, static_cast<std::uint32_t>(records.size()));
  for (const auto& r : records) w.append(r);
  w.close();
}

std::vector<SampleRecord> read_records(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  io::Reader rd(is, path.string());
  rd.expect_magic("TPSD");
  if (rd.le<std::uint32_t>() != kFormatVersion) rd.fail("unsupported TPSD version", 4);
  const auto count = rd.le<std::uint32_t>();
  const auto side = rd.le<std::uint16_t>();
  const auto labels = rd.le<std::uint16_t>();
  if (side != kImageSide || labels != kLabelLength) rd.fail("unexpected image side or label length", 12);
  std::vector<SampleRecord> out(count);
  for (auto& r : out) {
    r.image.resize(static_cast<std::size_t>(side) * side);
    for (float& v : r.image) v = rd.le<float>();
    for (float& v : r.label) v = rd.le<float>();
    r.d_over_r0 = rd.le<double>();
    r.object_id = rd.le<std::uint32_t>();
    r.seed = rd.le<std::uint64_t>();
  }
  return out;
}

std::uint64_t crc64(const void* data, std::size_t size) {
  CrcXz crc;
  crc.process_bytes(data, size);
  return crc.checksum();
}

std::uint64_t crc64(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  CrcXz crc;
  std::vector<char> buf(1 << 16);
  while (is) {
    is.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    crc.process_bytes(buf.data(), static_cast<std::size_t>(is.gcount()));
  }
  return crc.checksum();
}

std::string to_hex(std::uint64_t v) {
  std::ostringstream os;
  os << "0x" << std::hex << std::setw(16) << std::setfill('0') << v;
  return os.str();
}

}  // namespace tpsf::dataset

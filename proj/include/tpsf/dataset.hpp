#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "tpsf/imaging.hpp"
#include "tpsf/turbulence.hpp"

namespace tpsf::dataset {

inline constexpr int kImageSide = 100;
inline constexpr int kLabelLength = zernike::kNumPredicted;
inline constexpr std::uint32_t kFormatVersion = 1;
inline constexpr std::uint32_t kPointObjectId = 0xFFFFFFFFu;

enum class ObjectSource { point, emnist };
enum class LabelMode { modified, signed_coefficients };

struct SplitFractions {
  double train = 5.0 / 6.0;
  double val = 1.0 / 12.0;
  double test = 1.0 / 12.0;
};

struct SplitCounts {
  std::size_t train = 0;
  std::size_t val = 0;
  std::size_t test = 0;
  std::size_t total() const noexcept { return train + val + test; }
  bool operator==(const SplitCounts&) const = default;
};

/// Floors each of val and test, the remainder goes to train.
SplitCounts split_counts(std::size_t samples, const SplitFractions& fractions);

struct ScenarioConfig {
  int scenario_id = 1;
  std::vector<double> d_over_r0_values{2, 3, 4, 5, 6, 7, 8, 9, 10};
  std::size_t samples_per_ratio = 6000;
  SplitFractions split;
  std::optional<imaging::NoiseSpec> noise;  // seed field unused; per-sample seeds are derived
  ObjectSource object_source = ObjectSource::point;
  std::filesystem::path emnist_images;
  std::filesystem::path emnist_labels;
  std::uint64_t master_seed = 0;
  LabelMode label_mode = LabelMode::modified;
  int grid_size = 512;
  int pupil_px = 256;
  int crop_side = kImageSide;

  /// Defaults for scenario 1..4: point/no noise, EMNIST/no noise, EMNIST/low, EMNIST/high.
  static ScenarioConfig for_scenario(int id, std::uint64_t master_seed = 0);
  /// Throws ConfigError on inconsistent settings.
  void validate() const;
};

nlohmann::json to_json(const ScenarioConfig& c);
/// Missing keys keep the scenario defaults; unknown keys are rejected.
ScenarioConfig config_from_json(const nlohmann::json& j);

struct SampleRecord {
  std::vector<float> image;  // kImageSide^2, row-major, in [0, 1]
  std::array<float, kLabelLength> label{};
  double d_over_r0 = 0.0;
  std::uint32_t object_id = kPointObjectId;
  std::uint64_t seed = 0;
};

/// 28x28 objects with pixel values in [0, 1].
std::vector<RealGrid> load_emnist(const std::filesystem::path& images_path,
                                  const std::filesystem::path& labels_path = {});

/// Shared, read-only state for generating samples on one grid.
class SampleGenerator {
 public:
  explicit SampleGenerator(const ScenarioConfig& config);

  const ScenarioConfig& config() const noexcept { return config_; }
  const turbulence::ZernikeFitter& fitter() const noexcept { return fitter_; }
  const imaging::Pupil& pupil() const noexcept { return pupil_; }

  /// Full pipeline for one sample: screen -> piston removal -> 28-term fit ->
  /// modify -> reconstruct -> PSF -> object imaging -> noise -> crop ->
  /// min-max. A degenerate (constant) frame is regenerated with the next
  /// derived seed. The screen realization depends on (master seed, ratio,
  /// index) only, so every scenario sees the same turbulence for a given slot.
  SampleRecord generate(double d_over_r0, std::size_t index, const RealGrid* object, std::uint32_t object_id) const;

  /// Uncropped intermediate products, for inspection and tests.
  struct Trace {
    PhaseScreen screen;
    zernike::CoefficientSet fitted;
    zernike::CoefficientSet modified;
    PhaseScreen modified_screen;
    IntensityImage psf;
    IntensityImage frame;  // after imaging and noise, before crop
  };
  SampleRecord generate_traced(double d_over_r0, std::size_t index, const RealGrid* object, std::uint32_t object_id,
                               Trace* trace) const;

  std::uint64_t sample_seed(double d_over_r0, std::size_t index) const;

 private:
  ScenarioConfig config_;
  zernike::UnitDiskGrid grid_;
  turbulence::ZernikeFitter fitter_;
  imaging::Pupil pupil_;
};

SampleRecord generate_sample(const ScenarioConfig& config, double d_over_r0, const RealGrid* object,
                             std::size_t index);

struct DatasetManifest {
  std::uint32_t format_version = kFormatVersion;
  ScenarioConfig config;
  SplitCounts counts;
  std::map<std::string, std::uint64_t> checksums;  // file name -> CRC-64/XZ

  nlohmann::json to_json() const;
  static DatasetManifest from_json(const nlohmann::json& j);
};

inline constexpr const char* kManifestName = "manifest.json";
inline constexpr const char* kSplitFiles[3] = {"train.tpsd", "val.tpsd", "test.tpsd"};

/// Writes train/val/test record files and the manifest (last). On failure the
/// partial outputs are removed and the exception propagates.
DatasetManifest generate_dataset(const ScenarioConfig& config, const std::filesystem::path& out_dir);

DatasetManifest read_manifest(const std::filesystem::path& dir);

// Record file ("TPSD"), little-endian: magic, u32 version, u32 record count,
// u16 image side, u16 label length; each record is f32[side*side] image,
// f32[label length] label, f64 d_over_r0, u32 object_id, u64 seed.
class RecordWriter {
 public:
  RecordWriter(const std::filesystem::path& path, std::uint32_t record_count);
  void append(const SampleRecord& record);
  /// Flushes and checks that exactly record_count records were appended.
  void close();

 private:
  std::filesystem::path path_;
  std::ofstream os_;
  std::uint32_t expected_;
  std::uint32_t written_ = 0;
};

void write_records(const std::filesystem::path& path, const std::vector<SampleRecord>& records);
std::vector<SampleRecord> read_records(const std::filesystem::path& path);

/// CRC-64/XZ (ECMA-182 polynomial, reflected, all-ones init and xor-out).
std::uint64_t crc64(const std::filesystem::path& path);
std::uint64_t crc64(const void* data, std::size_t size);

std::string to_hex(std::uint64_t v);

}  // namespace tpsf::dataset

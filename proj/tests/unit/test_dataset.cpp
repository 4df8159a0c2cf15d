#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "stats.hpp"
#include "tpsf/dataset.hpp"

using namespace tpsf;
using namespace tpsf::dataset;
namespace fs = std::filesystem;

namespace {

const fs::path kDigits = TPSF_TEST_DATA "/digits-images-idx3-ubyte";

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

void put_be32(std::ofstream& os, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

void write_idx(const fs::path& p, std::uint32_t magic, std::uint32_t count, const std::vector<unsigned char>& pixels) {
  std::ofstream os(p, std::ios::binary);
  put_be32(os, magic);
  put_be32(os, count);
  put_be32(os, 28);
  put_be32(os, 28);
  os.write(reinterpret_cast<const char*>(pixels.data()), static_cast<std::streamsize>(pixels.size()));
}

// Small grid so the pipeline runs in milliseconds.
ScenarioConfig small(int scenario, std::size_t per_ratio) {
  auto c = ScenarioConfig::for_scenario(scenario, 31);
  c.samples_per_ratio = per_ratio;
  c.grid_size = 128;
  c.pupil_px = 64;
  c.crop_side = kImageSide;
  if (c.object_source == ObjectSource::emnist) c.emnist_images = kDigits;
  return c;
}

bool even_labels_non_negative(const SampleRecord& r) {
  for (int k = 0; k < kLabelLength; ++k) {
    if (zernike::is_angularly_even(k + zernike::kFirstPredicted) && r.label[k] < 0.0f) return false;
  }
  return true;
}

}  // namespace

TEST_SUITE("dataset") {
  TEST_CASE("idx images parse") {
    TempDir dir("tpsf_unit_idx");
    std::vector<unsigned char> px(10 * 784, 0);
    px[784 + 5] = 255;
    px[2 * 784] = 51;
    write_idx(dir.path / "ok", 0x803, 10, px);
    const auto objs = load_emnist(dir.path / "ok");
    REQUIRE(objs.size() == 10);
    CHECK(objs[0].side() == 28);
    for (double v : objs[0].values()) CHECK(v == 0.0);
    CHECK(objs[1][5] == 1.0);
    CHECK(objs[2][0] == doctest::Approx(0.2));
  }

  TEST_CASE("idx errors carry byte offsets") {
    TempDir dir("tpsf_unit_idx_bad");
    std::vector<unsigned char> px(10 * 784, 1);
    write_idx(dir.path / "magic", 0x801, 10, px);
    try {
      load_emnist(dir.path / "magic");
      FAIL("bad magic accepted");
    } catch (const FormatError& e) {
      CHECK(e.offset() == 0);
    }
    px.resize(9 * 784 + 100);
    write_idx(dir.path / "short", 0x803, 10, px);
    try {
      load_emnist(dir.path / "short");
      FAIL("truncated file accepted");
    } catch (const FormatError& e) {
      CHECK(e.offset() == 16 + 9 * 784 + 100);
    }
    CHECK_THROWS_AS(load_emnist(dir.path / "missing"), IoError);
  }

  TEST_CASE("bundled digits file") {
    const auto objs = load_emnist(kDigits, TPSF_TEST_DATA "/digits-labels-idx1-ubyte");
    CHECK(objs.size() == 1797);
    double mx = 0.0;
    for (double v : objs[0].values()) mx = std::max(mx, v);
    CHECK(mx > 0.5);
    CHECK(mx <= 1.0);
  }

  TEST_CASE("scenario defaults") {
    const auto s1 = ScenarioConfig::for_scenario(1);
    CHECK(s1.object_source == ObjectSource::point);
    CHECK_FALSE(s1.noise.has_value());
    CHECK(s1.d_over_r0_values.size() == 9);
    CHECK(s1.d_over_r0_values.front() == 2.0);
    CHECK(s1.d_over_r0_values.back() == 10.0);
    const auto s3 = ScenarioConfig::for_scenario(3);
    const auto s4 = ScenarioConfig::for_scenario(4);
    CHECK(ScenarioConfig::for_scenario(2).object_source == ObjectSource::emnist);
    REQUIRE(s3.noise.has_value());
    REQUIRE(s4.noise.has_value());
    CHECK(s3.noise->readout_sigma < s4.noise->readout_sigma);
    CHECK_THROWS_AS(ScenarioConfig::for_scenario(5), ConfigError);
  }

  TEST_CASE("split counts") {
    const auto full = split_counts(6000, SplitFractions{});
    CHECK(full == SplitCounts{5000, 500, 500});
    CHECK(9 * full.train == 45000);
    CHECK(9 * full.val == 4500);

    const auto desk = split_counts(600, SplitFractions{0.833, 0.1, 0.067});
    CHECK(9 * desk.train == 4500);
    CHECK(9 * desk.val == 540);
    CHECK(9 * desk.test == 360);
    CHECK(split_counts(720, SplitFractions{}) == SplitCounts{600, 60, 60});
  }

  TEST_CASE("config validation and json") {
    auto c = ScenarioConfig::for_scenario(3, 99);
    c.emnist_images = "objects.idx";
    const auto back = config_from_json(to_json(c));
    CHECK(to_json(back) == to_json(c));
    CHECK(back.noise->peak_photons == c.noise->peak_photons);

    auto j = to_json(c);
    j["colour"] = "red";
    CHECK_THROWS_AS(config_from_json(j), ConfigError);
    j = to_json(c);
    j["label_mode"] = "maybe";
    CHECK_THROWS_AS(config_from_json(j), ConfigError);

    auto bad = ScenarioConfig::for_scenario(1);
    bad.split = {0.5, 0.2, 0.2};
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = ScenarioConfig::for_scenario(1);
    bad.samples_per_ratio = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = ScenarioConfig::for_scenario(2);
    CHECK_THROWS_AS(bad.validate(), ConfigError);  // no object file
  }

  TEST_CASE("point source image is the cropped normalized PSF") {
    const auto cfg = ScenarioConfig::for_scenario(1, 3);
    const SampleGenerator gen(cfg);
    SampleGenerator::Trace t;
    const auto rec = gen.generate_traced(2.0, 0, nullptr, kPointObjectId, &t);
    const auto expected = imaging::min_max_normalize(imaging::center_crop(t.psf, kImageSide));
    REQUIRE(rec.image.size() == expected.data.size());
    for (std::size_t i = 0; i < rec.image.size(); ++i) CHECK(rec.image[i] == static_cast<float>(expected.data[i]));
    CHECK(rec.object_id == kPointObjectId);
    CHECK(even_labels_non_negative(rec));
    const auto mod = t.modified.predicted_terms();
    for (int k = 0; k < kLabelLength; ++k) CHECK(rec.label[k] == static_cast<float>(mod[k]));
  }

  TEST_CASE("noisy extended-object samples are reproducible") {
    const auto objs = load_emnist(kDigits);
    auto cfg = ScenarioConfig::for_scenario(4, 8);
    cfg.emnist_images = kDigits;
    const SampleGenerator gen(cfg);
    const auto a = gen.generate(6.0, 17, &objs[4], 4);
    const auto b = gen.generate(6.0, 17, &objs[4], 4);
    CHECK(a.image == b.image);
    CHECK(a.label == b.label);
    CHECK(a.seed == b.seed);
    CHECK(a.object_id == 4);
    const auto mm = std::minmax_element(a.image.begin(), a.image.end());
    CHECK(*mm.first == 0.0f);
    CHECK(*mm.second == 1.0f);
    CHECK(even_labels_non_negative(a));
    CHECK_FALSE(gen.generate(6.0, 18, &objs[4], 4).image == a.image);
  }

  TEST_CASE("scenarios share the turbulence of a slot") {
    const SampleGenerator s1(small(1, 4)), s2(small(2, 4));
    const auto objs = load_emnist(kDigits);
    SampleGenerator::Trace t1, t2;
    s1.generate_traced(5.0, 2, nullptr, kPointObjectId, &t1);
    s2.generate_traced(5.0, 2, &objs[0], 0, &t2);
    CHECK(t1.screen.data == t2.screen.data);
    CHECK(s1.sample_seed(5.0, 2) != s2.sample_seed(5.0, 2));
  }

  TEST_CASE("signed label mode keeps the fitted signs") {
    auto cfg = small(1, 4);
    cfg.label_mode = LabelMode::signed_coefficients;
    const SampleGenerator gen(cfg);
    SampleGenerator::Trace t;
    const auto rec = gen.generate_traced(9.0, 1, nullptr, kPointObjectId, &t);
    bool negative_even = false;
    for (int k = 0; k < kLabelLength; ++k) {
      CHECK(rec.label[k] == static_cast<float>(t.fitted[k + zernike::kFirstPredicted]));
      if (zernike::is_angularly_even(k + 3) && rec.label[k] < 0.0f) negative_even = true;
    }
    CHECK(negative_even);
  }

  TEST_CASE("all-zero object is degenerate") {
    const SampleGenerator gen(small(2, 4));
    const RealGrid empty(28, 0.0);
    CHECK_THROWS_AS(gen.generate(3.0, 0, &empty, 0), DegenerateInputError);
  }

  TEST_CASE("label variance grows with turbulence strength") {
    constexpr int n = 200;
    const SampleGenerator gen(small(1, n));
    const auto& ratios = gen.config().d_over_r0_values;
    std::vector<std::vector<double>> var(kLabelLength, std::vector<double>(ratios.size(), 0.0));
    for (std::size_t r = 0; r < ratios.size(); ++r) {
      std::vector<double> s(kLabelLength, 0.0), s2(kLabelLength, 0.0);
      for (int i = 0; i < n; ++i) {
        const auto rec = gen.generate(ratios[r], static_cast<std::size_t>(i), nullptr, kPointObjectId);
        for (int k = 0; k < kLabelLength; ++k) {
          s[k] += rec.label[k];
          s2[k] += static_cast<double>(rec.label[k]) * rec.label[k];
        }
      }
      for (int k = 0; k < kLabelLength; ++k) var[k][r] = (s2[k] - s[k] * s[k] / n) / (n - 1);
    }
    for (int k = 0; k < kLabelLength; ++k) {
      INFO("q=" << k + 3);
      CHECK(stats::spearman(ratios, var[k]) > 0.9);
    }
  }

  TEST_CASE("records round trip and reject truncation") {
    TempDir dir("tpsf_unit_records");
    SampleRecord r;
    r.image.assign(kImageSide * kImageSide, 0.25f);
    r.image[0] = 0.0f;
    r.image[1] = 1.0f;
    for (int k = 0; k < kLabelLength; ++k) r.label[k] = 0.1f * k;
    r.d_over_r0 = 7.0;
    r.object_id = 12;
    r.seed = 0xDEADBEEFCAFEULL;
    write_records(dir.path / "r.tpsd", {r, r});
    CHECK(fs::file_size(dir.path / "r.tpsd") == 16 + 2 * (4 * 10000 + 4 * 25 + 8 + 4 + 8));
    const auto back = read_records(dir.path / "r.tpsd");
    REQUIRE(back.size() == 2);
    CHECK(back[1].image == r.image);
    CHECK(back[1].label == r.label);
    CHECK(back[1].d_over_r0 == 7.0);
    CHECK(back[1].object_id == 12);
    CHECK(back[1].seed == r.seed);

    fs::resize_file(dir.path / "r.tpsd", fs::file_size(dir.path / "r.tpsd") - 1);
    CHECK_THROWS_AS(read_records(dir.path / "r.tpsd"), FormatError);

    RecordWriter w(dir.path / "w.tpsd", 2);
    w.append(r);
    CHECK_THROWS_AS(w.close(), ContractError);
  }

  TEST_CASE("crc64 check value") {
    const char digits[] = "123456789";
    CHECK(crc64(digits, 9) == 0x995DC9BBDF1939FAULL);
    CHECK(to_hex(0x995DC9BBDF1939FAULL) == "0x995dc9bbdf1939fa");
  }

  TEST_CASE("generated dataset: counts, manifest, disjoint objects, regeneration") {
    TempDir dir("tpsf_unit_dataset");
    auto cfg = small(2, 12);
    cfg.d_over_r0_values = {2.0, 6.0, 10.0};
    const auto m = generate_dataset(cfg, dir.path / "a");
    CHECK(m.counts == SplitCounts{30, 3, 3});
    const auto j = nlohmann::json::parse(std::ifstream(dir.path / "a" / kManifestName));
    for (const char* key : {"scenario", "ratios", "counts", "checksums", "format_version"}) CHECK(j.contains(key));

    const auto train = read_records(dir.path / "a" / "train.tpsd");
    const auto test = read_records(dir.path / "a" / "test.tpsd");
    CHECK(train.size() == 30);
    CHECK(test.size() == 3);
    std::set<std::uint32_t> train_ids, test_ids;
    for (const auto& r : train) train_ids.insert(r.object_id);
    for (const auto& r : test) test_ids.insert(r.object_id);
    for (auto id : test_ids) CHECK(train_ids.count(id) == 0);
    for (const auto& r : train) {
      CHECK(even_labels_non_negative(r));
      const auto mm = std::minmax_element(r.image.begin(), r.image.end());
      CHECK(*mm.first == 0.0f);
      CHECK(*mm.second == 1.0f);
    }

    const auto again = generate_dataset(read_manifest(dir.path / "a").config, dir.path / "b");
    CHECK(again.checksums == m.checksums);
    for (const auto& [file, crc] : m.checksums) CHECK(crc64(dir.path / "b" / file) == crc);
  }

  TEST_CASE("too few objects is a configuration error and leaves nothing behind") {
    TempDir dir("tpsf_unit_dataset_small_pool");
    write_idx(dir.path / "few", 0x803, 3, std::vector<unsigned char>(3 * 784, 9));
    auto cfg = small(2, 12);
    cfg.emnist_images = dir.path / "few";
    CHECK_THROWS_AS(generate_dataset(cfg, dir.path / "out"), ConfigError);
    CHECK_FALSE(fs::exists(dir.path / "out" / kManifestName));
    CHECK_FALSE(fs::exists(dir.path / "out" / "train.tpsd"));
  }
}

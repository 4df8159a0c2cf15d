// tpsf: screens, fits, PSFs, sample simulation, sign-ambiguity checks,
// dataset builds, training, evaluation and report figures.
//
// Exit status: 0 success, 1 runtime error or failed check, 2 usage error.

#include <omp.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "report.hpp"
#include "tpsf/ambiguity.hpp"
#include "tpsf/dataset.hpp"
#include "tpsf/errors.hpp"
#include "tpsf/imaging.hpp"
#include "tpsf/nn/training.hpp"
#include "tpsf/turbulence.hpp"
#include "tpsf/zernike.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace tpsf;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::optional<std::uint64_t> env_seed() {
  const char* s = std::getenv("TPSF_SEED");
  if (s == nullptr || *s == '\0') return std::nullopt;
  try {
    std::size_t used = 0;
    const auto v = std::stoull(s, &used, 0);
    if (used == std::string(s).size()) return v;
  } catch (const std::exception&) {
  }
  throw UsageError(std::string("TPSF_SEED is not an unsigned integer: '") + s + "'");
}

// Flag, then config file (handled by the caller), then TPSF_SEED, then 0.
std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag, std::uint64_t fallback = 0) {
  if (flag) return *flag;
  if (auto e = env_seed()) return *e;
  return fallback;
}

json read_json(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config " + path.string());
  try {
    return json::parse(is);
  } catch (const json::parse_error& e) {
    throw UsageError(path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream os(path, std::ios::trunc);
  os << j.dump(2) << "\n";
  if (!os) throw IoError("cannot write " + path.string());
}

void require_file(const fs::path& p, const std::string& what) {
  if (!fs::is_regular_file(p)) throw IoError("missing " + what + ": " + p.string());
}

void print_coefficients(const zernike::CoefficientSet& c) {
  std::cout << "q,n,m,value\n" << std::setprecision(9);
  for (int q = 0; q < static_cast<int>(c.size()); ++q) {
    const auto idx = zernike::ZernikeIndex::from_q(q);
    std::cout << q << "," << idx.n << "," << idx.m << "," << c[q] << "\n";
  }
}

void write_coefficients_csv(const fs::path& path, const zernike::CoefficientSet& c) {
  std::ofstream os(path, std::ios::trunc);
  os << "q,n,m,value\n" << std::setprecision(17);
  for (int q = 0; q < static_cast<int>(c.size()); ++q) {
    const auto idx = zernike::ZernikeIndex::from_q(q);
    os << q << "," << idx.n << "," << idx.m << "," << c[q] << "\n";
  }
  if (!os) throw IoError("cannot write " + path.string());
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

// ---- screen ---------------------------------------------------------------

struct ScreenArgs {
  int n = 512;
  std::optional<int> pupil_px;
  double d_over_r0 = 5.0;
  std::optional<std::uint64_t> seed;
  fs::path out = "screen.tpsf";
};

int cmd_screen(const ScreenArgs& a) {
  const int pupil = a.pupil_px.value_or(a.n / 2);
  const auto spec = ScreenSpec::from_ratio(a.d_over_r0, resolve_seed(a.seed), a.n, pupil);
  auto screen = turbulence::kolmogorov_screen(spec);
  ensure_parent(a.out);
  turbulence::write_screen(a.out, screen);
  const zernike::UnitDiskGrid grid(a.n, pupil);
  turbulence::remove_piston(screen, grid);
  const auto c = turbulence::ZernikeFitter(grid).fit(screen);
  std::cout << "# screen " << a.out.string() << " N=" << a.n << " pupil_px=" << pupil << " D/r0=" << a.d_over_r0
            << " seed=" << spec.seed << "\n";
  print_coefficients(c);
  return 0;
}

// ---- fit ------------------------------------------------------------------

struct FitArgs {
  fs::path screen;
  std::optional<int> pupil_px;
  int modes = zernike::kNumModes;
  bool modified = false;
  fs::path out;
};

int cmd_fit(const FitArgs& a) {
  require_file(a.screen, "screen file");
  auto screen = turbulence::read_screen(a.screen);
  const int n = screen.data.side();
  const int pupil = a.pupil_px.value_or(screen.spec ? screen.spec->pupil_px : n / 2);
  const zernike::UnitDiskGrid grid(n, pupil);
  turbulence::remove_piston(screen, grid);
  const turbulence::ZernikeFitter fitter(grid, a.modes);
  auto c = fitter.fit(screen);
  std::cout << "# residual_rms " << fitter.residual_rms(screen, c) << "\n";
  if (a.modified) c = zernike::modify(c);
  print_coefficients(c);
  if (!a.out.empty()) {
    ensure_parent(a.out);
    write_coefficients_csv(a.out, c);
  }
  return 0;
}

// ---- psf ------------------------------------------------------------------

struct PsfArgs {
  fs::path screen;
  std::optional<int> q;
  double amp = 1.0;
  int n = 512;
  std::optional<int> pupil_px;
  bool modified = false;
  int crop = 0;
  fs::path out = "psf.pgm";
  fs::path csv;
};

int cmd_psf(const PsfArgs& a) {
  if (a.screen.empty() == !a.q.has_value()) throw UsageError("give exactly one of --screen or --q");
  if (a.modified && a.screen.empty()) throw UsageError("--modified needs --screen");
  PhaseScreen phase;
  int pupil = 0;
  if (a.q) {
    pupil = a.pupil_px.value_or(a.n / 2);
    phase = ambiguity::single_term_phase(*a.q, a.amp, imaging::Pupil::circular(a.n, pupil));
  } else {
    require_file(a.screen, "screen file");
    phase = turbulence::read_screen(a.screen);
    const int n = phase.data.side();
    pupil = a.pupil_px.value_or(phase.spec ? phase.spec->pupil_px : n / 2);
    const zernike::UnitDiskGrid grid(n, pupil);
    turbulence::remove_piston(phase, grid);
    if (a.modified) {
      const turbulence::ZernikeFitter fitter(grid);
      phase = turbulence::reconstruct_modified(zernike::modify(fitter.fit(phase)), fitter);
    }
  }
  const auto pupil_mask = imaging::Pupil::circular(phase.data.side(), pupil);
  auto h = imaging::psf(pupil_mask, phase);
  if (a.crop > 0) h = imaging::center_crop(h, a.crop);
  double peak = 0.0;
  for (double v : h.data.values()) peak = std::max(peak, v);
  ensure_parent(a.out);
  imaging::write_pgm(a.out, h);
  if (!a.csv.empty()) {
    ensure_parent(a.csv);
    imaging::write_csv(a.csv, h);
  }
  std::cout << std::setprecision(9) << "side " << h.data.side() << "\nenergy " << imaging::total_energy(h)
            << "\npeak " << peak << "\n";
  return 0;
}

// ---- simulate -------------------------------------------------------------

struct SimulateArgs {
  fs::path config;
  std::optional<int> scenario;
  double d_over_r0 = 5.0;
  std::size_t index = 0;
  std::optional<std::uint64_t> seed;
  fs::path objects;
  std::size_t object_index = 0;
  fs::path out = "sample";
};

dataset::ScenarioConfig scenario_config(const fs::path& file, const std::optional<int>& scenario,
                                        const std::optional<std::uint64_t>& seed, const fs::path& objects,
                                        json overrides = json::object()) {
  json j = file.empty() ? json::object() : read_json(file);
  if (!j.is_object()) throw UsageError("scenario config must be a JSON object");
  if (scenario) {
    // A scenario flag resets the file's defaults to that scenario's.
    j["scenario"] = *scenario;
  }
  if (seed) {
    j["master_seed"] = *seed;
  } else if (!j.contains("master_seed")) {
    if (auto e = env_seed()) j["master_seed"] = *e;
  }
  if (!objects.empty()) j["emnist_images"] = objects.string();
  for (const auto& [k, v] : overrides.items()) j[k] = v;
  auto c = dataset::config_from_json(j);
  c.validate();
  return c;
}

int cmd_simulate(const SimulateArgs& a) {
  const auto cfg = scenario_config(a.config, a.scenario, a.seed, a.objects);
  std::vector<RealGrid> pool;
  const RealGrid* object = nullptr;
  std::uint32_t object_id = dataset::kPointObjectId;
  if (cfg.object_source == dataset::ObjectSource::emnist) {
    require_file(cfg.emnist_images, "object image file");
    pool = dataset::load_emnist(cfg.emnist_images);
    if (a.object_index >= pool.size()) {
      throw UsageError("--object-index " + std::to_string(a.object_index) + " is past the " +
                       std::to_string(pool.size()) + " objects in " + cfg.emnist_images.string());
    }
    object = &pool[a.object_index];
    object_id = static_cast<std::uint32_t>(a.object_index);
  }
  const dataset::SampleGenerator gen(cfg);
  dataset::SampleGenerator::Trace trace;
  const auto rec = gen.generate_traced(a.d_over_r0, a.index, object, object_id, &trace);
  fs::create_directories(a.out);
  IntensityImage img{RealGrid(dataset::kImageSide)};
  for (std::size_t i = 0; i < rec.image.size(); ++i) img.data[i] = rec.image[i];
  imaging::write_pgm(a.out / "image.pgm", img);
  imaging::write_csv(a.out / "image.csv", img);
  imaging::write_pgm(a.out / "psf.pgm", imaging::center_crop(trace.psf, cfg.crop_side));
  write_coefficients_csv(a.out / "fitted.csv", trace.fitted);
  {
    std::ofstream os(a.out / "label.csv", std::ios::trunc);
    os << "q,label\n" << std::setprecision(9);
    for (int k = 0; k < dataset::kLabelLength; ++k) os << k + zernike::kFirstPredicted << "," << rec.label[k] << "\n";
  }
  std::cout << "# sample D/r0=" << a.d_over_r0 << " index=" << a.index << " seed=" << rec.seed << "\nq,label\n"
            << std::setprecision(9);
  for (int k = 0; k < dataset::kLabelLength; ++k) std::cout << k + zernike::kFirstPredicted << "," << rec.label[k] << "\n";
  return 0;
}

// ---- ambiguity ------------------------------------------------------------

struct AmbiguityArgs {
  std::vector<int> q;
  std::vector<double> amp;
  int n = 512;
  std::optional<int> pupil_px;
  fs::path csv = "ambiguity.csv";
};

int cmd_ambiguity(AmbiguityArgs a) {
  if (a.q.empty()) {
    for (int q = 3; q <= 27; ++q) a.q.push_back(q);
  }
  if (a.amp.empty()) a.amp = {0.5, 2.0, 5.0};
  const auto pupil = imaging::Pupil::circular(a.n, a.pupil_px.value_or(a.n / 2));
  const auto reports = ambiguity::verify_all(a.q, a.amp, pupil);
  ensure_parent(a.csv);
  ambiguity::write_csv(a.csv, reports);
  std::size_t failed = 0;
  std::cout << std::setprecision(3);
  for (const auto& r : reports) {
    if (!r.pass) {
      ++failed;
      std::cout << "FAIL q=" << r.q << " amp=" << r.amplitude << " invariance=" << r.invariance_distance
                << " l2=" << r.l2_distance << "\n";
    }
  }
  std::cout << reports.size() << " rows, " << reports.size() - failed << " pass, " << failed << " fail -> "
            << a.csv.string() << "\n";
  return failed == 0 ? 0 : 1;
}

// ---- dataset --------------------------------------------------------------

struct DatasetArgs {
  fs::path config;
  std::optional<int> scenario;
  std::optional<std::size_t> samples_per_ratio;
  std::vector<double> ratios;
  std::optional<std::uint64_t> seed;
  fs::path objects;
  std::string labels;
  fs::path out;
};

int cmd_dataset(const DatasetArgs& a) {
  json over = json::object();
  if (a.samples_per_ratio) over["samples_per_ratio"] = *a.samples_per_ratio;
  if (!a.ratios.empty()) over["d_over_r0"] = a.ratios;
  if (!a.labels.empty()) over["label_mode"] = a.labels;
  const auto cfg = scenario_config(a.config, a.scenario, a.seed, a.objects, over);
  if (cfg.object_source == dataset::ObjectSource::emnist) require_file(cfg.emnist_images, "object image file");
  const auto m = dataset::generate_dataset(cfg, a.out);
  std::cout << "scenario " << cfg.scenario_id << ": train " << m.counts.train << ", val " << m.counts.val
            << ", test " << m.counts.test << " -> " << a.out.string() << "\n";
  for (const auto& [name, crc] : m.checksums) std::cout << name << " " << dataset::to_hex(crc) << "\n";
  return 0;
}

// ---- train / eval ---------------------------------------------------------

nn::Samples load_split(const fs::path& data, const std::string& split) {
  dataset::read_manifest(data);
  const fs::path file = data / (split + ".tpsd");
  require_file(file, "split file");
  return nn::Samples::from_records(dataset::read_records(file));
}

struct TrainArgs {
  fs::path data;
  fs::path config;
  std::optional<int> epochs;
  std::optional<int> batch_size;
  std::optional<double> lr;
  std::optional<std::uint64_t> seed;
  std::string backend;
  fs::path out;
};

int cmd_train(const TrainArgs& a) {
  json j = a.config.empty() ? json::object() : read_json(a.config);
  if (!j.is_object()) throw UsageError("train config must be a JSON object");
  if (a.epochs) j["epochs"] = *a.epochs;
  if (a.batch_size) j["batch_size"] = *a.batch_size;
  if (a.lr) j["learning_rate"] = *a.lr;
  if (!a.backend.empty()) j["backend"] = a.backend;
  if (a.seed) {
    j["seed"] = *a.seed;
  } else if (!j.contains("seed")) {
    if (auto e = env_seed()) j["seed"] = *e;
  }
  const auto tc = nn::train_config_from_json(j);
  tc.validate();

  const auto train_split = load_split(a.data, "train");
  const auto val_split = load_split(a.data, "val");
  fs::create_directories(a.out);
  write_json(a.out / "train_config.json", nn::to_json(tc));
  std::cout << "training on " << train_split.size() << " samples, validating on " << val_split.size() << "\n"
            << std::setprecision(6);
  const auto res = nn::train(train_split, val_split, tc, [](const nn::EpochStats& e) {
    std::cout << "epoch " << e.epoch << " train " << e.train_mse << " val " << e.val_mse << std::endl;
  });
  nn::save_checkpoint(a.out / "checkpoint.tpsn", res.best, res.best_state);
  nn::write_history_csv(a.out / "history.csv", res.history);
  std::cout << "best epoch " << res.best_epoch << " val " << res.best_val_mse << " -> "
            << (a.out / "checkpoint.tpsn").string() << "\n";
  return 0;
}

struct EvalArgs {
  fs::path data;
  fs::path checkpoint;
  fs::path config;
  std::string stub;
  std::string split = "test";
  bool clamp_even = false;
  fs::path out;
};

int cmd_eval(const EvalArgs& a) {
  if (a.checkpoint.empty() == a.stub.empty()) throw UsageError("give exactly one of --checkpoint or --stub");
  nn::TrainConfig tc;
  fs::path cfg_path = a.config;
  if (cfg_path.empty() && !a.checkpoint.empty()) {
    const auto sibling = a.checkpoint.parent_path() / "train_config.json";
    if (fs::exists(sibling)) cfg_path = sibling;
  }
  if (!cfg_path.empty()) tc = nn::train_config_from_json(read_json(cfg_path));
  if (!a.checkpoint.empty()) require_file(a.checkpoint, "checkpoint");

  const auto split = load_split(a.data, a.split);
  const bool clamp = a.clamp_even || tc.clamp_even;
  nn::EvalReport rep;
  if (!a.stub.empty()) {
    const std::size_t px = static_cast<std::size_t>(split.image_side) * split.image_side;
    const std::size_t len = static_cast<std::size_t>(split.label_length);
    const bool perfect = a.stub == "perfect";
    const nn::Predictor predict = [&](const float* images, int batch) {
      std::vector<float> out(static_cast<std::size_t>(batch) * len, 0.0f);
      if (perfect) {
        const auto start = static_cast<std::size_t>(images - split.images.data()) / px;
        std::copy_n(split.labels.begin() + static_cast<std::ptrdiff_t>(start * len), out.size(), out.begin());
      }
      return out;
    };
    rep = nn::evaluate(predict, split, clamp);
  } else {
    const auto ck = nn::load_checkpoint(a.checkpoint, tc.architecture);
    rep = nn::evaluate(ck.net, split, clamp, tc.backend);
  }
  nn::write_eval_csv(a.out, rep, split);
  std::cout << std::setprecision(6) << "overall mse " << rep.overall_mse << " (" << split.size() << " samples)\n";
  for (const auto& r : rep.per_ratio) std::cout << "D/r0 " << r.d_over_r0 << ": mse " << r.mse << " (" << r.count << ")\n";
  return 0;
}

// ---- report ---------------------------------------------------------------

struct ReportArgs {
  std::vector<fs::path> evals;
  std::vector<std::string> labels;
  fs::path out = "report";
  bool require_monotone = false;
};

int cmd_report(ReportArgs a) {
  if (a.labels.empty()) {
    for (const auto& e : a.evals) {
      const auto name = e.filename().empty() ? e.parent_path().filename() : e.filename();
      a.labels.push_back(name.string());
    }
  }
  if (a.labels.size() != a.evals.size()) throw UsageError("--label must be given once per --eval");
  for (const auto& e : a.evals) require_file(e / "eval_summary.csv", "eval summary");
  const auto rho = report::write_report(a.evals, a.labels, a.out);
  bool ok = true;
  std::cout << std::setprecision(4);
  for (std::size_t i = 0; i < rho.size(); ++i) {
    const bool mono = rho[i] > 0.9;
    ok = ok && mono;
    std::cout << a.labels[i] << ": spearman(D/r0, mse) " << rho[i] << (mono ? " increasing" : " not increasing") << "\n";
  }
  std::cout << "figures -> " << a.out.string() << "\n";
  return (a.require_monotone && !ok) ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Turbulence PSF toolkit: modified Zernike coefficients from single intensity images"};
  app.require_subcommand(1);
  int threads = 0;
  bool deterministic = false;
  app.add_option("--threads", threads, "Cap on worker threads (0 = OpenMP default)")->check(CLI::NonNegativeNumber);
  app.add_flag("--deterministic", deterministic, "Single worker, fixed reduction order");

  ScreenArgs sa;
  auto* screen = app.add_subcommand("screen", "Kolmogorov phase screen plus its 28-term fit");
  screen->add_option("--n", sa.n, "Grid side, a power of two")->check(CLI::PositiveNumber);
  screen->add_option("--pupil-px", sa.pupil_px, "Pupil diameter in pixels (default n/2)")->check(CLI::PositiveNumber);
  screen->add_option("--d-over-r0", sa.d_over_r0, "Turbulence strength D/r0")->check(CLI::PositiveNumber);
  screen->add_option("--seed", sa.seed, "Screen seed (default TPSF_SEED, else 0)");
  screen->add_option("--out", sa.out, "Output screen file");

  FitArgs fa;
  auto* fit = app.add_subcommand("fit", "Zernike fit of a stored screen");
  fit->add_option("--screen", fa.screen, "Screen file")->required();
  fit->add_option("--pupil-px", fa.pupil_px, "Pupil diameter in pixels")->check(CLI::PositiveNumber);
  fit->add_option("--modes", fa.modes, "Number of modes")->check(CLI::Range(1, 1000));
  fit->add_flag("--modified", fa.modified, "Print modified coefficients");
  fit->add_option("--out", fa.out, "CSV output");

  PsfArgs pa;
  auto* psf = app.add_subcommand("psf", "PSF of a stored screen or of a single Zernike term");
  psf->add_option("--screen", pa.screen, "Screen file");
  psf->add_option("--q", pa.q, "Single-term index")->check(CLI::NonNegativeNumber);
  psf->add_option("--amp", pa.amp, "Single-term amplitude in radians");
  psf->add_option("--n", pa.n, "Grid side for --q")->check(CLI::PositiveNumber);
  psf->add_option("--pupil-px", pa.pupil_px, "Pupil diameter in pixels")->check(CLI::PositiveNumber);
  psf->add_flag("--modified", pa.modified, "Use the modified reconstruction of the screen");
  psf->add_option("--crop", pa.crop, "Centre crop side (0 = none)")->check(CLI::NonNegativeNumber);
  psf->add_option("--out", pa.out, "PGM output");
  psf->add_option("--csv", pa.csv, "CSV output");

  SimulateArgs ma;
  auto* simulate = app.add_subcommand("simulate", "One labelled sample with its intermediate products");
  simulate->add_option("--config", ma.config, "Scenario config JSON")->check(CLI::ExistingFile);
  simulate->add_option("--scenario", ma.scenario, "Scenario 1..4")->check(CLI::Range(1, 4));
  simulate->add_option("--d-over-r0", ma.d_over_r0, "Turbulence strength D/r0")->check(CLI::PositiveNumber);
  simulate->add_option("--index", ma.index, "Sample slot");
  simulate->add_option("--seed", ma.seed, "Master seed");
  simulate->add_option("--objects", ma.objects, "IDX image file of extended objects");
  simulate->add_option("--object-index", ma.object_index, "Object to image");
  simulate->add_option("--out", ma.out, "Output directory");

  AmbiguityArgs aa;
  auto* amb = app.add_subcommand("ambiguity", "Sign-ambiguity sweep over single Zernike terms");
  amb->add_option("--q", aa.q, "Terms (default 3..27)")->check(CLI::NonNegativeNumber);
  amb->add_option("--amp", aa.amp, "Amplitudes in radians (default 0.5 2 5)")->check(CLI::PositiveNumber);
  amb->add_option("--n", aa.n, "Grid side")->check(CLI::PositiveNumber);
  amb->add_option("--pupil-px", aa.pupil_px, "Pupil diameter in pixels")->check(CLI::PositiveNumber);
  amb->add_option("--csv", aa.csv, "CSV output");

  DatasetArgs da;
  auto* ds = app.add_subcommand("dataset", "Generate train/val/test record files and a manifest");
  ds->add_option("--config", da.config, "Scenario config JSON")->check(CLI::ExistingFile);
  ds->add_option("--scenario", da.scenario, "Scenario 1..4")->check(CLI::Range(1, 4));
  ds->add_option("--samples-per-ratio", da.samples_per_ratio, "Samples per D/r0 value")->check(CLI::PositiveNumber);
  ds->add_option("--ratios", da.ratios, "D/r0 values")->check(CLI::PositiveNumber);
  ds->add_option("--seed", da.seed, "Master seed");
  ds->add_option("--objects", da.objects, "IDX image file of extended objects");
  ds->add_option("--labels", da.labels, "Label mode")->check(CLI::IsMember({"modified", "signed"}));
  ds->add_option("--out", da.out, "Output directory")->required();

  TrainArgs ta;
  auto* tr = app.add_subcommand("train", "Train the network on a generated dataset");
  tr->add_option("--data", ta.data, "Dataset directory")->required();
  tr->add_option("--config", ta.config, "Train config JSON")->check(CLI::ExistingFile);
  tr->add_option("--epochs", ta.epochs, "Epochs")->check(CLI::PositiveNumber);
  tr->add_option("--batch-size", ta.batch_size, "Mini-batch size")->check(CLI::PositiveNumber);
  tr->add_option("--lr", ta.lr, "Adam learning rate")->check(CLI::PositiveNumber);
  tr->add_option("--seed", ta.seed, "Initialization and shuffling seed");
  tr->add_option("--backend", ta.backend, "Kernel backend")->check(CLI::IsMember({"reference", "parallel"}));
  tr->add_option("--out", ta.out, "Output directory")->required();

  EvalArgs ea;
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint (or a stub predictor) on one split");
  ev->add_option("--data", ea.data, "Dataset directory")->required();
  ev->add_option("--checkpoint", ea.checkpoint, "Checkpoint file");
  ev->add_option("--config", ea.config, "Train config JSON (default: next to the checkpoint)")->check(CLI::ExistingFile);
  ev->add_option("--stub", ea.stub, "Stub predictor instead of a checkpoint")->check(CLI::IsMember({"perfect", "zero"}));
  ev->add_option("--split", ea.split, "Split")->check(CLI::IsMember({"train", "val", "test"}));
  ev->add_flag("--clamp-even", ea.clamp_even, "Clamp even-n predictions at zero");
  ev->add_option("--out", ea.out, "Output directory")->required();

  ReportArgs ra;
  auto* rp = app.add_subcommand("report", "MSE-vs-D/r0 and coefficient figures (SVG and CSV)");
  rp->add_option("--eval", ra.evals, "Eval output directories")->required();
  rp->add_option("--label", ra.labels, "Legend label per eval directory");
  rp->add_option("--out", ra.out, "Output directory");
  rp->add_flag("--require-monotone", ra.require_monotone, "Exit 1 unless every curve increases with D/r0");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (deterministic) {
    omp_set_num_threads(1);
  } else if (threads > 0) {
    omp_set_num_threads(threads);
  }

  try {
    if (*screen) return cmd_screen(sa);
    if (*fit) return cmd_fit(fa);
    if (*psf) return cmd_psf(pa);
    if (*simulate) return cmd_simulate(ma);
    if (*amb) return cmd_ambiguity(aa);
    if (*ds) return cmd_dataset(da);
    if (*tr) return cmd_train(ta);
    if (*ev) return cmd_eval(ea);
    if (*rp) return cmd_report(ra);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

#include "cli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <mutex>
#include <optional>
#include <thread>

#include <CLI11.hpp>

#include "fmprior/config.hpp"
#include "fmprior/distill.hpp"
#include "fmprior/error.hpp"
#include "fmprior/io.hpp"
#include "fmprior/random.hpp"
#include "fmprior/sgm.hpp"
#include "fmprior/synth.hpp"
#include "manifest.hpp"

namespace fmprior::cli {

namespace fs = std::filesystem;

namespace {

// Bad flags or config values; exits with status 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

constexpr int kUsageExit = 2;

void error_line(std::string_view code, int status, std::string_view message) {
  const Json line = {{"error", {{"code", code}, {"exit", status}, {"message", message}}}};
  std::cerr << line.dump() << std::endl;
}

void note(const std::string& message) { std::cerr << "fmprior: " << message << std::endl; }

class Stopwatch {
 public:
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count(); }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string numbered(std::string_view stem, std::size_t i, std::string_view ext, int width = 5) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%0*zu", width, i);
  return std::string(stem) + buf + std::string(ext);
}

// Flags shared by every command that reads a RunConfig.
struct ConfigFlags {
  std::string file;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", file, "key = value config file")->check(CLI::ExistingFile);
    cmd->add_option("--set", overrides, "override one config key (key=value), repeatable");
    cmd->add_option("--seed", seed, "global seed (overrides the config)");
  }

  RunConfig resolve() const {
    try {
      RunConfig c = file.empty() ? RunConfig{} : load_run_config(file);
      for (const auto& o : overrides) apply_override(c, o);
      if (seed) c.seed = *seed;
      c.deform.seed = c.seed;
      c.train.seed = c.seed;
      c.validate();
      return c;
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kIoError || e.code() == ErrorCode::kParseError) throw;
      throw UsageError(e.detail());
    }
  }
};

Json report_header(std::string_view command, const RunConfig& config) {
  return {{"command", command}, {"seed", config.seed}, {"config", config_json(config)}};
}

// Same vertex count and faces: vertex i corresponds to vertex i.
void require_registered(const TriangleMesh& reference, const TriangleMesh& shape, const fs::path& path) {
  if (reference.num_vertices() != shape.num_vertices() || reference.faces() != shape.faces())
    fail(ErrorCode::kShapeMismatch, path.string() + ": connectivity differs from the template");
}

std::unique_ptr<SpectralDenoiser> load_denoiser(const std::string& path, int k) {
  if (path.empty()) return nullptr;
  auto d = std::make_unique<SpectralDenoiser>(load_checkpoint(path));
  if (d->order() != k)
    fail(ErrorCode::kShapeMismatch,
         path + ": checkpoint order " + std::to_string(d->order()) + " differs from match.k = " + std::to_string(k));
  return d;
}

// --------------------------------------------------------------------------
// synth-data

struct SynthData {
  ConfigFlags config;
  std::string out;

  void attach(CLI::App& app) {
    auto* cmd = app.add_subcommand("synth-data", "deformed template family plus manifest");
    config.attach(cmd);
    cmd->add_option("--out", out, "output directory")->required();
    cmd->callback([this] { run(); });
  }

  void run() const {
    const RunConfig cfg = config.resolve();
    const Stopwatch clock;
    const fs::path dir = out;
    fs::create_directories(dir / "shapes");

    const Deformer deformer(make_template(cfg.deform.kind, cfg.deform.level), cfg.deform);
    write_off(deformer.reference(), dir / "template.off");

    Manifest m;
    m.template_kind = std::string(to_string(cfg.deform.kind));
    m.template_level = cfg.deform.level;
    m.template_path = "template.off";
    m.k = cfg.dataset.k;
    m.seed = cfg.seed;
    for (int i = 0; i < cfg.dataset.shapes; ++i) {
      const std::uint64_t s = sample_seed(cfg.deform, static_cast<std::size_t>(i));
      const fs::path rel = fs::path("shapes") / numbered("shape_", static_cast<std::size_t>(i), ".off");
      write_off(deformer.sample(s), dir / rel);
      m.shapes.push_back({rel, s});
    }
    for (std::size_t i = 0; i + 1 < m.shapes.size(); i += 2) m.pairs.push_back({m.shapes[i].path, m.shapes[i + 1].path});

    Json j = manifest_json(m);
    j["config"] = config_json(cfg);
    write_json(dir / "manifest.json", j);
    note("synth-data: " + std::to_string(m.shapes.size()) + " shapes in " + std::to_string(clock.seconds()) + " s");
  }
};

// --------------------------------------------------------------------------
// build-dataset

struct BuildDataset {
  ConfigFlags config;
  std::string manifest, out;
  std::optional<int> k;
  bool keep_sign = false;

  void attach(CLI::App& app) {
    auto* cmd = app.add_subcommand("build-dataset", "template-to-shape functional maps of a manifest");
    config.attach(cmd);
    cmd->add_option("--manifest", manifest, "manifest written by synth-data")->required()->check(CLI::ExistingFile);
    cmd->add_option("--k", k, "map order (default: dataset.k)");
    cmd->add_flag("--signed", keep_sign, "keep signs (random eigenfunction sign flips)");
    cmd->add_option("--out", out, "output directory")->required();
    cmd->callback([this] { run(); });
  }

  void run() const {
    RunConfig cfg = config.resolve();
    if (k) cfg.dataset.k = *k;
    if (keep_sign) cfg.dataset.keep_sign = true;
    if (cfg.dataset.k < 1) throw UsageError("--k must be >= 1");

    const Stopwatch clock;
    const Manifest m = load_manifest(manifest);
    if (m.template_path.empty()) fail(ErrorCode::kFormatError, manifest + ": no template");
    const TriangleMesh reference = load_mesh(m.resolve(m.template_path));
    const DatasetOptions options{cfg.dataset.k, cfg.dataset.keep_sign, EigenSolverKind::kAuto};
    const SpectralBasis reference_basis = eigenbasis(reference, options.k);

    const fs::path dir = out;
    fs::create_directories(dir / "maps");
    DatasetIndex index;
    index.root = dir;
    index.order = options.k;
    index.is_signed = options.keep_sign;
    for (std::size_t i = 0; i < m.shapes.size(); ++i) {
      const fs::path src = m.resolve(m.shapes[i].path);
      const TriangleMesh shape = load_mesh(src);
      require_registered(reference, shape, src);
      const FunctionalMap C = template_fmap(reference_basis, shape, options, m.shapes[i].seed);
      if (!C.allFinite()) fail(ErrorCode::kNonFinite, src.string() + ": map is not finite");
      const fs::path rel = fs::path("maps") / numbered("map_", i, ".fmat");
      save_fmat(C, dir / rel);
      index.maps.push_back({rel, m.shapes[i].seed});
      if ((i + 1) % 250 == 0) note("build-dataset: " + std::to_string(i + 1) + "/" + std::to_string(m.shapes.size()));
    }
    Json j = dataset_json(index);
    j["manifest"] = fs::absolute(manifest).lexically_normal().generic_string();
    write_json(dir / "dataset.json", j);
    note("build-dataset: " + std::to_string(index.maps.size()) + " maps in " + std::to_string(clock.seconds()) + " s");
  }
};

// --------------------------------------------------------------------------
// train

struct Train {
  ConfigFlags config;
  std::string dataset, out;
  std::optional<int> epochs;

  void attach(CLI::App& app) {
    auto* cmd = app.add_subcommand("train", "fit the spectral denoiser to a map dataset");
    config.attach(cmd);
    cmd->add_option("--dataset", dataset, "dataset.json written by build-dataset")->required()->check(CLI::ExistingFile);
    cmd->add_option("--epochs", epochs, "epochs (default: train.epochs)");
    cmd->add_option("--out", out, "checkpoint path; the loss log goes to <out>.loss.csv")->required();
    cmd->callback([this] { run(); });
  }

  void run() const {
    RunConfig cfg = config.resolve();
    if (epochs) {
      if (*epochs < 0) throw UsageError("--epochs must be >= 0");
      cfg.train.epochs = *epochs;
    }
    const Stopwatch clock;
    const MapDataset data = load_dataset(load_dataset_index(dataset));
    if (data.order != cfg.denoiser.order)
      fail(ErrorCode::kShapeMismatch, "dataset order " + std::to_string(data.order) + " differs from denoiser.order " +
                                          std::to_string(cfg.denoiser.order));

    TrainOptions options = cfg.train;
    options.on_epoch = [&](int epoch, double loss) {
      if ((epoch + 1) % 10 == 0 || epoch + 1 == options.epochs)
        note("train: epoch " + std::to_string(epoch + 1) + " loss " + format_double(loss));
    };
    const TrainResult result = train_denoiser(data.maps, cfg.denoiser, cfg.schedule, options);
    save_checkpoint(result.denoiser, out);

    std::string csv = "epoch,loss\n";
    for (std::size_t e = 0; e < result.epoch_loss.size(); ++e)
      csv += std::to_string(e + 1) + "," + format_double(result.epoch_loss[e]) + "\n";
    write_file_atomic(out + ".loss.csv", csv);

    Json report = report_header("train", cfg);
    report["dataset"] = {{"path", dataset}, {"count", data.maps.size()}, {"order", data.order}, {"signed", data.is_signed}};
    report["epoch_loss"] = result.epoch_loss;
    write_json(out + ".json", report);
    note("train: " + std::to_string(clock.seconds()) + " s");
  }
};

// --------------------------------------------------------------------------
// sample

struct Sample {
  ConfigFlags config;
  std::string checkpoint, out;
  int count = 4;
  std::optional<int> steps;
  int trajectories = 1;
  int frames = 8;
  int cell = 8;

  void attach(CLI::App& app) {
    auto* cmd = app.add_subcommand("sample", "draw maps from a trained denoiser");
    config.attach(cmd);
    cmd->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingFile);
    cmd->add_option("--count", count, "number of samples")->check(CLI::NonNegativeNumber);
    cmd->add_option("--steps", steps, "sampler steps (default: the checkpoint's schedule)");
    cmd->add_option("--trajectories", trajectories, "samples whose trajectories are exported")
        ->check(CLI::NonNegativeNumber);
    cmd->add_option("--frames", frames, "trajectory frames per sample")->check(CLI::PositiveNumber);
    cmd->add_option("--cell", cell, "heatmap pixels per matrix entry")->check(CLI::PositiveNumber);
    cmd->add_option("--out", out, "output directory")->required();
    cmd->callback([this] { run(); });
  }

  void run() const {
    const RunConfig cfg = config.resolve();
    const SpectralDenoiser denoiser = load_checkpoint(checkpoint);
    const int n_steps = steps.value_or(denoiser.schedule().sampler_steps);
    if (n_steps < 1) throw UsageError("--steps must be >= 1");

    const fs::path dir = out;
    fs::create_directories(dir);
    Json images = Json::array();
    Json samples = Json::array();
    auto heatmap = [&](const Eigen::MatrixXd& X, const std::string& name) {
      const Eigen::MatrixXd A = X.cwiseAbs();
      const double max = A.maxCoeff();
      write_file_atomic(dir / name, encode_ppm_heatmap(A, max, cell));
      images.push_back({{"path", name}, {"max", max}});
    };

    for (int i = 0; i < count; ++i) {
      const std::uint64_t seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(i));
      std::vector<Eigen::MatrixXd> trajectory;
      const bool keep = i < trajectories;
      const Eigen::MatrixXd X = sample(denoiser, denoiser.schedule(), n_steps, seed, keep ? &trajectory : nullptr);
      const std::string stem = numbered("sample_", static_cast<std::size_t>(i), "", 3);
      save_fmat(X, dir / (stem + ".fmat"));
      heatmap(X, stem + ".ppm");
      samples.push_back({{"path", stem + ".fmat"}, {"seed", seed}});
      if (keep) {
        // Evenly spaced frames, always including the initial noise and the result.
        const int last = static_cast<int>(trajectory.size()) - 1;
        const int shown = std::min(frames, last + 1);
        for (int f = 0; f < shown; ++f) {
          const int t = shown == 1 ? last : static_cast<int>(std::lround(double(f) * last / (shown - 1)));
          heatmap(trajectory[static_cast<std::size_t>(t)], stem + numbered("_step_", static_cast<std::size_t>(t), ".ppm", 4));
        }
      }
    }
    Json report = report_header("sample", cfg);
    report["checkpoint"] = checkpoint;
    report["steps"] = n_steps;
    report["samples"] = samples;
    report["images"] = images;
    write_json(dir / "samples.json", report);
  }
};

// --------------------------------------------------------------------------
// distill-mask

struct DistillMask {
  ConfigFlags config;
  std::string checkpoint, fmap, out;
  std::vector<double> sigmas{1.0};
  int samples = 100;
  int cell = 8;

  void attach(CLI::App& app) {
    auto* cmd = app.add_subcommand("distill-mask", "mask distilled from the denoiser around a map");
    config.attach(cmd);
    cmd->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingFile);
    cmd->add_option("--fmap", fmap, "FMAT map the mask is distilled around")->required()->check(CLI::ExistingFile);
    cmd->add_option("--sigma", sigmas, "noise levels, comma separated")->delimiter(',');
    cmd->add_option("--N", samples, "noise draws per mask")->check(CLI::PositiveNumber);
    cmd->add_option("--cell", cell, "heatmap pixels per matrix entry")->check(CLI::PositiveNumber);
    cmd->add_option("--out", out, "output directory")->required();
    cmd->callback([this] { run(); });
  }

  void run() const {
    const RunConfig cfg = config.resolve();
    for (double s : sigmas)
      if (!(s > 0.0)) throw UsageError("--sigma values must be positive");
    const SpectralDenoiser denoiser = load_checkpoint(checkpoint);
    Eigen::MatrixXd C = load_fmat(fmap).cwiseAbs();
    if (C.rows() != denoiser.order() || C.cols() != denoiser.order())
      fail(ErrorCode::kShapeMismatch, fmap + ": map order differs from the checkpoint");
    if (cfg.match.mask_rescale) C = rescale_to_unit_range(C);

    const fs::path dir = out;
    fs::create_directories(dir);
    Json masks = Json::array();
    for (std::size_t i = 0; i < sigmas.size(); ++i) {
      const Mask M = distill_mask(denoiser, C, sigmas[i], samples, derive_seed(cfg.seed, i));
      const std::string stem = "mask_sigma_" + format_double(sigmas[i]);
      const double max = M.maxCoeff();
      save_fmat(M, dir / (stem + ".fmat"));
      write_file_atomic(dir / (stem + ".ppm"), encode_ppm_heatmap(M, max, cell));
      masks.push_back({{"sigma", sigmas[i]}, {"fmat", stem + ".fmat"}, {"ppm", stem + ".ppm"}, {"max", max}});
    }
    Json report = report_header("distill-mask", cfg);
    report["checkpoint"] = checkpoint;
    report["fmap"] = fmap;
    report["samples"] = samples;
    report["masks"] = masks;
    write_json(dir / "masks.json", report);
  }
};

// --------------------------------------------------------------------------
// match

Json losses_json(const MatchResult& r) {
  return {{"proper", r.loss_proper}, {"sds", r.loss_sds}, {"total", r.loss_total}};
}

Json error_json(const GeodesicError& e) {
  return {{"mean", e.mean}, {"mean_x100", e.mean_x100()}, {"max", e.per_vertex.size() ? e.per_vertex.maxCoeff() : 0.0}};
}

PointMap load_gt(const std::string& gt, const fs::path& root, int n1) {
  if (gt == "identity") return identity_map(n1);
  const fs::path p = fs::path(gt).is_absolute() ? fs::path(gt) : root / gt;
  return load_pmap(p);
}

struct Match {
  ConfigFlags config;
  std::string mesh1, mesh2, checkpoint, gt, out;

  void attach(CLI::App& app) {
    auto* cmd = app.add_subcommand("match", "zero-shot correspondence between two meshes");
    config.attach(cmd);
    cmd->add_option("--mesh1", mesh1)->required()->check(CLI::ExistingFile);
    cmd->add_option("--mesh2", mesh2)->required()->check(CLI::ExistingFile);
    cmd->add_option("--checkpoint", checkpoint, "trained denoiser (needed by every mode except proper)")
        ->check(CLI::ExistingFile);
    cmd->add_option("--gt", gt, "ground-truth PMAP or 'identity'; adds the geodesic error to the report");
    cmd->add_option("--out", out, "output directory")->required();
    cmd->callback([this] { run(); });
  }

  void run() const {
    const RunConfig cfg = config.resolve();
    if (checkpoint.empty() && cfg.match.mode != ZeroShotMode::kProper)
      throw UsageError("--checkpoint is required for mode " + std::string(to_string(cfg.match.mode)));
    const auto denoiser = load_denoiser(checkpoint, cfg.match.k);
    const TriangleMesh m1 = load_mesh(mesh1), m2 = load_mesh(mesh2);

    const Stopwatch clock;
    const MatchResult r = zero_shot_match(m1, m2, denoiser.get(), cfg.match, cfg.seed);
    note("match: " + std::to_string(clock.seconds()) + " s");

    const fs::path dir = out;
    fs::create_directories(dir);
    save_fmat(r.fmap, dir / "fmap.fmat");
    save_fmat(r.raw, dir / "raw.fmat");
    save_pmap(r.point_map, dir / "pmap.pmap");
    Json report = report_header("match", cfg);
    report["inputs"] = {{"mesh1", mesh1}, {"mesh2", mesh2}, {"checkpoint", checkpoint}};
    report["outputs"] = {{"fmap", "fmap.fmat"}, {"raw", "raw.fmat"}, {"pmap", "pmap.pmap"}};
    if (r.mask.size() > 0) {
      save_fmat(r.mask, dir / "mask.fmat");
      report["outputs"]["mask"] = "mask.fmat";
    }
    report["fmap_order"] = r.fmap.rows();
    report["loss"] = losses_json(r);
    if (!gt.empty()) {
      const PointMap truth = load_gt(gt, fs::current_path(), m1.num_vertices());
      report["geodesic_error"] = error_json(geodesic_error(r.point_map, truth, m2));
    }
    write_json(dir / "report.json", report);
  }
};

// --------------------------------------------------------------------------
// eval

struct Eval {
  std::string pred, gt, mesh2, out;
  double max_threshold = 0.25;
  int points = 51;

  void attach(CLI::App& app) {
    auto* cmd = app.add_subcommand("eval", "geodesic error of a point map");
    cmd->add_option("--pred", pred, "predicted PMAP")->required()->check(CLI::ExistingFile);
    cmd->add_option("--gt", gt, "ground-truth PMAP or 'identity'")->required();
    cmd->add_option("--mesh2", mesh2, "target mesh")->required()->check(CLI::ExistingFile);
    cmd->add_option("--max-threshold", max_threshold, "largest curve threshold")->check(CLI::PositiveNumber);
    cmd->add_option("--points", points, "curve samples")->check(CLI::Range(2, 100000));
    cmd->add_option("--out", out, "output directory (default: JSON to stdout)");
    cmd->callback([this] { run(); });
  }

  void run() const {
    const TriangleMesh m2 = load_mesh(mesh2);
    const PointMap p = load_pmap(pred);
    const PointMap truth = load_gt(gt, fs::current_path(), static_cast<int>(p.size()));
    const GeodesicError e = geodesic_error(p, truth, m2);
    const Eigen::VectorXd thresholds = Eigen::VectorXd::LinSpaced(points, 0.0, max_threshold);
    const Eigen::VectorXd curve = cumulative_error_curve(e, thresholds);

    Json report = {{"command", "eval"}, {"pred", pred}, {"gt", gt}, {"mesh2", mesh2}, {"vertices", p.size()}};
    report["geodesic_error"] = error_json(e);
    std::string csv = "threshold,fraction\n";
    Json curve_json = Json::array();
    for (Eigen::Index i = 0; i < thresholds.size(); ++i) {
      csv += format_double(thresholds[i]) + "," + format_double(curve[i]) + "\n";
      curve_json.push_back({thresholds[i], curve[i]});
    }
    if (out.empty()) {
      report["curve"] = curve_json;
      std::cout << report.dump(2) << std::endl;
      return;
    }
    const fs::path dir = out;
    fs::create_directories(dir);
    write_file_atomic(dir / "curve.csv", csv);
    report["curve"] = "curve.csv";
    write_json(dir / "eval.json", report);
  }
};

// --------------------------------------------------------------------------
// ablate / baseline: one or more methods over the pairs of a manifest

struct PairData {
  ShapeContext s1, s2;
  PointMap gt;
  Eigen::MatrixXd distances2;
  double area2 = 0.0;
};

struct PairRow {
  std::vector<double> errors_x100;
  std::vector<Json> extra;
};

using PairMethod = std::function<MatchResult(const PairData&, std::size_t method, std::uint64_t seed)>;

// Runs every method on every pair; rows are indexed by pair, so the output
// does not depend on the number of jobs.
std::vector<PairRow> run_pairs(const Manifest& m, const ZeroShotConfig& match, std::size_t methods,
                               std::uint64_t seed, int jobs, const PairMethod& method,
                               const std::vector<std::string>& names) {
  const std::size_t n = m.pairs.size();
  std::vector<PairRow> rows(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  std::mutex log;

  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        const PairEntry& e = m.pairs[i];
        const TriangleMesh m1 = load_mesh(m.resolve(e.mesh1)), m2 = load_mesh(m.resolve(e.mesh2));
        const int order = required_basis_order(match, m1.num_vertices(), m2.num_vertices());
        PairData d{prepare_shape(m1, order, match.features.hks_count, match.k),
                   prepare_shape(m2, order, match.features.hks_count, match.k),
                   load_gt(e.gt, m.root, m1.num_vertices()), geodesic_distance_matrix(m2), m2.total_area()};
        const std::uint64_t pair_seed = derive_seed(seed, i);
        for (std::size_t k = 0; k < methods; ++k) {
          const Stopwatch clock;
          const MatchResult r = method(d, k, pair_seed);
          const double err = geodesic_error(r.point_map, d.gt, d.distances2, d.area2).mean_x100();
          rows[i].errors_x100.push_back(err);
          Json extra = {{"final_loss_proper", r.loss_proper.empty() ? 0.0 : r.loss_proper.back()},
                        {"final_loss_sds", r.loss_sds.empty() ? 0.0 : r.loss_sds.back()}};
          rows[i].extra.push_back(extra);
          const std::lock_guard lock(log);
          note("pair " + std::to_string(i) + " " + names[k] + ": error x100 " + format_double(err) + " (" +
               std::to_string(clock.seconds()) + " s)");
        }
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int threads = std::max(1, std::min<int>(jobs, static_cast<int>(n)));
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return rows;
}

Manifest limited(Manifest m, int limit) {
  if (limit > 0 && static_cast<std::size_t>(limit) < m.pairs.size()) m.pairs.resize(static_cast<std::size_t>(limit));
  if (m.pairs.empty()) fail(ErrorCode::kEmptyDataset, "manifest has no pairs");
  return m;
}

// Writes <stem>.json and <stem>.csv tables of mean errors per method.
void write_table(const fs::path& dir, const std::string& stem, Json report, const Manifest& m,
                 const std::vector<std::string>& names, const std::vector<PairRow>& rows) {
  Json pairs = Json::array();
  std::vector<double> sums(names.size(), 0.0);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    Json errors = Json::object(), extra = Json::object();
    for (std::size_t k = 0; k < names.size(); ++k) {
      errors[names[k]] = rows[i].errors_x100[k];
      extra[names[k]] = rows[i].extra[k];
      sums[k] += rows[i].errors_x100[k];
    }
    pairs.push_back({{"mesh1", m.pairs[i].mesh1.generic_string()},
                     {"mesh2", m.pairs[i].mesh2.generic_string()},
                     {"errors_x100", errors},
                     {"losses", extra}});
  }
  Json summary = Json::array();
  std::string csv = "method,mean_error_x100\n";
  for (std::size_t k = 0; k < names.size(); ++k) {
    const double mean = sums[k] / static_cast<double>(rows.size());
    summary.push_back({{"method", names[k]}, {"mean_error_x100", mean}});
    csv += names[k] + "," + format_double(mean) + "\n";
  }
  report["pairs"] = pairs;
  report["summary"] = summary;
  fs::create_directories(dir);
  write_json(dir / (stem + ".json"), report);
  write_file_atomic(dir / (stem + ".csv"), csv);
  std::cout << csv;
}

struct Ablate {
  ConfigFlags config;
  std::string pairs, checkpoint, out;
  std::vector<std::string> modes{"vanilla-sds", "mask-zoomout", "mask-proper", "full"};
  int jobs = 1;
  int limit = 0;

  void attach(CLI::App& app) {
    auto* cmd = app.add_subcommand("ablate", "zero-shot modes over the pairs of a manifest");
    config.attach(cmd);
    cmd->add_option("--pairs", pairs, "manifest with a 'pairs' array")->required()->check(CLI::ExistingFile);
    cmd->add_option("--checkpoint", checkpoint)->required()->check(CLI::ExistingFile);
    cmd->add_option("--modes", modes, "comma-separated modes")->delimiter(',');
    cmd->add_option("--jobs", jobs, "pairs processed in parallel")->check(CLI::PositiveNumber);
    cmd->add_option("--limit", limit, "use only the first N pairs")->check(CLI::NonNegativeNumber);
    cmd->add_option("--out", out, "output directory")->required();
    cmd->callback([this] { run(); });
  }

  void run() const {
    const RunConfig cfg = config.resolve();
    std::vector<ZeroShotMode> parsed;
    for (const auto& name : modes) {
      try {
        parsed.push_back(parse_zero_shot_mode(name));
      } catch (const Error& e) {
        throw UsageError(e.detail());
      }
    }
    const auto denoiser = load_denoiser(checkpoint, cfg.match.k);
    const Manifest m = limited(load_manifest(pairs), limit);
    const auto rows = run_pairs(
        m, cfg.match, parsed.size(), cfg.seed, jobs,
        [&](const PairData& d, std::size_t k, std::uint64_t seed) {
          ZeroShotConfig c = cfg.match;
          c.mode = parsed[k];
          return zero_shot_match(d.s1, d.s2, denoiser.get(), c, seed);
        },
        modes);
    Json report = report_header("ablate", cfg);
    report["pairs_manifest"] = pairs;
    report["checkpoint"] = checkpoint;
    write_table(out, "ablation", report, m, modes, rows);
  }
};

struct Baseline {
  ConfigFlags config;
  std::string pairs, checkpoint, out;
  std::vector<std::string> masks{"laplacian", "resolvent", "slanted", "distilled"};
  int jobs = 1;
  int limit = 0;

  void attach(CLI::App& app) {
    auto* cmd = app.add_subcommand("baseline", "random-feature init plus masked solve and Zoomout");
    config.attach(cmd);
    cmd->add_option("--pairs", pairs, "manifest with a 'pairs' array")->required()->check(CLI::ExistingFile);
    cmd->add_option("--mask", masks, "comma-separated masks: none, laplacian, resolvent, slanted, distilled")
        ->delimiter(',');
    cmd->add_option("--checkpoint", checkpoint, "trained denoiser (distilled mask only)")->check(CLI::ExistingFile);
    cmd->add_option("--jobs", jobs, "pairs processed in parallel")->check(CLI::PositiveNumber);
    cmd->add_option("--limit", limit, "use only the first N pairs")->check(CLI::NonNegativeNumber);
    cmd->add_option("--out", out, "output directory")->required();
    cmd->callback([this] { run(); });
  }

  void run() const {
    const RunConfig cfg = config.resolve();
    std::vector<MaskKind> parsed;
    for (const auto& name : masks) {
      try {
        parsed.push_back(parse_mask_kind(name));
      } catch (const Error& e) {
        throw UsageError(e.detail());
      }
    }
    const bool needs_prior = std::find(parsed.begin(), parsed.end(), MaskKind::kDistilled) != parsed.end();
    if (needs_prior && checkpoint.empty()) throw UsageError("--checkpoint is required for the distilled mask");
    const auto denoiser = load_denoiser(checkpoint, cfg.match.k);
    const Manifest m = limited(load_manifest(pairs), limit);
    const auto rows = run_pairs(
        m, cfg.match, parsed.size(), cfg.seed, jobs,
        [&](const PairData& d, std::size_t k, std::uint64_t seed) {
          return ini_zoomout(d.s1, d.s2, parsed[k], denoiser.get(), cfg.match, seed);
        },
        masks);
    Json report = report_header("baseline", cfg);
    report["pairs_manifest"] = pairs;
    report["checkpoint"] = checkpoint;
    write_table(out, "baseline", report, m, masks, rows);
  }
};

struct ShowConfig {
  ConfigFlags config;

  void attach(CLI::App& app) {
    auto* cmd = app.add_subcommand("config", "print the resolved config");
    config.attach(cmd);
    cmd->callback([this] { std::cout << config.resolve().to_text(); });
  }
};

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"Zero-shot shape matching with a diffusion prior over functional maps", "fmprior"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "0.1.0");

  SynthData synth;
  BuildDataset build;
  Train train;
  Sample sampler;
  DistillMask distill;
  Match match;
  Eval eval;
  Ablate ablate;
  Baseline baseline;
  ShowConfig show;
  synth.attach(app);
  build.attach(app);
  train.attach(app);
  sampler.attach(app);
  distill.attach(app);
  match.attach(app);
  eval.attach(app);
  ablate.attach(app);
  baseline.attach(app);
  show.attach(app);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();  // program name
  try {
    app.parse(reversed);
    return 0;
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    error_line("Usage", kUsageExit, e.what());
    std::cerr << app.help() << std::flush;
    return kUsageExit;
  } catch (const UsageError& e) {
    error_line("Usage", kUsageExit, e.what());
    return kUsageExit;
  } catch (const Error& e) {
    const int status = exit_status(e.code());
    error_line(to_string(e.code()), status, e.detail());
    return status;
  } catch (const fs::filesystem_error& e) {
    error_line("IoError", 3, e.what());
    return 3;
  } catch (const std::exception& e) {
    error_line("Internal", 3, e.what());
    return 3;
  }
}

int run(int argc, char** argv) { return run(std::vector<std::string>(argv, argv + argc)); }

}  // namespace fmprior::cli

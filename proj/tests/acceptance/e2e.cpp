// Criteria 6 and 8: a trained prior on the synthetic biped family.
//
// Trained priors are cached in <work>/priors together with the time their
// dataset and training took, so criterion 8 reuses the prior of criterion 6.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "acceptance.hpp"
#include "fmprior/distill.hpp"
#include "fmprior/fmap.hpp"
#include "fmprior/random.hpp"
#include "fmprior/sgm.hpp"
#include "fmprior/synth.hpp"

namespace fmprior::acceptance {
namespace {

namespace fs = std::filesystem;
using Eigen::MatrixXd;

constexpr int kOrder = 30;
constexpr int kEvalOrder = 60;
constexpr std::size_t kTrainMaps = 4000;
constexpr int kEpochs = 150;
// Criterion 8: the signed prior only drives vanilla SDS, so it gets a smaller
// corpus; the flipped row cycles through the low-frequency eigenfunctions
// after the constant one.
constexpr std::size_t kSignedMaps = 1000;
constexpr int kFlipFirst = 1;
constexpr int kFlipSpread = 5;
// Held-out shapes are drawn far past the training indices.
constexpr std::size_t kHeldOutBase = 1'000'000;

DeformConfig family() {
  DeformConfig c;
  c.kind = TemplateKind::kCapsuleBiped;
  c.level = 3;
  c.epsilon = 0.02;
  c.seed = 20240917;
  return c;
}

ZeroShotConfig match_config(ZeroShotMode mode) {
  ZeroShotConfig z;
  z.mode = mode;
  z.k = kOrder;
  z.eval_zoomout_target = kEvalOrder;
  z.steps = 300;
  z.mask_every = 50;
  // The masked solve shrinks every row the random features barely excite; at
  // the default weight of 1 that wipes out the high-frequency diagonal.
  z.ini_alpha = 0.01;
  z.theta_init = ThetaInit::kFanIn;
  return z;
}

// Criterion 8 runs 30 optimizations inside its time budget, so it uses a
// lighter feature network.
ZeroShotConfig flip_config(ZeroShotMode mode) {
  ZeroShotConfig z = match_config(mode);
  z.steps = 200;
  z.features.widths = {128, 128, 128};
  z.features.output_dim = 64;
  z.init_fit_steps = 200;
  z.init_fit_learning_rate = 3e-3;
  return z;
}

struct Prior {
  SpectralDenoiser denoiser;
  double dataset_seconds = 0.0;
  double train_seconds = 0.0;
  bool cached = false;
};

Prior load_or_train(const Context& ctx, bool keep_sign, std::size_t count, int epochs) {
  const fs::path dir = ctx.work / "priors";
  fs::create_directories(dir);
  const std::string stem = std::string(keep_sign ? "signed" : "absolute") + "_" + std::to_string(count);
  const fs::path ck = dir / (stem + ".sgm"), meta = dir / (stem + ".json");
  const DeformConfig c = family();
  const nlohmann::json key = {{"count", count}, {"epochs", epochs}, {"epsilon", c.epsilon}, {"seed", c.seed}};
  if (fs::exists(ck) && fs::exists(meta)) {
    nlohmann::json m;
    std::ifstream(meta) >> m;
    if (m.at("key") == key)
      return {load_checkpoint(ck), m.at("dataset_seconds").get<double>(), m.at("train_seconds").get<double>(), true};
  }
  Stopwatch data_clock;
  DatasetOptions opt;
  opt.k = kOrder;
  opt.keep_sign = keep_sign;
  const MapDataset ds = build_fmap_dataset(c, count, opt);
  const double dataset_seconds = data_clock.seconds();
  Stopwatch train_clock;
  TrainOptions train;
  train.epochs = epochs;
  TrainResult r = train_denoiser(ds.maps, DenoiserConfig{}, NoiseSchedule{}, train);
  const double train_seconds = train_clock.seconds();
  save_checkpoint(r.denoiser, ck);
  std::ofstream(meta) << nlohmann::json{
      {"key", key}, {"dataset_seconds", dataset_seconds}, {"train_seconds", train_seconds}}.dump(2);
  return {std::move(r.denoiser), dataset_seconds, train_seconds, false};
}

struct HeldOutPair {
  ShapeContext s1, s2;
  MatrixXd distances2;
  double area2 = 0.0;

  double error(const MatchResult& r) const {
    return geodesic_error(r.point_map, identity_map(s1.basis.num_vertices()), distances2, area2).mean_x100();
  }
};

HeldOutPair held_out_pair(const Deformer& deformer, std::size_t index) {
  const DeformConfig& c = deformer.config();
  TriangleMesh m1 = deformer.sample(sample_seed(c, kHeldOutBase + 2 * index));
  TriangleMesh m2 = deformer.sample(sample_seed(c, kHeldOutBase + 2 * index + 1));
  MatrixXd distances2 = geodesic_distance_matrix(m2);
  const int hks = match_config(ZeroShotMode::kFull).features.hks_count;
  ShapeContext s1 = prepare_shape(std::move(m1), kEvalOrder, hks, kOrder);
  ShapeContext s2 = prepare_shape(std::move(m2), kEvalOrder, hks, kOrder);
  const double area2 = s2.mass.sum();
  return {std::move(s1), std::move(s2), std::move(distances2), area2};
}

std::string prior_note(const Prior& p) {
  return format("dataset %.0fs, training %.0fs%s", p.dataset_seconds, p.train_seconds, p.cached ? " (cached)" : "");
}

}  // namespace

Outcome end_to_end(const Context& ctx) {
  const Prior prior = load_or_train(ctx, false, kTrainMaps, kEpochs);
  const Deformer deformer(make_template(family().kind, family().level), family());

  struct Row {
    const char* name;
    double total = 0.0;
  };
  enum { kIniLaplacian, kIniDistilled, kVanilla, kMaskProper, kFull, kRows };
  Row rows[kRows] = {{"ini-laplacian"}, {"ini-distilled"}, {"vanilla-sds"}, {"mask+proper"}, {"full"}};
  constexpr int kPairs = 20;
  double slowest = 0.0;
  for (int i = 0; i < kPairs; ++i) {
    const HeldOutPair p = held_out_pair(deformer, static_cast<std::size_t>(i));
    const unsigned long long seed = derive_seed(family().seed, static_cast<std::uint64_t>(i));
    const ZeroShotConfig ini = match_config(ZeroShotMode::kMaskZoomout);
    const MatchResult lap = ini_zoomout(p.s1, p.s2, MaskKind::kLaplacian, nullptr, ini, seed);
    rows[kIniLaplacian].total += p.error(lap);
    const MatchResult dis = ini_zoomout(p.s1, p.s2, MaskKind::kDistilled, &prior.denoiser, ini, seed);
    rows[kIniDistilled].total += p.error(dis);
    const std::pair<int, ZeroShotMode> optimized[] = {
        {kVanilla, ZeroShotMode::kVanillaSds}, {kMaskProper, ZeroShotMode::kMaskProper}, {kFull, ZeroShotMode::kFull}};
    for (const auto& [row, mode] : optimized) {
      const MatchResult r = zero_shot_match(p.s1, p.s2, &prior.denoiser, match_config(mode), seed);
      slowest = std::max(slowest, r.seconds);
      rows[row].total += p.error(r);
    }
  }
  double e[kRows];
  for (int r = 0; r < kRows; ++r) e[r] = rows[r].total / kPairs;

  const bool a = e[kIniDistilled] <= e[kIniLaplacian];
  const bool b = e[kFull] < e[kIniDistilled];
  const bool c = e[kVanilla] > e[kIniDistilled] && e[kIniDistilled] >= e[kMaskProper] && e[kMaskProper] >= e[kFull];
  const bool timing = prior.train_seconds < 1800.0 && slowest < 300.0;
  std::string detail = "mean geodesic error x100 over 20 pairs:";
  for (int r = 0; r < kRows; ++r) detail += format(" %s %.2f", rows[r].name, e[r]);
  detail += format("; (a) %s (b) %s (c) %s; %s, slowest match %.0fs", a ? "ok" : "no", b ? "ok" : "no",
                   c ? "ok" : "no", prior_note(prior).c_str(), slowest);
  return {a && b && c && timing, detail};
}

Outcome sign_flip(const Context& ctx) {
  // The absolute prior is shared with criterion 6 and not charged here.
  const Prior absolute = load_or_train(ctx, false, kTrainMaps, kEpochs);
  const Stopwatch clock;
  const Prior signed_prior = load_or_train(ctx, true, kSignedMaps, kEpochs);
  const Deformer deformer(make_template(family().kind, family().level), family());

  constexpr int kTrials = 10;
  int took = 0, kept_flipped = 0, recovered = 0;
  std::string errors;
  for (int t = 0; t < kTrials; ++t) {
    const HeldOutPair p = held_out_pair(deformer, 100 + static_cast<std::size_t>(t));
    const unsigned long long seed = derive_seed(family().seed ^ 0x5157ULL, static_cast<std::uint64_t>(t));
    const FunctionalMap gt = fmap_from_p2p(identity_map(p.s1.basis.num_vertices()), p.s1.basis, p.s2.basis,
                                           p.s2.mass, kOrder);
    // Negating one eigenfunction of shape 2 flips one row of the map.
    const int flipped = kFlipFirst + t % kFlipSpread;
    FunctionalMap init = gt;
    init.row(flipped) *= -1.0;

    ZeroShotConfig vanilla = flip_config(ZeroShotMode::kVanillaSds);
    vanilla.sds_signed = true;
    // Whether the warm start reproduced the flip at all.
    ZeroShotConfig fit_only = vanilla;
    fit_only.steps = 0;
    const MatchResult fitted = zero_shot_match(p.s1, p.s2, &signed_prior.denoiser, fit_only, seed, &init);
    took += fitted.raw(flipped, flipped) * gt(flipped, flipped) < 0.0;
    const MatchResult v = zero_shot_match(p.s1, p.s2, &signed_prior.denoiser, vanilla, seed, &init);
    kept_flipped += v.raw(flipped, flipped) * gt(flipped, flipped) < 0.0;

    const ZeroShotConfig full = flip_config(ZeroShotMode::kFull);
    const double from_gt = p.error(zero_shot_match(p.s1, p.s2, &absolute.denoiser, full, seed, &gt));
    const double from_flip = p.error(zero_shot_match(p.s1, p.s2, &absolute.denoiser, full, seed, &init));
    recovered += from_flip <= 2.0 * from_gt;
    errors += format(" %.2f/%.2f", from_flip, from_gt);
  }
  const double t = clock.seconds();
  // Recovery only means something when the flipped start was reached.
  const bool pass = took == kTrials && kept_flipped == kTrials && recovered >= 7 && t < 1800.0;
  return {pass, format("warm start reproduced the flipped sign on %d/%d trials, vanilla SDS ended flipped on %d/%d; "
                       "full pipeline within 2x of GT init on %d/%d (flip/GT error x100:%s); %.0fs of 1800s",
                       took, kTrials, kept_flipped, kTrials, recovered, kTrials, errors.c_str(), t)};
}

}  // namespace fmprior::acceptance

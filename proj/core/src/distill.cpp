#include "fmprior/distill.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>

#include "fmprior/error.hpp"
#include "fmprior/random.hpp"

namespace fmprior {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr Eigen::Index kDenoiseChunk = 128;

void check_sigma(const Denoiser& d, double sigma) {
  if (!(sigma >= d.sigma_min() && sigma <= d.sigma_max()))
    fail(ErrorCode::kSigmaOutOfRange, "sigma " + std::to_string(sigma) + " outside [" +
                                          std::to_string(d.sigma_min()) + ", " + std::to_string(d.sigma_max()) +
                                          "]");
}

}  // namespace

Mask distill_mask(const Denoiser& denoiser, const FunctionalMap& C_init, double sigma, int samples,
                  unsigned long long seed) {
  const int n = denoiser.order();
  require(C_init.rows() == n && C_init.cols() == n, ErrorCode::kShapeMismatch,
          "mask distillation expects a " + std::to_string(n) + "x" + std::to_string(n) + " map");
  require(samples >= 1, ErrorCode::kInvalidArgument, "mask distillation needs at least one sample");
  check_sigma(denoiser, sigma);

  const Eigen::RowVectorXd base = flatten(C_init.cwiseAbs());
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, sigma);
  Eigen::RowVectorXd total = Eigen::RowVectorXd::Zero(base.size());
  for (Eigen::Index begin = 0; begin < samples; begin += kDenoiseChunk) {
    const Eigen::Index size = std::min<Eigen::Index>(kDenoiseChunk, samples - begin);
    MatrixXd noisy(size, base.size());
    for (Eigen::Index r = 0; r < size; ++r)
      for (Eigen::Index c = 0; c < base.size(); ++c) noisy(r, c) = base(c) + std::abs(normal(rng));
    const MatrixXd denoised = denoiser.denoise_rows(noisy, VectorXd::Constant(size, sigma));
    for (Eigen::Index r = 0; r < size; ++r)
      for (Eigen::Index c = 0; c < base.size(); ++c) {
        const double x = noisy(r, c);
        if (x > 0.0) total(c) += (x - denoised(r, c)) / (2.0 * sigma * sigma * x);
      }
  }
  total /= static_cast<double>(samples);
  Mask M = unflatten(total, n).cwiseMax(0.0).cwiseSqrt();
  if (!M.allFinite()) fail(ErrorCode::kNonFinite, "distilled mask is not finite");
  return M;
}

SdsSample sds_gradient(const Denoiser& denoiser, const MatrixXd& C, const SdsOptions& options,
                       unsigned long long seed) {
  require(C.rows() == denoiser.order() && C.cols() == denoiser.order(), ErrorCode::kShapeMismatch,
          "SDS input does not match the denoiser order");
  require(options.sigma_min > 0.0 && options.sigma_min <= options.sigma_max, ErrorCode::kInvalidArgument,
          "SDS sigma range must satisfy 0 < min <= max");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(std::log(options.sigma_min), std::log(options.sigma_max));
  const double sigma = std::exp(uniform(rng));
  std::normal_distribution<double> normal(0.0, sigma);
  MatrixXd noisy = C;
  for (Eigen::Index i = 0; i < noisy.size(); ++i) noisy.data()[i] += normal(rng);
  return {(noisy - denoiser.denoise(noisy, sigma)) / sigma, sigma};
}

Eigen::MatrixXd rescale_to_unit_range(const MatrixXd& C) {
  const double peak = C.size() ? C.cwiseAbs().maxCoeff() : 0.0;
  return peak > 1.0 ? (C / peak).eval() : C;
}

ad::Var proper_loss(ad::Var C_raw, const MatrixXd& C_proper) {
  require(C_raw.rows() == C_proper.rows() && C_raw.cols() == C_proper.cols(), ErrorCode::kShapeMismatch,
          "proper loss: map shapes differ");
  return ad::frobenius_sq(ad::add_const(C_raw, -C_proper));
}

void validate(const FeatureNetConfig& config) {
  require(config.hks_count >= 0, ErrorCode::kInvalidArgument, "hks_count must be >= 0");
  require(config.output_dim >= 1, ErrorCode::kInvalidArgument, "feature output dim must be >= 1");
  for (int w : config.widths) require(w >= 1, ErrorCode::kInvalidArgument, "feature widths must be positive");
}

ad::MLPParams make_feature_net(const FeatureNetConfig& config) {
  validate(config);
  std::vector<int> dims{config.input_dim()};
  dims.insert(dims.end(), config.widths.begin(), config.widths.end());
  dims.push_back(config.output_dim);
  return ad::make_mlp(std::move(dims), ad::Activation::kGelu, config.residual);
}

MatrixXd ShapeContext::projector(int k) const {
  require(k >= 1 && k <= basis.order(), ErrorCode::kKTooLarge,
          "order " + std::to_string(k) + " exceeds basis order " + std::to_string(basis.order()));
  return basis.phi.leftCols(k).transpose() * mass.asDiagonal();
}

ShapeContext prepare_shape(TriangleMesh mesh, int basis_order, int hks_count, int hks_k, EigenSolverKind solver) {
  require(hks_k >= 2 && hks_k <= basis_order, ErrorCode::kKTooLarge, "HKS order must lie in [2, basis order]");
  MassDiagonal mass = vertex_areas(mesh);
  SpectralBasis basis = eigenbasis(mesh, basis_order, solver);
  const double area = mass.sum();
  const double scale = std::sqrt(area);

  MatrixXd input(mesh.num_vertices(), 3 + hks_count);
  const Eigen::RowVector3d centroid = (mass.transpose() * mesh.vertices()) / area;
  input.leftCols(3) = (mesh.vertices().rowwise() - centroid) / scale;
  if (hks_count > 0) {
    const SpectralBasis low = basis.truncated(hks_k);
    const auto times = hks_times(low, hks_count);
    input.rightCols(hks_count) = heat_kernel_signature(low, mass, times) * scale;
  }
  return {std::move(mesh), std::move(mass), std::move(basis), std::move(input)};
}

MatrixXd feature_forward(const ad::MLPParams& theta, const ShapeContext& shape) {
  return ad::mlp_forward(theta, shape.input);
}

ad::Var feature_forward(const ad::MLPParams& theta, const ad::MLPBinding& binding, const ShapeContext& shape) {
  ad::Tape& tape = *binding.weights.front().tape();
  return ad::mlp_forward(theta, binding, tape.constant(shape.input));
}

namespace {

struct ModeName {
  ZeroShotMode mode;
  std::string_view name;
};

constexpr ModeName kModeNames[] = {
    {ZeroShotMode::kVanillaSds, "vanilla-sds"}, {ZeroShotMode::kMaskZoomout, "mask-zoomout"},
    {ZeroShotMode::kProper, "proper"},          {ZeroShotMode::kMaskSds, "mask-sds"},
    {ZeroShotMode::kMaskProper, "mask-proper"}, {ZeroShotMode::kFull, "full"},
    {ZeroShotMode::kFullAxiomatic, "full-axiomatic"},
};

struct MaskName {
  MaskKind kind;
  std::string_view name;
};

constexpr MaskName kMaskNames[] = {
    {MaskKind::kNone, "none"},         {MaskKind::kLaplacian, "laplacian"}, {MaskKind::kResolvent, "resolvent"},
    {MaskKind::kSlanted, "slanted"},   {MaskKind::kDistilled, "distilled"},
};

bool uses_mask(ZeroShotMode m) {
  return m == ZeroShotMode::kMaskZoomout || m == ZeroShotMode::kMaskSds || m == ZeroShotMode::kMaskProper ||
         m == ZeroShotMode::kFull || m == ZeroShotMode::kFullAxiomatic;
}

bool uses_sds(ZeroShotMode m) {
  return m == ZeroShotMode::kVanillaSds || m == ZeroShotMode::kMaskSds || m == ZeroShotMode::kFull ||
         m == ZeroShotMode::kFullAxiomatic;
}

bool uses_proper(ZeroShotMode m) {
  return m == ZeroShotMode::kProper || m == ZeroShotMode::kMaskProper || m == ZeroShotMode::kFull ||
         m == ZeroShotMode::kFullAxiomatic;
}

// Seed streams.
enum Stream : std::uint64_t { kThetaStream = 1, kMaskStream = 2, kSdsStream = 3, kFinalMaskStream = 4 };

void init_theta(ad::MLPParams& theta, const ZeroShotConfig& config, unsigned long long seed) {
  const auto s = derive_seed(seed, kThetaStream);
  if (config.theta_init == ThetaInit::kNormal)
    ad::init_normal(theta, config.theta_std, s);
  else
    ad::init_fan_in(theta, 1.0, 1.0, s);
}

// C with C A1 ~= A2 on the tape: C^T = (A1 A1^T + r I)^-1 A1 A2^T.
ad::Var solve_var(ad::Var A1, ad::Var A2) {
  ad::Var G = ad::matmul(A1, ad::transpose(A1));
  const double ridge = fmreg_ridge(G.value());
  if (ridge > 0.0) G = ad::add_const(G, ridge * MatrixXd::Identity(G.rows(), G.cols()));
  return ad::transpose(ad::psd_solve(G, ad::matmul(A1, ad::transpose(A2))));
}

struct PairVars {
  ad::Var A1, A2, C;
};

PairVars forward_pair(ad::Tape& tape, const ad::MLPParams& theta, const ad::MLPBinding& binding,
                      const ShapeContext& s1, const ShapeContext& s2, const MatrixXd& P1, const MatrixXd& P2) {
  ad::Var A1 = ad::matmul(tape.constant(P1), feature_forward(theta, binding, s1));
  ad::Var A2 = ad::matmul(tape.constant(P2), feature_forward(theta, binding, s2));
  return {A1, A2, solve_var(A1, A2)};
}

MatrixXd normalized_lap_weights(const VectorXd& l1, const VectorXd& l2) {
  const double s1 = std::max(l1.maxCoeff(), 1e-300), s2 = std::max(l2.maxCoeff(), 1e-300);
  MatrixXd W(l2.size(), l1.size());
  for (Eigen::Index i = 0; i < l2.size(); ++i)
    for (Eigen::Index j = 0; j < l1.size(); ++j) W(i, j) = l2(i) / s2 - l1(j) / s1;
  return W;
}

ad::Var axiomatic_penalty(ad::Var C, ad::Var A1, ad::Var A2, const VectorXd& l1, const VectorXd& l2) {
  const MatrixXd I = MatrixXd::Identity(C.rows(), C.cols());
  ad::Var ortho = ad::frobenius_sq(ad::add_const(ad::matmul(ad::transpose(C), C), -I));
  ad::Var C21 = solve_var(A2, A1);
  ad::Var bij = ad::frobenius_sq(ad::add_const(ad::matmul(C, C21), -I));
  ad::Var lap = ad::frobenius_sq(ad::hadamard_const(C, normalized_lap_weights(l1, l2)));
  return ad::add(ad::add(ortho, bij), lap);
}

ad::Var objective_from_pair(ad::Tape& tape, const PairVars& v, const StepConstants& c, const VectorXd& l1,
                            const VectorXd& l2) {
  ad::Var loss = tape.constant(MatrixXd::Zero(1, 1));
  if (c.proper_target.size() > 0) loss = ad::add(loss, proper_loss(v.C, c.proper_target));
  if (c.sds_gradient.size() > 0) {
    ad::Var x = c.sds_signed ? v.C : ad::elementwise_abs(v.C);
    loss = ad::add(loss, ad::scale(ad::dot_const(x, c.sds_gradient), c.sds_weight));
  }
  if (c.axiomatic_weight > 0.0)
    loss = ad::add(loss, ad::scale(axiomatic_penalty(v.C, v.A1, v.A2, l1, l2), c.axiomatic_weight));
  return loss;
}

struct Orders {
  int loop;
  int eval;
};

Orders resolve_orders(const ZeroShotConfig& config, const ShapeContext& s1, const ShapeContext& s2) {
  const int available = std::min(s1.basis.order(), s2.basis.order());
  require(config.k <= available, ErrorCode::kKTooLarge, "map order exceeds basis order");
  const int loop = config.loop_target();
  if (uses_proper(config.mode))
    require(loop <= available, ErrorCode::kKTooLarge,
            "in-loop zoomout target " + std::to_string(loop) + " exceeds basis order " + std::to_string(available));
  return {loop, std::max(config.k, std::min(config.eval_zoomout_target, available))};
}

MatrixXd raw_from_theta(const ad::MLPParams& theta, const ShapeContext& s1, const ShapeContext& s2,
                        const MatrixXd& P1, const MatrixXd& P2, MatrixXd* A1_out, MatrixXd* A2_out) {
  MatrixXd A1 = P1 * feature_forward(theta, s1);
  MatrixXd A2 = P2 * feature_forward(theta, s2);
  MatrixXd C = solve_fmap(A1, A2);
  if (A1_out) *A1_out = std::move(A1);
  if (A2_out) *A2_out = std::move(A2);
  return C;
}

void finish(MatrixXd base, const ShapeContext& s1, const ShapeContext& s2, int eval_order, MatchResult& result) {
  result.fmap = zoomout(base, s1.basis, s2.basis, s2.mass, eval_order);
  result.point_map = p2p_from_fmap(result.fmap, s1.basis, s2.basis);
}

Mask distill_for(const Denoiser& denoiser, const MatrixXd& C, const ZeroShotConfig& config, std::uint64_t seed) {
  return distill_mask(denoiser, config.mask_rescale ? rescale_to_unit_range(C) : C, config.mask_sigma,
                      config.mask_samples, seed);
}

Mask fixed_mask(MaskKind kind, const ShapeContext& s1, const ShapeContext& s2, int k) {
  const VectorXd l1 = s1.basis.lambda.head(k), l2 = s2.basis.lambda.head(k);
  switch (kind) {
    case MaskKind::kLaplacian:
      return laplacian_mask(l1, l2);
    case MaskKind::kResolvent:
      return resolvent_mask(l1, l2);
    case MaskKind::kSlanted:
      return slanted_mask(l1, l2);
    default:
      return Mask::Zero(k, k);
  }
}

}  // namespace

std::string_view to_string(ZeroShotMode mode) {
  for (const auto& m : kModeNames)
    if (m.mode == mode) return m.name;
  return "unknown";
}

ZeroShotMode parse_zero_shot_mode(std::string_view name) {
  for (const auto& m : kModeNames)
    if (m.name == name) return m.mode;
  fail(ErrorCode::kInvalidArgument, "unknown mode '" + std::string(name) + "'");
}

std::vector<ZeroShotMode> all_zero_shot_modes() {
  std::vector<ZeroShotMode> modes;
  for (const auto& m : kModeNames) modes.push_back(m.mode);
  return modes;
}

std::string_view to_string(ThetaInit init) { return init == ThetaInit::kNormal ? "normal" : "fan-in"; }

ThetaInit parse_theta_init(std::string_view name) {
  if (name == "normal") return ThetaInit::kNormal;
  if (name == "fan-in") return ThetaInit::kFanIn;
  fail(ErrorCode::kInvalidArgument, "unknown theta init '" + std::string(name) + "'");
}

std::string_view to_string(MaskKind kind) {
  for (const auto& m : kMaskNames)
    if (m.kind == kind) return m.name;
  return "unknown";
}

MaskKind parse_mask_kind(std::string_view name) {
  for (const auto& m : kMaskNames)
    if (m.name == name) return m.kind;
  fail(ErrorCode::kInvalidArgument, "unknown mask '" + std::string(name) + "'");
}

void validate(const ZeroShotConfig& c) {
  validate(c.features);
  require(c.k >= 2, ErrorCode::kInvalidArgument, "k must be >= 2");
  require(c.features.output_dim >= c.k, ErrorCode::kInvalidArgument, "feature dimension must be >= k");
  require(c.mask_sigma > 0.0 && c.mask_samples >= 1 && c.mask_every >= 1, ErrorCode::kInvalidArgument,
          "mask sigma, samples and period must be positive");
  require(c.loop_target() >= c.k && c.eval_zoomout_target >= c.k, ErrorCode::kInvalidArgument,
          "zoomout targets must be >= k");
  require(c.basis_order >= 0, ErrorCode::kInvalidArgument, "basis_order must be >= 0");
  require(c.alpha >= 0.0 && c.ini_alpha >= 0.0, ErrorCode::kInvalidArgument, "mask weights must be >= 0");
  require(c.steps >= 0 && c.init_fit_steps >= 0, ErrorCode::kInvalidArgument, "step counts must be >= 0");
  require(c.learning_rate > 0.0 && c.init_fit_learning_rate > 0.0, ErrorCode::kInvalidArgument,
          "learning rates must be positive");
  require(c.sds.sigma_min > 0.0 && c.sds.sigma_min <= c.sds.sigma_max, ErrorCode::kInvalidArgument,
          "SDS sigma range must satisfy 0 < min <= max");
  require(c.sds_weight >= 0.0 && c.axiomatic_weight >= 0.0, ErrorCode::kInvalidArgument,
          "loss weights must be >= 0");
  require(c.theta_std > 0.0, ErrorCode::kInvalidArgument, "theta_std must be positive");
}

ad::Var step_objective(ad::Tape& tape, const ad::MLPParams& theta, const ad::MLPBinding& binding,
                       const ShapeContext& s1, const ShapeContext& s2, int k, const StepConstants& constants) {
  const PairVars v = forward_pair(tape, theta, binding, s1, s2, s1.projector(k), s2.projector(k));
  return objective_from_pair(tape, v, constants, s1.basis.lambda.head(k), s2.basis.lambda.head(k));
}

int required_basis_order(const ZeroShotConfig& config, int n1, int n2) {
  if (config.basis_order > 0) return config.basis_order;
  const int wanted = std::max({config.k, config.loop_target(), config.eval_zoomout_target});
  return std::min(wanted, std::min(n1, n2) - 1);
}

MatchResult ini_zoomout(const ShapeContext& s1, const ShapeContext& s2, MaskKind kind, const Denoiser* denoiser,
                        const ZeroShotConfig& config, unsigned long long seed) {
  validate(config);
  const auto start = std::chrono::steady_clock::now();
  const Orders orders = resolve_orders(config, s1, s2);
  const int k = config.k;
  const MatrixXd P1 = s1.projector(k), P2 = s2.projector(k);
  ad::MLPParams theta = make_feature_net(config.features);
  init_theta(theta, config, seed);

  MatchResult result;
  MatrixXd A1, A2;
  result.raw = raw_from_theta(theta, s1, s2, P1, P2, &A1, &A2);
  if (kind == MaskKind::kDistilled) {
    require(denoiser != nullptr, ErrorCode::kInvalidArgument, "distilled mask needs a denoiser");
    result.mask = distill_for(*denoiser, result.raw, config, derive_seed(seed, kFinalMaskStream));
  } else {
    result.mask = fixed_mask(kind, s1, s2, k);
  }
  const double alpha = kind == MaskKind::kNone ? 0.0 : config.ini_alpha;
  finish(solve_fmap(A1, A2, alpha, result.mask), s1, s2, orders.eval, result);
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

MatchResult zero_shot_match(const ShapeContext& s1, const ShapeContext& s2, const Denoiser* denoiser,
                            const ZeroShotConfig& config, unsigned long long seed, const FunctionalMap* init_map) {
  validate(config);
  if (config.mode == ZeroShotMode::kMaskZoomout) return ini_zoomout(s1, s2, MaskKind::kDistilled, denoiser, config, seed);

  const auto start = std::chrono::steady_clock::now();
  const ZeroShotMode mode = config.mode;
  const int k = config.k;
  const Orders orders = resolve_orders(config, s1, s2);
  if (uses_mask(mode) || uses_sds(mode)) {
    require(denoiser != nullptr, ErrorCode::kInvalidArgument,
            "mode " + std::string(to_string(mode)) + " needs a denoiser");
    require(denoiser->order() == k, ErrorCode::kShapeMismatch,
            "denoiser order " + std::to_string(denoiser->order()) + " differs from k=" + std::to_string(k));
  }
  const MatrixXd P1 = s1.projector(k), P2 = s2.projector(k);
  const VectorXd l1 = s1.basis.lambda.head(k), l2 = s2.basis.lambda.head(k);

  ad::MLPParams theta = make_feature_net(config.features);
  init_theta(theta, config, seed);
  auto tensors = theta.tensors();

  if (config.init_fit_steps > 0) {
    require(init_map != nullptr && init_map->rows() == k && init_map->cols() == k, ErrorCode::kShapeMismatch,
            "init fit needs a k x k init map");
    auto state = ad::make_optim_state(tensors, config.init_fit_learning_rate);
    for (int step = 0; step < config.init_fit_steps; ++step) {
      ad::Tape tape;
      const auto binding = ad::bind(tape, theta);
      const PairVars v = forward_pair(tape, theta, binding, s1, s2, P1, P2);
      tape.backward(proper_loss(v.C, *init_map));
      ad::optim_step(state, tensors, binding.grads());
    }
  }

  MatchResult result;
  auto state = ad::make_optim_state(tensors, config.learning_rate);
  Mask mask;
  for (int step = 0; step < config.steps; ++step) {
    try {
      ad::Tape tape;
      const auto binding = ad::bind(tape, theta);
      const PairVars v = forward_pair(tape, theta, binding, s1, s2, P1, P2);
      const MatrixXd& C_raw = v.C.value();
      if (uses_mask(mode) && step % config.mask_every == 0)
        mask = distill_for(*denoiser, C_raw, config,
                           derive_seed(seed, kMaskStream * 1'000'003ULL + static_cast<std::uint64_t>(step)));

      StepConstants constants;
      constants.sds_signed = mode == ZeroShotMode::kVanillaSds && config.sds_signed;
      constants.sds_weight = config.sds_weight;
      constants.axiomatic_weight = mode == ZeroShotMode::kFullAxiomatic ? config.axiomatic_weight : 0.0;
      double sds_value = 0.0;
      if (uses_proper(mode)) {
        const MatrixXd source = mode == ZeroShotMode::kProper ? C_raw
                                                              : solve_fmap(v.A1.value(), v.A2.value(), config.alpha, mask);
        constants.proper_target = zoomout(source, s1.basis, s2.basis, s2.mass, orders.loop).topLeftCorner(k, k);
      }
      if (uses_sds(mode)) {
        const MatrixXd x = constants.sds_signed ? C_raw : C_raw.cwiseAbs();
        SdsSample g = sds_gradient(*denoiser, x, config.sds,
                                   derive_seed(seed, kSdsStream * 1'000'003ULL + static_cast<std::uint64_t>(step)));
        sds_value = g.gradient.squaredNorm() / static_cast<double>(g.gradient.size());
        constants.sds_gradient = std::move(g.gradient);
      }
      const double proper_value =
          constants.proper_target.size() > 0 ? (C_raw - constants.proper_target).squaredNorm() : 0.0;
      ad::Var loss = objective_from_pair(tape, v, constants, l1, l2);

      tape.backward(loss);
      ad::optim_step(state, tensors, binding.grads());
      result.loss_proper.push_back(proper_value);
      result.loss_sds.push_back(sds_value);
      result.loss_total.push_back(proper_value + config.sds_weight * sds_value);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kNonFinite)
        fail(ErrorCode::kNonFinite, "zero-shot step " + std::to_string(step) + ": " + e.detail());
      throw;
    }
  }

  MatrixXd A1, A2;
  result.raw = raw_from_theta(theta, s1, s2, P1, P2, &A1, &A2);
  MatrixXd base = result.raw;
  if (uses_mask(mode)) {
    result.mask = distill_for(*denoiser, result.raw, config, derive_seed(seed, kFinalMaskStream));
    // With properness the optimized features already carry the regularized
    // map; only the SDS-only ablation reads its answer off the masked solve.
    if (!uses_proper(mode)) base = solve_fmap(A1, A2, config.alpha, result.mask);
  }
  finish(std::move(base), s1, s2, orders.eval, result);
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

MatchResult zero_shot_match(const TriangleMesh& mesh1, const TriangleMesh& mesh2, const Denoiser* denoiser,
                            const ZeroShotConfig& config, unsigned long long seed) {
  validate(config);
  const int order = required_basis_order(config, mesh1.num_vertices(), mesh2.num_vertices());
  const auto s1 = prepare_shape(mesh1, order, config.features.hks_count, config.k);
  const auto s2 = prepare_shape(mesh2, order, config.features.hks_count, config.k);
  return zero_shot_match(s1, s2, denoiser, config, seed);
}

}  // namespace fmprior

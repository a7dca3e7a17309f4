#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "fmprior/autodiff.hpp"
#include "fmprior/fmap.hpp"
#include "fmprior/mesh.hpp"
#include "fmprior/sgm.hpp"
#include "fmprior/spectral.hpp"

namespace fmprior {

/// M^2 = mean over N draws of (|C| + n - D(|C| + n; sigma)) / (2 sigma^2 (|C| + n)),
/// n elementwise half-normal with scale sigma. Negative averages are clamped
/// to zero before the square root.
Mask distill_mask(const Denoiser& denoiser, const FunctionalMap& C_init, double sigma, int samples,
                  unsigned long long seed);

struct SdsOptions {
  double sigma_min = 0.05;  // sigma ~ log-uniform on [sigma_min, sigma_max]
  double sigma_max = 1.5;
};

struct SdsSample {
  Eigen::MatrixXd gradient;  // (x + n - D(x + n; sigma)) / sigma
  double sigma = 0.0;
};

SdsSample sds_gradient(const Denoiser& denoiser, const Eigen::MatrixXd& C, const SdsOptions& options,
                       unsigned long long seed);

// |C_raw - C_proper|_F^2 with C_proper held constant.
ad::Var proper_loss(ad::Var C_raw, const Eigen::MatrixXd& C_proper);

struct FeatureNetConfig {
  int hks_count = 16;  // input is XYZ (3) plus this many HKS columns
  std::vector<int> widths{256, 256, 256, 256};
  int output_dim = 128;
  bool residual = true;

  int input_dim() const { return 3 + hks_count; }
};

void validate(const FeatureNetConfig& config);
ad::MLPParams make_feature_net(const FeatureNetConfig& config);

/// Per-shape data shared by every step of a match.
struct ShapeContext {
  TriangleMesh mesh;
  MassDiagonal mass;
  SpectralBasis basis;
  Eigen::MatrixXd input;  // n x (3 + T): centered XYZ and HKS, both in unit-area scale

  // k x n projection Phi_k^T S.
  Eigen::MatrixXd projector(int k) const;
};

// `hks_k` selects the eigenvalue range used to place the HKS times.
ShapeContext prepare_shape(TriangleMesh mesh, int basis_order, int hks_count, int hks_k,
                           EigenSolverKind solver = EigenSolverKind::kAuto);

Eigen::MatrixXd feature_forward(const ad::MLPParams& theta, const ShapeContext& shape);
ad::Var feature_forward(const ad::MLPParams& theta, const ad::MLPBinding& binding, const ShapeContext& shape);

enum class ZeroShotMode {
  kVanillaSds,     // SDS on the signed or absolute raw map, no mask, no properness
  kMaskZoomout,    // no optimization: mask-regularized solve then Zoomout
  kProper,         // properness loss against Zoomout(C_raw)
  kMaskSds,        // SDS only, final map from the mask-regularized solve
  kMaskProper,     // properness loss against Zoomout(C_reg)
  kFull,           // properness against Zoomout(C_reg) plus SDS on |C_raw|
  kFullAxiomatic,  // kFull plus orthogonality, bijectivity and Laplacian penalties
};

std::string_view to_string(ZeroShotMode mode);
ZeroShotMode parse_zero_shot_mode(std::string_view name);
std::vector<ZeroShotMode> all_zero_shot_modes();

enum class ThetaInit {
  kNormal,  // Normal(0, theta_std^2)
  kFanIn,   // Normal(0, 1 / fan_in)
};

std::string_view to_string(ThetaInit init);
ThetaInit parse_theta_init(std::string_view name);

struct ZeroShotConfig {
  ZeroShotMode mode = ZeroShotMode::kFull;
  int k = 30;
  double mask_sigma = 1.0;
  // Divide the raw map by its largest |entry| (when above 1) before mask
  // distillation so the denoiser sees values in the training range.
  bool mask_rescale = true;
  int mask_samples = 100;
  int mask_every = 50;
  int loop_zoomout_target = 0;  // 0: ceil(4k / 3)
  int eval_zoomout_target = 150;  // clamped to the available basis order
  int basis_order = 0;            // 0: max(loop, eval) targets, capped below the vertex count
  double alpha = 0.1;
  double ini_alpha = 1.0;  // mask weight of the optimization-free kMaskZoomout path
  int steps = 1000;
  double learning_rate = 1e-3;
  SdsOptions sds;
  double sds_weight = 1.0;
  bool sds_signed = false;  // vanilla mode: the denoiser was trained on signed maps
  double axiomatic_weight = 1e-3;
  FeatureNetConfig features;
  ThetaInit theta_init = ThetaInit::kNormal;
  double theta_std = 0.02;
  // Optional warm start: fit theta so that C_raw matches `init_map` before
  // the main loop.
  int init_fit_steps = 0;
  double init_fit_learning_rate = 1e-3;

  int loop_target() const { return loop_zoomout_target > 0 ? loop_zoomout_target : (4 * k + 2) / 3; }
};

void validate(const ZeroShotConfig& config);
// Basis order needed for two shapes with `n1`, `n2` vertices.
int required_basis_order(const ZeroShotConfig& config, int n1, int n2);

/// Data-dependent constants of one optimization step. Empty matrices switch
/// the corresponding term off.
struct StepConstants {
  Eigen::MatrixXd proper_target;  // Zoomout target of the properness loss
  Eigen::MatrixXd sds_gradient;   // SDS cotangent, injected at |C_raw| (or C_raw when signed)
  bool sds_signed = false;
  double sds_weight = 1.0;
  double axiomatic_weight = 0.0;
};

// Differentiable loss of one step with the constants frozen; C_raw comes from
// the feature network through the order-k solve.
ad::Var step_objective(ad::Tape& tape, const ad::MLPParams& theta, const ad::MLPBinding& binding,
                       const ShapeContext& shape1, const ShapeContext& shape2, int k, const StepConstants& constants);

struct MatchResult {
  FunctionalMap fmap;  // refined map at the eval order
  FunctionalMap raw;   // final k x k raw map
  PointMap point_map;  // shape-1 vertex -> shape-2 vertex
  Mask mask;           // last distilled mask (empty when unused)
  std::vector<double> loss_proper;
  std::vector<double> loss_sds;
  std::vector<double> loss_total;
  double seconds = 0.0;
  std::optional<GeodesicError> error;
};

/// Optimizes a per-pair feature network from scratch and returns the refined
/// correspondence: eval Zoomout of the final raw map, or of the final masked
/// solve in kMaskSds. `init_map` is used only when config.init_fit_steps > 0.
MatchResult zero_shot_match(const ShapeContext& shape1, const ShapeContext& shape2, const Denoiser* denoiser,
                            const ZeroShotConfig& config, unsigned long long seed,
                            const FunctionalMap* init_map = nullptr);
MatchResult zero_shot_match(const TriangleMesh& mesh1, const TriangleMesh& mesh2, const Denoiser* denoiser,
                            const ZeroShotConfig& config, unsigned long long seed);

// C / max|C| when max|C| > 1, otherwise C.
Eigen::MatrixXd rescale_to_unit_range(const Eigen::MatrixXd& C);

enum class MaskKind { kNone, kLaplacian, kResolvent, kSlanted, kDistilled };

std::string_view to_string(MaskKind kind);
MaskKind parse_mask_kind(std::string_view name);

/// Random-feature initialization followed by a mask-regularized solve (weight
/// config.ini_alpha) and eval Zoomout. kDistilled requires a denoiser.
MatchResult ini_zoomout(const ShapeContext& shape1, const ShapeContext& shape2, MaskKind kind,
                        const Denoiser* denoiser, const ZeroShotConfig& config, unsigned long long seed);

}  // namespace fmprior

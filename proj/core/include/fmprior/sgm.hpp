#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "fmprior/autodiff.hpp"

namespace fmprior {

struct DenoiserConfig {
  int order = 30;                        // maps are order x order
  std::vector<int> widths{256, 256, 256};
  int embedding_dim = 32;                // sinusoidal sigma embedding
  bool residual = true;
  double sigma_data = 0.25;
};

struct NoiseSchedule {
  double sigma_min = 0.002;
  double sigma_max = 3.0;
  double p_mean = -1.2;  // training: ln sigma ~ Normal(p_mean, p_std^2), clamped
  double p_std = 1.2;
  int sampler_steps = 64;
};

void validate(const DenoiserConfig& config);
void validate(const NoiseSchedule& schedule);

/// Anything that maps a noisy square matrix and a noise level to a clean
/// estimate. Batches are stored one flattened (row-major) matrix per row.
class Denoiser {
 public:
  virtual ~Denoiser() = default;
  virtual int order() const = 0;
  virtual Eigen::MatrixXd denoise_rows(const Eigen::MatrixXd& rows, const Eigen::VectorXd& sigmas) const = 0;
  // Noise levels the denoiser accepts.
  virtual double sigma_min() const { return 0.0; }
  virtual double sigma_max() const { return std::numeric_limits<double>::infinity(); }

  Eigen::MatrixXd denoise(const Eigen::MatrixXd& X, double sigma) const;
};

/// Wraps a closure D(X; sigma) as a Denoiser; used for analytic oracles.
class FunctionDenoiser final : public Denoiser {
 public:
  using Fn = std::function<Eigen::MatrixXd(const Eigen::MatrixXd&, double)>;
  FunctionDenoiser(int order, Fn fn) : order_(order), fn_(std::move(fn)) {}

  int order() const override { return order_; }
  Eigen::MatrixXd denoise_rows(const Eigen::MatrixXd& rows, const Eigen::VectorXd& sigmas) const override;

 private:
  int order_;
  Fn fn_;
};

Eigen::RowVectorXd flatten(const Eigen::MatrixXd& X);
Eigen::MatrixXd unflatten(const Eigen::RowVectorXd& row, int order);

struct Preconditioning {
  double c_skip, c_out, c_in;
};
Preconditioning preconditioning(double sigma, double sigma_data);

// Sinusoidal features of ln(sigma), 1 x dim.
Eigen::RowVectorXd sigma_embedding(double sigma, int dim);

/// Preconditioned MLP denoiser:
///   D(X; s) = c_skip(s) X + c_out(s) F([c_in(s) vec(X), emb(s)]).
class SpectralDenoiser final : public Denoiser {
 public:
  SpectralDenoiser(DenoiserConfig config, NoiseSchedule schedule, ad::MLPParams params);

  // Randomly initialized network; the output layer starts at zero so the
  // untrained denoiser is D = c_skip X.
  static SpectralDenoiser initialized(const DenoiserConfig& config, const NoiseSchedule& schedule,
                                      unsigned long long seed);

  int order() const override { return config_.order; }
  Eigen::MatrixXd denoise_rows(const Eigen::MatrixXd& rows, const Eigen::VectorXd& sigmas) const override;
  double sigma_min() const override { return schedule_.sigma_min; }
  double sigma_max() const override { return schedule_.sigma_max; }

  // Differentiable forward used by training; `rows` and `sigmas` are data.
  ad::Var denoise_rows(const ad::MLPBinding& binding, const Eigen::MatrixXd& rows,
                       const Eigen::VectorXd& sigmas) const;
  // Network input for a batch: [c_in vec(X), emb(sigma)].
  Eigen::MatrixXd network_input(const Eigen::MatrixXd& rows, const Eigen::VectorXd& sigmas) const;

  const DenoiserConfig& config() const noexcept { return config_; }
  const NoiseSchedule& schedule() const noexcept { return schedule_; }
  const ad::MLPParams& params() const noexcept { return params_; }
  ad::MLPParams& params() noexcept { return params_; }

 private:
  DenoiserConfig config_;
  NoiseSchedule schedule_;
  ad::MLPParams params_;
};

struct TrainOptions {
  int epochs = 100;
  int batch_size = 128;
  double learning_rate = 1e-3;  // cosine-decayed to zero over all steps
  unsigned long long seed = 0;
  // Called once per epoch with (epoch, mean loss).
  std::function<void(int, double)> on_epoch;
};

struct TrainResult {
  SpectralDenoiser denoiser;
  std::vector<double> epoch_loss;
};

// Mean per-entry preconditioned loss |F - (x - c_skip x_s) / c_out|^2, which
// equals |D(x_s; s) - x|^2 weighted by 1 / c_out(s)^2.
double denoiser_loss(const SpectralDenoiser& denoiser, const Eigen::MatrixXd& clean_rows,
                     const Eigen::MatrixXd& noise_rows, const Eigen::VectorXd& sigmas);
ad::Var denoiser_loss(const SpectralDenoiser& denoiser, const ad::MLPBinding& binding,
                      const Eigen::MatrixXd& clean_rows, const Eigen::MatrixXd& noise_rows,
                      const Eigen::VectorXd& sigmas);

/// Trains on `data` (each entry order x order). Deterministic given the seed.
TrainResult train_denoiser(const std::vector<Eigen::MatrixXd>& data, const DenoiserConfig& config,
                           const NoiseSchedule& schedule, const TrainOptions& options);

// (D(X; sigma) - X) / sigma^2.
Eigen::MatrixXd score(const Denoiser& denoiser, const Eigen::MatrixXd& X, double sigma);

// Geometric grid from sigma_max to sigma_min, length `steps`.
std::vector<double> sigma_grid(const NoiseSchedule& schedule, int steps);

/// Heun probability-flow integration from Normal(0, sigma_max^2 I) down the
/// geometric grid, finishing with an Euler step to sigma = 0. When
/// `trajectory` is non-null it receives the state after every step.
Eigen::MatrixXd sample(const Denoiser& denoiser, const NoiseSchedule& schedule, int steps,
                       unsigned long long seed, std::vector<Eigen::MatrixXd>* trajectory = nullptr);

// "SGM1" checkpoint; see README for the layout.
inline constexpr std::uint32_t kCheckpointVersion = 1;
std::string encode_checkpoint(const SpectralDenoiser& denoiser);
SpectralDenoiser decode_checkpoint(std::string_view bytes);
void save_checkpoint(const SpectralDenoiser& denoiser, const std::filesystem::path& path);
SpectralDenoiser load_checkpoint(const std::filesystem::path& path);

}  // namespace fmprior

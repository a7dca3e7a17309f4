#include "fmprior/sgm.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "fmprior/error.hpp"
#include "fmprior/io.hpp"

namespace fmprior {

using Eigen::MatrixXd;
using Eigen::VectorXd;

void validate(const DenoiserConfig& config) {
  require(config.order >= 1, ErrorCode::kInvalidArgument, "denoiser order must be >= 1");
  require(!config.widths.empty(), ErrorCode::kInvalidArgument, "denoiser widths must be nonempty");
  for (int w : config.widths) require(w >= 1, ErrorCode::kInvalidArgument, "denoiser widths must be positive");
  require(config.embedding_dim >= 2 && config.embedding_dim % 2 == 0, ErrorCode::kInvalidArgument,
          "sigma embedding dimension must be even and >= 2");
  require(config.sigma_data > 0.0, ErrorCode::kInvalidArgument, "sigma_data must be positive");
}

void validate(const NoiseSchedule& s) {
  require(s.sigma_min > 0.0 && s.sigma_min < s.sigma_max, ErrorCode::kInvalidArgument,
          "noise schedule needs 0 < sigma_min < sigma_max");
  require(s.p_std > 0.0, ErrorCode::kInvalidArgument, "p_std must be positive");
  require(s.sampler_steps >= 1, ErrorCode::kInvalidArgument, "sampler_steps must be >= 1");
}

Eigen::RowVectorXd flatten(const MatrixXd& X) {
  Eigen::RowVectorXd row(X.size());
  for (Eigen::Index i = 0; i < X.rows(); ++i)
    for (Eigen::Index j = 0; j < X.cols(); ++j) row(i * X.cols() + j) = X(i, j);
  return row;
}

MatrixXd unflatten(const Eigen::RowVectorXd& row, int order) {
  require(row.size() == static_cast<Eigen::Index>(order) * order, ErrorCode::kShapeMismatch,
          "flattened row does not match order^2");
  MatrixXd X(order, order);
  for (int i = 0; i < order; ++i)
    for (int j = 0; j < order; ++j) X(i, j) = row(i * order + j);
  return X;
}

MatrixXd Denoiser::denoise(const MatrixXd& X, double sigma) const {
  require(X.rows() == order() && X.cols() == order(), ErrorCode::kShapeMismatch,
          "denoiser expects a " + std::to_string(order()) + "x" + std::to_string(order()) + " matrix");
  MatrixXd rows = flatten(X);
  VectorXd sigmas = VectorXd::Constant(1, sigma);
  return unflatten(denoise_rows(rows, sigmas).row(0), order());
}

MatrixXd FunctionDenoiser::denoise_rows(const MatrixXd& rows, const VectorXd& sigmas) const {
  require(rows.cols() == static_cast<Eigen::Index>(order_) * order_ && sigmas.size() == rows.rows(),
          ErrorCode::kShapeMismatch, "denoiser batch shape mismatch");
  MatrixXd out(rows.rows(), rows.cols());
  for (Eigen::Index b = 0; b < rows.rows(); ++b) {
    const MatrixXd y = fn_(unflatten(rows.row(b), order_), sigmas(b));
    require(y.rows() == order_ && y.cols() == order_, ErrorCode::kShapeMismatch, "denoiser closure output shape");
    out.row(b) = flatten(y);
  }
  return out;
}

Preconditioning preconditioning(double sigma, double sigma_data) {
  const double s2 = sigma_data * sigma_data;
  const double total = sigma * sigma + s2;
  return {s2 / total, sigma * sigma_data / std::sqrt(total), 1.0 / std::sqrt(total)};
}

Eigen::RowVectorXd sigma_embedding(double sigma, int dim) {
  const int half = dim / 2;
  const double t = std::log(sigma);
  Eigen::RowVectorXd e(dim);
  for (int f = 0; f < half; ++f) {
    // Frequencies log-spaced over [0.1, 100].
    const double freq = half == 1 ? 1.0 : 0.1 * std::pow(1000.0, static_cast<double>(f) / (half - 1));
    e(f) = std::sin(freq * t);
    e(half + f) = std::cos(freq * t);
  }
  return e;
}

SpectralDenoiser::SpectralDenoiser(DenoiserConfig config, NoiseSchedule schedule, ad::MLPParams params)
    : config_(std::move(config)), schedule_(schedule), params_(std::move(params)) {
  validate(config_);
  validate(schedule_);
  const int n2 = config_.order * config_.order;
  require(params_.input_dim() == n2 + config_.embedding_dim && params_.output_dim() == n2,
          ErrorCode::kShapeMismatch, "network dimensions do not match the denoiser config");
}

SpectralDenoiser SpectralDenoiser::initialized(const DenoiserConfig& config, const NoiseSchedule& schedule,
                                               unsigned long long seed) {
  validate(config);
  const int n2 = config.order * config.order;
  std::vector<int> dims{n2 + config.embedding_dim};
  dims.insert(dims.end(), config.widths.begin(), config.widths.end());
  dims.push_back(n2);
  auto params = ad::make_mlp(std::move(dims), ad::Activation::kGelu, config.residual);
  ad::init_fan_in(params, 1.0, 0.0, seed);
  return SpectralDenoiser(config, schedule, std::move(params));
}

MatrixXd SpectralDenoiser::network_input(const MatrixXd& rows, const VectorXd& sigmas) const {
  const Eigen::Index n2 = static_cast<Eigen::Index>(config_.order) * config_.order;
  require(rows.cols() == n2 && sigmas.size() == rows.rows(), ErrorCode::kShapeMismatch,
          "denoiser batch shape mismatch");
  MatrixXd input(rows.rows(), n2 + config_.embedding_dim);
  for (Eigen::Index b = 0; b < rows.rows(); ++b) {
    const double s = sigmas(b);
    if (!(s >= schedule_.sigma_min * (1 - 1e-12) && s <= schedule_.sigma_max * (1 + 1e-12)))
      fail(ErrorCode::kSigmaOutOfRange, "sigma " + std::to_string(s) + " outside schedule range");
    input.row(b).head(n2) = preconditioning(s, config_.sigma_data).c_in * rows.row(b);
    input.row(b).tail(config_.embedding_dim) = sigma_embedding(s, config_.embedding_dim);
  }
  return input;
}

MatrixXd SpectralDenoiser::denoise_rows(const MatrixXd& rows, const VectorXd& sigmas) const {
  const MatrixXd F = ad::mlp_forward(params_, network_input(rows, sigmas));
  MatrixXd out(rows.rows(), rows.cols());
  for (Eigen::Index b = 0; b < rows.rows(); ++b) {
    const auto pc = preconditioning(sigmas(b), config_.sigma_data);
    out.row(b) = pc.c_skip * rows.row(b) + pc.c_out * F.row(b);
  }
  if (!out.allFinite()) fail(ErrorCode::kNonFinite, "denoiser produced non-finite output");
  return out;
}

ad::Var SpectralDenoiser::denoise_rows(const ad::MLPBinding& binding, const MatrixXd& rows,
                                       const VectorXd& sigmas) const {
  ad::Tape& tape = *binding.weights.front().tape();
  ad::Var F = ad::mlp_forward(params_, binding, tape.constant(network_input(rows, sigmas)));
  VectorXd c_out(rows.rows());
  MatrixXd skip(rows.rows(), rows.cols());
  for (Eigen::Index b = 0; b < rows.rows(); ++b) {
    const auto pc = preconditioning(sigmas(b), config_.sigma_data);
    c_out(b) = pc.c_out;
    skip.row(b) = pc.c_skip * rows.row(b);
  }
  return ad::add_const(ad::scale_rows(F, c_out), skip);
}

namespace {

// Training target for the raw network output.
MatrixXd network_target(const SpectralDenoiser& d, const MatrixXd& clean, const MatrixXd& noisy,
                        const VectorXd& sigmas) {
  MatrixXd target(clean.rows(), clean.cols());
  for (Eigen::Index b = 0; b < clean.rows(); ++b) {
    const auto pc = preconditioning(sigmas(b), d.config().sigma_data);
    target.row(b) = (clean.row(b) - pc.c_skip * noisy.row(b)) / pc.c_out;
  }
  return target;
}

}  // namespace

double denoiser_loss(const SpectralDenoiser& denoiser, const MatrixXd& clean_rows, const MatrixXd& noise_rows,
                     const VectorXd& sigmas) {
  const MatrixXd noisy = clean_rows + noise_rows;
  const MatrixXd F = ad::mlp_forward(denoiser.params(), denoiser.network_input(noisy, sigmas));
  return (F - network_target(denoiser, clean_rows, noisy, sigmas)).squaredNorm() /
         static_cast<double>(clean_rows.size());
}

ad::Var denoiser_loss(const SpectralDenoiser& denoiser, const ad::MLPBinding& binding, const MatrixXd& clean_rows,
                      const MatrixXd& noise_rows, const VectorXd& sigmas) {
  require(clean_rows.rows() == noise_rows.rows() && clean_rows.cols() == noise_rows.cols(),
          ErrorCode::kShapeMismatch, "clean and noise batches differ in shape");
  ad::Tape& tape = *binding.weights.front().tape();
  const MatrixXd noisy = clean_rows + noise_rows;
  ad::Var F = ad::mlp_forward(denoiser.params(), binding, tape.constant(denoiser.network_input(noisy, sigmas)));
  ad::Var residual = ad::add_const(F, -network_target(denoiser, clean_rows, noisy, sigmas));
  return ad::scale(ad::frobenius_sq(residual), 1.0 / static_cast<double>(clean_rows.size()));
}

TrainResult train_denoiser(const std::vector<MatrixXd>& data, const DenoiserConfig& config,
                           const NoiseSchedule& schedule, const TrainOptions& options) {
  if (data.empty()) fail(ErrorCode::kEmptyDataset, "training dataset is empty");
  validate(config);
  validate(schedule);
  require(options.epochs >= 0 && options.batch_size >= 1 && options.learning_rate > 0.0,
          ErrorCode::kInvalidArgument, "invalid training options");
  const Eigen::Index n2 = static_cast<Eigen::Index>(config.order) * config.order;
  MatrixXd all(static_cast<Eigen::Index>(data.size()), n2);
  for (std::size_t i = 0; i < data.size(); ++i) {
    require(data[i].rows() == config.order && data[i].cols() == config.order, ErrorCode::kShapeMismatch,
            "dataset map " + std::to_string(i) + " does not match the denoiser order");
    all.row(static_cast<Eigen::Index>(i)) = flatten(data[i]);
  }
  if (!all.allFinite()) fail(ErrorCode::kNonFinite, "dataset contains non-finite entries");

  std::mt19937_64 rng(options.seed);
  SpectralDenoiser model = SpectralDenoiser::initialized(config, schedule, rng());
  auto tensors = model.params().tensors();
  auto state = ad::make_optim_state(tensors, options.learning_rate);
  std::normal_distribution<double> normal(0.0, 1.0);

  const auto count = static_cast<int>(data.size());
  const int batches = (count + options.batch_size - 1) / options.batch_size;
  const double total_steps = static_cast<double>(batches) * options.epochs;
  std::vector<int> order(static_cast<std::size_t>(count));
  std::iota(order.begin(), order.end(), 0);

  TrainResult result{std::move(model), {}};
  SpectralDenoiser& m = result.denoiser;
  long step = 0;
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (int b = 0; b < batches; ++b) {
      const int begin = b * options.batch_size;
      const int size = std::min(options.batch_size, count - begin);
      MatrixXd clean(size, n2), noise(size, n2);
      VectorXd sigmas(size);
      for (int r = 0; r < size; ++r) {
        clean.row(r) = all.row(order[static_cast<std::size_t>(begin + r)]);
        const double ln_sigma = schedule.p_mean + schedule.p_std * normal(rng);
        sigmas(r) = std::clamp(std::exp(ln_sigma), schedule.sigma_min, schedule.sigma_max);
        for (Eigen::Index c = 0; c < n2; ++c) noise(r, c) = sigmas(r) * normal(rng);
      }
      ad::Tape tape;
      const auto binding = ad::bind(tape, m.params());
      ad::Var loss = denoiser_loss(m, binding, clean, noise, sigmas);
      tape.backward(loss);
      const double lr =
          options.learning_rate * 0.5 * (1.0 + std::cos(std::numbers::pi * static_cast<double>(step) / total_steps));
      ad::optim_step(state, tensors, binding.grads(), lr);
      epoch_loss += loss.scalar() * size;
      ++step;
    }
    epoch_loss /= count;
    if (!std::isfinite(epoch_loss))
      fail(ErrorCode::kNonFinite, "training diverged at epoch " + std::to_string(epoch));
    result.epoch_loss.push_back(epoch_loss);
    if (options.on_epoch) options.on_epoch(epoch, epoch_loss);
  }
  return result;
}

MatrixXd score(const Denoiser& denoiser, const MatrixXd& X, double sigma) {
  require(sigma > 0.0, ErrorCode::kSigmaOutOfRange, "score needs sigma > 0");
  return (denoiser.denoise(X, sigma) - X) / (sigma * sigma);
}

std::vector<double> sigma_grid(const NoiseSchedule& schedule, int steps) {
  validate(schedule);
  require(steps >= 1, ErrorCode::kInvalidArgument, "sampler needs at least one step");
  std::vector<double> grid(static_cast<std::size_t>(steps));
  if (steps == 1) {
    grid[0] = schedule.sigma_max;
    return grid;
  }
  const double ratio = std::log(schedule.sigma_min / schedule.sigma_max);
  for (int i = 0; i < steps; ++i)
    grid[static_cast<std::size_t>(i)] = schedule.sigma_max * std::exp(ratio * i / (steps - 1));
  return grid;
}

MatrixXd sample(const Denoiser& denoiser, const NoiseSchedule& schedule, int steps, unsigned long long seed,
                std::vector<MatrixXd>* trajectory) {
  auto grid = sigma_grid(schedule, steps);
  grid.push_back(0.0);
  const int n = denoiser.order();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  MatrixXd x(n, n);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = grid.front() * normal(rng);
  if (trajectory) {
    trajectory->clear();
    trajectory->push_back(x);
  }
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    const double s = grid[i];
    const double s_next = grid[i + 1];
    const MatrixXd d = (x - denoiser.denoise(x, s)) / s;
    MatrixXd x_next = x + (s_next - s) * d;
    if (s_next > 0.0) {
      const MatrixXd d_next = (x_next - denoiser.denoise(x_next, s_next)) / s_next;
      x_next = x + (s_next - s) * 0.5 * (d + d_next);
    }
    x = std::move(x_next);
    if (!x.allFinite()) fail(ErrorCode::kNonFinite, "sampler diverged at step " + std::to_string(i));
    if (trajectory) trajectory->push_back(x);
  }
  return x;
}

std::string encode_checkpoint(const SpectralDenoiser& denoiser) {
  const auto& c = denoiser.config();
  const auto& s = denoiser.schedule();
  ByteWriter w;
  w.magic("SGM1");
  w.u32(kCheckpointVersion);
  w.u32(static_cast<std::uint32_t>(c.order));
  w.u32(static_cast<std::uint32_t>(c.widths.size()));
  for (int width : c.widths) w.u32(static_cast<std::uint32_t>(width));
  w.u32(static_cast<std::uint32_t>(c.embedding_dim));
  w.u32(c.residual ? 1u : 0u);
  w.f64(c.sigma_data);
  w.f64(s.sigma_min);
  w.f64(s.sigma_max);
  w.f64(s.p_mean);
  w.f64(s.p_std);
  w.u32(static_cast<std::uint32_t>(s.sampler_steps));
  const auto tensors = denoiser.params().tensors();
  w.u32(static_cast<std::uint32_t>(tensors.size()));
  for (std::size_t t = 0; t < tensors.size(); ++t) {
    w.str((t % 2 == 0 ? "W" : "b") + std::to_string(t / 2));
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = *tensors[t];
    w.u32(static_cast<std::uint32_t>(rm.size()));
    w.f64s({rm.data(), static_cast<std::size_t>(rm.size())});
  }
  return w.bytes();
}

SpectralDenoiser decode_checkpoint(std::string_view bytes) {
  ByteReader r(bytes);
  r.expect_magic("SGM1");
  const auto version = r.u32();
  if (version != kCheckpointVersion)
    fail(ErrorCode::kVersionError, "checkpoint version " + std::to_string(version) + " is not supported");
  DenoiserConfig c;
  c.order = static_cast<int>(r.u32());
  c.widths.resize(r.u32());
  for (auto& width : c.widths) width = static_cast<int>(r.u32());
  c.embedding_dim = static_cast<int>(r.u32());
  c.residual = r.u32() != 0;
  c.sigma_data = r.f64();
  NoiseSchedule s;
  s.sigma_min = r.f64();
  s.sigma_max = r.f64();
  s.p_mean = r.f64();
  s.p_std = r.f64();
  s.sampler_steps = static_cast<int>(r.u32());
  if (c.order < 1 || c.order > 4096 || c.widths.empty() || c.widths.size() > 64)
    fail(ErrorCode::kFormatError, "checkpoint config block is implausible");
  validate(c);
  validate(s);

  SpectralDenoiser model = SpectralDenoiser::initialized(c, s, 0);
  auto tensors = model.params().tensors();
  if (r.u32() != tensors.size()) fail(ErrorCode::kFormatError, "checkpoint parameter count mismatch");
  for (std::size_t t = 0; t < tensors.size(); ++t) {
    const std::string expected = (t % 2 == 0 ? "W" : "b") + std::to_string(t / 2);
    if (r.str() != expected) fail(ErrorCode::kFormatError, "checkpoint expected parameter " + expected);
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(tensors[t]->rows(),
                                                                               tensors[t]->cols());
    if (r.u32() != static_cast<std::uint32_t>(rm.size()))
      fail(ErrorCode::kFormatError, "checkpoint parameter " + expected + " has the wrong length");
    r.f64s({rm.data(), static_cast<std::size_t>(rm.size())});
    *tensors[t] = rm;
  }
  if (!r.at_end()) fail(ErrorCode::kFormatError, "trailing bytes after checkpoint");
  return model;
}

void save_checkpoint(const SpectralDenoiser& denoiser, const std::filesystem::path& path) {
  write_file_atomic(path, encode_checkpoint(denoiser));
}

SpectralDenoiser load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file(path)); }

}  // namespace fmprior

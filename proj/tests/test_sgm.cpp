#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "fmprior/sgm.hpp"
#include "support.hpp"

namespace fmprior {
namespace {

using testing::error_code_of;
using testing::TempDir;

DenoiserConfig small_config(int order = 4) {
  DenoiserConfig c;
  c.order = order;
  c.widths = {16, 16};
  c.embedding_dim = 8;
  return c;
}

std::vector<Eigen::MatrixXd> toy_data(int count, int order, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  std::vector<Eigen::MatrixXd> out;
  for (int i = 0; i < count; ++i) {
    Eigen::MatrixXd X = Eigen::MatrixXd::Identity(order, order) * 0.5;
    for (Eigen::Index j = 0; j < X.size(); ++j) X.data()[j] += 0.05 * n01(rng);
    out.push_back(X.cwiseAbs());
  }
  return out;
}

TEST(Preconditioning, ClosedForm) {
  for (double sigma : {0.002, 0.1, 0.25, 3.0}) {
    const double s = 0.25;
    const Preconditioning p = preconditioning(sigma, s);
    EXPECT_NEAR(p.c_skip, s * s / (sigma * sigma + s * s), 1e-15);
    EXPECT_NEAR(p.c_out, sigma * s / std::sqrt(sigma * sigma + s * s), 1e-15);
    EXPECT_NEAR(p.c_in, 1.0 / std::sqrt(sigma * sigma + s * s), 1e-12);
  }
}

TEST(SigmaEmbedding, SinCosPairs) {
  const Eigen::RowVectorXd e = sigma_embedding(0.37, 10);
  ASSERT_EQ(e.size(), 10);
  for (int f = 0; f < 5; ++f) EXPECT_NEAR(e(f) * e(f) + e(5 + f) * e(5 + f), 1.0, 1e-14);
  EXPECT_NEAR(e(0), std::sin(0.1 * std::log(0.37)), 1e-15);
  EXPECT_NEAR(e(4), std::sin(100.0 * std::log(0.37)), 1e-12);
  EXPECT_GT((sigma_embedding(0.38, 10) - e).norm(), 1e-3);
}

TEST(Flatten, RowMajorRoundTrip) {
  Eigen::MatrixXd X(2, 2);
  X << 1, 2, 3, 4;
  const Eigen::RowVectorXd r = flatten(X);
  EXPECT_EQ(r, Eigen::RowVector4d(1, 2, 3, 4));
  EXPECT_EQ(unflatten(r, 2), X);
}

TEST(SpectralDenoiser, UntrainedNetworkIsTheSkipPath) {
  const NoiseSchedule schedule;
  const auto d = SpectralDenoiser::initialized(small_config(), schedule, 1);
  const Eigen::MatrixXd X = Eigen::MatrixXd::Random(4, 4);
  const double sigma = 0.7;
  EXPECT_LT((d.denoise(X, sigma) - preconditioning(sigma, 0.25).c_skip * X).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_EQ(error_code_of([&] { d.denoise(X, 10.0); }), ErrorCode::kSigmaOutOfRange);
  EXPECT_EQ(error_code_of([&] { d.denoise(Eigen::MatrixXd::Zero(3, 3), 1.0); }), ErrorCode::kShapeMismatch);
}

TEST(SpectralDenoiser, TapeAndPlainLossAgree) {
  const NoiseSchedule schedule;
  auto d = SpectralDenoiser::initialized(small_config(), schedule, 2);
  ad::init_normal(d.params(), 0.2, 3);
  const auto data = toy_data(5, 4, 4);
  Eigen::MatrixXd clean(5, 16), noise = Eigen::MatrixXd::Random(5, 16);
  for (int i = 0; i < 5; ++i) clean.row(i) = flatten(data[static_cast<std::size_t>(i)]);
  const Eigen::VectorXd sigmas = Eigen::VectorXd::LinSpaced(5, 0.01, 2.0);
  ad::Tape tape;
  const auto binding = ad::bind(tape, d.params());
  const double taped = denoiser_loss(d, binding, clean, noise, sigmas).scalar();
  EXPECT_NEAR(taped, denoiser_loss(d, clean, noise, sigmas), 1e-12 * std::abs(taped));
}

TEST(Training, LossDropsAndRunsAreBitIdentical) {
  const NoiseSchedule schedule;
  const auto data = toy_data(64, 4, 5);
  TrainOptions options;
  options.epochs = 40;
  options.batch_size = 16;
  options.learning_rate = 3e-3;
  options.seed = 9;
  const TrainResult a = train_denoiser(data, small_config(), schedule, options);
  const TrainResult b = train_denoiser(data, small_config(), schedule, options);
  ASSERT_EQ(a.epoch_loss.size(), 40u);
  EXPECT_LT(a.epoch_loss.back(), 0.5 * a.epoch_loss.front());
  EXPECT_EQ(a.epoch_loss, b.epoch_loss);
  EXPECT_EQ(encode_checkpoint(a.denoiser), encode_checkpoint(b.denoiser));
  EXPECT_EQ(error_code_of([&] { train_denoiser({}, small_config(), schedule, options); }), ErrorCode::kEmptyDataset);
  EXPECT_EQ(error_code_of([&] { train_denoiser(toy_data(3, 5, 1), small_config(), schedule, options); }),
            ErrorCode::kShapeMismatch);
}

TEST(Checkpoint, RoundTripAndRejection) {
  TempDir dir;
  const NoiseSchedule schedule{0.01, 2.0, -1.0, 1.1, 16};
  auto d = SpectralDenoiser::initialized(small_config(3), schedule, 4);
  ad::init_normal(d.params(), 0.1, 5);
  save_checkpoint(d, dir / "d.sgm");
  const SpectralDenoiser back = load_checkpoint(dir / "d.sgm");
  EXPECT_EQ(encode_checkpoint(back), encode_checkpoint(d));
  EXPECT_EQ(back.schedule().sampler_steps, 16);
  EXPECT_EQ(back.config().widths, small_config(3).widths);
  const Eigen::MatrixXd X = Eigen::MatrixXd::Random(3, 3);
  EXPECT_EQ(back.denoise(X, 0.5), d.denoise(X, 0.5));

  std::string bytes = encode_checkpoint(d);
  EXPECT_EQ(bytes.substr(0, 4), "SGM1");
  std::string future = bytes;
  future[4] = 2;
  EXPECT_EQ(error_code_of([&] { decode_checkpoint(future); }), ErrorCode::kVersionError);
  EXPECT_EQ(error_code_of([&] { decode_checkpoint(bytes + "z"); }), ErrorCode::kFormatError);
  EXPECT_EQ(error_code_of([&] { decode_checkpoint(bytes.substr(0, bytes.size() / 2)); }), ErrorCode::kFormatError);
  EXPECT_EQ(error_code_of([&] { decode_checkpoint("XGM1" + bytes.substr(4)); }), ErrorCode::kFormatError);
}

TEST(Sampler, GridAndScore) {
  const NoiseSchedule schedule{0.01, 4.0, -1.2, 1.2, 9};
  const auto grid = sigma_grid(schedule, 9);
  ASSERT_EQ(grid.size(), 9u);
  EXPECT_DOUBLE_EQ(grid.front(), 4.0);
  EXPECT_NEAR(grid.back(), 0.01, 1e-15);
  for (std::size_t i = 1; i < grid.size(); ++i) EXPECT_NEAR(grid[i] / grid[i - 1], std::pow(0.01 / 4.0, 1.0 / 8.0), 1e-12);

  const double v = 0.09;
  const FunctionDenoiser analytic(3, [v](const Eigen::MatrixXd& X, double s) { return Eigen::MatrixXd(v * X / (v + s * s)); });
  const Eigen::MatrixXd X = Eigen::MatrixXd::Random(3, 3);
  EXPECT_LT((score(analytic, X, 0.5) + X / (v + 0.25)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Sampler, GaussianPriorIsReproduced) {
  // With the exact denoiser of Normal(0, v), the flow carries Normal(0, sigma_max^2)
  // to Normal(0, v).
  const double v = 0.09;
  const FunctionDenoiser analytic(8, [v](const Eigen::MatrixXd& X, double s) { return Eigen::MatrixXd(v * X / (v + s * s)); });
  const NoiseSchedule schedule{0.002, 3.0, -1.2, 1.2, 32};
  double sum_sq = 0.0;
  int count = 0;
  for (int i = 0; i < 40; ++i) {
    const Eigen::MatrixXd X = sample(analytic, schedule, 32, 100 + i);
    sum_sq += X.squaredNorm();
    count += static_cast<int>(X.size());
  }
  EXPECT_NEAR(sum_sq / count, v, 0.1 * v);

  std::vector<Eigen::MatrixXd> trajectory;
  const Eigen::MatrixXd a = sample(analytic, schedule, 6, 7, &trajectory);
  EXPECT_EQ(trajectory.size(), 7u);
  EXPECT_EQ(trajectory.back(), a);
  EXPECT_EQ(sample(analytic, schedule, 6, 7), a);
}

}  // namespace
}  // namespace fmprior

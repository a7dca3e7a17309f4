// Criteria checked against closed forms and brute force: 1-5 and 7.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "acceptance.hpp"
#include "fmprior/distill.hpp"
#include "fmprior/fmap.hpp"
#include "fmprior/random.hpp"
#include "fmprior/sgm.hpp"
#include "fmprior/spectral.hpp"
#include "fmprior/synth.hpp"

namespace fmprior::acceptance {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

MatrixXd normal_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double stddev = 1.0) {
  std::normal_distribution<double> n(0.0, stddev);
  MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

MatrixXd uniform_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

// Largest |central difference - analytic| over every coordinate, relative to
// the largest central difference.
double fd_relative_error(const std::function<double()>& value, const std::vector<ad::Matrix*>& tensors,
                         const std::vector<ad::Matrix>& grads) {
  constexpr double h = 1e-5;
  double worst = 0.0, scale = 0.0;
  for (std::size_t t = 0; t < tensors.size(); ++t) {
    for (Eigen::Index i = 0; i < tensors[t]->size(); ++i) {
      double& x = tensors[t]->data()[i];
      const double keep = x;
      x = keep + h;
      const double up = value();
      x = keep - h;
      const double down = value();
      x = keep;
      const double fd = (up - down) / (2.0 * h);
      worst = std::max(worst, std::abs(fd - grads[t].data()[i]));
      scale = std::max(scale, std::abs(fd));
    }
  }
  return scale > 0.0 ? worst / scale : worst;
}

double denoiser_instance(unsigned seed) {
  std::mt19937_64 rng(seed);
  DenoiserConfig config;
  config.order = 5;
  config.widths = {16, 16};
  config.embedding_dim = 8;
  SpectralDenoiser d = SpectralDenoiser::initialized(config, NoiseSchedule{}, seed);
  ad::init_normal(d.params(), 0.3, seed);  // nonzero output layer
  const MatrixXd clean = uniform_matrix(4, 25, rng, 0.0, 1.0);
  const MatrixXd noise = normal_matrix(4, 25, rng);
  VectorXd sigmas(4);
  std::uniform_real_distribution<double> log_sigma(std::log(0.01), std::log(2.0));
  for (auto& s : sigmas) s = std::exp(log_sigma(rng));

  auto value = [&] {
    ad::Tape tape;
    return denoiser_loss(d, ad::bind(tape, d.params(), false), clean, noise, sigmas).scalar();
  };
  ad::Tape tape;
  const auto binding = ad::bind(tape, d.params());
  tape.backward(denoiser_loss(d, binding, clean, noise, sigmas));
  return fd_relative_error(value, d.params().tensors(), binding.grads());
}

double zero_shot_instance(unsigned seed) {
  std::mt19937_64 rng(seed);
  constexpr int k = 5;
  const DeformConfig deform_config{TemplateKind::kIcosphere, 1, 4, 0.1, seed, 0.25, 10};
  const auto reference = make_template(TemplateKind::kIcosphere, 1);
  const ShapeContext s1 = prepare_shape(deform(reference, deform_config, derive_seed(seed, 1)), 10, 4, k);
  const ShapeContext s2 = prepare_shape(deform(reference, deform_config, derive_seed(seed, 2)), 10, 4, k);

  FeatureNetConfig features;
  features.hks_count = 4;
  features.widths = {16, 16};
  features.output_dim = 8;
  ad::MLPParams theta = make_feature_net(features);
  ad::init_fan_in(theta, 1.0, 1.0, seed);

  StepConstants constants;
  constants.proper_target = normal_matrix(k, k, rng);
  constants.sds_gradient = normal_matrix(k, k, rng);
  constants.sds_signed = seed % 2 == 1;
  constants.axiomatic_weight = seed % 3 == 0 ? 1e-2 : 0.0;

  auto value = [&] {
    ad::Tape tape;
    return step_objective(tape, theta, ad::bind(tape, theta, false), s1, s2, k, constants).scalar();
  };
  ad::Tape tape;
  const auto binding = ad::bind(tape, theta);
  tape.backward(step_objective(tape, theta, binding, s1, s2, k, constants));
  return fd_relative_error(value, theta.tensors(), binding.grads());
}

}  // namespace

Outcome gradient_fidelity(const Context&) {
  const Stopwatch clock;
  double worst_denoiser = 0.0, worst_match = 0.0;
  for (unsigned i = 0; i < 20; ++i) {
    worst_denoiser = std::max(worst_denoiser, denoiser_instance(100 + i));
    worst_match = std::max(worst_match, zero_shot_instance(200 + i));
  }
  const double t = clock.seconds();
  return {worst_denoiser <= 1e-4 && worst_match <= 1e-4 && t < 60.0,
          format("worst relative error: denoiser loss %.2e, zero-shot loss %.2e (limit 1e-4); %.1fs of 60s",
                 worst_denoiser, worst_match, t)};
}

Outcome gaussian_mask_oracle(const Context&) {
  const Stopwatch clock;
  std::mt19937_64 rng(7);
  constexpr int k = 8;
  constexpr double sigma = 1.0;
  const MatrixXd v = uniform_matrix(k, k, rng, 0.01, 1.0);
  const FunctionDenoiser oracle(k, [v](const MatrixXd& X, double s) {
    return MatrixXd(v.cwiseProduct(X).cwiseQuotient((v.array() + s * s).matrix()));
  });
  const MatrixXd C = uniform_matrix(k, k, rng, 0.0, 1.0);
  const Mask M = distill_mask(oracle, C, sigma, 10'000, 11);
  const MatrixXd expected = (2.0 * (v.array() + sigma * sigma)).inverse().matrix();
  const double worst = ((M.cwiseAbs2() - expected).cwiseQuotient(expected)).cwiseAbs().maxCoeff();
  const double t = clock.seconds();
  return {worst <= 0.05 && t < 10.0, format("worst relative error of M^2 %.2e (limit 5%%); %.1fs of 10s", worst, t)};
}

Outcome score_oracle(const Context&) {
  const Stopwatch clock;
  constexpr double s = 0.5;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> data(0.0, s);
  std::vector<MatrixXd> samples(8192, MatrixXd(1, 1));
  for (auto& x : samples) x(0, 0) = data(rng);

  DenoiserConfig config;
  config.order = 1;
  config.widths = {64, 64};
  config.embedding_dim = 16;
  config.sigma_data = s;
  TrainOptions options;
  options.epochs = 60;
  options.batch_size = 128;
  options.learning_rate = 3e-3;
  options.seed = 5;
  const TrainResult trained = train_denoiser(samples, config, NoiseSchedule{}, options);

  // Errors relative to the largest magnitude of each oracle over the range.
  double mean_err = 0.0, score_err = 0.0;
  for (double sigma : {0.5 * s, s, 2.0 * s}) {
    double mean_gap = 0.0, score_gap = 0.0;
    for (int i = 0; i <= 40; ++i) {
      const double x = -2.0 * s + 4.0 * s * i / 40.0;
      const MatrixXd X = MatrixXd::Constant(1, 1, x);
      const double posterior = s * s * x / (s * s + sigma * sigma);
      mean_gap = std::max(mean_gap, std::abs(trained.denoiser.denoise(X, sigma)(0, 0) - posterior));
      score_gap = std::max(score_gap, std::abs(score(trained.denoiser, X, sigma)(0, 0) + x / (s * s + sigma * sigma)));
    }
    mean_err = std::max(mean_err, mean_gap / (s * s * 2.0 * s / (s * s + sigma * sigma)));
    score_err = std::max(score_err, score_gap / (2.0 * s / (s * s + sigma * sigma)));
  }
  const double t = clock.seconds();
  return {mean_err <= 0.05 && score_err <= 0.07 && t < 120.0,
          format("posterior mean error %.2f%% (limit 5%%), score error %.2f%% (limit 7%%) at sigma in {s/2, s, 2s}; "
                 "%.1fs of 120s",
                 100.0 * mean_err, 100.0 * score_err, t)};
}

Outcome spectral_correctness(const Context&) {
  const Stopwatch clock;
  const auto sphere = make_template(TemplateKind::kIcosphere, 3);
  const SparseSymMatrix W = cotan_stiffness(sphere);
  const MassDiagonal S = vertex_areas(sphere);
  const SpectralBasis basis = eigenbasis(W, S, 16);
  // l(l+1) with multiplicity 2l+1 for l = 1, 2, 3.
  double worst = 0.0;
  int index = 1;
  for (int l = 1; l <= 3; ++l)
    for (int m = 0; m < 2 * l + 1; ++m, ++index)
      worst = std::max(worst, std::abs(basis.lambda[index] / (l * (l + 1.0)) - 1.0));
  const double ortho = (basis.phi.transpose() * S.asDiagonal() * basis.phi - MatrixXd::Identity(16, 16))
                           .cwiseAbs()
                           .maxCoeff();
  const double t = clock.seconds();
  return {worst <= 0.03 && ortho <= 1e-8 && std::abs(basis.lambda[0]) < 1e-8 && t < 30.0,
          format("n = %d; worst eigenvalue deviation %.2f%% (limit 3%%), |Phi^T S Phi - I| %.1e (limit 1e-8); "
                 "%.1fs of 30s",
                 sphere.num_vertices(), 100.0 * worst, ortho, t)};
}

Outcome fmreg_solve(const Context&) {
  const Stopwatch clock;
  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> order(2, 9);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const int k1 = order(rng), k2 = order(rng);
    const int d = k1 + std::uniform_int_distribution<int>(0, 6)(rng);
    const MatrixXd A1 = normal_matrix(k1, d, rng), A2 = normal_matrix(k2, d, rng);
    const MatrixXd M = uniform_matrix(k2, k1, rng, 0.0, 2.0);
    const double alpha = trial % 5 == 0 ? 0.0 : std::uniform_real_distribution<double>(0.01, 3.0)(rng);
    const MatrixXd C = solve_fmap(A1, A2, alpha, M);

    // Normal equations of |C A1 - A2|^2 + alpha |M o C|^2 over all k2 k1
    // unknowns, row-major vec(C).
    const int n = k1 * k2;
    MatrixXd H = MatrixXd::Zero(n, n);
    VectorXd b(n);
    const MatrixXd G = A1 * A1.transpose(), R = A2 * A1.transpose();
    for (int i = 0; i < k2; ++i) {
      H.block(i * k1, i * k1, k1, k1) = G;
      for (int j = 0; j < k1; ++j) {
        H(i * k1 + j, i * k1 + j) += alpha * M(i, j) * M(i, j);
        b(i * k1 + j) = R(i, j);
      }
    }
    const VectorXd x = H.fullPivLu().solve(b);
    const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> brute(x.data(), k2,
                                                                                                      k1);
    worst = std::max(worst, (C - MatrixXd(brute)).cwiseAbs().maxCoeff() / std::max(1.0, brute.cwiseAbs().maxCoeff()));
  }
  const double t = clock.seconds();
  return {worst <= 1e-8 && t < 10.0, format("worst deviation from dense solve %.1e (limit 1e-8); %.2fs of 10s", worst, t)};
}

Outcome lambda_scaling(const Context&) {
  const Stopwatch clock;
  DeformConfig config;
  config.kind = TemplateKind::kCapsuleBiped;
  config.epsilon = 0.02;
  config.seed = 1234;
  const Deformer deformer(make_template(config.kind, config.level), config);
  constexpr int k = 30, target = 60;
  double worst = 1.0;
  for (std::size_t pair = 0; pair < 10; ++pair) {
    const TriangleMesh m1 = deformer.sample(sample_seed(config, 2 * pair));
    const TriangleMesh m2 = deformer.sample(sample_seed(config, 2 * pair + 1));
    const SpectralBasis b1 = eigenbasis(m1, target), b2 = eigenbasis(m2, target);
    const MassDiagonal S2 = vertex_areas(m2);
    const FunctionalMap C = fmap_from_p2p(identity_map(m1.num_vertices()), b1, b2, S2, k);
    const PointMap reference = p2p_from_fmap(zoomout(C, b1, b2, S2, target), b1, b2);
    for (double lambda : {0.5, 0.8}) {
      const PointMap scaled = p2p_from_fmap(zoomout(lambda * C, b1, b2, S2, target), b1, b2);
      std::size_t same = 0;
      for (std::size_t v = 0; v < scaled.size(); ++v) same += scaled[v] == reference[v];
      worst = std::min(worst, static_cast<double>(same) / static_cast<double>(scaled.size()));
    }
  }
  const double t = clock.seconds();
  return {worst >= 0.95 && t < 120.0,
          format("lowest vertex agreement %.1f%% over 10 pairs x lambda {0.5, 0.8} (limit 95%%); %.1fs of 120s",
                 100.0 * worst, t)};
}

}  // namespace fmprior::acceptance

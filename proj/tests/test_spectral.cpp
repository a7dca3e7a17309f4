#include <cmath>
#include <numbers>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "fmprior/spectral.hpp"
#include "fmprior/synth.hpp"
#include "support.hpp"

namespace fmprior {
namespace {

using testing::error_code_of;
using testing::grid_mesh;
using testing::TempDir;

double orthonormality(const SpectralBasis& b, const MassDiagonal& S) {
  const Eigen::MatrixXd G = b.phi.transpose() * S.asDiagonal() * b.phi;
  return (G - Eigen::MatrixXd::Identity(b.order(), b.order())).cwiseAbs().maxCoeff();
}

TEST(Eigenbasis, RectangleMatchesNeumannSpectrum) {
  // Free-boundary eigenvalues of [0, 3] x [0, 2]: pi^2 (m^2 / 9 + n^2 / 4).
  const auto mesh = grid_mesh(36, 24, 3.0, 2.0);
  const SpectralBasis b = eigenbasis(mesh, 6);
  std::vector<double> expected;
  for (int m = 0; m < 4; ++m)
    for (int n = 0; n < 3; ++n) expected.push_back(std::numbers::pi * std::numbers::pi * (m * m / 9.0 + n * n / 4.0));
  std::sort(expected.begin(), expected.end());
  EXPECT_NEAR(b.lambda[0], 0.0, 1e-9);
  for (int i = 1; i < 6; ++i) EXPECT_LT(testing::rel_err(b.lambda[i], expected[static_cast<std::size_t>(i)]), 0.02) << i;
  const Eigen::VectorXd c = b.phi.col(0);
  EXPECT_LT((c.array() - c.mean()).abs().maxCoeff(), 1e-8);
}

TEST(Eigenbasis, DenseAndSubspaceSolversAgree) {
  const auto mesh = make_template(TemplateKind::kIcosphere, 3);
  ASSERT_GT(mesh.num_vertices(), kDenseLimit);
  const MassDiagonal S = vertex_areas(mesh);
  const SpectralBasis dense = eigenbasis(mesh, 16, EigenSolverKind::kDense);
  const SpectralBasis sub = eigenbasis(mesh, 16, EigenSolverKind::kSubspace);
  for (int i = 1; i < 16; ++i) EXPECT_LT(testing::rel_err(sub.lambda[i], dense.lambda[i]), 1e-8) << i;
  EXPECT_LT(orthonormality(dense, S), 1e-8);
  EXPECT_LT(orthonormality(sub, S), 1e-8);
  // 16 = 1 + 3 + 5 + 7 closes a cluster, so the spans coincide.
  const Eigen::MatrixXd overlap = dense.phi.transpose() * S.asDiagonal() * sub.phi;
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(overlap);
  EXPECT_GT(svd.singularValues().minCoeff(), 1.0 - 1e-7);
  const EigenQuality q = eigen_quality(cotan_stiffness(mesh), S, sub);
  EXPECT_LT(q.max_residual, 1e-6);
}

TEST(Eigenbasis, SignConventionAndErrors) {
  const auto mesh = grid_mesh(6, 5);
  const SpectralBasis b = eigenbasis(mesh, 8);
  for (int j = 0; j < b.order(); ++j) {
    Eigen::Index arg = 0;
    const double top = b.phi.col(j).cwiseAbs().maxCoeff(&arg);
    // first entry of largest magnitude
    for (Eigen::Index i = 0; i < arg; ++i) EXPECT_LT(std::abs(b.phi(i, j)), top);
    EXPECT_GT(b.phi(arg, j), 0.0);
  }
  EXPECT_EQ(error_code_of([&] { eigenbasis(mesh, mesh.num_vertices()); }), ErrorCode::kKTooLarge);
  EXPECT_EQ(error_code_of([&] { b.truncated(9); }), ErrorCode::kKTooLarge);
  EXPECT_EQ(b.truncated(3).phi, b.phi.leftCols(3));
}

TEST(Eigenbasis, ProjectReconstructRoundTrip) {
  const auto mesh = grid_mesh(8, 8);
  const MassDiagonal S = vertex_areas(mesh);
  const SpectralBasis b = eigenbasis(mesh, 10);
  const Eigen::MatrixXd coeffs = Eigen::MatrixXd::Random(10, 3);
  EXPECT_LT((project(b, S, reconstruct(b, coeffs)) - coeffs).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(HeatKernel, TimesAndSignatureMatchClosedForm) {
  const auto mesh = make_template(TemplateKind::kIcosphere, 2);
  const MassDiagonal S = vertex_areas(mesh);
  const SpectralBasis b = eigenbasis(mesh, 20);
  const auto times = hks_times(b, 5);
  ASSERT_EQ(times.size(), 5u);
  EXPECT_NEAR(times.front(), 4.0 * std::log(10.0) / b.lambda[19], 1e-12);
  EXPECT_NEAR(times.back(), 4.0 * std::log(10.0) / b.lambda[1], 1e-9);
  EXPECT_NEAR(times[2], std::sqrt(times.front() * times.back()), 1e-9);

  const Eigen::MatrixXd hks = heat_kernel_signature(b, S, times);
  for (std::size_t j = 0; j < times.size(); ++j) {
    Eigen::VectorXd direct = Eigen::VectorXd::Zero(mesh.num_vertices());
    for (int i = 0; i < 20; ++i) direct += std::exp(-b.lambda[i] * times[j]) * b.phi.col(i).cwiseAbs2();
    direct /= std::sqrt(direct.dot(S.asDiagonal() * direct));
    EXPECT_LT((hks.col(static_cast<Eigen::Index>(j)) - direct).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(SpecFile, RoundTripAndLayout) {
  TempDir dir;
  const SpectralBasis b = eigenbasis(grid_mesh(4, 3), 5);
  save_spectral_basis(b, dir / "b.spec");
  const SpectralBasis back = load_spectral_basis(dir / "b.spec");
  EXPECT_EQ(back.phi, b.phi);
  EXPECT_EQ(back.lambda, b.lambda);
  const std::string bytes = encode_spectral_basis(b);
  EXPECT_EQ(bytes.substr(0, 4), "SPEC");
  EXPECT_EQ(bytes.size(), 4u + 8u + 8u * (20u * 5u + 5u));
  EXPECT_EQ(error_code_of([&] { decode_spectral_basis(bytes.substr(0, 30)); }), ErrorCode::kFormatError);
}

}  // namespace
}  // namespace fmprior

#include "fmprior/spectral.hpp"

#include <cmath>
#include <random>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SparseCholesky>

#include "fmprior/error.hpp"
#include "fmprior/io.hpp"

namespace fmprior {
namespace {

void fix_signs(Eigen::MatrixXd& phi) {
  for (Eigen::Index c = 0; c < phi.cols(); ++c) {
    Eigen::Index best = 0;
    double best_abs = -1.0;
    for (Eigen::Index r = 0; r < phi.rows(); ++r) {
      const double a = std::abs(phi(r, c));
      if (a > best_abs) {
        best_abs = a;
        best = r;
      }
    }
    if (phi(best, c) < 0.0) phi.col(c) = -phi.col(c);
  }
}

SpectralBasis solve_dense(const SparseSymMatrix& W, const MassDiagonal& S, int k) {
  const Eigen::VectorXd inv_sqrt = S.cwiseSqrt().cwiseInverse();
  Eigen::MatrixXd A = Eigen::MatrixXd(W);
  A = inv_sqrt.asDiagonal() * A * inv_sqrt.asDiagonal();
  A = 0.5 * (A + A.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
  if (es.info() != Eigen::Success) fail(ErrorCode::kConvergenceFailure, "dense eigensolver failed");
  SpectralBasis basis;
  basis.lambda = es.eigenvalues().head(k);
  basis.phi = inv_sqrt.asDiagonal() * es.eigenvectors().leftCols(k);
  return basis;
}

// Returns Y L^-T where Y^T S Y = L L^T; two passes restore orthogonality
// lost to round-off when Y is ill-conditioned.
bool s_orthonormalize(Eigen::MatrixXd& Y, const MassDiagonal& S) {
  for (int pass = 0; pass < 2; ++pass) {
    Eigen::MatrixXd gram = Y.transpose() * S.asDiagonal() * Y;
    gram = 0.5 * (gram + gram.transpose()).eval();
    Eigen::LLT<Eigen::MatrixXd> llt(gram);
    if (llt.info() != Eigen::Success) return false;
    Y = llt.matrixL().solve(Y.transpose()).transpose();
  }
  return true;
}

SpectralBasis solve_subspace(const SparseSymMatrix& W, const MassDiagonal& S, int k) {
  const int n = static_cast<int>(S.size());
  const int block = std::min(n, k + std::max(8, k / 2));
  const double mean_lambda = W.diagonal().cwiseQuotient(S).sum() / n;
  const double shift = 1e-4 * mean_lambda;

  SparseSymMatrix shifted = W;
  for (int i = 0; i < n; ++i) shifted.coeffRef(i, i) += shift * S[i];
  Eigen::SimplicialLDLT<SparseSymMatrix> solver(shifted);
  if (solver.info() != Eigen::Success)
    fail(ErrorCode::kConvergenceFailure, "factorization of shifted stiffness failed");

  std::mt19937_64 rng(0x5eedULL);
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd X(n, block);
  for (Eigen::Index c = 0; c < X.cols(); ++c)
    for (Eigen::Index r = 0; r < X.rows(); ++r) X(r, c) = normal(rng);
  if (!s_orthonormalize(X, S)) fail(ErrorCode::kConvergenceFailure, "degenerate start block");

  Eigen::VectorXd theta;
  constexpr int kMaxIterations = 1000;
  constexpr double kTolerance = 1e-10;
  for (int it = 0; it < kMaxIterations; ++it) {
    Eigen::MatrixXd Y = solver.solve(S.asDiagonal() * X);
    if (!s_orthonormalize(Y, S)) fail(ErrorCode::kConvergenceFailure, "subspace collapsed");
    const Eigen::MatrixXd WY = W * Y;
    Eigen::MatrixXd reduced = Y.transpose() * WY;
    reduced = 0.5 * (reduced + reduced.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(reduced);
    theta = es.eigenvalues();
    X = Y * es.eigenvectors();

    const Eigen::MatrixXd R = WY * es.eigenvectors().leftCols(k) -
                              S.asDiagonal() * X.leftCols(k) * theta.head(k).asDiagonal();
    const Eigen::MatrixXd SX = S.asDiagonal() * X.leftCols(k);
    double worst = 0.0;
    for (int i = 0; i < k; ++i)
      worst = std::max(worst, R.col(i).norm() / (theta[k - 1] * SX.col(i).norm()));
    if (worst < kTolerance) {
      SpectralBasis basis;
      basis.lambda = theta.head(k);
      basis.phi = X.leftCols(k);
      return basis;
    }
  }
  fail(ErrorCode::kConvergenceFailure, "subspace iteration did not converge");
}

}  // namespace

SpectralBasis SpectralBasis::truncated(int k) const {
  if (k < 1 || k > order())
    fail(ErrorCode::kKTooLarge, "requested order " + std::to_string(k) + " of basis with " +
                                    std::to_string(order()) + " columns");
  return SpectralBasis{phi.leftCols(k), lambda.head(k)};
}

EigenQuality eigen_quality(const SparseSymMatrix& W, const MassDiagonal& S, const SpectralBasis& basis) {
  EigenQuality q;
  const int k = basis.order();
  const Eigen::MatrixXd gram = basis.phi.transpose() * S.asDiagonal() * basis.phi;
  q.orthonormality_error = (gram - Eigen::MatrixXd::Identity(k, k)).cwiseAbs().maxCoeff();
  const Eigen::MatrixXd SPhi = S.asDiagonal() * basis.phi;
  const Eigen::MatrixXd R = W * basis.phi - SPhi * basis.lambda.asDiagonal();
  const double scale = std::max(basis.lambda[k - 1], std::numeric_limits<double>::min());
  for (int i = 0; i < k; ++i)
    q.max_residual = std::max(q.max_residual, R.col(i).norm() / (scale * SPhi.col(i).norm()));
  return q;
}

SpectralBasis eigenbasis(const SparseSymMatrix& W, const MassDiagonal& S, int k, EigenSolverKind solver) {
  const int n = static_cast<int>(S.size());
  require(W.rows() == n && W.cols() == n, ErrorCode::kShapeMismatch, "stiffness and mass sizes differ");
  if (k < 1 || k >= n)
    fail(ErrorCode::kKTooLarge, "order " + std::to_string(k) + " needs k < n = " + std::to_string(n));
  require((S.array() > 0.0).all(), ErrorCode::kDegenerateMesh, "mass matrix must be positive");

  if (solver == EigenSolverKind::kAuto)
    solver = n <= kDenseLimit ? EigenSolverKind::kDense : EigenSolverKind::kSubspace;
  SpectralBasis basis = solver == EigenSolverKind::kDense ? solve_dense(W, S, k) : solve_subspace(W, S, k);
  fix_signs(basis.phi);

  const EigenQuality q = eigen_quality(W, S, basis);
  if (!(q.orthonormality_error <= 1e-8) || !(q.max_residual <= 1e-6))
    fail(ErrorCode::kConvergenceFailure,
         "eigenbasis check failed (orthonormality " + std::to_string(q.orthonormality_error) +
             ", residual " + std::to_string(q.max_residual) + ")");
  return basis;
}

SpectralBasis eigenbasis(const TriangleMesh& mesh, int k, EigenSolverKind solver) {
  return eigenbasis(cotan_stiffness(mesh), vertex_areas(mesh), k, solver);
}

CoeffMatrix project(const SpectralBasis& basis, const MassDiagonal& S, const Eigen::MatrixXd& F) {
  require(F.rows() == basis.num_vertices() && S.size() == basis.num_vertices(), ErrorCode::kShapeMismatch,
          "project: function has " + std::to_string(F.rows()) + " rows, basis has " +
              std::to_string(basis.num_vertices()));
  return basis.phi.transpose() * (S.asDiagonal() * F);
}

Eigen::MatrixXd reconstruct(const SpectralBasis& basis, const CoeffMatrix& A) {
  require(A.rows() == basis.order(), ErrorCode::kShapeMismatch,
          "reconstruct: coefficients have " + std::to_string(A.rows()) + " rows, basis order is " +
              std::to_string(basis.order()));
  return basis.phi * A;
}

std::vector<double> hks_times(const SpectralBasis& basis, int count) {
  require(basis.order() >= 2, ErrorCode::kKTooLarge, "HKS times need at least two eigenvalues");
  require(count >= 1, ErrorCode::kInvalidArgument, "HKS needs at least one time");
  const double t_min = 4.0 * std::log(10.0) / basis.lambda[basis.order() - 1];
  const double t_max = 4.0 * std::log(10.0) / basis.lambda[1];
  std::vector<double> times(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const double u = count == 1 ? 0.0 : static_cast<double>(i) / (count - 1);
    times[static_cast<std::size_t>(i)] = std::exp(std::log(t_min) + u * (std::log(t_max) - std::log(t_min)));
  }
  return times;
}

Eigen::MatrixXd heat_kernel_signature(const SpectralBasis& basis, const MassDiagonal& S,
                                      std::span<const double> times) {
  require(S.size() == basis.num_vertices(), ErrorCode::kShapeMismatch, "HKS: mass size mismatch");
  const Eigen::MatrixXd phi_sq = basis.phi.cwiseAbs2();
  Eigen::MatrixXd hks(basis.num_vertices(), static_cast<Eigen::Index>(times.size()));
  for (std::size_t j = 0; j < times.size(); ++j) {
    require(times[j] > 0.0, ErrorCode::kInvalidArgument, "HKS times must be positive");
    // Shift by the smallest eigenvalue so large t does not underflow; the
    // column is renormalized afterwards, so the common factor cancels.
    const Eigen::VectorXd weights =
        (-(basis.lambda.array() - basis.lambda.minCoeff()) * times[j]).exp().matrix();
    Eigen::VectorXd col = phi_sq * weights;
    col /= std::sqrt(col.dot(S.asDiagonal() * col));
    hks.col(static_cast<Eigen::Index>(j)) = col;
  }
  return hks;
}

std::string encode_spectral_basis(const SpectralBasis& basis) {
  ByteWriter w;
  w.magic("SPEC");
  w.u32(static_cast<std::uint32_t>(basis.num_vertices()));
  w.u32(static_cast<std::uint32_t>(basis.order()));
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = basis.phi;
  w.f64s({rm.data(), static_cast<std::size_t>(rm.size())});
  w.f64s({basis.lambda.data(), static_cast<std::size_t>(basis.lambda.size())});
  return w.bytes();
}

SpectralBasis decode_spectral_basis(std::string_view bytes) {
  ByteReader r(bytes);
  r.expect_magic("SPEC");
  const auto n = r.u32();
  const auto k = r.u32();
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(n, k);
  r.f64s({rm.data(), static_cast<std::size_t>(rm.size())});
  SpectralBasis basis;
  basis.phi = rm;
  basis.lambda.resize(k);
  r.f64s({basis.lambda.data(), static_cast<std::size_t>(k)});
  if (!r.at_end()) fail(ErrorCode::kFormatError, "trailing bytes after SPEC payload");
  return basis;
}

void save_spectral_basis(const SpectralBasis& basis, const std::filesystem::path& path) {
  write_file_atomic(path, encode_spectral_basis(basis));
}

SpectralBasis load_spectral_basis(const std::filesystem::path& path) {
  return decode_spectral_basis(read_file(path));
}

}  // namespace fmprior

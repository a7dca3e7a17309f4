#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "fmprior/mesh.hpp"

namespace fmprior {

/// Truncated Laplace-Beltrami eigenbasis: `phi` is n x k with mass-orthonormal
/// columns, `lambda` holds the k eigenvalues in ascending order.
struct SpectralBasis {
  Eigen::MatrixXd phi;
  Eigen::VectorXd lambda;

  int num_vertices() const noexcept { return static_cast<int>(phi.rows()); }
  int order() const noexcept { return static_cast<int>(phi.cols()); }

  // First `k` eigenpairs; throws KTooLarge when k exceeds the stored order.
  SpectralBasis truncated(int k) const;
};

// k x d spectral coefficients of d functions.
using CoeffMatrix = Eigen::MatrixXd;

enum class EigenSolverKind {
  kAuto,      // dense up to kDenseLimit vertices, subspace iteration above
  kDense,     // full symmetric eigendecomposition of S^-1/2 W S^-1/2
  kSubspace,  // shift-invert block subspace iteration with Rayleigh-Ritz
};

inline constexpr int kDenseLimit = 400;

struct EigenQuality {
  double orthonormality_error = 0.0;  // max |Phi^T S Phi - I|
  double max_residual = 0.0;          // max_i |W phi_i - lambda_i S phi_i| / (lambda_k |S phi_i|)
};

EigenQuality eigen_quality(const SparseSymMatrix& W, const MassDiagonal& S, const SpectralBasis& basis);

/// Solves W phi = lambda S phi for the k smallest eigenpairs. Each column's
/// sign is fixed so that its first entry of largest magnitude is positive.
/// The result is checked against the orthonormality (1e-8) and residual (1e-6)
/// bounds; violations raise ConvergenceFailure.
SpectralBasis eigenbasis(const SparseSymMatrix& W, const MassDiagonal& S, int k,
                         EigenSolverKind solver = EigenSolverKind::kAuto);

// Convenience: assemble W and S from the mesh and solve.
SpectralBasis eigenbasis(const TriangleMesh& mesh, int k, EigenSolverKind solver = EigenSolverKind::kAuto);

// A = Phi^T S F.
CoeffMatrix project(const SpectralBasis& basis, const MassDiagonal& S, const Eigen::MatrixXd& F);

// Phi A.
Eigen::MatrixXd reconstruct(const SpectralBasis& basis, const CoeffMatrix& A);

// `count` log-spaced diffusion times over [4 ln10 / lambda_k, 4 ln10 / lambda_2].
std::vector<double> hks_times(const SpectralBasis& basis, int count = 16);

// n x T heat kernel signature, each column scaled to unit mass-weighted norm.
Eigen::MatrixXd heat_kernel_signature(const SpectralBasis& basis, const MassDiagonal& S,
                                      std::span<const double> times);

// "SPEC" block: u32 n, u32 k, f64 Phi row-major, f64 lambda.
std::string encode_spectral_basis(const SpectralBasis& basis);
SpectralBasis decode_spectral_basis(std::string_view bytes);
void save_spectral_basis(const SpectralBasis& basis, const std::filesystem::path& path);
SpectralBasis load_spectral_basis(const std::filesystem::path& path);

}  // namespace fmprior

#pragma once

#include <Eigen/Core>

#include "fmprior/io.hpp"
#include "fmprior/mesh.hpp"
#include "fmprior/spectral.hpp"

namespace fmprior {

// k2 x k1 matrix with C * A1 ~= A2.
using FunctionalMap = Eigen::MatrixXd;
// k2 x k1 nonnegative elementwise weights.
using Mask = Eigen::MatrixXd;

// C = Phi2^T S2 Pi Phi1 with Pi(corr[v], v) = 1 (corr maps shape-1 vertices
// into shape 2). Uses every column of both bases.
FunctionalMap fmap_from_p2p(const PointMap& corr, const SpectralBasis& basis1, const SpectralBasis& basis2,
                            const MassDiagonal& S2);
// Same at order k for both shapes.
FunctionalMap fmap_from_p2p(const PointMap& corr, const SpectralBasis& basis1, const SpectralBasis& basis2,
                            const MassDiagonal& S2, int k);

// Ground-truth map of a known correspondence; identical to fmap_from_p2p.
inline FunctionalMap gt_fmap(const SpectralBasis& basis1, const SpectralBasis& basis2, const PointMap& corr,
                             const MassDiagonal& S2) {
  return fmap_from_p2p(corr, basis1, basis2, S2);
}

PointMap identity_map(int n);

// Spectra are divided by their largest eigenvalue before the formulas apply.
Mask laplacian_mask(const Eigen::VectorXd& lambda1, const Eigen::VectorXd& lambda2);
Mask resolvent_mask(const Eigen::VectorXd& lambda1, const Eigen::VectorXd& lambda2);
// 1 - exp(-dist((i, j), {j = slope * i})^2), 1-based indices.
Mask slanted_mask(const Eigen::VectorXd& lambda1, const Eigen::VectorXd& lambda2, double slope = 1.0);

// Ridge added to a descriptor Gram matrix before solving: zero when the
// Cholesky factorization succeeds with reciprocal condition >= 1e-12,
// otherwise 1e-9 * trace.
double fmreg_ridge(const Eigen::MatrixXd& gram);

struct SolveOptions {
  bool allow_ridge = true;
};

/// Minimizes |C A1 - A2|_F^2 + alpha |M o C|_F^2 one row at a time:
/// (A1 A1^T + alpha diag(M_i o M_i)) c_i = A1 (A2)_i^T.
FunctionalMap solve_fmap(const CoeffMatrix& A1, const CoeffMatrix& A2, double alpha, const Mask& M,
                         SolveOptions options = {});
inline FunctionalMap solve_fmap(const CoeffMatrix& A1, const CoeffMatrix& A2) {
  return solve_fmap(A1, A2, 0.0, Mask());
}

/// For every vertex v of shape 1, the row of Phi2 nearest to row v of
/// Phi1 C^T (lowest index wins ties). Uses the leading columns of each basis
/// matching C's shape.
PointMap p2p_from_fmap(const FunctionalMap& C, const SpectralBasis& basis1, const SpectralBasis& basis2);

/// Alternates point-map extraction and re-encoding while growing the order by
/// `step` until `k_target`. The result is the image of a point map.
FunctionalMap zoomout(const FunctionalMap& C, const SpectralBasis& basis1, const SpectralBasis& basis2,
                      const MassDiagonal& S2, int k_target, int step = 1);

double ortho_penalty(const FunctionalMap& C);
double bij_penalty(const FunctionalMap& C12, const FunctionalMap& C21);
double lap_commute_penalty(const FunctionalMap& C, const Eigen::VectorXd& lambda1, const Eigen::VectorXd& lambda2);

struct GeodesicError {
  Eigen::VectorXd per_vertex;  // d(pred(v), gt(v)) / sqrt(area2)
  double mean = 0.0;
  double mean_x100() const { return 100.0 * mean; }
};

GeodesicError geodesic_error(const PointMap& pred, const PointMap& gt, const TriangleMesh& mesh2);
// With precomputed all-pairs distances of mesh2 (see geodesic_distance_matrix).
GeodesicError geodesic_error(const PointMap& pred, const PointMap& gt, const Eigen::MatrixXd& distances2,
                             double area2);

// Fraction of vertices with error <= each threshold.
Eigen::VectorXd cumulative_error_curve(const GeodesicError& err, const Eigen::VectorXd& thresholds);

}  // namespace fmprior

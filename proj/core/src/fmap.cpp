#include "fmprior/fmap.hpp"

#include <cmath>
#include <limits>
#include <map>

#include <Eigen/Cholesky>

#include "fmprior/error.hpp"

namespace fmprior {
namespace {

void check_map(const PointMap& corr, int n1, int n2) {
  require(static_cast<int>(corr.size()) == n1, ErrorCode::kShapeMismatch,
          "point map has " + std::to_string(corr.size()) + " entries, shape 1 has " + std::to_string(n1));
  for (auto idx : corr)
    if (idx >= static_cast<std::uint32_t>(n2))
      fail(ErrorCode::kIndexOutOfRange, "point map target " + std::to_string(idx) + " >= " + std::to_string(n2));
}

Eigen::ArrayXd normalized(const Eigen::VectorXd& lambda) {
  const double top = lambda.size() ? lambda.maxCoeff() : 0.0;
  return top > 0.0 ? (lambda.array() / top).eval() : lambda.array().eval();
}

Eigen::VectorXd solve_spd(const Eigen::MatrixXd& G, const Eigen::VectorXd& rhs, bool allow_ridge) {
  const double ridge = fmreg_ridge(G);
  if (ridge > 0.0 && !allow_ridge) fail(ErrorCode::kSingularSystem, "descriptor system is rank deficient");
  Eigen::LLT<Eigen::MatrixXd> llt(G + ridge * Eigen::MatrixXd::Identity(G.rows(), G.cols()));
  if (llt.info() != Eigen::Success) fail(ErrorCode::kSingularSystem, "descriptor system is not positive definite");
  return llt.solve(rhs);
}

}  // namespace

PointMap identity_map(int n) {
  PointMap map(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) map[static_cast<std::size_t>(i)] = static_cast<std::uint32_t>(i);
  return map;
}

FunctionalMap fmap_from_p2p(const PointMap& corr, const SpectralBasis& basis1, const SpectralBasis& basis2,
                            const MassDiagonal& S2) {
  check_map(corr, basis1.num_vertices(), basis2.num_vertices());
  require(S2.size() == basis2.num_vertices(), ErrorCode::kShapeMismatch, "mass size differs from basis 2");
  // Row v of the gathered matrix is S2(corr[v]) * Phi2(corr[v], :).
  Eigen::MatrixXd gathered(basis1.num_vertices(), basis2.order());
  for (std::size_t v = 0; v < corr.size(); ++v) {
    const auto w = static_cast<Eigen::Index>(corr[v]);
    gathered.row(static_cast<Eigen::Index>(v)) = S2[w] * basis2.phi.row(w);
  }
  return gathered.transpose() * basis1.phi;
}

FunctionalMap fmap_from_p2p(const PointMap& corr, const SpectralBasis& basis1, const SpectralBasis& basis2,
                            const MassDiagonal& S2, int k) {
  return fmap_from_p2p(corr, basis1.truncated(k), basis2.truncated(k), S2);
}

Mask laplacian_mask(const Eigen::VectorXd& lambda1, const Eigen::VectorXd& lambda2) {
  const Eigen::ArrayXd l1 = normalized(lambda1), l2 = normalized(lambda2);
  Mask M(l2.size(), l1.size());
  for (Eigen::Index i = 0; i < M.rows(); ++i)
    for (Eigen::Index j = 0; j < M.cols(); ++j) M(i, j) = std::pow(l2[i] - l1[j], 2);
  return M;
}

Mask resolvent_mask(const Eigen::VectorXd& lambda1, const Eigen::VectorXd& lambda2) {
  const Eigen::ArrayXd l1 = normalized(lambda1), l2 = normalized(lambda2);
  const Eigen::ArrayXd re1 = l1 / (l1.square() + 1.0), im1 = 1.0 / (l1.square() + 1.0);
  const Eigen::ArrayXd re2 = l2 / (l2.square() + 1.0), im2 = 1.0 / (l2.square() + 1.0);
  Mask M(l2.size(), l1.size());
  for (Eigen::Index i = 0; i < M.rows(); ++i)
    for (Eigen::Index j = 0; j < M.cols(); ++j)
      M(i, j) = std::pow(re2[i] - re1[j], 2) + std::pow(im2[i] - im1[j], 2);
  return M;
}

Mask slanted_mask(const Eigen::VectorXd& lambda1, const Eigen::VectorXd& lambda2, double slope) {
  constexpr double kBeta = 1.0;
  Mask M(lambda2.size(), lambda1.size());
  const double norm = std::sqrt(1.0 + slope * slope);
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    for (Eigen::Index j = 0; j < M.cols(); ++j) {
      const double dist = std::abs(static_cast<double>(j + 1) - slope * static_cast<double>(i + 1)) / norm;
      M(i, j) = 1.0 - std::exp(-kBeta * dist * dist);
    }
  }
  return M;
}

double fmreg_ridge(const Eigen::MatrixXd& gram) {
  Eigen::LLT<Eigen::MatrixXd> llt(gram);
  if (llt.info() == Eigen::Success && llt.rcond() >= 1e-12) return 0.0;
  const double trace = gram.trace();
  return trace > 0.0 ? 1e-9 * trace : 1e-12;
}

FunctionalMap solve_fmap(const CoeffMatrix& A1, const CoeffMatrix& A2, double alpha, const Mask& M,
                         SolveOptions options) {
  require(A1.cols() == A2.cols(), ErrorCode::kShapeMismatch,
          "descriptor counts differ: " + std::to_string(A1.cols()) + " vs " + std::to_string(A2.cols()));
  require(alpha >= 0.0, ErrorCode::kInvalidArgument, "alpha must be nonnegative");
  const Eigen::Index k1 = A1.rows(), k2 = A2.rows();
  const Eigen::MatrixXd G = A1 * A1.transpose();
  const Eigen::MatrixXd rhs = A1 * A2.transpose();  // column i belongs to row i of C
  FunctionalMap C(k2, k1);

  if (alpha == 0.0) {
    const double ridge = fmreg_ridge(G);
    if (ridge > 0.0 && !options.allow_ridge) fail(ErrorCode::kSingularSystem, "descriptor system is rank deficient");
    Eigen::LLT<Eigen::MatrixXd> llt(G + ridge * Eigen::MatrixXd::Identity(k1, k1));
    if (llt.info() != Eigen::Success) fail(ErrorCode::kSingularSystem, "descriptor system is not positive definite");
    C = llt.solve(rhs).transpose();
    return C;
  }

  require(M.rows() == k2 && M.cols() == k1, ErrorCode::kShapeMismatch,
          "mask is " + std::to_string(M.rows()) + "x" + std::to_string(M.cols()) + ", map is " +
              std::to_string(k2) + "x" + std::to_string(k1));
  for (Eigen::Index i = 0; i < k2; ++i) {
    Eigen::MatrixXd system = G;
    system.diagonal() += alpha * M.row(i).transpose().cwiseAbs2();
    C.row(i) = solve_spd(system, rhs.col(i), options.allow_ridge).transpose();
  }
  return C;
}

PointMap p2p_from_fmap(const FunctionalMap& C, const SpectralBasis& basis1, const SpectralBasis& basis2) {
  const int k2 = static_cast<int>(C.rows()), k1 = static_cast<int>(C.cols());
  if (k1 > basis1.order() || k2 > basis2.order())
    fail(ErrorCode::kKTooLarge, "map is larger than the available bases");
  const Eigen::MatrixXd query = basis1.phi.leftCols(k1) * C.transpose();  // n1 x k2
  const auto data = basis2.phi.leftCols(k2);                                // n2 x k2
  const Eigen::VectorXd data_sq = data.rowwise().squaredNorm();

  const Eigen::Index n1 = query.rows();
  PointMap map(static_cast<std::size_t>(n1));
  // Blocked over queries to bound the temporary distance matrix.
  constexpr Eigen::Index kBlock = 256;
  for (Eigen::Index start = 0; start < n1; start += kBlock) {
    const Eigen::Index rows = std::min(kBlock, n1 - start);
    // |d|^2 - 2 q.d; |q|^2 is constant per query and does not change the argmin.
    Eigen::MatrixXd score = data * query.middleRows(start, rows).transpose();  // n2 x rows
    score = (-2.0 * score).colwise() + data_sq;
    for (Eigen::Index q = 0; q < rows; ++q) {
      Eigen::Index best = 0;
      double best_val = std::numeric_limits<double>::infinity();
      for (Eigen::Index w = 0; w < score.rows(); ++w) {
        if (score(w, q) < best_val) {
          best_val = score(w, q);
          best = w;
        }
      }
      map[static_cast<std::size_t>(start + q)] = static_cast<std::uint32_t>(best);
    }
  }
  return map;
}

FunctionalMap zoomout(const FunctionalMap& C, const SpectralBasis& basis1, const SpectralBasis& basis2,
                      const MassDiagonal& S2, int k_target, int step) {
  require(step >= 1, ErrorCode::kInvalidArgument, "zoomout step must be >= 1");
  const int k = static_cast<int>(std::max(C.rows(), C.cols()));
  require(k <= k_target, ErrorCode::kInvalidArgument,
          "zoomout target " + std::to_string(k_target) + " below current order " + std::to_string(k));
  if (k_target > basis1.order() || k_target > basis2.order())
    fail(ErrorCode::kKTooLarge, "zoomout target " + std::to_string(k_target) + " exceeds basis order");

  FunctionalMap current = C;
  int order = k;
  do {
    const int next = std::min(order + step, k_target);
    const PointMap pm = p2p_from_fmap(current, basis1, basis2);
    current = fmap_from_p2p(pm, basis1, basis2, S2, next);
    order = next;
  } while (order < k_target);
  return current;
}

double ortho_penalty(const FunctionalMap& C) {
  return (C * C.transpose() - Eigen::MatrixXd::Identity(C.rows(), C.rows())).squaredNorm();
}

double bij_penalty(const FunctionalMap& C12, const FunctionalMap& C21) {
  require(C12.cols() == C21.rows(), ErrorCode::kShapeMismatch, "bijectivity: incompatible maps");
  return (C12 * C21 - Eigen::MatrixXd::Identity(C12.rows(), C21.cols())).squaredNorm();
}

double lap_commute_penalty(const FunctionalMap& C, const Eigen::VectorXd& lambda1, const Eigen::VectorXd& lambda2) {
  require(lambda1.size() == C.cols() && lambda2.size() == C.rows(), ErrorCode::kShapeMismatch,
          "commutativity: spectra do not match map");
  const Eigen::VectorXd l1 = normalized(lambda1).matrix(), l2 = normalized(lambda2).matrix();
  return (C * l1.asDiagonal() - l2.asDiagonal() * C).squaredNorm();
}

GeodesicError geodesic_error(const PointMap& pred, const PointMap& gt, const Eigen::MatrixXd& distances2,
                             double area2) {
  require(pred.size() == gt.size(), ErrorCode::kShapeMismatch, "prediction and ground truth differ in length");
  const auto n2 = static_cast<std::uint32_t>(distances2.rows());
  GeodesicError err;
  err.per_vertex.resize(static_cast<Eigen::Index>(pred.size()));
  const double scale = 1.0 / std::sqrt(area2);
  for (std::size_t v = 0; v < pred.size(); ++v) {
    if (pred[v] >= n2 || gt[v] >= n2) fail(ErrorCode::kIndexOutOfRange, "point map target out of range");
    err.per_vertex[static_cast<Eigen::Index>(v)] = distances2(gt[v], pred[v]) * scale;
  }
  err.mean = err.per_vertex.size() ? err.per_vertex.mean() : 0.0;
  return err;
}

GeodesicError geodesic_error(const PointMap& pred, const PointMap& gt, const TriangleMesh& mesh2) {
  require(pred.size() == gt.size(), ErrorCode::kShapeMismatch, "prediction and ground truth differ in length");
  const auto n2 = static_cast<std::uint32_t>(mesh2.num_vertices());
  // One Dijkstra per distinct ground-truth target.
  std::map<std::uint32_t, Eigen::VectorXd> rows;
  GeodesicError err;
  err.per_vertex.resize(static_cast<Eigen::Index>(pred.size()));
  const double scale = 1.0 / std::sqrt(mesh2.total_area());
  for (std::size_t v = 0; v < pred.size(); ++v) {
    if (pred[v] >= n2 || gt[v] >= n2) fail(ErrorCode::kIndexOutOfRange, "point map target out of range");
    auto it = rows.find(gt[v]);
    if (it == rows.end()) it = rows.emplace(gt[v], geodesic_distances(mesh2, static_cast<int>(gt[v]))).first;
    err.per_vertex[static_cast<Eigen::Index>(v)] = it->second[pred[v]] * scale;
  }
  err.mean = err.per_vertex.size() ? err.per_vertex.mean() : 0.0;
  return err;
}

Eigen::VectorXd cumulative_error_curve(const GeodesicError& err, const Eigen::VectorXd& thresholds) {
  Eigen::VectorXd curve(thresholds.size());
  const double n = static_cast<double>(err.per_vertex.size());
  for (Eigen::Index t = 0; t < thresholds.size(); ++t)
    curve[t] = n > 0 ? (err.per_vertex.array() <= thresholds[t]).count() / n : 0.0;
  return curve;
}

}  // namespace fmprior

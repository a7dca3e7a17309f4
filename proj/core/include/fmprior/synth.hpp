#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "fmprior/fmap.hpp"
#include "fmprior/mesh.hpp"
#include "fmprior/spectral.hpp"

namespace fmprior {

enum class TemplateKind {
  kIcosphere,     // unit sphere, 10 * 4^level + 2 vertices
  kCapsuleBiped,  // posed stick figure (no mirror symmetry): icosphere projected radially onto capsules
  kBumpyPlane,    // flattened closed slab with a bumpy top face
};

std::string_view to_string(TemplateKind kind);
TemplateKind parse_template_kind(std::string_view name);

TriangleMesh make_template(TemplateKind kind, int level);

struct DeformConfig {
  TemplateKind kind = TemplateKind::kCapsuleBiped;
  int level = 3;
  int modes = 8;          // B
  double epsilon = 0.15;  // bound on |displacement| as a fraction of the bbox diagonal
  std::uint64_t seed = 0;
  double max_distortion = 0.25;
  int max_retries = 10;
};

void validate(const DeformConfig& config);

// Largest |l' / l - 1| over edges.
double edge_distortion(const TriangleMesh& reference, const TriangleMesh& deformed);

/// Normal offsets modulated by randomly chosen low-frequency template
/// eigenfunctions (second through twelfth), each scaled to unit max-norm:
///   x'(v) = x(v) + diag / B * sum_b c_b psi_b(v) n(v),  c_b ~ U(-eps, eps).
/// Samples whose edge distortion exceeds the bound are redrawn.
class Deformer {
 public:
  Deformer(TriangleMesh reference, DeformConfig config);

  const TriangleMesh& reference() const noexcept { return reference_; }
  const DeformConfig& config() const noexcept { return config_; }

  TriangleMesh sample(std::uint64_t sample_seed) const;

 private:
  TriangleMesh reference_;
  DeformConfig config_;
  Eigen::MatrixXd modes_;  // n x 11 unit max-norm eigenfunctions
  Vertices normals_;
};

TriangleMesh deform(const TriangleMesh& reference, const DeformConfig& config, std::uint64_t sample_seed);

// Seed of the i-th shape of a family.
std::uint64_t sample_seed(const DeformConfig& config, std::size_t index);

struct MapDataset {
  int order = 0;
  bool is_signed = false;
  std::vector<Eigen::MatrixXd> maps;
  std::vector<std::uint64_t> seeds;
};

struct DatasetOptions {
  int k = 30;
  // Keep the sign of the maps and randomize eigenfunction signs on both
  // sides (D2 C D1, D diagonal +-1) so the signed distribution is symmetric.
  bool keep_sign = false;
  EigenSolverKind solver = EigenSolverKind::kAuto;
};

// Template-to-shape map of one registered shape (vertex i <-> vertex i) at
// order options.k; `shape_seed` drives the sign flips of signed datasets.
FunctionalMap template_fmap(const SpectralBasis& reference_basis, const TriangleMesh& shape,
                            const DatasetOptions& options, std::uint64_t shape_seed);

/// Template-to-shape ground-truth maps of `count` deformations at order k;
/// absolute values unless options.keep_sign.
MapDataset build_fmap_dataset(const DeformConfig& config, std::size_t count, const DatasetOptions& options);
// Same for explicitly given shape seeds.
MapDataset build_fmap_dataset(const DeformConfig& config, const std::vector<std::uint64_t>& seeds,
                              const DatasetOptions& options);

// Fraction of squared Frobenius mass on |i - j| <= band.
double band_mass(const Eigen::MatrixXd& C, int band);
// sum |diag| / sum |all|.
double diagonal_mass(const Eigen::MatrixXd& C);

}  // namespace fmprior

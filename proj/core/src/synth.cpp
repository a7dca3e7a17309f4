#include "fmprior/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include <Eigen/Geometry>

#include "fmprior/error.hpp"
#include "fmprior/random.hpp"

namespace fmprior {

using Eigen::MatrixXd;
using Eigen::RowVector3d;
using Eigen::VectorXd;

namespace {

constexpr int kModePool = 11;  // eigenfunctions 2..12

void icosahedron(std::vector<RowVector3d>& v, std::vector<std::array<int, 3>>& f) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  v = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
       {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (auto& p : v) p.normalize();
  f = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
       {11, 10, 2}, {10, 7, 6}, {7, 1, 8},   {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
       {3, 8, 9},  {4, 9, 5},  {2, 4, 11},  {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
}

void subdivide(std::vector<RowVector3d>& v, std::vector<std::array<int, 3>>& f) {
  std::map<std::pair<int, int>, int> midpoint;
  auto mid = [&](int a, int b) {
    const auto key = std::minmax(a, b);
    auto it = midpoint.find(key);
    if (it != midpoint.end()) return it->second;
    v.push_back((0.5 * (v[static_cast<std::size_t>(a)] + v[static_cast<std::size_t>(b)])).normalized());
    const int idx = static_cast<int>(v.size()) - 1;
    midpoint.emplace(key, idx);
    return idx;
  };
  std::vector<std::array<int, 3>> out;
  out.reserve(f.size() * 4);
  for (const auto& t : f) {
    const int ab = mid(t[0], t[1]), bc = mid(t[1], t[2]), ca = mid(t[2], t[0]);
    out.push_back({t[0], ab, ca});
    out.push_back({t[1], bc, ab});
    out.push_back({t[2], ca, bc});
    out.push_back({ab, bc, ca});
  }
  f = std::move(out);
}

// Unit-sphere vertices and faces.
std::pair<Vertices, Faces> icosphere(int level) {
  std::vector<RowVector3d> v;
  std::vector<std::array<int, 3>> f;
  icosahedron(v, f);
  for (int l = 0; l < level; ++l) subdivide(v, f);
  Vertices V(static_cast<Eigen::Index>(v.size()), 3);
  for (std::size_t i = 0; i < v.size(); ++i) V.row(static_cast<Eigen::Index>(i)) = v[i];
  Faces F(static_cast<Eigen::Index>(f.size()), 3);
  for (std::size_t i = 0; i < f.size(); ++i)
    for (int c = 0; c < 3; ++c) F(static_cast<Eigen::Index>(i), c) = f[i][static_cast<std::size_t>(c)];
  return {std::move(V), std::move(F)};
}

struct Capsule {
  RowVector3d a, b;
  double radius;
};

double capsule_sdf(const Capsule& c, const RowVector3d& p) {
  const RowVector3d ab = c.b - c.a;
  const double t = std::clamp((p - c.a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
  return (p - (c.a + t * ab)).norm() - c.radius;
}

// Polynomial smooth minimum of capsule distances.
double biped_sdf(const RowVector3d& p) {
  static const std::array<Capsule, 6> parts = {{
      {{0.0, -0.25, 0.0}, {0.0, 0.45, 0.0}, 0.24},    // torso
      {{0.0, 0.0, 0.0}, {0.0, 0.85, 0.12}, 0.17},     // neck and head, tilted forward
      {{0.0, 0.0, 0.0}, {0.75, 0.65, 0.2}, 0.12},     // raised arm
      {{0.0, 0.0, 0.0}, {-0.8, 0.15, 0.1}, 0.12},     // lowered arm
      {{0.0, 0.0, 0.0}, {0.3, -1.0, 0.2}, 0.14},      // stride: one leg forward
      {{0.0, 0.0, 0.0}, {-0.25, -1.0, -0.12}, 0.14},
  }};
  constexpr double k = 0.08;
  double d = capsule_sdf(parts[0], p);
  for (std::size_t i = 1; i < parts.size(); ++i) {
    const double e = capsule_sdf(parts[i], p);
    const double h = std::clamp(0.5 + 0.5 * (e - d) / k, 0.0, 1.0);
    d = e * (1.0 - h) + d * h - k * h * (1.0 - h);
  }
  return d;
}

// Every capsule contains a segment through the origin, so each ray from the
// origin leaves the body once; the outermost crossing is taken regardless.
double biped_radius(const RowVector3d& dir) {
  constexpr double r_max = 2.0, dr = 0.005;
  double outside = r_max;
  while (outside > dr && biped_sdf(outside * dir) > 0.0) outside -= dr;
  double lo = outside, hi = std::min(outside + dr, r_max);
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    (biped_sdf(mid * dir) > 0.0 ? hi : lo) = mid;
  }
  return 0.5 * (lo + hi);
}

RowVector3d biped_gradient(const RowVector3d& p) {
  constexpr double h = 1e-6;
  RowVector3d g;
  for (int a = 0; a < 3; ++a) {
    RowVector3d up = p, down = p;
    up[a] += h;
    down[a] -= h;
    g[a] = (biped_sdf(up) - biped_sdf(down)) / (2.0 * h);
  }
  return g;
}

RowVector3d project_to_biped(RowVector3d p) {
  for (int it = 0; it < 4; ++it) {
    const RowVector3d g = biped_gradient(p);
    p -= biped_sdf(p) * g / std::max(g.squaredNorm(), 1e-12);
  }
  return p;
}

// The radial projection crowds vertices on the torso and stretches them along
// the limbs. Tangential moves toward the area-weighted centroid of the vertex
// star, followed by reprojection onto the surface, even out the triangles.
void relax_on_biped(Vertices& V, const Faces& F, int iterations) {
  const Eigen::Index n = V.rows();
  for (int it = 0; it < iterations; ++it) {
    Vertices target = Vertices::Zero(n, 3), normal = Vertices::Zero(n, 3);
    Eigen::VectorXd weight = Eigen::VectorXd::Zero(n);
    for (Eigen::Index f = 0; f < F.rows(); ++f) {
      const RowVector3d a = V.row(F(f, 0)), b = V.row(F(f, 1)), c = V.row(F(f, 2));
      const RowVector3d cross = (b - a).cross(c - a);
      const double area = 0.5 * cross.norm();
      const RowVector3d centroid = (a + b + c) / 3.0;
      for (int j = 0; j < 3; ++j) {
        target.row(F(f, j)) += area * centroid;
        normal.row(F(f, j)) += cross;
        weight[F(f, j)] += area;
      }
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      const RowVector3d nrm = normal.row(i).normalized();
      RowVector3d step = target.row(i) / weight[i] - V.row(i);
      step -= step.dot(nrm) * nrm;
      V.row(i) = project_to_biped(V.row(i) + 0.5 * step);
    }
  }
}

}  // namespace

std::string_view to_string(TemplateKind kind) {
  switch (kind) {
    case TemplateKind::kIcosphere:
      return "icosphere";
    case TemplateKind::kCapsuleBiped:
      return "capsule-biped";
    case TemplateKind::kBumpyPlane:
      return "bumpy-plane";
  }
  return "unknown";
}

TemplateKind parse_template_kind(std::string_view name) {
  if (name == "icosphere") return TemplateKind::kIcosphere;
  if (name == "capsule-biped") return TemplateKind::kCapsuleBiped;
  if (name == "bumpy-plane") return TemplateKind::kBumpyPlane;
  fail(ErrorCode::kInvalidArgument, "unknown template '" + std::string(name) + "'");
}

TriangleMesh make_template(TemplateKind kind, int level) {
  require(level >= 0 && level <= 7, ErrorCode::kInvalidArgument, "template level must lie in [0, 7]");
  auto [V, F] = icosphere(level);
  switch (kind) {
    case TemplateKind::kIcosphere:
      break;
    case TemplateKind::kCapsuleBiped:
      for (Eigen::Index i = 0; i < V.rows(); ++i) {
        const RowVector3d dir = V.row(i);
        V.row(i) = biped_radius(dir) * dir;
      }
      relax_on_biped(V, F, 50);
      break;
    case TemplateKind::kBumpyPlane:
      for (Eigen::Index i = 0; i < V.rows(); ++i) {
        const double x = V(i, 0), y = V(i, 1);
        double z = 0.15 * V(i, 2);
        if (z > 0.0) z += 0.06 * std::sin(3.0 * x) * std::cos(3.0 * y) * (z / 0.15);
        V(i, 2) = z;
      }
      break;
  }
  return TriangleMesh::create(std::move(V), std::move(F));
}

void validate(const DeformConfig& c) {
  require(c.level >= 0 && c.level <= 7, ErrorCode::kInvalidArgument, "template level must lie in [0, 7]");
  require(c.modes >= 1 && c.modes <= kModePool, ErrorCode::kInvalidArgument,
          "deformation modes must lie in [1, " + std::to_string(kModePool) + "]");
  require(c.epsilon >= 0.0, ErrorCode::kInvalidArgument, "epsilon must be >= 0");
  require(c.max_distortion > 0.0 && c.max_retries >= 0, ErrorCode::kInvalidArgument,
          "distortion bound and retries must be positive");
}

double edge_distortion(const TriangleMesh& reference, const TriangleMesh& deformed) {
  require(reference.num_vertices() == deformed.num_vertices() && reference.faces() == deformed.faces(),
          ErrorCode::kShapeMismatch, "meshes do not share connectivity");
  double worst = 0.0;
  for (const auto& [i, j] : reference.edges()) {
    const double l0 = (reference.vertices().row(i) - reference.vertices().row(j)).norm();
    const double l1 = (deformed.vertices().row(i) - deformed.vertices().row(j)).norm();
    worst = std::max(worst, std::abs(l1 / l0 - 1.0));
  }
  return worst;
}

Deformer::Deformer(TriangleMesh reference, DeformConfig config)
    : reference_(std::move(reference)), config_(config) {
  validate(config_);
  require(reference_.num_vertices() > kModePool + 1, ErrorCode::kKTooLarge, "template too small to deform");
  const SpectralBasis basis = eigenbasis(reference_, kModePool + 1);
  modes_ = basis.phi.rightCols(kModePool);
  for (Eigen::Index c = 0; c < modes_.cols(); ++c) modes_.col(c) /= modes_.col(c).cwiseAbs().maxCoeff();
  normals_ = reference_.vertex_normals();
}

TriangleMesh Deformer::sample(std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coeff(-config_.epsilon, config_.epsilon);
  const double scale = reference_.bbox_diagonal() / config_.modes;
  double last = 0.0;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    std::vector<int> pool(kModePool);
    std::iota(pool.begin(), pool.end(), 0);
    std::shuffle(pool.begin(), pool.end(), rng);
    VectorXd offset = VectorXd::Zero(reference_.num_vertices());
    for (int b = 0; b < config_.modes; ++b) offset += coeff(rng) * modes_.col(pool[static_cast<std::size_t>(b)]);
    Vertices V = reference_.vertices() + ((scale * offset).asDiagonal() * normals_);
    TriangleMesh mesh = TriangleMesh::create(std::move(V), reference_.faces());
    last = edge_distortion(reference_, mesh);
    if (last < config_.max_distortion) return mesh;
  }
  fail(ErrorCode::kDistortionBoundExceeded,
       "edge distortion " + std::to_string(last) + " exceeds bound after " + std::to_string(config_.max_retries) +
           " retries");
}

TriangleMesh deform(const TriangleMesh& reference, const DeformConfig& config, std::uint64_t seed) {
  return Deformer(reference, config).sample(seed);
}

std::uint64_t sample_seed(const DeformConfig& config, std::size_t index) { return derive_seed(config.seed, index); }

FunctionalMap template_fmap(const SpectralBasis& reference_basis, const TriangleMesh& shape,
                            const DatasetOptions& options, std::uint64_t shape_seed) {
  require(shape.num_vertices() == reference_basis.num_vertices(), ErrorCode::kShapeMismatch,
          "shape has " + std::to_string(shape.num_vertices()) + " vertices, template has " +
              std::to_string(reference_basis.num_vertices()));
  require(reference_basis.order() == options.k, ErrorCode::kShapeMismatch, "template basis order differs from k");
  const SpectralBasis basis = eigenbasis(shape, options.k, options.solver);
  MatrixXd C = fmap_from_p2p(identity_map(shape.num_vertices()), reference_basis, basis, vertex_areas(shape));
  if (!options.keep_sign) {
    C = C.cwiseAbs();
  } else {
    std::mt19937_64 rng(derive_seed(shape_seed, 0x51619));
    std::bernoulli_distribution flip(0.5);
    for (Eigen::Index r = 0; r < C.rows(); ++r)
      if (flip(rng)) C.row(r) *= -1.0;
    for (Eigen::Index c = 0; c < C.cols(); ++c)
      if (flip(rng)) C.col(c) *= -1.0;
  }
  return C;
}

MapDataset build_fmap_dataset(const DeformConfig& config, const std::vector<std::uint64_t>& seeds,
                              const DatasetOptions& options) {
  require(options.k >= 1, ErrorCode::kInvalidArgument, "dataset order must be >= 1");
  const Deformer deformer(make_template(config.kind, config.level), config);
  const SpectralBasis reference_basis = eigenbasis(deformer.reference(), options.k, options.solver);

  MapDataset data;
  data.order = options.k;
  data.is_signed = options.keep_sign;
  data.seeds = seeds;
  data.maps.reserve(seeds.size());
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    MatrixXd C = template_fmap(reference_basis, deformer.sample(seeds[i]), options, seeds[i]);
    if (!C.allFinite()) fail(ErrorCode::kNonFinite, "ground-truth map " + std::to_string(i) + " is not finite");
    data.maps.push_back(std::move(C));
  }
  return data;
}

MapDataset build_fmap_dataset(const DeformConfig& config, std::size_t count, const DatasetOptions& options) {
  std::vector<std::uint64_t> seeds(count);
  for (std::size_t i = 0; i < count; ++i) seeds[i] = sample_seed(config, i);
  return build_fmap_dataset(config, seeds, options);
}

double band_mass(const MatrixXd& C, int band) {
  double in = 0.0, total = 0.0;
  for (Eigen::Index i = 0; i < C.rows(); ++i)
    for (Eigen::Index j = 0; j < C.cols(); ++j) {
      const double v = C(i, j) * C(i, j);
      total += v;
      if (std::abs(i - j) <= band) in += v;
    }
  return total > 0.0 ? in / total : 0.0;
}

double diagonal_mass(const MatrixXd& C) {
  const double total = C.cwiseAbs().sum();
  return total > 0.0 ? C.diagonal().cwiseAbs().sum() / total : 0.0;
}

}  // namespace fmprior

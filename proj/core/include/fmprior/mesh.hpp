#pragma once

#include <filesystem>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace fmprior {

using Vertices = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;
using Faces = Eigen::Matrix<int, Eigen::Dynamic, 3, Eigen::RowMajor>;

// Symmetric sparse operator. Both triangles are stored.
using SparseSymMatrix = Eigen::SparseMatrix<double>;

// Lumped (barycentric) per-vertex areas.
using MassDiagonal = Eigen::VectorXd;

enum class MeshFormat { kOff, kObj };

/// Validated triangle mesh. Construction through `TriangleMesh::create` checks
/// index bounds, repeated indices and face areas; the object is immutable
/// afterwards.
class TriangleMesh {
 public:
  static TriangleMesh create(Vertices vertices, Faces faces);

  const Vertices& vertices() const noexcept { return vertices_; }
  const Faces& faces() const noexcept { return faces_; }
  int num_vertices() const noexcept { return static_cast<int>(vertices_.rows()); }
  int num_faces() const noexcept { return static_cast<int>(faces_.rows()); }

  double bbox_diagonal() const;
  double total_area() const;
  double mean_edge_length() const;

  // Unique undirected edges (i < j), sorted.
  std::vector<std::pair<int, int>> edges() const;

  // Area-weighted unit vertex normals.
  Vertices vertex_normals() const;

 private:
  TriangleMesh(Vertices vertices, Faces faces)
      : vertices_(std::move(vertices)), faces_(std::move(faces)) {}

  Vertices vertices_;
  Faces faces_;
};

MeshFormat mesh_format_from_path(const std::filesystem::path& path);

TriangleMesh load_mesh(const std::filesystem::path& path, MeshFormat format);
inline TriangleMesh load_mesh(const std::filesystem::path& path) {
  return load_mesh(path, mesh_format_from_path(path));
}

// Writes ASCII OFF with shortest round-trip float formatting, so a reload
// reproduces the coordinates bit for bit.
void write_off(const TriangleMesh& mesh, const std::filesystem::path& path);

MassDiagonal vertex_areas(const TriangleMesh& mesh);

// Positive semidefinite cotangent stiffness matrix with zero row sums.
SparseSymMatrix cotan_stiffness(const TriangleMesh& mesh);

// Dijkstra over the edge graph, edges weighted by Euclidean length.
Eigen::VectorXd geodesic_distances(const TriangleMesh& mesh, int source);

// All sources at once (n x n); row i holds distances from vertex i.
Eigen::MatrixXd geodesic_distance_matrix(const TriangleMesh& mesh);

}  // namespace fmprior

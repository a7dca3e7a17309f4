#include "fmprior/mesh.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <queue>
#include <sstream>
#include <string>

#include <Eigen/Geometry>

#include "fmprior/error.hpp"
#include "fmprior/io.hpp"

namespace fmprior {
namespace {

double face_area(const Vertices& v, int a, int b, int c) {
  const Eigen::Vector3d e1 = v.row(b) - v.row(a);
  const Eigen::Vector3d e2 = v.row(c) - v.row(a);
  return 0.5 * e1.cross(e2).norm();
}

double bbox_diag(const Vertices& v) {
  if (v.rows() == 0) return 0.0;
  return (v.colwise().maxCoeff() - v.colwise().minCoeff()).norm();
}

std::string strip_comment(const std::string& line) {
  const auto pos = line.find('#');
  return pos == std::string::npos ? line : line.substr(0, pos);
}

bool blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

TriangleMesh read_off(std::istream& in) {
  std::string line;
  std::vector<std::string> tokens;
  // OFF permits the counts to share the header line, so tokenize the whole
  // file after stripping comments.
  while (std::getline(in, line)) {
    std::istringstream ls(strip_comment(line));
    std::string tok;
    while (ls >> tok) tokens.push_back(tok);
  }
  std::size_t pos = 0;
  auto next = [&]() -> const std::string& {
    if (pos >= tokens.size()) fail(ErrorCode::kParseError, "unexpected end of OFF file");
    return tokens[pos++];
  };
  auto parse_int = [&](const std::string& s) {
    int value = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || p != s.data() + s.size())
      fail(ErrorCode::kParseError, "expected integer, got '" + s + "'");
    return value;
  };
  auto parse_double = [&](const std::string& s) {
    double value = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc() || p != s.data() + s.size())
      fail(ErrorCode::kParseError, "expected number, got '" + s + "'");
    return value;
  };

  if (next() != "OFF") fail(ErrorCode::kParseError, "missing OFF header");
  const int nv = parse_int(next());
  const int nf = parse_int(next());
  parse_int(next());  // edge count, unused
  if (nv < 0 || nf < 0) fail(ErrorCode::kParseError, "negative element count");

  Vertices v(nv, 3);
  for (int i = 0; i < nv; ++i)
    for (int c = 0; c < 3; ++c) v(i, c) = parse_double(next());
  Faces f(nf, 3);
  for (int i = 0; i < nf; ++i) {
    const int arity = parse_int(next());
    if (arity != 3) fail(ErrorCode::kParseError, "non-triangular face " + std::to_string(i));
    for (int c = 0; c < 3; ++c) f(i, c) = parse_int(next());
  }
  return TriangleMesh::create(std::move(v), std::move(f));
}

TriangleMesh read_obj(std::istream& in) {
  std::vector<Eigen::RowVector3d> verts;
  std::vector<Eigen::RowVector3i> faces;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_comment(line);
    if (blank(line)) continue;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "v") {
      Eigen::RowVector3d p;
      if (!(ls >> p[0] >> p[1] >> p[2]))
        fail(ErrorCode::kParseError, "bad vertex on line " + std::to_string(lineno));
      verts.push_back(p);
    } else if (tag == "f") {
      std::vector<int> idx;
      std::string tok;
      while (ls >> tok) {
        const std::string head = tok.substr(0, tok.find('/'));
        int value = 0;
        auto [p, ec] = std::from_chars(head.data(), head.data() + head.size(), value);
        if (ec != std::errc() || p != head.data() + head.size() || value == 0)
          fail(ErrorCode::kParseError, "bad face index on line " + std::to_string(lineno));
        // Negative indices count back from the most recent vertex.
        idx.push_back(value > 0 ? value - 1 : static_cast<int>(verts.size()) + value);
      }
      if (idx.size() != 3)
        fail(ErrorCode::kParseError, "non-triangular face on line " + std::to_string(lineno));
      faces.emplace_back(idx[0], idx[1], idx[2]);
    }
    // vn, vt, usemtl, o, g, s ... are ignored.
  }
  Vertices v(static_cast<Eigen::Index>(verts.size()), 3);
  for (std::size_t i = 0; i < verts.size(); ++i) v.row(static_cast<Eigen::Index>(i)) = verts[i];
  Faces f(static_cast<Eigen::Index>(faces.size()), 3);
  for (std::size_t i = 0; i < faces.size(); ++i) f.row(static_cast<Eigen::Index>(i)) = faces[i];
  return TriangleMesh::create(std::move(v), std::move(f));
}

void append_double(std::string& out, double x) {
  char buf[32];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  out.append(buf, p);
}

}  // namespace

TriangleMesh TriangleMesh::create(Vertices vertices, Faces faces) {
  const int n = static_cast<int>(vertices.rows());
  require(vertices.allFinite(), ErrorCode::kParseError, "non-finite vertex coordinate");
  for (Eigen::Index i = 0; i < faces.rows(); ++i) {
    for (int c = 0; c < 3; ++c) {
      const int idx = faces(i, c);
      if (idx < 0 || idx >= n)
        fail(ErrorCode::kIndexOutOfRange, "face " + std::to_string(i) + " references vertex " +
                                              std::to_string(idx) + " of " + std::to_string(n));
    }
    if (faces(i, 0) == faces(i, 1) || faces(i, 1) == faces(i, 2) || faces(i, 0) == faces(i, 2))
      fail(ErrorCode::kDegenerateMesh, "face " + std::to_string(i) + " repeats a vertex");
  }
  const double diag = bbox_diag(vertices);
  const double min_area = 1e-12 * diag * diag;
  for (Eigen::Index i = 0; i < faces.rows(); ++i) {
    if (!(face_area(vertices, faces(i, 0), faces(i, 1), faces(i, 2)) > min_area))
      fail(ErrorCode::kDegenerateMesh, "face " + std::to_string(i) + " has (near) zero area");
  }
  return TriangleMesh(std::move(vertices), std::move(faces));
}

double TriangleMesh::bbox_diagonal() const { return bbox_diag(vertices_); }

double TriangleMesh::total_area() const {
  double area = 0.0;
  for (Eigen::Index i = 0; i < faces_.rows(); ++i)
    area += face_area(vertices_, faces_(i, 0), faces_(i, 1), faces_(i, 2));
  return area;
}

std::vector<std::pair<int, int>> TriangleMesh::edges() const {
  std::vector<std::pair<int, int>> out;
  out.reserve(static_cast<std::size_t>(faces_.rows()) * 3);
  for (Eigen::Index f = 0; f < faces_.rows(); ++f) {
    for (int c = 0; c < 3; ++c) {
      int a = faces_(f, c), b = faces_(f, (c + 1) % 3);
      if (a > b) std::swap(a, b);
      out.emplace_back(a, b);
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

double TriangleMesh::mean_edge_length() const {
  const auto e = edges();
  if (e.empty()) return 0.0;
  double sum = 0.0;
  for (auto [a, b] : e) sum += (vertices_.row(a) - vertices_.row(b)).norm();
  return sum / static_cast<double>(e.size());
}

Vertices TriangleMesh::vertex_normals() const {
  Vertices normals = Vertices::Zero(vertices_.rows(), 3);
  for (Eigen::Index f = 0; f < faces_.rows(); ++f) {
    const Eigen::RowVector3d e1 = vertices_.row(faces_(f, 1)) - vertices_.row(faces_(f, 0));
    const Eigen::RowVector3d e2 = vertices_.row(faces_(f, 2)) - vertices_.row(faces_(f, 0));
    const Eigen::RowVector3d n = e1.cross(e2);  // length = 2 * area
    for (int c = 0; c < 3; ++c) normals.row(faces_(f, c)) += n;
  }
  for (Eigen::Index i = 0; i < normals.rows(); ++i) {
    const double len = normals.row(i).norm();
    if (len > 0) normals.row(i) /= len;
  }
  return normals;
}

MeshFormat mesh_format_from_path(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".off") return MeshFormat::kOff;
  if (ext == ".obj") return MeshFormat::kObj;
  fail(ErrorCode::kParseError, "unknown mesh extension '" + ext + "'");
}

TriangleMesh load_mesh(const std::filesystem::path& path, MeshFormat format) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kIoError, "cannot open " + path.string());
  return format == MeshFormat::kOff ? read_off(in) : read_obj(in);
}

void write_off(const TriangleMesh& mesh, const std::filesystem::path& path) {
  std::string out = "OFF\n" + std::to_string(mesh.num_vertices()) + " " +
                    std::to_string(mesh.num_faces()) + " 0\n";
  const auto& v = mesh.vertices();
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    append_double(out, v(i, 0));
    out += ' ';
    append_double(out, v(i, 1));
    out += ' ';
    append_double(out, v(i, 2));
    out += '\n';
  }
  const auto& f = mesh.faces();
  for (Eigen::Index i = 0; i < f.rows(); ++i)
    out += "3 " + std::to_string(f(i, 0)) + " " + std::to_string(f(i, 1)) + " " +
           std::to_string(f(i, 2)) + "\n";
  write_file_atomic(path, out);
}

MassDiagonal vertex_areas(const TriangleMesh& mesh) {
  const auto& v = mesh.vertices();
  const auto& f = mesh.faces();
  MassDiagonal mass = MassDiagonal::Zero(v.rows());
  for (Eigen::Index i = 0; i < f.rows(); ++i) {
    const double third = face_area(v, f(i, 0), f(i, 1), f(i, 2)) / 3.0;
    for (int c = 0; c < 3; ++c) mass[f(i, c)] += third;
  }
  for (Eigen::Index i = 0; i < mass.size(); ++i)
    if (!(mass[i] > 0.0))
      fail(ErrorCode::kDegenerateMesh, "vertex " + std::to_string(i) + " has no incident area");
  return mass;
}

SparseSymMatrix cotan_stiffness(const TriangleMesh& mesh) {
  const auto& v = mesh.vertices();
  const auto& f = mesh.faces();
  const Eigen::Index n = v.rows();
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(f.rows()) * 12);
  for (Eigen::Index t = 0; t < f.rows(); ++t) {
    for (int c = 0; c < 3; ++c) {
      // Angle at corner c is opposite edge (i, j).
      const int o = f(t, c), i = f(t, (c + 1) % 3), j = f(t, (c + 2) % 3);
      const Eigen::Vector3d a = v.row(i) - v.row(o);
      const Eigen::Vector3d b = v.row(j) - v.row(o);
      const double cross = a.cross(b).norm();
      if (!(cross > 0.0)) fail(ErrorCode::kDegenerateMesh, "undefined cotangent in face " + std::to_string(t));
      const double w = 0.5 * a.dot(b) / cross;
      trips.emplace_back(i, j, -w);
      trips.emplace_back(j, i, -w);
      trips.emplace_back(i, i, w);
      trips.emplace_back(j, j, w);
    }
  }
  SparseSymMatrix W(n, n);
  W.setFromTriplets(trips.begin(), trips.end());
  W.makeCompressed();
  return W;
}

namespace {

struct Adjacency {
  std::vector<int> offsets;
  std::vector<int> targets;
  std::vector<double> weights;
};

Adjacency build_adjacency(const TriangleMesh& mesh) {
  const auto edges = mesh.edges();
  const auto& v = mesh.vertices();
  const int n = mesh.num_vertices();
  std::vector<int> degree(static_cast<std::size_t>(n) + 1, 0);
  for (auto [a, b] : edges) {
    ++degree[static_cast<std::size_t>(a) + 1];
    ++degree[static_cast<std::size_t>(b) + 1];
  }
  Adjacency adj;
  adj.offsets.resize(static_cast<std::size_t>(n) + 1);
  for (int i = 0; i < n; ++i) degree[static_cast<std::size_t>(i) + 1] += degree[static_cast<std::size_t>(i)];
  adj.offsets = degree;
  adj.targets.resize(edges.size() * 2);
  adj.weights.resize(edges.size() * 2);
  std::vector<int> fill(adj.offsets.begin(), adj.offsets.end() - 1);
  for (auto [a, b] : edges) {
    const double len = (v.row(a) - v.row(b)).norm();
    auto put = [&](int from, int to) {
      const auto slot = static_cast<std::size_t>(fill[static_cast<std::size_t>(from)]++);
      adj.targets[slot] = to;
      adj.weights[slot] = len;
    };
    put(a, b);
    put(b, a);
  }
  return adj;
}

Eigen::VectorXd dijkstra(const Adjacency& adj, int n, int source) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  Eigen::VectorXd dist = Eigen::VectorXd::Constant(n, kInf);
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
  dist[source] = 0.0;
  queue.emplace(0.0, source);
  while (!queue.empty()) {
    auto [d, u] = queue.top();
    queue.pop();
    if (d > dist[u]) continue;
    for (int e = adj.offsets[static_cast<std::size_t>(u)]; e < adj.offsets[static_cast<std::size_t>(u) + 1]; ++e) {
      const int w = adj.targets[static_cast<std::size_t>(e)];
      const double nd = d + adj.weights[static_cast<std::size_t>(e)];
      if (nd < dist[w]) {
        dist[w] = nd;
        queue.emplace(nd, w);
      }
    }
  }
  for (int i = 0; i < n; ++i)
    if (!std::isfinite(dist[i]))
      fail(ErrorCode::kDisconnectedMesh, "vertex " + std::to_string(i) + " unreachable from " +
                                             std::to_string(source));
  return dist;
}

}  // namespace

Eigen::VectorXd geodesic_distances(const TriangleMesh& mesh, int source) {
  const int n = mesh.num_vertices();
  if (source < 0 || source >= n) fail(ErrorCode::kIndexOutOfRange, "source vertex out of range");
  return dijkstra(build_adjacency(mesh), n, source);
}

Eigen::MatrixXd geodesic_distance_matrix(const TriangleMesh& mesh) {
  const int n = mesh.num_vertices();
  const Adjacency adj = build_adjacency(mesh);
  Eigen::MatrixXd out(n, n);
  for (int s = 0; s < n; ++s) out.col(s) = dijkstra(adj, n, s);
  // Column-major fill; Dijkstra distances are symmetric up to summation order.
  out.transposeInPlace();
  return out;
}

}  // namespace fmprior

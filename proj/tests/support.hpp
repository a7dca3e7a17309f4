#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include <Eigen/Core>
#include <gtest/gtest.h>

#include "fmprior/error.hpp"
#include "fmprior/mesh.hpp"

namespace fmprior::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::mt19937_64 rng(std::random_device{}());
    path_ = std::filesystem::temp_directory_path() / ("fmprior_test_" + std::to_string(rng()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

  std::filesystem::path write(const std::string& name, const std::string& text) const {
    const auto p = path_ / name;
    std::ofstream(p, std::ios::binary) << text;
    return p;
  }

 private:
  std::filesystem::path path_;
};

// Flat (nx+1) x (ny+1) grid on [0, sx] x [0, sy], two triangles per cell.
inline TriangleMesh grid_mesh(int nx, int ny, double sx = 1.0, double sy = 1.0) {
  Vertices V((nx + 1) * (ny + 1), 3);
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i) V.row(j * (nx + 1) + i) << sx * i / nx, sy * j / ny, 0.0;
  Faces F(2 * nx * ny, 3);
  int f = 0;
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const int a = j * (nx + 1) + i, b = a + 1, c = a + nx + 1, d = c + 1;
      F.row(f++) << a, b, d;
      F.row(f++) << a, d, c;
    }
  return TriangleMesh::create(V, F);
}

// Regular tetrahedron inscribed in the unit sphere.
inline TriangleMesh tetrahedron() {
  Vertices V(4, 3);
  V << 1, 1, 1, 1, -1, -1, -1, 1, -1, -1, -1, 1;
  V /= std::sqrt(3.0);
  Faces F(4, 3);
  F << 0, 1, 2, 0, 3, 1, 0, 2, 3, 1, 3, 2;
  return TriangleMesh::create(V, F);
}

// |a - b| / max(|b|, floor).
inline double rel_err(double a, double b, double floor = 1e-300) { return std::abs(a - b) / std::max(std::abs(b), floor); }

template <typename Fn>
ErrorCode error_code_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an fmprior::Error";
  return ErrorCode::kInvalidArgument;
}

}  // namespace fmprior::testing

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace fmprior {

using PointMap = std::vector<std::uint32_t>;

// Writes to a sibling temp file, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);
std::string read_file(const std::filesystem::path& path);

/// Little-endian binary encoder used by all on-disk block formats.
class ByteWriter {
 public:
  void magic(std::string_view tag) { buf_.append(tag); }
  void u32(std::uint32_t v);
  void f64(double v);
  void f64s(std::span<const double> values);
  void str(std::string_view s);  // u32 length prefix + bytes

  const std::string& bytes() const noexcept { return buf_; }

 private:
  std::string buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::string_view bytes) : data_(bytes) {}

  // Throws FormatError when the next bytes are not `tag`.
  void expect_magic(std::string_view tag);
  std::uint32_t u32();
  double f64();
  void f64s(std::span<double> out);
  std::string str();

  bool at_end() const noexcept { return pos_ == data_.size(); }

 private:
  void need(std::size_t count) const;

  std::string_view data_;
  std::size_t pos_ = 0;
};

// "FMAT": magic, u32 rows, u32 cols, f64 row-major payload.
std::string encode_fmat(const Eigen::MatrixXd& m);
Eigen::MatrixXd decode_fmat(std::string_view bytes);
void save_fmat(const Eigen::MatrixXd& m, const std::filesystem::path& path);
Eigen::MatrixXd load_fmat(const std::filesystem::path& path);

// "PMAP": magic, u32 n, u32 indices.
std::string encode_pmap(const PointMap& map);
PointMap decode_pmap(std::string_view bytes);
void save_pmap(const PointMap& map, const std::filesystem::path& path);
PointMap load_pmap(const std::filesystem::path& path);

// Binary P6 heatmap, linear grayscale over [0, max]; `max <= 0` maps every
// pixel to black. Each matrix entry becomes a `cell x cell` block.
std::string encode_ppm_heatmap(const Eigen::MatrixXd& m, double max, int cell = 1);

}  // namespace fmprior

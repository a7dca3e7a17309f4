#include "fmprior/io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "fmprior/error.hpp"

namespace fmprior {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::kIoError, "cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorCode::kIoError, "short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) fail(ErrorCode::kIoError, "cannot rename " + tmp.string() + ": " + ec.message());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void ByteWriter::u32(std::uint32_t v) {
  char raw[4];
  std::memcpy(raw, &v, 4);
  buf_.append(raw, 4);
}

void ByteWriter::f64(double v) {
  char raw[8];
  std::memcpy(raw, &v, 8);
  buf_.append(raw, 8);
}

void ByteWriter::f64s(std::span<const double> values) {
  buf_.append(reinterpret_cast<const char*>(values.data()), values.size_bytes());
}

void ByteWriter::str(std::string_view s) {
  u32(static_cast<std::uint32_t>(s.size()));
  buf_.append(s);
}

void ByteReader::need(std::size_t count) const {
  if (data_.size() - pos_ < count) fail(ErrorCode::kFormatError, "truncated binary block");
}

void ByteReader::expect_magic(std::string_view tag) {
  need(tag.size());
  if (data_.substr(pos_, tag.size()) != tag)
    fail(ErrorCode::kFormatError, "bad magic, expected '" + std::string(tag) + "'");
  pos_ += tag.size();
}

std::uint32_t ByteReader::u32() {
  need(4);
  std::uint32_t v;
  std::memcpy(&v, data_.data() + pos_, 4);
  pos_ += 4;
  return v;
}

double ByteReader::f64() {
  need(8);
  double v;
  std::memcpy(&v, data_.data() + pos_, 8);
  pos_ += 8;
  return v;
}

void ByteReader::f64s(std::span<double> out) {
  need(out.size_bytes());
  std::memcpy(out.data(), data_.data() + pos_, out.size_bytes());
  pos_ += out.size_bytes();
}

std::string ByteReader::str() {
  const std::uint32_t len = u32();
  need(len);
  std::string s(data_.substr(pos_, len));
  pos_ += len;
  return s;
}

std::string encode_fmat(const Eigen::MatrixXd& m) {
  ByteWriter w;
  w.magic("FMAT");
  w.u32(static_cast<std::uint32_t>(m.rows()));
  w.u32(static_cast<std::uint32_t>(m.cols()));
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = m;
  w.f64s({rm.data(), static_cast<std::size_t>(rm.size())});
  return w.bytes();
}

Eigen::MatrixXd decode_fmat(std::string_view bytes) {
  ByteReader r(bytes);
  r.expect_magic("FMAT");
  const auto rows = r.u32();
  const auto cols = r.u32();
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(rows, cols);
  r.f64s({rm.data(), static_cast<std::size_t>(rm.size())});
  if (!r.at_end()) fail(ErrorCode::kFormatError, "trailing bytes after FMAT payload");
  return rm;
}

void save_fmat(const Eigen::MatrixXd& m, const std::filesystem::path& path) {
  write_file_atomic(path, encode_fmat(m));
}

Eigen::MatrixXd load_fmat(const std::filesystem::path& path) { return decode_fmat(read_file(path)); }

std::string encode_pmap(const PointMap& map) {
  ByteWriter w;
  w.magic("PMAP");
  w.u32(static_cast<std::uint32_t>(map.size()));
  for (auto idx : map) w.u32(idx);
  return w.bytes();
}

PointMap decode_pmap(std::string_view bytes) {
  ByteReader r(bytes);
  r.expect_magic("PMAP");
  PointMap map(r.u32());
  for (auto& idx : map) idx = r.u32();
  if (!r.at_end()) fail(ErrorCode::kFormatError, "trailing bytes after PMAP payload");
  return map;
}

void save_pmap(const PointMap& map, const std::filesystem::path& path) {
  write_file_atomic(path, encode_pmap(map));
}

PointMap load_pmap(const std::filesystem::path& path) { return decode_pmap(read_file(path)); }

std::string encode_ppm_heatmap(const Eigen::MatrixXd& m, double max, int cell) {
  require(cell >= 1, ErrorCode::kInvalidArgument, "ppm cell size must be >= 1");
  const auto width = m.cols() * cell;
  const auto height = m.rows() * cell;
  std::string out = "P6\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  out.reserve(out.size() + static_cast<std::size_t>(width * height * 3));
  for (Eigen::Index r = 0; r < height; ++r) {
    for (Eigen::Index c = 0; c < width; ++c) {
      const double v = m(r / cell, c / cell);
      double t = max > 0.0 ? v / max : 0.0;
      t = std::clamp(std::isfinite(t) ? t : 0.0, 0.0, 1.0);
      const auto g = static_cast<char>(static_cast<unsigned char>(std::lround(t * 255.0)));
      out.push_back(g);
      out.push_back(g);
      out.push_back(g);
    }
  }
  return out;
}

}  // namespace fmprior

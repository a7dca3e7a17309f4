#include "manifest.hpp"

#include "fmprior/error.hpp"

namespace fmprior::cli {

namespace fs = std::filesystem;

namespace {

template <typename T>
T field(const Json& j, const char* key, const fs::path& origin) {
  const auto it = j.find(key);
  if (it == j.end()) fail(ErrorCode::kFormatError, origin.string() + ": missing field '" + key + "'");
  try {
    return it->get<T>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kFormatError, origin.string() + ": field '" + key + "': " + e.what());
  }
}

void expect_format(const Json& j, const char* format, const fs::path& origin) {
  if (!j.is_object()) fail(ErrorCode::kFormatError, origin.string() + ": expected a JSON object");
  const auto it = j.find("format");
  if (it != j.end() && *it != format)
    fail(ErrorCode::kFormatError, origin.string() + ": format is " + it->dump() + ", expected \"" + format + "\"");
  if (const auto v = j.find("version"); v != j.end() && *v != 1)
    fail(ErrorCode::kVersionError, origin.string() + ": unsupported version " + v->dump());
}

std::vector<ShapeEntry> shape_list(const Json& j, const char* key, const fs::path& origin) {
  std::vector<ShapeEntry> out;
  const auto it = j.find(key);
  if (it == j.end()) return out;
  if (!it->is_array()) fail(ErrorCode::kFormatError, origin.string() + ": '" + key + "' must be an array");
  for (const auto& e : *it)
    out.push_back({field<std::string>(e, "path", origin), e.value("seed", std::uint64_t{0})});
  return out;
}

Json shape_list_json(const std::vector<ShapeEntry>& entries) {
  Json out = Json::array();
  for (const auto& e : entries) out.push_back({{"path", e.path.generic_string()}, {"seed", e.seed}});
  return out;
}

}  // namespace

Json manifest_json(const Manifest& m) {
  Json pairs = Json::array();
  for (const auto& p : m.pairs)
    pairs.push_back({{"mesh1", p.mesh1.generic_string()}, {"mesh2", p.mesh2.generic_string()}, {"gt", p.gt}});
  return {{"format", kManifestFormat},
          {"version", 1},
          {"template", {{"kind", m.template_kind}, {"level", m.template_level}, {"path", m.template_path.generic_string()}}},
          {"k", m.k},
          {"seed", m.seed},
          {"shapes", shape_list_json(m.shapes)},
          {"pairs", pairs}};
}

Manifest load_manifest(const fs::path& path) {
  const Json j = read_json(path);
  expect_format(j, kManifestFormat, path);
  Manifest m;
  m.root = path.parent_path();
  if (const auto t = j.find("template"); t != j.end()) {
    m.template_kind = t->value("kind", "");
    m.template_level = t->value("level", 0);
    m.template_path = t->value("path", "");
  }
  m.k = j.value("k", 0);
  m.seed = j.value("seed", std::uint64_t{0});
  m.shapes = shape_list(j, "shapes", path);
  if (const auto it = j.find("pairs"); it != j.end()) {
    if (!it->is_array()) fail(ErrorCode::kFormatError, path.string() + ": 'pairs' must be an array");
    for (const auto& e : *it)
      m.pairs.push_back(
          {field<std::string>(e, "mesh1", path), field<std::string>(e, "mesh2", path), e.value("gt", "identity")});
  }
  return m;
}

Json dataset_json(const DatasetIndex& d) {
  return {{"format", kDatasetFormat},
          {"version", 1},
          {"order", d.order},
          {"signed", d.is_signed},
          {"count", d.maps.size()},
          {"maps", shape_list_json(d.maps)}};
}

DatasetIndex load_dataset_index(const fs::path& path) {
  const Json j = read_json(path);
  expect_format(j, kDatasetFormat, path);
  DatasetIndex d;
  d.root = path.parent_path();
  d.order = field<int>(j, "order", path);
  d.is_signed = j.value("signed", false);
  d.maps = shape_list(j, "maps", path);
  return d;
}

MapDataset load_dataset(const DatasetIndex& index) {
  MapDataset data;
  data.order = index.order;
  data.is_signed = index.is_signed;
  for (const auto& e : index.maps) {
    const fs::path p = e.path.is_absolute() ? e.path : index.root / e.path;
    Eigen::MatrixXd C = load_fmat(p);
    if (C.rows() != index.order || C.cols() != index.order)
      fail(ErrorCode::kShapeMismatch, p.string() + ": map is " + std::to_string(C.rows()) + "x" +
                                          std::to_string(C.cols()) + ", dataset order is " +
                                          std::to_string(index.order));
    data.maps.push_back(std::move(C));
    data.seeds.push_back(e.seed);
  }
  return data;
}

Json config_json(const RunConfig& config) {
  Json out = Json::object();
  for (const auto& [k, v] : config.resolved()) out[k] = v;
  return out;
}

void write_json(const fs::path& path, const Json& j) { write_file_atomic(path, j.dump(2) + "\n"); }

Json read_json(const fs::path& path) {
  const std::string text = read_file(path);
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorCode::kParseError, path.string() + ": " + e.what());
  }
}

}  // namespace fmprior::cli

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fmprior/config.hpp"
#include "fmprior/io.hpp"
#include "fmprior/synth.hpp"

namespace fmprior::cli {

using Json = nlohmann::ordered_json;

// Paths inside manifests are relative to the manifest's directory.
struct ShapeEntry {
  std::filesystem::path path;
  std::uint64_t seed = 0;
};

struct PairEntry {
  std::filesystem::path mesh1;
  std::filesystem::path mesh2;
  std::string gt = "identity";  // "identity" or a PMAP path
};

/// Output of `synth-data`, input of `build-dataset`, `ablate` and `baseline`.
/// Hand-written manifests may hold only `pairs`.
struct Manifest {
  std::filesystem::path root;  // directory the relative paths resolve against
  std::string template_kind;
  int template_level = 0;
  std::filesystem::path template_path;
  int k = 0;
  std::uint64_t seed = 0;
  std::vector<ShapeEntry> shapes;
  std::vector<PairEntry> pairs;

  std::filesystem::path resolve(const std::filesystem::path& p) const { return p.is_absolute() ? p : root / p; }
};

inline constexpr const char* kManifestFormat = "fmprior-manifest";
inline constexpr const char* kDatasetFormat = "fmprior-dataset";

Json manifest_json(const Manifest& m);
Manifest load_manifest(const std::filesystem::path& path);

/// Output of `build-dataset`: one FMAT per map.
struct DatasetIndex {
  std::filesystem::path root;
  int order = 0;
  bool is_signed = false;
  std::vector<ShapeEntry> maps;
};

Json dataset_json(const DatasetIndex& d);
DatasetIndex load_dataset_index(const std::filesystem::path& path);
MapDataset load_dataset(const DatasetIndex& index);

// Config echo: every resolved key with its text value.
Json config_json(const RunConfig& config);

// Two-space indented dump plus a trailing newline, written atomically.
void write_json(const std::filesystem::path& path, const Json& j);
Json read_json(const std::filesystem::path& path);

}  // namespace fmprior::cli

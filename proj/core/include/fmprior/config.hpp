#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fmprior/distill.hpp"
#include "fmprior/sgm.hpp"
#include "fmprior/synth.hpp"

namespace fmprior {

struct DatasetConfig {
  int shapes = 20;  // synth-data: number of deformed shapes written
  int k = 30;
  bool keep_sign = false;
};

/// Every tunable of the pipeline in one place. Text form is one `key = value`
/// per line; `#` starts a comment. Keys are listed by `RunConfig::keys()`.
struct RunConfig {
  std::uint64_t seed = 0;
  DenoiserConfig denoiser;
  NoiseSchedule schedule;
  TrainOptions train;
  // The library default epsilon suits the sphere; thin biped limbs need much
  // smaller normal offsets to stay near-isometric.
  DeformConfig deform{TemplateKind::kCapsuleBiped, 3, 8, 0.02};
  DatasetConfig dataset;
  ZeroShotConfig match;

  // Throws InvalidArgument for unknown keys or malformed values.
  void set(std::string_view key, std::string_view value);
  std::string get(std::string_view key) const;

  static const std::vector<std::string>& keys();
  // (key, value) for every key, in keys() order.
  std::vector<std::pair<std::string, std::string>> resolved() const;
  std::string to_text() const;

  // Cross-field checks of every section.
  void validate() const;
};

// Applies each `key = value` line of `text` on top of `config`.
void apply_config_text(RunConfig& config, std::string_view text, std::string_view origin = "<text>");
RunConfig load_run_config(const std::filesystem::path& path);

// "key=value" override.
void apply_override(RunConfig& config, std::string_view assignment);

// Shortest round-trip decimal form.
std::string format_double(double value);

}  // namespace fmprior

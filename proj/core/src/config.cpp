#include "fmprior/config.hpp"

#include <charconv>
#include <functional>
#include <map>
#include <sstream>

#include "fmprior/error.hpp"
#include "fmprior/io.hpp"

namespace fmprior {

namespace {

std::string_view trim(std::string_view s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string_view::npos) return {};
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view expected) {
  fail(ErrorCode::kInvalidArgument,
       "config key '" + std::string(key) + "': cannot parse '" + std::string(value) + "' as " + std::string(expected));
}

double parse_double(std::string_view key, std::string_view v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) bad_value(key, v, "a number");
  return out;
}

template <typename Int>
Int parse_int(std::string_view key, std::string_view v) {
  Int out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) bad_value(key, v, "an integer");
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  bad_value(key, v, "a boolean");
}

std::vector<int> parse_widths(std::string_view key, std::string_view v) {
  std::vector<int> out;
  while (!v.empty()) {
    const auto comma = v.find(',');
    out.push_back(parse_int<int>(key, trim(v.substr(0, comma))));
    if (comma == std::string_view::npos) break;
    v.remove_prefix(comma + 1);
  }
  if (out.empty()) bad_value(key, v, "a comma-separated list of integers");
  return out;
}

std::string format_widths(const std::vector<int>& w) {
  std::string out;
  for (std::size_t i = 0; i < w.size(); ++i) out += (i ? "," : "") + std::to_string(w[i]);
  return out;
}

struct Field {
  std::function<void(RunConfig&, std::string_view key, std::string_view value)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename Member>
Field double_field(Member member) {
  return {[member](RunConfig& c, std::string_view k, std::string_view v) { member(c) = parse_double(k, v); },
          [member](const RunConfig& c) { return format_double(member(const_cast<RunConfig&>(c))); }};
}

template <typename Int, typename Member>
Field int_field(Member member) {
  return {[member](RunConfig& c, std::string_view k, std::string_view v) { member(c) = parse_int<Int>(k, v); },
          [member](const RunConfig& c) { return std::to_string(member(const_cast<RunConfig&>(c))); }};
}

template <typename Member>
Field bool_field(Member member) {
  return {[member](RunConfig& c, std::string_view k, std::string_view v) { member(c) = parse_bool(k, v); },
          [member](const RunConfig& c) { return std::string(member(const_cast<RunConfig&>(c)) ? "true" : "false"); }};
}

template <typename Member>
Field widths_field(Member member) {
  return {[member](RunConfig& c, std::string_view k, std::string_view v) { member(c) = parse_widths(k, v); },
          [member](const RunConfig& c) { return format_widths(member(const_cast<RunConfig&>(c))); }};
}

#define FM_REF(expr) [](RunConfig& c) -> auto& { return c.expr; }

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      {"seed", int_field<std::uint64_t>(FM_REF(seed))},

      {"denoiser.order", int_field<int>(FM_REF(denoiser.order))},
      {"denoiser.widths", widths_field(FM_REF(denoiser.widths))},
      {"denoiser.embedding_dim", int_field<int>(FM_REF(denoiser.embedding_dim))},
      {"denoiser.residual", bool_field(FM_REF(denoiser.residual))},
      {"denoiser.sigma_data", double_field(FM_REF(denoiser.sigma_data))},

      {"schedule.sigma_min", double_field(FM_REF(schedule.sigma_min))},
      {"schedule.sigma_max", double_field(FM_REF(schedule.sigma_max))},
      {"schedule.p_mean", double_field(FM_REF(schedule.p_mean))},
      {"schedule.p_std", double_field(FM_REF(schedule.p_std))},
      {"schedule.sampler_steps", int_field<int>(FM_REF(schedule.sampler_steps))},

      {"train.epochs", int_field<int>(FM_REF(train.epochs))},
      {"train.batch_size", int_field<int>(FM_REF(train.batch_size))},
      {"train.learning_rate", double_field(FM_REF(train.learning_rate))},

      {"deform.template",
       {[](RunConfig& c, std::string_view, std::string_view v) { c.deform.kind = parse_template_kind(v); },
        [](const RunConfig& c) { return std::string(to_string(c.deform.kind)); }}},
      {"deform.level", int_field<int>(FM_REF(deform.level))},
      {"deform.modes", int_field<int>(FM_REF(deform.modes))},
      {"deform.epsilon", double_field(FM_REF(deform.epsilon))},
      {"deform.max_distortion", double_field(FM_REF(deform.max_distortion))},
      {"deform.max_retries", int_field<int>(FM_REF(deform.max_retries))},

      {"dataset.shapes", int_field<int>(FM_REF(dataset.shapes))},
      {"dataset.k", int_field<int>(FM_REF(dataset.k))},
      {"dataset.signed", bool_field(FM_REF(dataset.keep_sign))},

      {"match.mode",
       {[](RunConfig& c, std::string_view, std::string_view v) { c.match.mode = parse_zero_shot_mode(v); },
        [](const RunConfig& c) { return std::string(to_string(c.match.mode)); }}},
      {"match.k", int_field<int>(FM_REF(match.k))},
      {"match.mask_sigma", double_field(FM_REF(match.mask_sigma))},
      {"match.mask_rescale", bool_field(FM_REF(match.mask_rescale))},
      {"match.mask_samples", int_field<int>(FM_REF(match.mask_samples))},
      {"match.mask_every", int_field<int>(FM_REF(match.mask_every))},
      {"match.loop_zoomout_target", int_field<int>(FM_REF(match.loop_zoomout_target))},
      {"match.eval_zoomout_target", int_field<int>(FM_REF(match.eval_zoomout_target))},
      {"match.basis_order", int_field<int>(FM_REF(match.basis_order))},
      {"match.alpha", double_field(FM_REF(match.alpha))},
      {"match.ini_alpha", double_field(FM_REF(match.ini_alpha))},
      {"match.steps", int_field<int>(FM_REF(match.steps))},
      {"match.learning_rate", double_field(FM_REF(match.learning_rate))},
      {"match.sds_sigma_min", double_field(FM_REF(match.sds.sigma_min))},
      {"match.sds_sigma_max", double_field(FM_REF(match.sds.sigma_max))},
      {"match.sds_weight", double_field(FM_REF(match.sds_weight))},
      {"match.sds_signed", bool_field(FM_REF(match.sds_signed))},
      {"match.axiomatic_weight", double_field(FM_REF(match.axiomatic_weight))},
      {"match.hks_count", int_field<int>(FM_REF(match.features.hks_count))},
      {"match.feature_widths", widths_field(FM_REF(match.features.widths))},
      {"match.feature_dim", int_field<int>(FM_REF(match.features.output_dim))},
      {"match.feature_residual", bool_field(FM_REF(match.features.residual))},
      {"match.theta_init",
       {[](RunConfig& c, std::string_view, std::string_view v) { c.match.theta_init = parse_theta_init(v); },
        [](const RunConfig& c) { return std::string(to_string(c.match.theta_init)); }}},
      {"match.theta_std", double_field(FM_REF(match.theta_std))},
      {"match.init_fit_steps", int_field<int>(FM_REF(match.init_fit_steps))},
      {"match.init_fit_learning_rate", double_field(FM_REF(match.init_fit_learning_rate))},
  };
  return table;
}

#undef FM_REF

const Field& field(std::string_view key) {
  static const auto index = [] {
    std::map<std::string, const Field*, std::less<>> m;
    for (const auto& [name, f] : fields()) m.emplace(name, &f);
    return m;
  }();
  const auto it = index.find(key);
  if (it == index.end()) fail(ErrorCode::kInvalidArgument, "unknown config key '" + std::string(key) + "'");
  return *it->second;
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

void RunConfig::set(std::string_view key, std::string_view value) { field(key).set(*this, key, trim(value)); }

std::string RunConfig::get(std::string_view key) const { return field(key).get(*this); }

const std::vector<std::string>& RunConfig::keys() {
  static const auto names = [] {
    std::vector<std::string> out;
    for (const auto& entry : fields()) out.push_back(entry.first);
    return out;
  }();
  return names;
}

std::vector<std::pair<std::string, std::string>> RunConfig::resolved() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& [name, f] : fields()) out.emplace_back(name, f.get(*this));
  return out;
}

std::string RunConfig::to_text() const {
  std::string out;
  for (const auto& [k, v] : resolved()) out += k + " = " + v + "\n";
  return out;
}

void RunConfig::validate() const {
  fmprior::validate(denoiser);
  fmprior::validate(schedule);
  fmprior::validate(deform);
  fmprior::validate(match);
  require(train.epochs >= 0 && train.batch_size >= 1 && train.learning_rate > 0.0, ErrorCode::kInvalidArgument,
          "train options must satisfy epochs >= 0, batch_size >= 1, learning_rate > 0");
  require(dataset.shapes >= 0 && dataset.k >= 1, ErrorCode::kInvalidArgument, "dataset shapes >= 0 and k >= 1");
}

void apply_config_text(RunConfig& config, std::string_view text, std::string_view origin) {
  int line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      fail(ErrorCode::kInvalidArgument,
           std::string(origin) + ":" + std::to_string(line_no) + ": expected 'key = value'");
    try {
      config.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const Error& e) {
      fail(e.code(), std::string(origin) + ":" + std::to_string(line_no) + ": " + e.detail());
    }
  }
}

RunConfig load_run_config(const std::filesystem::path& path) {
  RunConfig config;
  apply_config_text(config, read_file(path), path.string());
  return config;
}

void apply_override(RunConfig& config, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos)
    fail(ErrorCode::kInvalidArgument, "override '" + std::string(assignment) + "' is not key=value");
  config.set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

}  // namespace fmprior

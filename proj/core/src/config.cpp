#include "stagelens/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

#include "stagelens/error.hpp"

namespace stagelens {

namespace {

constexpr std::string_view kPriorityPrefix = "priority.";

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(std::string_view key, std::string_view text) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v))
    throw ConfigError("config key '" + std::string(key) + "': '" + std::string(text) + "' is not a number");
  return v;
}

std::int64_t parse_int(std::string_view key, std::string_view text) {
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw ConfigError("config key '" + std::string(key) + "': '" + std::string(text) + "' is not an integer");
  return v;
}

bool parse_bool(std::string_view key, std::string_view text) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  throw ConfigError("config key '" + std::string(key) + "': '" + std::string(text) + "' is not a boolean");
}

std::string bool_text(bool b) { return b ? "true" : "false"; }

}  // namespace

std::string format_number(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

void PipelineConfig::validate() const {
  imbalance.validate();
  skew.validate();
  placement.validate();
  straggler.validate();
  similarity.validate();
  outlier.validate();
  if (ultrashort.min_runtime_ms < 0) throw ConfigError("ultrashort_min_ms must be >= 0");
  if (!(ultrashort.median_fraction >= 0.0 && ultrashort.median_fraction <= 1.0))
    throw ConfigError("ultrashort_median_fraction must lie in [0,1]");
}

void PipelineConfig::set(std::string_view key, std::string_view raw) {
  const std::string_view value = trim(raw);
  if (key == "bc") {
    imbalance.balance_coefficient = parse_double(key, value);
  } else if (key == "th_ub") {
    imbalance.job_ratio_threshold = parse_double(key, value);
  } else if (key == "th_size") {
    skew.size_ratio_threshold = parse_double(key, value);
  } else if (key == "flag_small") {
    skew.flag_small = parse_bool(key, value);
  } else if (key == "th_d") {
    straggler.runtime_ratio_threshold = parse_double(key, value);
  } else if (key == "th_simi") {
    similarity.threshold = parse_double(key, value);
  } else if (key == "homogeneous") {
    similarity.homogeneous = parse_bool(key, value);
  } else if (key.starts_with(kPriorityPrefix)) {
    const auto name = key.substr(kPriorityPrefix.size());
    const Locality loc = parse_locality(name);
    if (loc == Locality::Unknown && name != "UNKNOWN")
      throw ConfigError("config key '" + std::string(key) + "': unknown locality");
    placement.priorities[loc] = parse_double(key, value);
  } else if (key == "transform") {
    auto t = metric::parse_transform(value);
    if (!t) throw ConfigError("transform must be mean or fft");
    outlier.transform = *t;
  } else if (key == "representative") {
    auto r = metric::parse_representative(value);
    if (!r) throw ConfigError("representative must be median or max_min");
    outlier.representative = *r;
  } else if (key == "dmin") {
    outlier.dmin = parse_double(key, value);
  } else if (key == "pct") {
    outlier.pct = parse_double(key, value);
  } else if (key == "ccrate") {
    outlier.ccrate = parse_double(key, value);
  } else if (key == "magnitude_gap") {
    outlier.magnitude_gap = parse_double(key, value);
  } else if (key == "min_relative_spread") {
    outlier.min_relative_spread = parse_double(key, value);
  } else if (key == "loading_ratio") {
    outlier.loading_ratio = parse_double(key, value);
  } else if (key == "pca_scaling") {
    auto s = metric::parse_pca_scaling(value);
    if (!s) throw ConfigError("pca_scaling must be standardize or center");
    outlier.pca_scaling = *s;
  } else if (key == "ultrashort_min_ms") {
    ultrashort.min_runtime_ms = parse_int(key, value);
  } else if (key == "ultrashort_median_fraction") {
    ultrashort.median_fraction = parse_double(key, value);
  } else {
    throw ConfigError("unknown config key '" + std::string(key) + "'");
  }
}

std::vector<std::pair<std::string, std::string>> PipelineConfig::entries() const {
  std::vector<std::pair<std::string, std::string>> out = {
      {"bc", format_number(imbalance.balance_coefficient)},
      {"th_ub", format_number(imbalance.job_ratio_threshold)},
      {"th_size", format_number(skew.size_ratio_threshold)},
      {"flag_small", bool_text(skew.flag_small)},
      {"th_d", format_number(straggler.runtime_ratio_threshold)},
      {"th_simi", format_number(similarity.threshold)},
      {"homogeneous", bool_text(similarity.homogeneous)},
  };
  for (auto loc : kAllLocalities) {
    out.emplace_back(std::string(kPriorityPrefix) + std::string(to_string(loc)), format_number(placement.priority(loc)));
  }
  out.insert(out.end(), {
                            {"transform", std::string(metric::to_string(outlier.transform))},
                            {"representative", std::string(metric::to_string(outlier.representative))},
                            {"dmin", format_number(outlier.dmin)},
                            {"pct", format_number(outlier.pct)},
                            {"ccrate", format_number(outlier.ccrate)},
                            {"magnitude_gap", format_number(outlier.magnitude_gap)},
                            {"min_relative_spread", format_number(outlier.min_relative_spread)},
                            {"loading_ratio", format_number(outlier.loading_ratio)},
                            {"pca_scaling", std::string(metric::to_string(outlier.pca_scaling))},
                            {"ultrashort_min_ms", std::to_string(ultrashort.min_runtime_ms)},
                            {"ultrashort_median_fraction", format_number(ultrashort.median_fraction)},
                        });
  return out;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (auto& [k, v] : PipelineConfig{}.entries()) out.push_back(k);
  return out;
}

void apply_config(PipelineConfig& cfg, std::istream& in, std::string_view source) {
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    std::string_view s = trim(text);
    if (s.empty() || s.front() == '#') continue;
    const auto eq = s.find('=');
    if (eq == std::string_view::npos) throw ParseError(std::string(source), line, "expected 'key = value'");
    const auto key = trim(s.substr(0, eq));
    const auto value = trim(s.substr(eq + 1));
    try {
      cfg.set(key, value);
    } catch (const ConfigError& e) {
      throw ParseError(std::string(source), line, e.what());
    }
  }
}

void apply_config_file(PipelineConfig& cfg, const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot open config file " + file.string());
  apply_config(cfg, in, file.filename().string());
}

}  // namespace stagelens

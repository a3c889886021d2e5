#pragma once

// Pipeline configuration: every detector threshold and mode, loadable from a
// flat `key = value` file. Precedence is flag > file > default.

#include <filesystem>
#include <istream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "stagelens/app_detect.hpp"
#include "stagelens/correlate.hpp"
#include "stagelens/metric_detect.hpp"
#include "stagelens/node_detect.hpp"

namespace stagelens {

struct PipelineConfig {
  app::ImbalanceConfig imbalance;
  app::SkewConfig skew;
  app::PlacementConfig placement;
  app::StragglerConfig straggler;
  node::SimilarityConfig similarity;
  metric::OutlierConfig outlier;
  correlate::UltrashortPolicy ultrashort;

  /// Throws ConfigError naming the first out-of-range field.
  void validate() const;

  /// Sets one key from its text form. Throws ConfigError for unknown keys or
  /// unparsable values; range checks happen in validate().
  void set(std::string_view key, std::string_view value);

  /// Every key with its current value, in documentation order.
  std::vector<std::pair<std::string, std::string>> entries() const;
};

/// Keys accepted by PipelineConfig::set.
std::vector<std::string> config_keys();

/// Applies `key = value` lines (blank lines and `#` comments ignored) on top
/// of `cfg`. Errors carry the source name and line.
void apply_config(PipelineConfig& cfg, std::istream& in, std::string_view source = "<config>");
void apply_config_file(PipelineConfig& cfg, const std::filesystem::path& file);

/// Shortest text that parses back to the same double.
std::string format_number(double value);

}  // namespace stagelens

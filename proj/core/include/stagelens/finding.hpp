#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace stagelens {

enum class FindingKind {
  WorkloadImbalance,
  SkewDataSize,
  UnevenPlacement,
  Straggler,
  AbnormalNode,
  OutlierMetric,
};

inline constexpr FindingKind kAllFindingKinds[] = {
    FindingKind::WorkloadImbalance, FindingKind::SkewDataSize, FindingKind::UnevenPlacement,
    FindingKind::Straggler,         FindingKind::AbnormalNode, FindingKind::OutlierMetric};

std::string_view to_string(FindingKind kind) noexcept;
std::optional<FindingKind> parse_finding_kind(std::string_view text) noexcept;

/// One detector verdict. `threshold` is the configured value the score was
/// compared against; for AbnormalNode the score fell below it.
struct Finding {
  FindingKind kind = FindingKind::WorkloadImbalance;
  std::string stage_id;
  std::vector<std::string> nodes;
  std::vector<std::string> tasks;
  std::vector<std::string> metrics;
  double score = 0.0;
  double threshold = 0.0;
  std::string detail;

  /// The node a finding is attributed to (first subject node, or empty).
  const std::string& node() const noexcept;

  friend bool operator==(const Finding&, const Finding&) = default;
};

}  // namespace stagelens

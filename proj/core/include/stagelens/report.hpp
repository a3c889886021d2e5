#pragma once

// Pipeline orchestration and diagnosis reports.

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "stagelens/config.hpp"
#include "stagelens/finding.hpp"
#include "stagelens/trace.hpp"

namespace stagelens::report {

inline constexpr std::string_view kReportSchema = "stagelens-report/1";

struct NodeScore {
  std::string node;
  double value = 0.0;

  friend bool operator==(const NodeScore&, const NodeScore&) = default;
};

struct StageReport {
  std::string stage_id;
  std::string job_id;
  std::string imbalance;  // balanced | unbalanced | not evaluable
  std::vector<NodeScore> similarity;  // node name order
  std::vector<Finding> findings;      // grouped by kind, detector order
  std::vector<std::string> notes;

  friend bool operator==(const StageReport&, const StageReport&) = default;
};

struct JobSummary {
  std::string job_id;
  std::string verdict;
  double ratio = 0.0;  // Ratio_UB
  std::size_t unbalanced_stages = 0;
  std::size_t evaluable_stages = 0;

  friend bool operator==(const JobSummary&, const JobSummary&) = default;
};

struct Mode {
  std::string transform;       // mean | fft
  std::string representative;  // median | max_min
  double ccrate = 0.95;
  double dmin = 0.6;

  friend bool operator==(const Mode&, const Mode&) = default;
};

struct DiagnosisReport {
  Mode mode;
  std::vector<std::pair<std::string, std::string>> config;
  std::vector<StageReport> stages;
  std::vector<JobSummary> jobs;

  std::vector<Finding> all_findings() const;
  std::size_t finding_count() const noexcept;

  friend bool operator==(const DiagnosisReport&, const DiagnosisReport&) = default;
};

/// Runs every detector on every stage. Per-stage problems become notes and
/// never abort the run. Throws PreconditionError for a trace without stages
/// and ConfigError for an invalid configuration.
DiagnosisReport diagnose(const Trace& trace, const PipelineConfig& cfg);

enum class Format { Text, Structured };

/// Accepts "text" and "structured" (alias "json"); throws ConfigError otherwise.
Format parse_format(std::string_view name);

std::string render(const DiagnosisReport& report, Format format);
std::string render_text(const DiagnosisReport& report);
std::string render_structured(const DiagnosisReport& report);

/// Inverse of render_structured. Throws ParseError on malformed input.
DiagnosisReport parse_structured(std::string_view text);

}  // namespace stagelens::report

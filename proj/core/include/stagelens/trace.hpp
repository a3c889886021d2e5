#pragma once

// Canonical data model: jobs -> stages -> tasks plus per-node metric series,
// all on one cluster clock, and the on-disk trace directory format.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace stagelens {

/// Milliseconds since the Unix epoch (UTC).
using TimestampMs = std::int64_t;
using DurationMs = std::int64_t;

inline constexpr std::string_view kTraceSchema = "stagelens-trace/1";

/// Merged Spark/Hadoop data-locality vocabulary.
enum class Locality { ProcessLocal, NodeLocal, RackLocal, Any, OffSwitch, Unknown };

inline constexpr Locality kAllLocalities[] = {Locality::ProcessLocal, Locality::NodeLocal,
                                              Locality::RackLocal,    Locality::Any,
                                              Locality::OffSwitch,    Locality::Unknown};

std::string_view to_string(Locality locality) noexcept;

/// Maps both vocabularies ("NODE_LOCAL", "NODE_LOCALITY", "OFF_SWITCH", ...).
/// Anything unrecognised becomes Locality::Unknown.
Locality parse_locality(std::string_view text) noexcept;

struct Task {
  std::string task_id;
  std::string stage_id;
  std::string node;
  TimestampMs launch_time = 0;
  TimestampMs finish_time = 0;
  Locality locality = Locality::Unknown;
  double data_size = 0.0;  // input bytes
  bool succeeded = true;

  DurationMs runtime() const noexcept { return finish_time - launch_time; }

  friend bool operator==(const Task&, const Task&) = default;
};

struct Stage {
  std::string stage_id;
  std::string job_id;
  std::vector<Task> tasks;

  /// Envelope of the task spans. Both require a non-empty stage.
  TimestampMs start_time() const;
  TimestampMs finish_time() const;

  friend bool operator==(const Stage&, const Stage&) = default;
};

struct Job {
  std::string job_id;
  std::vector<Stage> stages;

  friend bool operator==(const Job&, const Job&) = default;
};

struct MetricSample {
  std::string node;
  TimestampMs timestamp = 0;
  std::map<std::string, double> values;  // absent key == missing value

  friend bool operator==(const MetricSample&, const MetricSample&) = default;
};

using MetricSeries = std::vector<MetricSample>;

struct Trace {
  std::vector<std::string> cluster;
  std::vector<Job> jobs;
  std::map<std::string, MetricSeries> metrics;
  /// Per-node correction added to node-local timestamps. In memory, all
  /// timestamps are already corrected.
  std::map<std::string, DurationMs> clock_offsets;

  std::size_t stage_count() const noexcept;
  const Stage* find_stage(std::string_view stage_id) const noexcept;

  friend bool operator==(const Trace&, const Trace&) = default;
};

/// Returns one message per violated invariant; empty when the trace is valid.
std::vector<std::string> validate(const Trace& trace);

/// Reads a canonical trace directory. Throws ParseError on malformed lines
/// and ValidationError (listing every violation) on invariant breaks.
Trace load_trace(const std::filesystem::path& dir);

/// Writes `trace` as a canonical trace directory, creating it if needed.
/// Output bytes depend only on the trace value.
void save_trace(const Trace& trace, const std::filesystem::path& dir);

namespace trace_files {
inline constexpr std::string_view kCluster = "cluster.jsonl";
inline constexpr std::string_view kJobs = "jobs.jsonl";
inline constexpr std::string_view kStages = "stages.jsonl";
inline constexpr std::string_view kTasks = "tasks.jsonl";
inline constexpr std::string_view kMetrics = "metrics.jsonl";
}  // namespace trace_files

}  // namespace stagelens

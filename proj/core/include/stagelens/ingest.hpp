#pragma once

// Adapters from raw collector output (Spark event logs, whitespace-delimited
// /proc and PMU counter dumps) to the canonical Trace.

#include <cstddef>
#include <filesystem>
#include <istream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "stagelens/trace.hpp"

namespace stagelens::ingest {

enum class MetricLayer { System, Architecture };

std::string_view to_string(MetricLayer layer) noexcept;

/// Raw counter columns, in collector order (timestamp excluded).
std::span<const std::string_view> raw_columns(MetricLayer layer) noexcept;

struct DerivedMetric {
  std::string_view name;
  MetricLayer layer;
};

/// The 8 system-level and 12 architecture-level derived metrics, in
/// canonical order. Every metric vector and matrix uses this ordering.
std::span<const DerivedMetric> derived_metrics() noexcept;

/// Index of `name` in derived_metrics(), or -1.
int derived_metric_index(std::string_view name) noexcept;

struct LineError {
  std::size_t line = 0;
  std::string message;
};

struct SparkLogResult {
  Trace trace;  // cluster + jobs only
  std::size_t skipped_events = 0;
  std::vector<LineError> errors;
};

/// Parses line-delimited Spark listener events. Each SparkListenerTaskEnd
/// event becomes a Task; SparkListenerJobStart maps stages to jobs (stages
/// never mentioned by a job start go to job "0"). Throws Error("no tasks")
/// when no usable task-end event was found.
SparkLogResult parse_spark_event_log(std::istream& lines, std::string_view source = "<events>");

struct RawMetricRow {
  TimestampMs timestamp = 0;
  std::vector<double> counters;
};

struct MetricFileResult {
  std::vector<RawMetricRow> rows;  // ordered by timestamp, unique timestamps
  std::vector<LineError> errors;
};

/// Parses one node's counter dump. An optional header line starting with
/// "timestamp" and '#' comments are skipped. Timestamps below 1e11 are taken
/// as epoch seconds and converted to ms. A row whose column count differs
/// from the layer's schema throws ParseError; a non-numeric cell only drops
/// that row. Duplicate timestamps keep the last row.
MetricFileResult parse_metric_file(std::istream& lines, MetricLayer layer, std::string_view source = "<metrics>");

struct DeriveOptions {
  /// When false, negative counter deltas produce negative rates instead of
  /// missing values (reproduces the raw collector behaviour).
  bool detect_counter_wrap = true;
};

/// Computes the layer's derived metrics over the interval (prev, curr].
/// Throws PreconditionError when curr is not strictly after prev.
MetricSample derive_metrics(const RawMetricRow& prev, const RawMetricRow& curr, MetricLayer layer,
                            const DeriveOptions& options = {});

/// Derives a whole series (one sample per consecutive row pair).
MetricSeries derive_series(std::string_view node, std::span<const RawMetricRow> rows, MetricLayer layer,
                           const DeriveOptions& options = {});

struct IngestReport {
  Trace trace;
  std::size_t skipped_events = 0;
  std::vector<std::string> warnings;  // "<file>:<line>: message"
};

/// Builds a canonical trace from an event log plus a directory of
/// `<node>.system.tsv` / `<node>.arch.tsv` files. System and architecture
/// samples with equal timestamps are merged into one MetricSample.
IngestReport ingest_files(const std::filesystem::path& event_log, const std::filesystem::path& metrics_dir,
                          const DeriveOptions& options = {});

}  // namespace stagelens::ingest

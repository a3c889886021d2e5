#pragma once

// Stage-resource correlation: a stage's execution window selects the slice of
// every participating node's metric series, from which the per-stage feature
// datasets are built.

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "stagelens/trace.hpp"

namespace stagelens::correlate {

struct StageWindow {
  std::string stage_id;
  TimestampMs start_time = 0;
  TimestampMs finish_time = 0;
  std::set<std::string> nodes;

  bool contains(TimestampMs t) const noexcept { return start_time <= t && t <= finish_time; }
};

/// Throws PreconditionError for a stage without tasks.
StageWindow stage_window(const Stage& stage);

struct SlicedMetrics {
  std::map<std::string, MetricSeries> series;  // one entry per window node
  std::vector<std::string> gaps;               // window nodes with no in-window sample
};

/// Inclusive on both window bounds.
SlicedMetrics slice_metrics(const Trace& trace, const StageWindow& window);

/// A task is ultrashort when its runtime is below
/// max(min_runtime_ms, median_fraction * median stage runtime).
struct UltrashortPolicy {
  DurationMs min_runtime_ms = 1000;
  double median_fraction = 0.05;
};

DurationMs ultrashort_cutoff(const Stage& stage, const UltrashortPolicy& policy);

struct TaskDataSize {
  std::string node;
  std::string task_id;
  double data_size = 0.0;
};

struct TaskLocality {
  std::string node;
  std::string task_id;
  Locality locality = Locality::Unknown;
  DurationMs runtime = 0;
};

/// Per-node mean metric vector; entries align with FeatureDatasets::metric_names.
using MetricVector = std::vector<std::optional<double>>;

/// Rows are in-window samples in time order; columns follow metric_names.
struct MetricMatrix {
  std::vector<TimestampMs> timestamps;
  std::vector<std::vector<std::optional<double>>> rows;
};

struct FeatureDatasets {
  std::string stage_id;
  std::vector<std::string> metric_names;
  std::map<std::string, std::size_t> tnum;  // every cluster node, ultrashort and failed tasks excluded
  std::size_t ultrashort_count = 0;
  std::size_t failed_count = 0;
  std::vector<TaskDataSize> data_size;  // succeeded tasks
  std::vector<TaskLocality> locality;   // succeeded tasks
  std::map<std::string, MetricVector> vectors;
  std::map<std::string, MetricMatrix> matrices;
  std::vector<std::string> missing_metrics;  // nodes with tasks but no in-window samples
};

/// Builds the five per-stage datasets. `cluster` supplies the nodes that get
/// tnum = 0 when they ran nothing. Metric columns are the derived metrics
/// that occur in the slice, in canonical order.
FeatureDatasets build_datasets(const Stage& stage, const std::vector<std::string>& cluster,
                               const SlicedMetrics& sliced, const UltrashortPolicy& policy = {});

/// Mean runtime (ms) of succeeded tasks per node.
std::map<std::string, double> mean_runtime_by_node(const FeatureDatasets& datasets);

}  // namespace stagelens::correlate

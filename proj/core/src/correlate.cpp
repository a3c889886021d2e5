#include "stagelens/correlate.hpp"

#include <algorithm>
#include <cmath>

#include "stagelens/error.hpp"
#include "stagelens/ingest.hpp"
#include "stagelens/stats.hpp"

namespace stagelens::correlate {

StageWindow stage_window(const Stage& stage) {
  if (stage.tasks.empty()) throw PreconditionError("stage " + stage.stage_id + " has no tasks");
  StageWindow w;
  w.stage_id = stage.stage_id;
  w.start_time = stage.start_time();
  w.finish_time = stage.finish_time();
  for (const auto& task : stage.tasks) w.nodes.insert(task.node);
  return w;
}

SlicedMetrics slice_metrics(const Trace& trace, const StageWindow& window) {
  SlicedMetrics out;
  for (const auto& node : window.nodes) {
    auto& slice = out.series[node];
    if (auto it = trace.metrics.find(node); it != trace.metrics.end()) {
      const auto& series = it->second;
      auto first = std::lower_bound(series.begin(), series.end(), window.start_time,
                                    [](const MetricSample& s, TimestampMs t) { return s.timestamp < t; });
      auto last = std::upper_bound(first, series.end(), window.finish_time,
                                   [](TimestampMs t, const MetricSample& s) { return t < s.timestamp; });
      slice.assign(first, last);
    }
    if (slice.empty()) out.gaps.push_back(node);
  }
  return out;
}

DurationMs ultrashort_cutoff(const Stage& stage, const UltrashortPolicy& policy) {
  std::vector<double> runtimes;
  runtimes.reserve(stage.tasks.size());
  for (const auto& t : stage.tasks) runtimes.push_back(static_cast<double>(t.runtime()));
  const double med = runtimes.empty() ? 0.0 : stats::median(runtimes);
  return std::max(policy.min_runtime_ms, static_cast<DurationMs>(std::llround(policy.median_fraction * med)));
}

FeatureDatasets build_datasets(const Stage& stage, const std::vector<std::string>& cluster,
                               const SlicedMetrics& sliced, const UltrashortPolicy& policy) {
  FeatureDatasets ds;
  ds.stage_id = stage.stage_id;
  for (const auto& node : cluster) ds.tnum[node] = 0;

  const DurationMs cutoff = ultrashort_cutoff(stage, policy);
  std::set<std::string> task_nodes;
  for (const auto& task : stage.tasks) {
    task_nodes.insert(task.node);
    if (!task.succeeded) {
      ++ds.failed_count;
      continue;
    }
    ds.data_size.push_back({task.node, task.task_id, task.data_size});
    ds.locality.push_back({task.node, task.task_id, task.locality, task.runtime()});
    if (task.runtime() < cutoff) {
      ++ds.ultrashort_count;
    } else {
      ++ds.tnum[task.node];
    }
  }

  std::set<std::string> present;
  for (const auto& [node, series] : sliced.series) {
    for (const auto& s : series) {
      for (const auto& [name, value] : s.values) present.insert(name);
    }
  }
  for (const auto& m : ingest::derived_metrics()) {
    if (present.contains(std::string(m.name))) ds.metric_names.emplace_back(m.name);
  }

  for (const auto& [node, series] : sliced.series) {
    if (series.empty()) {
      if (task_nodes.contains(node)) ds.missing_metrics.push_back(node);
      continue;
    }
    MetricMatrix matrix;
    MetricVector vec(ds.metric_names.size());
    std::vector<double> sum(ds.metric_names.size(), 0.0);
    std::vector<std::size_t> count(ds.metric_names.size(), 0);
    for (const auto& s : series) {
      matrix.timestamps.push_back(s.timestamp);
      auto& row = matrix.rows.emplace_back(ds.metric_names.size());
      for (std::size_t c = 0; c < ds.metric_names.size(); ++c) {
        if (auto it = s.values.find(ds.metric_names[c]); it != s.values.end()) {
          row[c] = it->second;
          sum[c] += it->second;
          ++count[c];
        }
      }
    }
    for (std::size_t c = 0; c < vec.size(); ++c) {
      if (count[c] > 0) vec[c] = sum[c] / static_cast<double>(count[c]);
    }
    ds.vectors.emplace(node, std::move(vec));
    ds.matrices.emplace(node, std::move(matrix));
  }
  return ds;
}

std::map<std::string, double> mean_runtime_by_node(const FeatureDatasets& datasets) {
  std::map<std::string, std::pair<double, std::size_t>> acc;
  for (const auto& t : datasets.locality) {
    auto& [sum, n] = acc[t.node];
    sum += static_cast<double>(t.runtime);
    ++n;
  }
  std::map<std::string, double> out;
  for (const auto& [node, p] : acc) out[node] = p.first / static_cast<double>(p.second);
  return out;
}

}  // namespace stagelens::correlate

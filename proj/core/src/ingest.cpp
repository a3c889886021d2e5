#include "stagelens/ingest.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "stagelens/error.hpp"

namespace stagelens::ingest {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, 46> kSystemColumns = {
    "usr",          "nice",          "sys",          "idle",        "iowait",       "irq",
    "softirq",      "intr",          "ctx",          "procs",       "running",      "blocked",
    "mem_total",    "free",          "buffers",      "cached",      "swap_cached",  "active",
    "inactive",     "swap_total",    "swap_free",    "pgin",        "pgout",        "pgfault",
    "pgmajfault",   "active_conn",   "passive_conn", "rbytes",      "rpackets",     "rerrs",
    "rdrop",        "sbytes",        "spackets",     "serrs",       "sdrop",        "read",
    "read_merged",  "read_sectors",  "read_time",    "write",       "write_merged", "write_sectors",
    "write_time",   "progress_io",   "io_time",      "io_time_weighted"};

constexpr std::array<std::string_view, 20> kArchColumns = {
    "cycle",     "ins",      "L2_miss", "L2_refe", "L3_miss",   "L3_refe", "DTLB_miss",
    "ITLB_miss", "L1I_miss", "L1I_hit", "MLP",     "MUL_ins",   "DIV_ins", "FP_ins",
    "LOAD_ins",  "STORE_ins", "BR_ins", "BR_miss", "unc_read",  "unc_write"};

constexpr std::array<DerivedMetric, 20> kDerived = {{
    {"cpu_usage", MetricLayer::System},        {"mem_usage", MetricLayer::System},
    {"ioWaitRatio", MetricLayer::System},      {"weighted_io", MetricLayer::System},
    {"diskR_band", MetricLayer::System},       {"diskW_band", MetricLayer::System},
    {"netS_band", MetricLayer::System},        {"netR_band", MetricLayer::System},
    {"IPC", MetricLayer::Architecture},        {"L2_MPKI", MetricLayer::Architecture},
    {"L3_MPKI", MetricLayer::Architecture},    {"L1I_MPKI", MetricLayer::Architecture},
    {"ITLB_MPKI", MetricLayer::Architecture},  {"DTLB_MPKI", MetricLayer::Architecture},
    {"MUL_Ratio", MetricLayer::Architecture},  {"DIV_Ratio", MetricLayer::Architecture},
    {"FP_Ratio", MetricLayer::Architecture},   {"LOAD_Ratio", MetricLayer::Architecture},
    {"STORE_Ratio", MetricLayer::Architecture}, {"BR_Ratio", MetricLayer::Architecture},
}};

constexpr std::size_t column(std::span<const std::string_view> columns, std::string_view name) {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i] == name) return i;
  }
  return columns.size();
}

template <std::size_t N>
constexpr std::size_t sys_col(const char (&name)[N]) {
  return column(kSystemColumns, name);
}
template <std::size_t N>
constexpr std::size_t arch_col(const char (&name)[N]) {
  return column(kArchColumns, name);
}

std::optional<double> parse_number(std::string_view token) {
  double value = 0.0;
  const char* first = token.data();
  const char* last = token.data() + token.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last || !std::isfinite(value)) return std::nullopt;
  return value;
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string json_scalar_to_string(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
  if (v.is_number_unsigned()) return std::to_string(v.get<std::uint64_t>());
  return v.dump();
}

double optional_number(const json& obj, std::initializer_list<const char*> path) {
  const json* cur = &obj;
  for (const char* key : path) {
    if (!cur->is_object()) return 0.0;
    auto it = cur->find(key);
    if (it == cur->end()) return 0.0;
    cur = &*it;
  }
  return cur->is_number() ? cur->get<double>() : 0.0;
}

}  // namespace

std::string_view to_string(MetricLayer layer) noexcept {
  return layer == MetricLayer::System ? "system" : "arch";
}

std::span<const std::string_view> raw_columns(MetricLayer layer) noexcept {
  if (layer == MetricLayer::System) return kSystemColumns;
  return kArchColumns;
}

std::span<const DerivedMetric> derived_metrics() noexcept { return kDerived; }

int derived_metric_index(std::string_view name) noexcept {
  for (std::size_t i = 0; i < kDerived.size(); ++i) {
    if (kDerived[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

SparkLogResult parse_spark_event_log(std::istream& lines, std::string_view source) {
  SparkLogResult result;
  std::vector<std::string> stage_order;
  std::map<std::string, std::vector<Task>> stage_tasks;
  std::map<std::string, std::string> stage_job;
  std::set<std::string> hosts;

  std::string text;
  std::size_t line_no = 0;
  while (std::getline(lines, text)) {
    ++line_no;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    json event = json::parse(text, nullptr, false);
    if (event.is_discarded() || !event.is_object()) {
      result.errors.push_back({line_no, "line is not a JSON object"});
      continue;
    }
    auto kind = event.find("Event");
    if (kind == event.end() || !kind->is_string()) {
      result.errors.push_back({line_no, "missing \"Event\" field"});
      continue;
    }

    try {
      if (*kind == "SparkListenerJobStart") {
        const std::string job = json_scalar_to_string(event.at("Job ID"));
        for (const auto& sid : event.at("Stage IDs")) stage_job[json_scalar_to_string(sid)] = job;
        continue;
      }
      if (*kind != "SparkListenerTaskEnd") {
        ++result.skipped_events;
        continue;
      }

      const json& info = event.at("Task Info");
      Task task;
      task.stage_id = json_scalar_to_string(event.at("Stage ID"));
      task.task_id = json_scalar_to_string(info.at("Task ID"));
      task.node = info.at("Host").get<std::string>();
      task.launch_time = info.at("Launch Time").get<std::int64_t>();
      task.finish_time = info.at("Finish Time").get<std::int64_t>();
      task.locality = parse_locality(info.value("Locality", std::string{}));
      bool failed = info.value("Failed", false);
      if (auto reason = event.find("Task End Reason"); reason != event.end() && reason->is_object()) {
        failed = failed || reason->value("Reason", std::string{"Success"}) != "Success";
      }
      task.succeeded = !failed;
      if (auto metrics = event.find("Task Metrics"); metrics != event.end()) {
        task.data_size = optional_number(*metrics, {"Input Metrics", "Bytes Read"}) +
                         optional_number(*metrics, {"Shuffle Read Metrics", "Remote Bytes Read"}) +
                         optional_number(*metrics, {"Shuffle Read Metrics", "Local Bytes Read"});
      }
      if (task.node.empty()) {
        result.errors.push_back({line_no, "task has an empty Host"});
        continue;
      }
      if (task.finish_time < task.launch_time) {
        result.errors.push_back({line_no, "task finishes before it launches"});
        continue;
      }
      if (task.data_size < 0) {
        result.errors.push_back({line_no, "negative input byte count"});
        continue;
      }
      hosts.insert(task.node);
      auto [it, inserted] = stage_tasks.try_emplace(task.stage_id);
      if (inserted) stage_order.push_back(task.stage_id);
      it->second.push_back(std::move(task));
    } catch (const json::exception& e) {
      result.errors.push_back({line_no, std::string("malformed event: ") + e.what()});
    }
  }

  if (stage_order.empty()) throw Error(std::string(source) + ": no tasks");

  std::map<std::string, std::size_t> job_index;
  for (const auto& sid : stage_order) {
    auto j = stage_job.find(sid);
    const std::string job_id = j == stage_job.end() ? "0" : j->second;
    auto [it, inserted] = job_index.try_emplace(job_id, result.trace.jobs.size());
    if (inserted) result.trace.jobs.push_back(Job{job_id, {}});
    Stage stage{sid, job_id, std::move(stage_tasks[sid])};
    result.trace.jobs[it->second].stages.push_back(std::move(stage));
  }
  result.trace.cluster.assign(hosts.begin(), hosts.end());
  return result;
}

MetricFileResult parse_metric_file(std::istream& lines, MetricLayer layer, std::string_view source) {
  const std::size_t expected = raw_columns(layer).size() + 1;
  MetricFileResult result;
  std::string text;
  std::size_t line_no = 0;
  while (std::getline(lines, text)) {
    ++line_no;
    auto tokens = split_ws(text);
    if (tokens.empty() || tokens.front().starts_with('#')) continue;
    if (tokens.front() == "timestamp") continue;
    if (tokens.size() != expected) {
      throw ParseError(std::string(source), line_no,
                       "expected " + std::to_string(expected) + " columns (timestamp + " +
                           std::to_string(expected - 1) + " " + std::string(to_string(layer)) +
                           " counters), found " + std::to_string(tokens.size()));
    }
    RawMetricRow row;
    row.counters.reserve(expected - 1);
    bool ok = true;
    std::optional<double> ts = parse_number(tokens[0]);
    if (!ts) {
      result.errors.push_back({line_no, "non-numeric timestamp '" + std::string(tokens[0]) + "'"});
      continue;
    }
    row.timestamp = static_cast<TimestampMs>(std::llround(*ts < 1e11 ? *ts * 1000.0 : *ts));
    for (std::size_t i = 1; i < tokens.size(); ++i) {
      auto v = parse_number(tokens[i]);
      if (!v) {
        result.errors.push_back({line_no, "non-numeric value '" + std::string(tokens[i]) + "' in column " +
                                              std::string(raw_columns(layer)[i - 1])});
        ok = false;
        break;
      }
      row.counters.push_back(*v);
    }
    if (ok) result.rows.push_back(std::move(row));
  }

  std::stable_sort(result.rows.begin(), result.rows.end(),
                   [](const RawMetricRow& a, const RawMetricRow& b) { return a.timestamp < b.timestamp; });
  std::vector<RawMetricRow> unique;
  unique.reserve(result.rows.size());
  for (auto& row : result.rows) {
    if (!unique.empty() && unique.back().timestamp == row.timestamp) {
      unique.back() = std::move(row);
    } else {
      unique.push_back(std::move(row));
    }
  }
  result.rows = std::move(unique);
  return result;
}

namespace {

class Deltas {
 public:
  Deltas(const RawMetricRow& prev, const RawMetricRow& curr, bool detect_wrap)
      : prev_(prev), curr_(curr), detect_wrap_(detect_wrap) {}

  std::optional<double> operator()(std::size_t col) const {
    const double d = curr_.counters[col] - prev_.counters[col];
    if (detect_wrap_ && d < 0) return std::nullopt;
    return d;
  }

  double current(std::size_t col) const { return curr_.counters[col]; }

 private:
  const RawMetricRow& prev_;
  const RawMetricRow& curr_;
  bool detect_wrap_;
};

void derive_system(const Deltas& d, double dt_s, std::map<std::string, double>& out) {
  constexpr std::array busy_cols = {sys_col("usr"), sys_col("nice"), sys_col("sys"), sys_col("irq"),
                                    sys_col("softirq")};
  double busy = 0.0;
  bool busy_ok = true;
  for (auto c : busy_cols) {
    auto v = d(c);
    if (!v) {
      busy_ok = false;
      break;
    }
    busy += *v;
  }
  auto idle = d(sys_col("idle"));
  auto iowait = d(sys_col("iowait"));
  if (busy_ok && idle && iowait) {
    const double total = busy + *idle + *iowait;
    out["cpu_usage"] = total != 0.0 ? busy / total : 0.0;
    out["ioWaitRatio"] = total != 0.0 ? *iowait / total : 0.0;
  }

  const double mem_total = d.current(sys_col("mem_total"));
  if (mem_total > 0) {
    const double avail = d.current(sys_col("free")) + d.current(sys_col("buffers")) + d.current(sys_col("cached"));
    out["mem_usage"] = 1.0 - avail / mem_total;
  }

  auto rate = [&](const char* name, std::size_t col, double scale) {
    if (auto v = d(col)) out[name] = *v * scale / dt_s;
  };
  rate("weighted_io", sys_col("io_time_weighted"), 1.0);
  rate("diskR_band", sys_col("read_sectors"), 512.0);
  rate("diskW_band", sys_col("write_sectors"), 512.0);
  rate("netS_band", sys_col("sbytes"), 1.0);
  rate("netR_band", sys_col("rbytes"), 1.0);
}

void derive_arch(const Deltas& d, std::map<std::string, double>& out) {
  auto ins = d(arch_col("ins"));
  auto cycle = d(arch_col("cycle"));
  if (ins && cycle && *cycle != 0.0) out["IPC"] = *ins / *cycle;
  if (!ins || *ins == 0.0) return;

  auto per_ins = [&](const char* name, std::size_t col, double scale) {
    if (auto v = d(col)) out[name] = *v * scale / *ins;
  };
  per_ins("L2_MPKI", arch_col("L2_miss"), 1000.0);
  per_ins("L3_MPKI", arch_col("L3_miss"), 1000.0);
  per_ins("L1I_MPKI", arch_col("L1I_miss"), 1000.0);
  per_ins("ITLB_MPKI", arch_col("ITLB_miss"), 1000.0);
  per_ins("DTLB_MPKI", arch_col("DTLB_miss"), 1000.0);
  per_ins("MUL_Ratio", arch_col("MUL_ins"), 1.0);
  per_ins("DIV_Ratio", arch_col("DIV_ins"), 1.0);
  per_ins("FP_Ratio", arch_col("FP_ins"), 1.0);
  per_ins("LOAD_Ratio", arch_col("LOAD_ins"), 1.0);
  per_ins("STORE_Ratio", arch_col("STORE_ins"), 1.0);
  per_ins("BR_Ratio", arch_col("BR_ins"), 1.0);
}

}  // namespace

MetricSample derive_metrics(const RawMetricRow& prev, const RawMetricRow& curr, MetricLayer layer,
                            const DeriveOptions& options) {
  if (curr.timestamp <= prev.timestamp)
    throw PreconditionError("derive_metrics: timestamps must strictly increase (" + std::to_string(prev.timestamp) +
                            " -> " + std::to_string(curr.timestamp) + ")");
  const std::size_t n = raw_columns(layer).size();
  if (prev.counters.size() != n || curr.counters.size() != n)
    throw PreconditionError("derive_metrics: counter count does not match the " + std::string(to_string(layer)) +
                            " schema");

  MetricSample sample;
  sample.timestamp = curr.timestamp;
  const Deltas deltas(prev, curr, options.detect_counter_wrap);
  if (layer == MetricLayer::System) {
    derive_system(deltas, static_cast<double>(curr.timestamp - prev.timestamp) / 1000.0, sample.values);
  } else {
    derive_arch(deltas, sample.values);
  }
  return sample;
}

MetricSeries derive_series(std::string_view node, std::span<const RawMetricRow> rows, MetricLayer layer,
                           const DeriveOptions& options) {
  MetricSeries out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    auto sample = derive_metrics(rows[i - 1], rows[i], layer, options);
    sample.node = std::string(node);
    out.push_back(std::move(sample));
  }
  return out;
}

IngestReport ingest_files(const std::filesystem::path& event_log, const std::filesystem::path& metrics_dir,
                          const DeriveOptions& options) {
  IngestReport report;
  {
    std::ifstream in(event_log);
    if (!in) throw IoError("cannot open event log " + event_log.string());
    auto parsed = parse_spark_event_log(in, event_log.filename().string());
    report.trace = std::move(parsed.trace);
    report.skipped_events = parsed.skipped_events;
    for (const auto& e : parsed.errors)
      report.warnings.push_back(event_log.filename().string() + ":" + std::to_string(e.line) + ": " + e.message);
  }

  std::set<std::string> nodes(report.trace.cluster.begin(), report.trace.cluster.end());
  if (!metrics_dir.empty()) {
    if (!std::filesystem::is_directory(metrics_dir))
      throw IoError("metrics directory not found: " + metrics_dir.string());

    // Sorted so that merge order never depends on directory iteration order.
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(metrics_dir)) {
      if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());

    std::map<std::string, std::map<TimestampMs, MetricSample>> merged;
    for (const auto& path : files) {
      const std::string name = path.filename().string();
      std::optional<MetricLayer> layer;
      std::string node;
      if (name.ends_with(".system.tsv")) {
        layer = MetricLayer::System;
        node = name.substr(0, name.size() - std::string_view(".system.tsv").size());
      } else if (name.ends_with(".arch.tsv")) {
        layer = MetricLayer::Architecture;
        node = name.substr(0, name.size() - std::string_view(".arch.tsv").size());
      }
      if (!layer || node.empty()) continue;

      std::ifstream in(path);
      if (!in) throw IoError("cannot open " + path.string());
      auto parsed = parse_metric_file(in, *layer, name);
      for (const auto& e : parsed.errors) report.warnings.push_back(name + ":" + std::to_string(e.line) + ": " + e.message);
      for (auto& sample : derive_series(node, parsed.rows, *layer, options)) {
        auto& slot = merged[node][sample.timestamp];
        slot.node = node;
        slot.timestamp = sample.timestamp;
        slot.values.merge(sample.values);
      }
      nodes.insert(node);
    }
    for (auto& [node, by_time] : merged) {
      auto& series = report.trace.metrics[node];
      for (auto& [ts, sample] : by_time) series.push_back(std::move(sample));
    }
  }
  report.trace.cluster.assign(nodes.begin(), nodes.end());

  if (auto violations = validate(report.trace); !violations.empty()) throw ValidationError(std::move(violations));
  return report;
}

}  // namespace stagelens::ingest

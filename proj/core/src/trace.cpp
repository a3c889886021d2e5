#include "stagelens/trace.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "stagelens/error.hpp"
#include "stagelens/finding.hpp"

namespace stagelens {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string describe_parse_error(const std::string& file, std::size_t line, const std::string& rule) {
  std::ostringstream out;
  out << file << ":" << line << ": " << rule;
  return out.str();
}

std::string describe_violations(const std::vector<std::string>& violations) {
  std::ostringstream out;
  out << "trace validation failed (" << violations.size() << " violation"
      << (violations.size() == 1 ? "" : "s") << ")";
  for (const auto& v : violations) out << "\n  - " << v;
  return out.str();
}

}  // namespace

ParseError::ParseError(std::string file, std::size_t line, std::string rule)
    : Error(describe_parse_error(file, line, rule)),
      file_(std::move(file)),
      line_(line),
      rule_(std::move(rule)) {}

ValidationError::ValidationError(std::vector<std::string> violations)
    : Error(describe_violations(violations)), violations_(std::move(violations)) {}

std::string_view to_string(Locality locality) noexcept {
  switch (locality) {
    case Locality::ProcessLocal: return "PROCESS_LOCAL";
    case Locality::NodeLocal: return "NODE_LOCAL";
    case Locality::RackLocal: return "RACK_LOCAL";
    case Locality::Any: return "ANY";
    case Locality::OffSwitch: return "OFF_SWITCH";
    case Locality::Unknown: return "UNKNOWN";
  }
  return "UNKNOWN";
}

Locality parse_locality(std::string_view text) noexcept {
  if (text == "PROCESS_LOCAL") return Locality::ProcessLocal;
  if (text == "NODE_LOCAL" || text == "NODE_LOCALITY" || text == "DATA_LOCAL") return Locality::NodeLocal;
  if (text == "RACK_LOCAL" || text == "RACK_LOCALITY") return Locality::RackLocal;
  if (text == "ANY") return Locality::Any;
  if (text == "OFF_SWITCH") return Locality::OffSwitch;
  return Locality::Unknown;
}

std::string_view to_string(FindingKind kind) noexcept {
  switch (kind) {
    case FindingKind::WorkloadImbalance: return "WorkloadImbalance";
    case FindingKind::SkewDataSize: return "SkewDataSize";
    case FindingKind::UnevenPlacement: return "UnevenPlacement";
    case FindingKind::Straggler: return "Straggler";
    case FindingKind::AbnormalNode: return "AbnormalNode";
    case FindingKind::OutlierMetric: return "OutlierMetric";
  }
  return "WorkloadImbalance";
}

std::optional<FindingKind> parse_finding_kind(std::string_view text) noexcept {
  for (auto kind : kAllFindingKinds) {
    if (to_string(kind) == text) return kind;
  }
  return std::nullopt;
}

const std::string& Finding::node() const noexcept {
  static const std::string empty;
  return nodes.empty() ? empty : nodes.front();
}

TimestampMs Stage::start_time() const {
  if (tasks.empty()) throw PreconditionError("stage " + stage_id + " has no tasks");
  TimestampMs t = tasks.front().launch_time;
  for (const auto& task : tasks) t = std::min(t, task.launch_time);
  return t;
}

TimestampMs Stage::finish_time() const {
  if (tasks.empty()) throw PreconditionError("stage " + stage_id + " has no tasks");
  TimestampMs t = tasks.front().finish_time;
  for (const auto& task : tasks) t = std::max(t, task.finish_time);
  return t;
}

std::size_t Trace::stage_count() const noexcept {
  std::size_t n = 0;
  for (const auto& job : jobs) n += job.stages.size();
  return n;
}

const Stage* Trace::find_stage(std::string_view stage_id) const noexcept {
  for (const auto& job : jobs) {
    for (const auto& stage : job.stages) {
      if (stage.stage_id == stage_id) return &stage;
    }
  }
  return nullptr;
}

std::vector<std::string> validate(const Trace& trace) {
  std::vector<std::string> out;
  if (trace.cluster.empty()) out.emplace_back("cluster must list at least one node");

  std::set<std::string> nodes;
  for (const auto& node : trace.cluster) {
    if (node.empty()) out.emplace_back("cluster contains an empty node name");
    if (!nodes.insert(node).second) out.push_back("duplicate cluster node '" + node + "'");
  }

  std::set<std::string> stage_ids;
  std::set<std::string> job_ids;
  for (const auto& job : trace.jobs) {
    if (!job_ids.insert(job.job_id).second) out.push_back("duplicate job id '" + job.job_id + "'");
    for (const auto& stage : job.stages) {
      if (!stage_ids.insert(stage.stage_id).second)
        out.push_back("duplicate stage id '" + stage.stage_id + "'");
      if (stage.job_id != job.job_id)
        out.push_back("stage '" + stage.stage_id + "' names job '" + stage.job_id + "' but belongs to '" +
                      job.job_id + "'");
      for (const auto& task : stage.tasks) {
        const std::string where = "task '" + task.task_id + "' of stage '" + stage.stage_id + "'";
        if (task.stage_id != stage.stage_id) out.push_back(where + " carries stage id '" + task.stage_id + "'");
        if (task.finish_time < task.launch_time) out.push_back(where + " finishes before it launches");
        if (!std::isfinite(task.data_size) || task.data_size < 0)
          out.push_back(where + " has a negative or non-finite data size");
        if (!nodes.contains(task.node)) out.push_back(where + " runs on unknown node '" + task.node + "'");
      }
    }
  }

  for (const auto& [node, series] : trace.metrics) {
    if (!nodes.contains(node)) out.push_back("metrics recorded for unknown node '" + node + "'");
    for (std::size_t i = 0; i < series.size(); ++i) {
      const auto& s = series[i];
      if (s.node != node) out.push_back("sample of node '" + s.node + "' filed under '" + node + "'");
      if (i > 0 && s.timestamp <= series[i - 1].timestamp)
        out.push_back("metric timestamps of node '" + node + "' are not strictly increasing at " +
                      std::to_string(s.timestamp));
      for (const auto& [name, value] : s.values) {
        if (!std::isfinite(value))
          out.push_back("non-finite value for metric '" + name + "' on node '" + node + "'");
      }
    }
  }

  for (const auto& [node, offset] : trace.clock_offsets) {
    (void)offset;
    if (!nodes.contains(node)) out.push_back("clock offset for unknown node '" + node + "'");
  }
  return out;
}

namespace {

ordered_json header_line(std::string_view kind) {
  ordered_json h;
  h["schema"] = kTraceSchema;
  h["kind"] = kind;
  return h;
}

class LineWriter {
 public:
  LineWriter(const std::filesystem::path& path, std::string_view kind) : path_(path), out_(path, std::ios::binary) {
    if (!out_) throw IoError("cannot open " + path.string() + " for writing");
    write(header_line(kind));
  }

  void write(const ordered_json& line) { out_ << line.dump() << '\n'; }

  void close() {
    out_.close();
    if (!out_) throw IoError("failed writing " + path_.string());
  }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

DurationMs offset_of(const Trace& trace, const std::string& node) {
  auto it = trace.clock_offsets.find(node);
  return it == trace.clock_offsets.end() ? 0 : it->second;
}

}  // namespace

void save_trace(const Trace& trace, const std::filesystem::path& dir) {
  if (auto violations = validate(trace); !violations.empty()) throw ValidationError(std::move(violations));
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());

  LineWriter cluster(dir / trace_files::kCluster, "cluster");
  for (const auto& node : trace.cluster) {
    ordered_json line;
    line["node"] = node;
    if (auto it = trace.clock_offsets.find(node); it != trace.clock_offsets.end())
      line["clock_offset_ms"] = it->second;
    cluster.write(line);
  }
  cluster.close();

  LineWriter jobs(dir / trace_files::kJobs, "jobs");
  LineWriter stages(dir / trace_files::kStages, "stages");
  LineWriter tasks(dir / trace_files::kTasks, "tasks");
  for (const auto& job : trace.jobs) {
    jobs.write(ordered_json{{"job_id", job.job_id}});
    for (const auto& stage : job.stages) {
      stages.write(ordered_json{{"stage_id", stage.stage_id}, {"job_id", stage.job_id}});
      for (const auto& task : stage.tasks) {
        const DurationMs off = offset_of(trace, task.node);
        ordered_json line;
        line["task_id"] = task.task_id;
        line["stage_id"] = task.stage_id;
        line["node"] = task.node;
        line["launch_time"] = task.launch_time - off;
        line["finish_time"] = task.finish_time - off;
        line["runtime"] = task.runtime();
        line["locality"] = to_string(task.locality);
        line["data_size"] = task.data_size;
        line["succeeded"] = task.succeeded;
        tasks.write(line);
      }
    }
  }
  jobs.close();
  stages.close();
  tasks.close();

  LineWriter metrics(dir / trace_files::kMetrics, "metrics");
  for (const auto& [node, series] : trace.metrics) {
    const DurationMs off = offset_of(trace, node);
    for (const auto& sample : series) {
      ordered_json values = ordered_json::object();
      for (const auto& [name, value] : sample.values) values[name] = value;
      ordered_json line;
      line["node"] = sample.node;
      line["timestamp"] = sample.timestamp - off;
      line["values"] = std::move(values);
      metrics.write(line);
    }
  }
  metrics.close();
}

namespace {

/// Iterates the records of one canonical file, checking the header line.
class LineReader {
 public:
  LineReader(const std::filesystem::path& path, std::string kind)
      : path_(path), name_(path.filename().string()), kind_(std::move(kind)), in_(path, std::ios::binary) {
    if (!in_) throw IoError("cannot open " + path.string());
  }

  /// Returns false at end of file.
  bool next(json& record) {
    std::string text;
    while (std::getline(in_, text)) {
      ++line_;
      if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
      json parsed = json::parse(text, nullptr, /*allow_exceptions=*/false);
      if (parsed.is_discarded() || !parsed.is_object()) fail("line is not a JSON object");
      if (!seen_header_) {
        seen_header_ = true;
        if (!parsed.contains("schema") || parsed["schema"] != kTraceSchema)
          fail("first line must be the schema header \"" + std::string(kTraceSchema) + "\"");
        if (!parsed.contains("kind") || parsed["kind"] != kind_) fail("header kind must be \"" + kind_ + "\"");
        continue;
      }
      record = std::move(parsed);
      return true;
    }
    if (!seen_header_) fail("missing schema header");
    return false;
  }

  [[noreturn]] void fail(const std::string& rule) const { throw ParseError(name_, line_, rule); }

  template <typename T>
  T field(const json& record, const char* key) const {
    auto it = record.find(key);
    if (it == record.end()) fail(std::string("missing field '") + key + "'");
    try {
      if constexpr (std::is_same_v<T, std::string>) {
        if (!it->is_string()) fail(std::string("field '") + key + "' must be a string");
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!it->is_boolean()) fail(std::string("field '") + key + "' must be a boolean");
      } else if constexpr (std::is_integral_v<T>) {
        if (!it->is_number_integer()) fail(std::string("field '") + key + "' must be an integer");
      } else {
        if (!it->is_number()) fail(std::string("field '") + key + "' must be a number");
      }
      return it->get<T>();
    } catch (const json::exception& e) {
      fail(std::string("field '") + key + "': " + e.what());
    }
  }

 private:
  std::filesystem::path path_;
  std::string name_;
  std::string kind_;
  std::ifstream in_;
  std::size_t line_ = 0;
  bool seen_header_ = false;
};

}  // namespace

Trace load_trace(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError("trace directory not found: " + dir.string());
  Trace trace;
  std::vector<std::string> violations;
  json rec;

  {
    LineReader r(dir / trace_files::kCluster, "cluster");
    while (r.next(rec)) {
      auto node = r.field<std::string>(rec, "node");
      if (rec.contains("clock_offset_ms")) trace.clock_offsets[node] = r.field<std::int64_t>(rec, "clock_offset_ms");
      trace.cluster.push_back(std::move(node));
    }
  }

  std::map<std::string, std::size_t> job_index;
  {
    LineReader r(dir / trace_files::kJobs, "jobs");
    while (r.next(rec)) {
      Job job;
      job.job_id = r.field<std::string>(rec, "job_id");
      job_index.emplace(job.job_id, trace.jobs.size());
      trace.jobs.push_back(std::move(job));
    }
  }

  std::map<std::string, std::pair<std::size_t, std::size_t>> stage_index;
  {
    LineReader r(dir / trace_files::kStages, "stages");
    while (r.next(rec)) {
      Stage stage;
      stage.stage_id = r.field<std::string>(rec, "stage_id");
      stage.job_id = r.field<std::string>(rec, "job_id");
      auto it = job_index.find(stage.job_id);
      if (it == job_index.end()) {
        violations.push_back("stage '" + stage.stage_id + "' references unknown job '" + stage.job_id + "'");
        continue;
      }
      auto& job = trace.jobs[it->second];
      stage_index.emplace(stage.stage_id, std::make_pair(it->second, job.stages.size()));
      job.stages.push_back(std::move(stage));
    }
  }

  {
    LineReader r(dir / trace_files::kTasks, "tasks");
    while (r.next(rec)) {
      Task task;
      task.task_id = r.field<std::string>(rec, "task_id");
      task.stage_id = r.field<std::string>(rec, "stage_id");
      task.node = r.field<std::string>(rec, "node");
      const DurationMs off = offset_of(trace, task.node);
      task.launch_time = r.field<std::int64_t>(rec, "launch_time") + off;
      task.finish_time = r.field<std::int64_t>(rec, "finish_time") + off;
      if (rec.contains("runtime") && r.field<std::int64_t>(rec, "runtime") != task.runtime())
        r.fail("runtime must equal finish_time - launch_time");
      task.locality = parse_locality(r.field<std::string>(rec, "locality"));
      task.data_size = r.field<double>(rec, "data_size");
      task.succeeded = r.field<bool>(rec, "succeeded");
      auto it = stage_index.find(task.stage_id);
      if (it == stage_index.end()) {
        violations.push_back("task '" + task.task_id + "' references unknown stage '" + task.stage_id + "'");
        continue;
      }
      trace.jobs[it->second.first].stages[it->second.second].tasks.push_back(std::move(task));
    }
  }

  {
    LineReader r(dir / trace_files::kMetrics, "metrics");
    while (r.next(rec)) {
      MetricSample sample;
      sample.node = r.field<std::string>(rec, "node");
      sample.timestamp = r.field<std::int64_t>(rec, "timestamp") + offset_of(trace, sample.node);
      auto values = rec.find("values");
      if (values == rec.end() || !values->is_object()) r.fail("field 'values' must be an object");
      for (const auto& [name, value] : values->items()) {
        if (!value.is_number()) r.fail("metric '" + name + "' must be numeric");
        sample.values.emplace(name, value.get<double>());
      }
      trace.metrics[sample.node].push_back(std::move(sample));
    }
  }

  auto rest = validate(trace);
  violations.insert(violations.end(), rest.begin(), rest.end());
  if (!violations.empty()) throw ValidationError(std::move(violations));
  return trace;
}

}  // namespace stagelens

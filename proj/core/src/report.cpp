#include "stagelens/report.hpp"

#include <cstdio>
#include <sstream>

#include <nlohmann/json.hpp>

#include "stagelens/app_detect.hpp"
#include "stagelens/correlate.hpp"
#include "stagelens/error.hpp"
#include "stagelens/metric_detect.hpp"
#include "stagelens/node_detect.hpp"

namespace stagelens::report {

using nlohmann::ordered_json;

std::vector<Finding> DiagnosisReport::all_findings() const {
  std::vector<Finding> out;
  for (const auto& s : stages) out.insert(out.end(), s.findings.begin(), s.findings.end());
  return out;
}

std::size_t DiagnosisReport::finding_count() const noexcept {
  std::size_t n = 0;
  for (const auto& s : stages) n += s.findings.size();
  return n;
}

namespace {

Finding make(FindingKind kind, const std::string& stage, std::string node, double score, double threshold,
             std::string detail = {}) {
  Finding f;
  f.kind = kind;
  f.stage_id = stage;
  f.nodes = {std::move(node)};
  f.score = score;
  f.threshold = threshold;
  f.detail = std::move(detail);
  return f;
}

StageReport diagnose_stage(const Trace& trace, const Stage& stage, const PipelineConfig& cfg,
                           app::StageImbalance& imbalance) {
  StageReport r;
  r.stage_id = stage.stage_id;
  r.job_id = stage.job_id;
  r.imbalance = std::string(app::to_string(app::Verdict::NotEvaluable));
  if (stage.tasks.empty()) {
    r.notes.push_back("stage has no tasks");
    return r;
  }

  const auto window = correlate::stage_window(stage);
  const auto sliced = correlate::slice_metrics(trace, window);
  const auto ds = correlate::build_datasets(stage, trace.cluster, sliced, cfg.ultrashort);
  for (const auto& node : ds.missing_metrics) r.notes.push_back("no metric samples for " + node + " in stage window");
  if (ds.failed_count > 0) r.notes.push_back(std::to_string(ds.failed_count) + " failed tasks excluded");

  // Straggler screen.
  const auto stragglers = correlate::mean_runtime_by_node(ds);
  if (auto s = app::detect_stragglers(stragglers, cfg.straggler); s.evaluable) {
    for (const auto& n : s.nodes)
      r.findings.push_back(make(FindingKind::Straggler, r.stage_id, n.node, n.ratio, cfg.straggler.runtime_ratio_threshold));
  } else {
    r.notes.push_back("straggler screen not evaluable");
  }

  // Workload imbalance.
  imbalance = app::detect_workload_imbalance(ds.tnum, cfg.imbalance);
  r.imbalance = std::string(app::to_string(imbalance.verdict));
  if (imbalance.verdict == app::Verdict::Unbalanced) {
    for (const auto& t : imbalance.ranking) {
      if (!t.flagged) continue;
      char detail[64];
      std::snprintf(detail, sizeof detail, "tilt=%.5f", t.tilt);
      r.findings.push_back(
          make(FindingKind::WorkloadImbalance, r.stage_id, t.node, std::abs(t.diff), imbalance.node_tolerance, detail));
    }
  } else if (imbalance.verdict == app::Verdict::NotEvaluable) {
    r.notes.push_back("workload imbalance not evaluable");
  }

  // Data skew.
  const auto skew = app::detect_skew_data_size(ds.data_size, cfg.skew);
  if (!skew.evaluable) r.notes.push_back("skew data size not evaluable");
  for (const auto& t : skew.tasks) {
    auto f = make(FindingKind::SkewDataSize, r.stage_id, t.node, t.ratio, cfg.skew.size_ratio_threshold, "task");
    f.tasks = {t.task_id};
    r.findings.push_back(std::move(f));
  }
  for (const auto& n : skew.nodes)
    r.findings.push_back(make(FindingKind::SkewDataSize, r.stage_id, n.node, n.ratio, cfg.skew.size_ratio_threshold, "node"));

  const auto placement = app::detect_uneven_placement(ds.locality, cfg.placement, ds.locality.size());
  if (!placement.evaluable) r.notes.push_back("uneven placement not evaluable");
  for (const auto& e : placement.entries)
    r.findings.push_back(make(FindingKind::UnevenPlacement, r.stage_id, e.node, e.ratio, 0.0, std::string(to_string(e.locality))));

  // Abnormal nodes.
  const auto abnormal = node::detect_abnormal_nodes(ds.vectors, cfg.similarity);
  if (!abnormal.evaluable) r.notes.push_back("abnormal node detection not evaluable");
  for (const auto& n : abnormal.skipped) r.notes.push_back("similarity undefined for " + n);
  r.notes.insert(r.notes.end(), abnormal.notes.begin(), abnormal.notes.end());
  for (const auto& n : abnormal.nodes) {
    r.similarity.push_back({n.node, n.average});
    if (n.abnormal)
      r.findings.push_back(make(FindingKind::AbnormalNode, r.stage_id, n.node, n.average, cfg.similarity.threshold));
  }

  // Outlier metrics.
  const auto metrics = metric::diagnose_outlier_metrics(ds, cfg.outlier);
  r.notes.insert(r.notes.end(), metrics.notes.begin(), metrics.notes.end());
  for (const auto& [node, names] : metrics.node_metrics) {
    for (const auto& m : names) {
      auto f = make(FindingKind::OutlierMetric, r.stage_id, node, metrics.reduced.at(m).at(node), cfg.outlier.dmin,
                    std::string(metric::to_string(metrics.per_metric.at(m).branch)));
      f.metrics = {m};
      r.findings.push_back(std::move(f));
    }
  }
  for (const auto& [m, res] : metrics.per_metric) {
    for (const auto& note : res.notes) r.notes.push_back(m + ": " + note);
  }
  return r;
}

}  // namespace

DiagnosisReport diagnose(const Trace& trace, const PipelineConfig& cfg) {
  cfg.validate();
  if (trace.stage_count() == 0) throw PreconditionError("trace has no stages");

  DiagnosisReport report;
  report.mode = {std::string(metric::to_string(cfg.outlier.transform)),
                 std::string(metric::to_string(cfg.outlier.representative)), cfg.outlier.ccrate, cfg.outlier.dmin};
  report.config = cfg.entries();
  for (const auto& job : trace.jobs) {
    std::vector<app::StageImbalance> verdicts;
    for (const auto& stage : job.stages) {
      app::StageImbalance imbalance;
      report.stages.push_back(diagnose_stage(trace, stage, cfg, imbalance));
      verdicts.push_back(std::move(imbalance));
    }
    const auto j = app::judge_job_imbalance(verdicts, cfg.imbalance);
    report.jobs.push_back({job.job_id, std::string(app::to_string(j.verdict)), j.ratio, j.unbalanced_stages,
                           j.evaluable_stages});
  }
  return report;
}

Format parse_format(std::string_view name) {
  if (name == "text") return Format::Text;
  if (name == "structured" || name == "json") return Format::Structured;
  throw ConfigError("unknown report format '" + std::string(name) + "' (known: text, structured)");
}

std::string render(const DiagnosisReport& report, Format format) {
  return format == Format::Text ? render_text(report) : render_structured(report);
}

// ---------------------------------------------------------------- text

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string join(const std::vector<std::string>& items, std::string_view sep) {
  if (items.empty()) return "Null";
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

std::vector<const Finding*> of_kind(const StageReport& s, FindingKind kind) {
  std::vector<const Finding*> out;
  for (const auto& f : s.findings) {
    if (f.kind == kind) out.push_back(&f);
  }
  return out;
}

std::string mode_label(const Mode& m) {
  const std::string transform = m.transform == "fft" ? "FFT" : "Mean-Value";
  return "[" + transform + "," + m.representative + ",CCRate_d=" + format_number(m.ccrate) +
         ",dmin=" + format_number(m.dmin) + "]";
}

}  // namespace

std::string render_text(const DiagnosisReport& report) {
  std::ostringstream out;
  bool first = true;
  for (const auto& s : report.stages) {
    if (!first) out << '\n';
    first = false;
    out << "Stage id: " << s.stage_id << '\n';

    std::vector<std::string> items;
    for (const auto* f : of_kind(s, FindingKind::Straggler)) items.push_back(f->node());
    out << "Detected straggle outlier node: " << join(items, ",") << '\n';

    items.clear();
    for (const auto* f : of_kind(s, FindingKind::WorkloadImbalance)) items.push_back(f->node());
    out << "Detected workload imbalance: " << join(items, ", ") << '\n';

    out << "--- Data skew diagnosis:\n";
    items.clear();
    for (const auto* f : of_kind(s, FindingKind::SkewDataSize)) {
      const std::string what = f->tasks.empty() ? std::string("node") : "task " + f->tasks.front();
      items.push_back(f->node() + " [" + what + ":" + fixed(f->score, 5) + "]");
    }
    out << "Skew data size: " << join(items, ", ") << '\n';
    items.clear();
    for (const auto* f : of_kind(s, FindingKind::UnevenPlacement))
      items.push_back(f->node() + " [" + f->detail + ":" + fixed(f->score, 5) + "]");
    out << "Uneven data placement: " << join(items, ", ") << '\n';

    out << "--- Abnormal node diagnosis:\n";
    if (s.similarity.empty()) {
      out << "Similarity analysis: Null\n";
    } else {
      std::vector<std::string> names, values;
      for (const auto& n : s.similarity) {
        names.push_back("'" + n.node + "'");
        values.push_back(fixed(n.value, 4));
      }
      out << "Similarity analysis: Similarity ([" << join(names, ", ") << "], other nodes): [" << join(values, ", ")
          << "]\n";
    }
    items.clear();
    for (const auto* f : of_kind(s, FindingKind::AbnormalNode)) items.push_back(f->node());
    out << "Detected abnormal node: " << join(items, ",") << '\n';

    out << "--- Outlier metrics diagnosis:\n";
    out << "Mode: " << mode_label(report.mode) << ":\n";
    items.clear();
    std::string current;
    std::vector<std::string> metrics;
    auto flush = [&] {
      if (!current.empty()) items.push_back(current + ":(" + join(metrics, ",") + ")");
      metrics.clear();
    };
    for (const auto* f : of_kind(s, FindingKind::OutlierMetric)) {
      if (f->node() != current) {
        flush();
        current = f->node();
      }
      metrics.insert(metrics.end(), f->metrics.begin(), f->metrics.end());
    }
    flush();
    out << join(items, "; ") << '\n';

    if (!s.notes.empty()) out << "Notes: " << join(s.notes, "; ") << '\n';
  }
  for (const auto& j : report.jobs) {
    out << '\n'
        << "Job id: " << j.job_id << '\n'
        << "Job workload imbalance: " << j.verdict << " (Ratio_UB=" << fixed(j.ratio, 5) << ", " << j.unbalanced_stages
        << " of " << j.evaluable_stages << " stages)\n";
  }
  return out.str();
}

// ---------------------------------------------------------------- structured

namespace {

ordered_json finding_json(const Finding& f) {
  ordered_json j;
  j["kind"] = to_string(f.kind);
  j["stage_id"] = f.stage_id;
  j["nodes"] = f.nodes;
  j["tasks"] = f.tasks;
  j["metrics"] = f.metrics;
  j["score"] = f.score;
  j["threshold"] = f.threshold;
  j["detail"] = f.detail;
  return j;
}

}  // namespace

std::string render_structured(const DiagnosisReport& report) {
  ordered_json j;
  j["schema"] = kReportSchema;
  j["mode"] = ordered_json{{"transform", report.mode.transform},
                           {"representative", report.mode.representative},
                           {"ccrate", report.mode.ccrate},
                           {"dmin", report.mode.dmin}};
  ordered_json config = ordered_json::object();
  for (const auto& [k, v] : report.config) config[k] = v;
  j["config"] = std::move(config);

  ordered_json stages = ordered_json::array();
  for (const auto& s : report.stages) {
    ordered_json st;
    st["stage_id"] = s.stage_id;
    st["job_id"] = s.job_id;
    st["imbalance"] = s.imbalance;
    ordered_json sim = ordered_json::array();
    for (const auto& n : s.similarity) sim.push_back(ordered_json{{"node", n.node}, {"value", n.value}});
    st["similarity"] = std::move(sim);
    ordered_json findings = ordered_json::array();
    for (const auto& f : s.findings) findings.push_back(finding_json(f));
    st["findings"] = std::move(findings);
    st["notes"] = s.notes;
    stages.push_back(std::move(st));
  }
  j["stages"] = std::move(stages);

  ordered_json jobs = ordered_json::array();
  for (const auto& jb : report.jobs) {
    jobs.push_back(ordered_json{{"job_id", jb.job_id},
                                {"verdict", jb.verdict},
                                {"ratio", jb.ratio},
                                {"unbalanced_stages", jb.unbalanced_stages},
                                {"evaluable_stages", jb.evaluable_stages}});
  }
  j["jobs"] = std::move(jobs);
  return j.dump(2) + "\n";
}

DiagnosisReport parse_structured(std::string_view text) {
  const auto j = ordered_json::parse(text.begin(), text.end(), nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ParseError("<report>", 1, "report is not a JSON object");
  if (j.value("schema", "") != kReportSchema)
    throw ParseError("<report>", 1, "schema must be \"" + std::string(kReportSchema) + "\"");
  try {
    DiagnosisReport r;
    const auto& mode = j.at("mode");
    r.mode = {mode.at("transform").get<std::string>(), mode.at("representative").get<std::string>(),
              mode.at("ccrate").get<double>(), mode.at("dmin").get<double>()};
    for (const auto& [k, v] : j.at("config").items()) r.config.emplace_back(k, v.get<std::string>());
    for (const auto& st : j.at("stages")) {
      StageReport s;
      s.stage_id = st.at("stage_id").get<std::string>();
      s.job_id = st.at("job_id").get<std::string>();
      s.imbalance = st.at("imbalance").get<std::string>();
      for (const auto& n : st.at("similarity")) s.similarity.push_back({n.at("node").get<std::string>(), n.at("value").get<double>()});
      for (const auto& fj : st.at("findings")) {
        Finding f;
        auto kind = parse_finding_kind(fj.at("kind").get<std::string>());
        if (!kind) throw ParseError("<report>", 1, "unknown finding kind");
        f.kind = *kind;
        f.stage_id = fj.at("stage_id").get<std::string>();
        f.nodes = fj.at("nodes").get<std::vector<std::string>>();
        f.tasks = fj.at("tasks").get<std::vector<std::string>>();
        f.metrics = fj.at("metrics").get<std::vector<std::string>>();
        f.score = fj.at("score").get<double>();
        f.threshold = fj.at("threshold").get<double>();
        f.detail = fj.at("detail").get<std::string>();
        s.findings.push_back(std::move(f));
      }
      s.notes = st.at("notes").get<std::vector<std::string>>();
      r.stages.push_back(std::move(s));
    }
    for (const auto& jb : j.at("jobs")) {
      r.jobs.push_back({jb.at("job_id").get<std::string>(), jb.at("verdict").get<std::string>(),
                        jb.at("ratio").get<double>(), jb.at("unbalanced_stages").get<std::size_t>(),
                        jb.at("evaluable_stages").get<std::size_t>()});
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("<report>", 1, e.what());
  }
}

}  // namespace stagelens::report

// stagelens: ingest raw logs, diagnose traces, simulate labelled scenarios
// and score detectors.
//
// Exit codes: 0 ran clean, 1 findings present, 2 error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "stagelens/config.hpp"
#include "stagelens/error.hpp"
#include "stagelens/evaluate.hpp"
#include "stagelens/ingest.hpp"
#include "stagelens/report.hpp"
#include "stagelens/simulate.hpp"

namespace fs = std::filesystem;
using namespace stagelens;

namespace {

constexpr int kExitClean = 0;
constexpr int kExitFindings = 1;
constexpr int kExitError = 2;

/// Threshold flags shared by diagnose and evaluate.
struct ConfigFlags {
  std::string config_path;
  std::map<std::string, std::string> values;
  std::vector<std::string> priorities;  // LOCALITY=weight

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "key = value configuration file (fallback: $STAGELENS_CONFIG)");
    for (const auto& key : config_keys()) {
      if (key.starts_with("priority.")) continue;
      cmd->add_option("--" + key, values[key], "override config key '" + key + "'");
    }
    cmd->add_option("--priority", priorities, "locality weight, e.g. ANY=2 (repeatable)");
  }

  PipelineConfig resolve() const {
    PipelineConfig cfg;
    std::string path = config_path;
    if (path.empty()) {
      if (const char* env = std::getenv("STAGELENS_CONFIG"); env && *env) path = env;
    }
    if (!path.empty()) apply_config_file(cfg, path);
    for (const auto& [key, value] : values) {
      if (!value.empty()) cfg.set(key, value);
    }
    for (const auto& p : priorities) {
      const auto eq = p.find('=');
      if (eq == std::string::npos) throw ConfigError("--priority expects LOCALITY=weight, got '" + p + "'");
      cfg.set("priority." + p.substr(0, eq), p.substr(eq + 1));
    }
    cfg.validate();
    return cfg;
  }
};

void write_output(const std::string& text, const std::string& out) {
  if (out.empty() || out == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(out, std::ios::binary);
  if (!f) throw IoError("cannot open " + out + " for writing");
  f << text;
  if (!f) throw IoError("failed writing " + out);
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stage-centric performance diagnosis for distributed data-processing clusters"};
  app.require_subcommand(1);

  // ingest
  auto* ingest_cmd = app.add_subcommand("ingest", "convert a Spark event log and metric files into a canonical trace");
  std::string events, metrics_dir, ingest_out;
  bool no_wrap = false;
  ingest_cmd->add_option("--events", events, "Spark event log (one JSON event per line)")->required();
  ingest_cmd->add_option("--metrics", metrics_dir, "directory of <node>.system.tsv / <node>.arch.tsv files");
  ingest_cmd->add_option("--out", ingest_out, "output trace directory")->required();
  ingest_cmd->add_flag("--no-wrap-detection", no_wrap, "emit negative rates on counter wrap instead of missing");

  // diagnose
  auto* diagnose_cmd = app.add_subcommand("diagnose", "run every detector on a trace and print the report");
  std::string trace_dir, format = "text", diagnose_out;
  ConfigFlags diagnose_flags;
  diagnose_cmd->add_option("--trace", trace_dir, "canonical trace directory")->required();
  diagnose_cmd->add_option("--format", format, "text or structured")->capture_default_str();
  diagnose_cmd->add_option("--out", diagnose_out, "report file (default stdout)");
  diagnose_flags.attach(diagnose_cmd);

  // simulate
  auto* simulate_cmd = app.add_subcommand("simulate", "generate a labelled synthetic trace from a preset");
  std::string preset_name, simulate_out;
  std::uint64_t seed = 1;
  simulate_cmd->add_option("--preset", preset_name, "case1, case2, case3 or eval-corpus")->required();
  simulate_cmd->add_option("--seed", seed, "generator seed")->capture_default_str();
  simulate_cmd->add_option("--out", simulate_out, "output directory")->required();

  // evaluate
  auto* evaluate_cmd = app.add_subcommand("evaluate", "score findings against labels");
  std::string findings_path, labels_path, corpus, evaluate_out;
  std::uint64_t corpus_seed = 1;
  ConfigFlags evaluate_flags;
  evaluate_cmd->add_option("--findings", findings_path, "structured report produced by diagnose");
  evaluate_cmd->add_option("--labels", labels_path, "labels.jsonl produced by simulate");
  evaluate_cmd->add_option("--corpus", corpus, "simulate, diagnose and score a preset corpus instead");
  evaluate_cmd->add_option("--seed", corpus_seed, "corpus seed")->capture_default_str();
  evaluate_cmd->add_option("--out", evaluate_out, "score report file (default stdout)");
  evaluate_flags.attach(evaluate_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitClean : kExitError;
  }

  try {
    if (*ingest_cmd) {
      ingest::DeriveOptions opts;
      opts.detect_counter_wrap = !no_wrap;
      auto result = ingest::ingest_files(events, metrics_dir, opts);
      save_trace(result.trace, ingest_out);
      for (const auto& w : result.warnings) std::cerr << "warning: " << w << '\n';
      std::cerr << "skipped events: " << result.skipped_events << '\n';
      return kExitClean;
    }

    if (*diagnose_cmd) {
      const auto fmt = report::parse_format(format);
      const auto cfg = diagnose_flags.resolve();
      const auto trace = load_trace(trace_dir);
      const auto rep = report::diagnose(trace, cfg);
      write_output(report::render(rep, fmt), diagnose_out);
      return rep.finding_count() > 0 ? kExitFindings : kExitClean;
    }

    if (*simulate_cmd) {
      const auto specs = sim::preset(preset_name, seed);
      const fs::path root(simulate_out);
      for (std::size_t i = 0; i < specs.size(); ++i) {
        const fs::path dir = specs.size() == 1 ? root : root / specs[i].name;
        const auto gen = sim::generate_trace(specs[i]);
        save_trace(gen.trace, dir);
        sim::save_labels(gen.labels, dir / sim::kLabelsFile);
      }
      return kExitClean;
    }

    if (*evaluate_cmd) {
      std::vector<Finding> findings;
      std::vector<sim::LabeledAnomaly> labels;
      if (!corpus.empty()) {
        const auto specs = sim::preset(corpus, corpus_seed);
        auto run = eval::run_corpus(specs, evaluate_flags.resolve());
        findings = std::move(run.findings);
        labels = std::move(run.labels);
      } else {
        if (findings_path.empty() || labels_path.empty())
          throw ConfigError("evaluate needs --findings and --labels, or --corpus");
        findings = report::parse_structured(read_file(findings_path)).all_findings();
        labels = sim::load_labels(labels_path);
      }
      write_output(eval::score_report(findings, labels).dump(2) + "\n", evaluate_out);
      return kExitClean;
    }
  } catch (const std::exception& e) {
    std::cerr << "stagelens: " << e.what() << '\n';
    return kExitError;
  }
  return kExitError;
}

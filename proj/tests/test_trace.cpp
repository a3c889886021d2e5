#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "stagelens/correlate.hpp"
#include "stagelens/error.hpp"
#include "stagelens/simulate.hpp"
#include "stagelens/trace.hpp"

namespace fs = std::filesystem;
using namespace stagelens;

namespace {

fs::path scratch(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("stagelens_test_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

Trace one_node_trace() {
  Trace t;
  t.cluster = {"hw073"};
  Job job{"0", {}};
  Stage stage{"0", "0", {}};
  stage.tasks.push_back({"2", "0", "hw073", 1456896044081, 1456896045955, Locality::ProcessLocal, 1024.0, true});
  job.stages.push_back(stage);
  t.jobs.push_back(job);
  t.metrics["hw073"].push_back({"hw073", 1456896045000, {{"cpu_usage", 0.25}, {"IPC", 1.5}}});
  return t;
}

}  // namespace

TEST(Locality, ParsesBothVocabularies) {
  EXPECT_EQ(parse_locality("PROCESS_LOCAL"), Locality::ProcessLocal);
  EXPECT_EQ(parse_locality("NODE_LOCAL"), Locality::NodeLocal);
  EXPECT_EQ(parse_locality("NODE_LOCALITY"), Locality::NodeLocal);
  EXPECT_EQ(parse_locality("RACK_LOCAL"), Locality::RackLocal);
  EXPECT_EQ(parse_locality("ANY"), Locality::Any);
  EXPECT_EQ(parse_locality("OFF_SWITCH"), Locality::OffSwitch);
  EXPECT_EQ(parse_locality("bogus"), Locality::Unknown);
  for (auto l : kAllLocalities) EXPECT_EQ(parse_locality(to_string(l)), l);
}

TEST(Trace, EmptyJobsLoadsWithNodesOnly) {
  Trace t;
  t.cluster = {"a", "b", "c"};
  auto dir = scratch("empty");
  save_trace(t, dir);
  auto back = load_trace(dir);
  EXPECT_EQ(back.cluster.size(), 3u);
  EXPECT_EQ(back.stage_count(), 0u);
  EXPECT_EQ(back, t);
}

TEST(Trace, MinimalTraceResavesByteIdentically) {
  auto t = one_node_trace();
  auto d1 = scratch("min1");
  auto d2 = scratch("min2");
  save_trace(t, d1);
  save_trace(load_trace(d1), d2);
  for (auto f : {trace_files::kCluster, trace_files::kJobs, trace_files::kStages, trace_files::kTasks,
                 trace_files::kMetrics}) {
    EXPECT_EQ(slurp(d1 / f), slurp(d2 / f)) << f;
  }
}

TEST(Trace, UnknownLocalityRoundTrips) {
  auto t = one_node_trace();
  t.jobs[0].stages[0].tasks[0].locality = Locality::Unknown;
  auto dir = scratch("unknown");
  save_trace(t, dir);
  EXPECT_EQ(load_trace(dir).jobs[0].stages[0].tasks[0].locality, Locality::Unknown);
}

TEST(Trace, ClockOffsetsRoundTrip) {
  auto t = one_node_trace();
  t.clock_offsets["hw073"] = -250;
  auto dir = scratch("offsets");
  save_trace(t, dir);
  EXPECT_EQ(load_trace(dir), t);
}

TEST(Trace, SimulatedTraceRoundTripsAndYieldsWindows) {
  sim::ScenarioSpec spec;
  spec.nodes = sim::numbered_nodes(4);
  spec.stages_per_job = 2;
  spec.tasks_per_stage = 40;
  auto gen = sim::generate_trace(spec);
  auto dir = scratch("sim4");
  save_trace(gen.trace, dir);
  auto back = load_trace(dir);
  ASSERT_EQ(back, gen.trace);
  ASSERT_EQ(back.stage_count(), 2u);
  for (const auto& stage : back.jobs[0].stages) {
    auto w = correlate::stage_window(stage);
    EXPECT_LT(w.start_time, w.finish_time);
    EXPECT_EQ(w.nodes.size(), 4u);
  }
}

TEST(Trace, MalformedLineNamesFileAndLine) {
  auto t = one_node_trace();
  auto dir = scratch("malformed");
  save_trace(t, dir);
  {
    std::ofstream f(dir / trace_files::kTasks, std::ios::app);
    f << "{not json\n";
  }
  try {
    load_trace(dir);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(e.file().find("tasks.jsonl"), std::string::npos);
    EXPECT_EQ(e.line(), 3u);
  }
}

TEST(Trace, ValidationListsEveryViolation) {
  auto t = one_node_trace();
  t.jobs[0].stages[0].tasks[0].node = "ghost";
  t.jobs[0].stages[0].tasks[0].finish_time = 0;
  auto v = validate(t);
  EXPECT_EQ(v.size(), 2u);

  auto dir = scratch("invalid");
  save_trace(one_node_trace(), dir);
  std::ofstream(dir / trace_files::kCluster) << "{\"schema\":\"stagelens-trace/1\",\"kind\":\"cluster\"}\n"
                                              << "{\"node\":\"other\"}\n";
  EXPECT_THROW(load_trace(dir), ValidationError);
}

TEST(Trace, MissingDirectoryIsIoError) { EXPECT_THROW(load_trace("/nonexistent/stagelens"), Error); }

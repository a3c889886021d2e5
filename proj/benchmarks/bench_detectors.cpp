#include <benchmark/benchmark.h>

#include <map>
#include <string>
#include <vector>

#include "stagelens/app_detect.hpp"
#include "stagelens/metric_detect.hpp"
#include "stagelens/report.hpp"
#include "stagelens/simulate.hpp"

using namespace stagelens;

namespace {

void BM_WorkloadImbalance(benchmark::State& state) {
  std::map<std::string, std::size_t> tnum;
  for (int i = 0; i < state.range(0); ++i) tnum["n" + std::to_string(i)] = static_cast<std::size_t>(50 + i % 17);
  for (auto _ : state) benchmark::DoNotOptimize(app::detect_workload_imbalance(tnum, {}));
}
BENCHMARK(BM_WorkloadImbalance)->Arg(6)->Arg(64)->Arg(512);

void BM_ReduceFft(benchmark::State& state) {
  sim::Rng rng(1);
  std::vector<double> x(static_cast<std::size_t>(state.range(0)));
  for (auto& v : x) v = rng.uniform();
  for (auto _ : state) benchmark::DoNotOptimize(metric::reduce_fft(x));
}
BENCHMARK(BM_ReduceFft)->Arg(60)->Arg(600)->Arg(6000);

void BM_PcaSelect(benchmark::State& state) {
  sim::Rng rng(2);
  metric::Matrix x(static_cast<std::size_t>(state.range(0)), std::vector<double>(20));
  for (auto& row : x) {
    for (auto& v : row) v = rng.uniform();
  }
  std::vector<std::string> names;
  for (int c = 0; c < 20; ++c) names.push_back("m" + std::to_string(c));
  for (auto _ : state) benchmark::DoNotOptimize(metric::pca_select_metrics(x, names, {}));
}
BENCHMARK(BM_PcaSelect)->Arg(100)->Arg(1000);

void BM_DiagnoseCase(benchmark::State& state) {
  const auto trace = sim::generate_trace(sim::preset("case2").front()).trace;
  for (auto _ : state) benchmark::DoNotOptimize(report::diagnose(trace, {}));
}
BENCHMARK(BM_DiagnoseCase)->Unit(benchmark::kMillisecond);

void BM_GenerateCase(benchmark::State& state) {
  const auto spec = sim::preset("case1").front();
  for (auto _ : state) benchmark::DoNotOptimize(sim::generate_trace(spec));
}
BENCHMARK(BM_GenerateCase)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

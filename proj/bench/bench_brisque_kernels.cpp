// Serial reference vs OpenMP BRISQUE kernels on a synthetic 512x512 image.

#include <benchmark/benchmark.h>

#include <random>

#include "storyreel/brisque_kernels.hpp"
#include "storyreel/frame_metrics.hpp"

using namespace storyreel;

namespace {

const GrayImage& input() {
  static const GrayImage img = [] {
    GrayImage g(512, 512);
    std::mt19937 rng(5);
    std::uniform_int_distribution<int> d(0, 255);
    for (auto& v : g.data) v = d(rng);
    return g;
  }();
  return img;
}

template <GrayImage (*Mscn)(const GrayImage&, double, double)>
void BM_mscn(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(Mscn(input(), kMscnC, kVarianceFloor));
  state.SetItemsProcessed(state.iterations() * input().width * input().height);
}

template <std::vector<double> (*Product)(const GrayImage&, int, int)>
void BM_pair_product(benchmark::State& state) {
  const GrayImage m = brisque::serial::mscn(input(), kMscnC, kVarianceFloor);
  for (auto _ : state)
    for (const auto& s : brisque::kShifts) benchmark::DoNotOptimize(Product(m, s[0], s[1]));
}

template <GrayImage (*Down)(const GrayImage&)>
void BM_downsample2(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(Down(input()));
}

void BM_features(benchmark::State& state) {
  const auto impl = state.range(0) ? KernelImpl::omp : KernelImpl::serial;
  for (auto _ : state) benchmark::DoNotOptimize(brisque_features(input(), impl));
}

}  // namespace

BENCHMARK(BM_mscn<brisque::serial::mscn>)->Name("mscn/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_mscn<brisque::omp::mscn>)->Name("mscn/omp")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_pair_product<brisque::serial::pair_product>)->Name("pair_product/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_pair_product<brisque::omp::pair_product>)->Name("pair_product/omp")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_downsample2<brisque::serial::downsample2>)->Name("downsample2/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_downsample2<brisque::omp::downsample2>)->Name("downsample2/omp")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_features)->Name("features")->Arg(0)->Arg(1)->ArgNames({"omp"})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();

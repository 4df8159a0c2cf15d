// Serial reference kernels against the OpenMP/GEMM kernels, on layer shapes
// taken from the default network. Set OMP_NUM_THREADS to vary the worker count.

#include <benchmark/benchmark.h>
#include <omp.h>

#include <random>
#include <vector>

#include "tpsf/nn/kernels.hpp"
#include "tpsf/nn/network.hpp"

using namespace tpsf::nn;

namespace {

std::vector<float> noise(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> nd(0.0f, 1.0f);
  std::vector<float> v(n);
  for (float& x : v) x = nd(rng);
  return v;
}

struct ConvCase {
  Shape in;
  int cout;
  int k;
  int batch;
};

// Second conv layer (full resolution) and third conv layer (after the first pool).
const ConvCase kConv[] = {{{32, 100, 100}, 32, 5, 2}, {{32, 20, 20}, 64, 3, 16}};

void conv_forward(benchmark::State& state, Backend backend) {
  const auto& c = kConv[state.range(0)];
  const auto x = noise(c.in.size() * c.batch, 1);
  const auto w = noise(static_cast<std::size_t>(c.cout) * c.in.c * c.k * c.k, 2);
  const auto b = noise(c.cout, 3);
  std::vector<float> y(static_cast<std::size_t>(c.cout) * c.in.h * c.in.w * c.batch);
  for (auto _ : state) {
    if (backend == Backend::reference) {
      reference::conv_forward(x.data(), c.batch, c.in, w.data(), b.data(), c.cout, c.k, y.data());
    } else {
      parallel::conv_forward(x.data(), c.batch, c.in, w.data(), b.data(), c.cout, c.k, y.data());
    }
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * c.batch);
}

void conv_backward(benchmark::State& state, Backend backend) {
  const auto& c = kConv[state.range(0)];
  const std::size_t out = static_cast<std::size_t>(c.cout) * c.in.h * c.in.w * c.batch;
  const auto x = noise(c.in.size() * c.batch, 1);
  const auto w = noise(static_cast<std::size_t>(c.cout) * c.in.c * c.k * c.k, 2);
  const auto dy = noise(out, 4);
  std::vector<float> dx(x.size()), dw(w.size()), db(c.cout);
  for (auto _ : state) {
    if (backend == Backend::reference) {
      reference::conv_backward(x.data(), c.batch, c.in, w.data(), c.cout, c.k, dy.data(), dx.data(), dw.data(), db.data());
    } else {
      parallel::conv_backward(x.data(), c.batch, c.in, w.data(), c.cout, c.k, dy.data(), dx.data(), dw.data(), db.data());
    }
    benchmark::DoNotOptimize(dw.data());
  }
  state.SetItemsProcessed(state.iterations() * c.batch);
}

void dense_forward_backward(benchmark::State& state, Backend backend) {
  const int in = 256, out = 2000, batch = 100;
  const auto x = noise(static_cast<std::size_t>(in) * batch, 1);
  const auto w = noise(static_cast<std::size_t>(in) * out, 2);
  const auto b = noise(out, 3);
  const auto dy = noise(static_cast<std::size_t>(out) * batch, 4);
  std::vector<float> y(dy.size()), dx(x.size()), dw(w.size()), db(out);
  for (auto _ : state) {
    if (backend == Backend::reference) {
      reference::dense_forward(x.data(), batch, in, w.data(), b.data(), out, y.data());
      reference::dense_backward(x.data(), batch, in, w.data(), out, dy.data(), dx.data(), dw.data(), db.data());
    } else {
      parallel::dense_forward(x.data(), batch, in, w.data(), b.data(), out, y.data());
      parallel::dense_backward(x.data(), batch, in, w.data(), out, dy.data(), dx.data(), dw.data(), db.data());
    }
    benchmark::DoNotOptimize(dw.data());
  }
  state.SetItemsProcessed(state.iterations() * batch);
}

void maxpool_forward(benchmark::State& state, Backend backend) {
  const Shape in{32, 100, 100};
  const int batch = 8;
  const auto x = noise(in.size() * batch, 1);
  std::vector<float> y(static_cast<std::size_t>(32) * 20 * 20 * batch);
  for (auto _ : state) {
    if (backend == Backend::reference) {
      reference::maxpool_forward(x.data(), batch, in, 5, y.data());
    } else {
      parallel::maxpool_forward(x.data(), batch, in, 5, y.data());
    }
    benchmark::DoNotOptimize(y.data());
  }
  state.SetItemsProcessed(state.iterations() * batch);
}

// One full mini-batch gradient of the default network.
void network_step(benchmark::State& state, Backend backend) {
  const int batch = static_cast<int>(state.range(0));
  const Network<float> net(default_architecture(), kDefaultInput, 7);
  const auto x = noise(kDefaultInput.size() * batch, 1);
  const auto labels = noise(static_cast<std::size_t>(25) * batch, 2);
  auto grads = net.zeros_like();
  for (auto _ : state) benchmark::DoNotOptimize(net.backward(x.data(), labels.data(), batch, grads, backend));
  state.SetItemsProcessed(state.iterations() * batch);
}

}  // namespace

BENCHMARK_CAPTURE(conv_forward, reference, Backend::reference)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(conv_forward, parallel, Backend::parallel)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(conv_backward, reference, Backend::reference)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(conv_backward, parallel, Backend::parallel)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(dense_forward_backward, reference, Backend::reference)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(dense_forward_backward, parallel, Backend::parallel)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(maxpool_forward, reference, Backend::reference)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(maxpool_forward, parallel, Backend::parallel)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(network_step, reference, Backend::reference)->Arg(4)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(network_step, parallel, Backend::parallel)->Arg(4)->Unit(benchmark::kMillisecond);

int main(int argc, char** argv) {
  benchmark::Initialize(&argc, argv);
  if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
  benchmark::AddCustomContext("omp_max_threads", std::to_string(omp_get_max_threads()));
  benchmark::RunSpecifiedBenchmarks();
  benchmark::Shutdown();
  return 0;
}

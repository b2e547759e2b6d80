#include <benchmark/benchmark.h>

#include "xmusim/contrastive.hpp"
#include "xmusim/retrieval.hpp"

using namespace xmusim;

namespace {

Matrix random_rows(Rng& rng, std::size_t n, std::size_t d) {
  Matrix m(n, d);
  for (auto& v : m.values()) v = uniform_unit(rng) * 2.0 - 1.0;
  return m;
}

void BM_NtXentBackward(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(1);
  const Matrix t = random_rows(rng, n, 128);
  const Matrix a = random_rows(rng, n, 128);
  for (auto _ : state) benchmark::DoNotOptimize(nt_xent_backward(t, a, {}));
}
BENCHMARK(BM_NtXentBackward)->Arg(8)->Arg(64)->Arg(256);

// One training step's worth of head work: forward and backward for a batch of 64.
void BM_HeadForwardBackward(benchmark::State& state) {
  const auto d = static_cast<std::size_t>(state.range(0));
  Rng rng(2);
  const ProjectionHead h = ProjectionHead::xavier({d, 128, 128}, rng);
  const Matrix x = random_rows(rng, 64, d);
  const Matrix up = random_rows(rng, 64, 128);
  for (auto _ : state) {
    const HeadForward f = forward(h, x);
    benchmark::DoNotOptimize(head_backward(h, f, up));
  }
}
BENCHMARK(BM_HeadForwardBackward)->Arg(128)->Arg(512);

void BM_TopK(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  Rng rng(3);
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back("trk-" + std::to_string(i));
  const EmbeddingIndex index(std::move(ids), random_rows(rng, n, 128));
  const Matrix q = random_rows(rng, 1, 128);
  for (auto _ : state) benchmark::DoNotOptimize(top_k(index, q.row(0), 100));
}
BENCHMARK(BM_TopK)->Arg(1000)->Arg(10000);

}  // namespace

BENCHMARK_MAIN();

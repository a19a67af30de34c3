#include "mmsurv/kernels.hpp"
#include "mmsurv/rng.hpp"

#include <benchmark/benchmark.h>
#include <omp.h>

#include <map>

using namespace mmsurv;
namespace k = mmsurv::kernels;

namespace {

struct Inputs {
  Matrix x, components;
  std::vector<double> means, stds, beta, times, weights, risks, eval;
  std::vector<std::uint8_t> events;
};

const Inputs& inputs(Eigen::Index n) {
  static std::map<Eigen::Index, Inputs> cache;
  auto [it, fresh] = cache.try_emplace(n);
  if (!fresh) return it->second;
  auto& s = it->second;
  const Eigen::Index d = 768, q = 64;
  Rng rng(static_cast<std::uint64_t>(n));
  s.x.resize(n, d);
  s.components.resize(q, d);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < d; ++j) s.x(i, j) = rng.normal();
  for (Eigen::Index r = 0; r < q; ++r)
    for (Eigen::Index j = 0; j < d; ++j) s.components(r, j) = rng.normal();
  for (Eigen::Index j = 0; j < d; ++j) {
    s.means.push_back(rng.normal());
    s.stds.push_back(1.0 + rng.uniform());
    s.beta.push_back(rng.normal());
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    s.times.push_back(static_cast<double>(1 + rng.below(4000)));
    s.events.push_back(rng.uniform() < 0.3 ? 1 : 0);
    s.weights.push_back(1.0 + rng.uniform());
    s.risks.push_back(rng.normal());
  }
  for (int t = 0; t < 100; ++t) s.eval.push_back(365.0 + 14.75 * t);
  return s;
}

#define MMSURV_BENCH_PAIR(name, call)                                   \
  void BM_serial_##name(benchmark::State& st) {                         \
    const auto& s = inputs(st.range(0));                                \
    namespace impl = k::serial;                                         \
    for (auto _ : st) benchmark::DoNotOptimize(call);                   \
  }                                                                     \
  void BM_omp_##name(benchmark::State& st) {                            \
    const auto& s = inputs(st.range(0));                                \
    namespace impl = k::omp;                                            \
    for (auto _ : st) benchmark::DoNotOptimize(call);                   \
  }                                                                     \
  BENCHMARK(BM_serial_##name)->Arg(1000)->Arg(8000)->UseRealTime();     \
  BENCHMARK(BM_omp_##name)->Arg(1000)->Arg(8000)->UseRealTime();

MMSURV_BENCH_PAIR(standardize_rows, impl::standardize_rows(s.x, s.means, s.stds))
MMSURV_BENCH_PAIR(project_rows, impl::project_rows(s.x, s.means, s.components))
MMSURV_BENCH_PAIR(linear_predictor, impl::linear_predictor(s.x, s.beta))
MMSURV_BENCH_PAIR(concordance_counts, impl::concordance_counts(s.times, s.events, s.risks))
MMSURV_BENCH_PAIR(cumulative_dynamic_terms,
                  impl::cumulative_dynamic_terms(s.times, s.events, s.weights, s.risks, s.eval))

}  // namespace

BENCHMARK_MAIN();

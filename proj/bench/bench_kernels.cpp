// Serial reference vs OpenMP variants of the data-parallel kernels.

#include <benchmark/benchmark.h>

#include <vector>

#include "featcomp/kernels.hpp"
#include "featcomp/networks.hpp"
#include "featcomp/occlusion.hpp"
#include "featcomp/prototypes.hpp"
#include "featcomp/synth.hpp"

namespace {

using featcomp::kernels::Backend;

struct Fixture {
  featcomp::World world = featcomp::gen_world({});
  std::vector<featcomp::FeatureMap> maps;

  explicit Fixture(std::size_t n) {
    featcomp::Rng rng(7);
    for (std::size_t i = 0; i < n; ++i) {
      maps.push_back(featcomp::gen_pedestrian(world, featcomp::sample_scale(world, rng), rng).features);
    }
  }
};

const Fixture& fixture() {
  static const Fixture f(2048);
  return f;
}

void BM_AssignNearest(benchmark::State& state) {
  const auto& f = fixture();
  const std::size_t n = f.maps.size();
  const std::size_t d = f.maps[0].size();
  const std::size_t k = 5;
  std::vector<double> pts;
  for (const auto& m : f.maps) pts.insert(pts.end(), m.values().begin(), m.values().end());
  std::vector<double> centers(pts.begin(), pts.begin() + static_cast<std::ptrdiff_t>(k * d));
  std::vector<std::size_t> labels(n);
  std::vector<double> dist(n);
  const auto backend = static_cast<Backend>(state.range(0));
  for (auto _ : state) {
    featcomp::kernels::assign_nearest(pts, n, d, centers, k, labels, dist, backend);
    benchmark::DoNotOptimize(dist.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n));
}

void BM_CorrelationMaps(benchmark::State& state) {
  const auto& f = fixture();
  std::vector<const featcomp::FeatureMap*> a, b;
  for (std::size_t i = 0; i < f.maps.size(); ++i) {
    a.push_back(&f.maps[i]);
    b.push_back(&f.maps[(i + 1) % f.maps.size()]);
  }
  const auto backend = static_cast<Backend>(state.range(0));
  for (auto _ : state) {
    auto maps = featcomp::kernels::correlation_maps(a, b, featcomp::ChannelAggregate::mean, backend);
    benchmark::DoNotOptimize(maps.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * a.size()));
}

void BM_DiscriminatorScores(benchmark::State& state) {
  const auto& f = fixture();
  featcomp::Rng rng(11);
  const auto disc = featcomp::Discriminator::random(f.world.config.feature_shape(), 64, 30.0, rng);
  const auto backend = static_cast<Backend>(state.range(0));
  for (auto _ : state) {
    auto s = featcomp::kernels::discriminator_scores(disc, f.maps, backend);
    benchmark::DoNotOptimize(s.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * f.maps.size()));
}

}  // namespace

BENCHMARK(BM_AssignNearest)->Arg(0)->Arg(1)->ArgName("openmp");
BENCHMARK(BM_CorrelationMaps)->Arg(0)->Arg(1)->ArgName("openmp");
BENCHMARK(BM_DiscriminatorScores)->Arg(0)->Arg(1)->ArgName("openmp");

BENCHMARK_MAIN();

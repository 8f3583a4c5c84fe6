#include <doctest.h>

#include <cmath>

#include "featcomp/error.hpp"
#include "featcomp/eval.hpp"
#include "featcomp/occlusion.hpp"
#include "featcomp/prototypes.hpp"
#include "featcomp/synth.hpp"

using namespace featcomp;

namespace {

// 2x2 single-channel map from rows [[a, b], [c, d]] where rows run along y.
CorrelationMap map2x2(double a, double b, double c, double d) {
  CorrelationMap m{GridShape{2, 2}, std::vector<double>(4)};
  m.values[GridShape{2, 2}.index(0, 0)] = a;
  m.values[GridShape{2, 2}.index(1, 0)] = b;
  m.values[GridShape{2, 2}.index(0, 1)] = c;
  m.values[GridShape{2, 2}.index(1, 1)] = d;
  return m;
}

FeatureMap random_map(FeatureShape s, Rng& rng, bool nonneg) {
  FeatureMap f(s);
  for (auto& v : f.values()) v = nonneg ? std::abs(rng.normal(0, 3)) : rng.normal(0, 3);
  return f;
}

OcclusionMask with_cells(GridShape g, std::size_t n) {
  OcclusionMask m(g);
  for (std::size_t i = 0; i < n; ++i) m.set(i % g.width, i / g.width, true);
  return m;
}

PrototypeBank default_bank(const World& w, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Proposal> visible;
  for (int i = 0; i < 400; ++i) visible.push_back(gen_pedestrian(w, sample_scale(w, rng), rng));
  return kmeans(build_pool(visible), 5, seed, 100);
}

}  // namespace

TEST_CASE("channel_correlation examples") {
  const FeatureShape s{1, 2, 2};
  FeatureMap a(s, 1.0), b(s, 1.0);
  SUBCASE("identity case") {
    for (double v : channel_correlation(a, b, 0).values) CHECK(v == 1.0);
  }
  SUBCASE("zero case") {
    a.at(0, 1, 1) = 0.0;
    CHECK(channel_correlation(a, b, 0).at(1, 1) == 0.0);
  }
  SUBCASE("3 and 1") {
    a.at(0, 0, 1) = 3.0;
    CHECK(std::abs(channel_correlation(a, b, 0).at(0, 1) - 1.0) <= 1e-12);
  }
  SUBCASE("2 and 2") {
    a.at(0, 0, 0) = 2.0;
    b.at(0, 0, 0) = 2.0;
    CHECK(std::abs(channel_correlation(a, b, 0).at(0, 0) - 4.0) <= 1e-12);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS((channel_correlation(a, FeatureMap({1, 2, 3}), 0)), PreconditionError);
    CHECK_THROWS_AS((channel_correlation(a, b, 1)), PreconditionError);
  }
}

TEST_CASE("correlation_map examples") {
  Rng rng(1);
  const auto a = random_map({1, 3, 4}, rng, false);
  const auto b = random_map({1, 3, 4}, rng, false);
  CHECK(correlation_map(a, b).values == channel_correlation(a, b, 0).values);

  FeatureMap ones({3, 2, 2}, 1.0);
  for (double v : correlation_map(ones, ones).values) CHECK(v == 1.0);

  FeatureMap x({2, 1, 1}), y({2, 1, 1});
  x.at(0, 0, 0) = 1.0;
  y.at(0, 0, 0) = 1.0;
  x.at(1, 0, 0) = 3.0;
  y.at(1, 0, 0) = 1.0;
  CHECK(std::abs(correlation_map(x, y).values[0] - 1.0) <= 1e-12);
  FeatureMap p({2, 1, 1}, std::vector<double>{1.0, std::sqrt(3.0)});
  // channel values 1 and 3 -> mean 2
  CHECK(std::abs(correlation_map(p, p).values[0] - 2.0) <= 1e-12);
  CHECK(correlation_map(p, p, ChannelAggregate::max).values[0] == doctest::Approx(3.0));
  CHECK_THROWS_AS((correlation_map(p, FeatureMap({3, 1, 1}))), PreconditionError);
}

TEST_CASE("occluded_cells examples") {
  CHECK(occluded_cells(map2x2(3, 3, 3, 3)).empty());
  const auto m1 = occluded_cells(map2x2(2, 2, 2, 0));
  CHECK(m1.count() == 1);
  CHECK(m1.at(1, 1));
  const auto m2 = occluded_cells(map2x2(4, 3, 2, 1));
  CHECK(m2.count() == 2);
  CHECK(m2.at(0, 1));
  CHECK(m2.at(1, 1));
  CHECK(std::abs(map2x2(4, 3, 2, 1).mean() - 2.5) <= 1e-12);
  CHECK(std::abs(map2x2(2, 2, 2, 0).mean() - 1.5) <= 1e-12);
}

TEST_CASE("is_occluded examples") {
  const OcclusionConfig cfg;
  const GridShape g{7, 7};
  CHECK_FALSE(is_occluded(OcclusionMask(g), cfg));
  CHECK(is_occluded(with_cells(g, 20), cfg));
  CHECK_FALSE(is_occluded(with_cells(g, 3), cfg));
  CHECK(std::abs(20.0 / 49.0 - 0.408) < 1e-3);
}

TEST_CASE("completion_mask examples") {
  OcclusionConfig cfg;
  CHECK(completion_mask(map2x2(5, 5, 5, 5), cfg).empty());
  CHECK(completion_mask(map2x2(4, 3, 2, 1), cfg) == occluded_cells(map2x2(4, 3, 2, 1)));
  cfg.beta_mode = BetaMode::fixed;
  cfg.beta = -1.0;
  CHECK(completion_mask(map2x2(0, 3, 2, 1), cfg).empty());
  cfg.beta = 2.5;
  const auto m = completion_mask(map2x2(4, 3, 2, 1), cfg);
  CHECK(m == occluded_cells(map2x2(4, 3, 2, 1)));
}

TEST_CASE("config validation") {
  OcclusionConfig cfg;
  cfg.alpha = 1.0;
  CHECK_THROWS_AS((cfg.validate()), PreconditionError);
  cfg.alpha = 0.3;
  cfg.beta = NAN;
  CHECK_THROWS_AS((cfg.validate()), PreconditionError);
}

TEST_CASE("xor toy") {
  const GridShape g{7, 7};
  CHECK(xor_toy_check(OcclusionMask(g)));
  CHECK(xor_toy_check(with_cells(g, 49)));
  const World w = gen_world(WorldConfig{});
  Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    CHECK(xor_toy_check(sample_mask(w, kMaskPatterns[i % kMaskPatterns.size()], rng)));
  }
  CHECK(xor_toy_check());
}

TEST_CASE("correlation properties over random maps") {
  Rng rng(8);
  for (int t = 0; t < 200; ++t) {
    const FeatureShape s{1 + rng.uniform_index(4), 1 + rng.uniform_index(5), 1 + rng.uniform_index(5)};
    const auto a = random_map(s, rng, false);
    const auto b = random_map(s, rng, false);
    const std::size_t ch = rng.uniform_index(s.channels);
    CHECK(channel_correlation(a, b, ch).values == channel_correlation(b, a, ch).values);
    const auto self = channel_correlation(a, a, ch);
    for (std::size_t x = 0; x < s.width; ++x) {
      for (std::size_t y = 0; y < s.height; ++y) CHECK(self.at(x, y) == a.at(ch, x, y) * a.at(ch, x, y));
    }
    const auto na = random_map(s, rng, true);
    const auto nb = random_map(s, rng, true);
    for (double v : correlation_map(na, nb).values) CHECK(v >= 0.0);

    const auto map = correlation_map(a, b);
    const auto flagged = occluded_cells(map).count();
    CHECK(flagged < s.width * s.height);
    CorrelationMap flat{map.shape, std::vector<double>(map.values.size(), rng.normal())};
    CHECK(occluded_cells(flat).empty());
  }
}

TEST_CASE("ground-truth recovery with object occluders") {
  WorldConfig cfg;
  cfg.sigma_id = 0.0;
  const World w0 = gen_world(cfg);
  const auto bank0 = default_bank(w0, 5);
  const OcclusionConfig occ;
  Rng rng(10);
  for (int i = 0; i < 200; ++i) {
    const auto base = gen_pedestrian(w0, sample_scale(w0, rng), rng);
    const auto mask = sample_mask(w0, kMaskPatterns[i % kMaskPatterns.size()], rng);
    const auto o = gen_occluded(w0, base, mask, Occluder::object, rng);
    const auto& proto = nearest_prototype(bank0, o.scale);
    CHECK(completion_mask(correlation_map(o.features, proto.center), occ) == mask);
  }

  const World w = gen_world(WorldConfig{});
  const auto bank = default_bank(w, 6);
  double iou = 0.0;
  for (int i = 0; i < 500; ++i) {
    const auto base = gen_pedestrian(w, sample_scale(w, rng), rng);
    const auto mask = sample_mask(w, kMaskPatterns[i % kMaskPatterns.size()], rng);
    const auto o = gen_occluded(w, base, mask, Occluder::object, rng);
    const auto& proto = nearest_prototype(bank, o.scale);
    iou += mask_iou(completion_mask(correlation_map(o.features, proto.center), occ), mask);
  }
  CHECK(iou / 500.0 >= 0.6);
}

TEST_CASE("pedestrians correlate more with their prototype than backgrounds do") {
  const World w = gen_world(WorldConfig{});
  const auto bank = default_bank(w, 7);
  Rng rng(12);
  int wins = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto p = gen_pedestrian(w, sample_scale(w, rng), rng);
    const auto bg = gen_background(w, rng);
    const auto& proto = nearest_prototype(bank, p.scale);
    wins += correlation_map(p.features, proto.center).mean() >
            correlation_map(bg.features, proto.center).mean();
  }
  CHECK(wins >= 990);
}

TEST_CASE("heatmap writers") {
  const auto m = map2x2(4, 3, 2, 1);
  const auto pgm = grid_pgm(m.shape, m.values);
  CHECK(pgm.rfind("P5\n2 2\n255\n", 0) == 0);
  CHECK(pgm.size() == std::string("P5\n2 2\n255\n").size() + 4);
  CHECK(static_cast<unsigned char>(pgm.back()) == 0);
  const auto csv = grid_csv(m.shape, m.values);
  CHECK(csv == "4,3\n2,1\n");
  CHECK(grid_pgm(GridShape{2, 2}, std::vector<double>(4, 7.0)).size() == pgm.size());
}

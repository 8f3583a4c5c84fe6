#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "featcomp/error.hpp"
#include "featcomp/eval.hpp"
#include "featcomp/rng.hpp"
#include "featcomp/synth.hpp"
#include "oracles.hpp"

using namespace featcomp;

namespace {

using oracle::Toy;
using oracle::random_toy;

bool has_subset(const Toy& t, Subset s) {
  return std::any_of(t.gts.begin(), t.gts.end(), [&](const GroundTruth& g) { return in_subset(g.visibility, s); });
}

double mr(const Toy& t, Subset s) {
  return log_avg_miss_rate(t.dets, t.gts, EvalConfig{}, s, t.images);
}

FeatureMap constant(FeatureShape s, double v) { return FeatureMap(s, v); }

}  // namespace

TEST_CASE("fppi grid") {
  const auto p = EvalConfig::default_fppi_points();
  REQUIRE(p.size() == 9);
  CHECK(p.front() == 1e-2);
  CHECK(p.back() == 1.0);
  for (std::size_t i = 1; i < p.size(); ++i) CHECK(p[i] > p[i - 1]);
  EvalConfig bad;
  bad.fppi_points = {0.1, 0.1};
  CHECK_THROWS_AS((bad.validate()), PreconditionError);
}

TEST_CASE("log_avg_miss_rate examples") {
  std::vector<GroundTruth> gts{{0, 0, 1.0}, {1, 1, 0.9}, {2, 2, 0.5}, {3, 3, 0.3}};
  SUBCASE("perfect detector hits the floor") {
    std::vector<Detection> dets;
    for (const auto& g : gts) dets.push_back({g.image, 0.9, g.id});
    dets.push_back({0, 0.1, std::nullopt});
    for (auto s : kSubsets) {
      CHECK(log_avg_miss_rate(dets, gts, EvalConfig{}, s, 4) == doctest::Approx(1e-4).epsilon(1e-12));
    }
  }
  SUBCASE("no detections") {
    for (auto s : kSubsets) CHECK(log_avg_miss_rate({}, gts, EvalConfig{}, s, 4) == 1.0);
  }
  SUBCASE("empty subset") {
    const std::vector<GroundTruth> only_r{{0, 0, 1.0}};
    CHECK_THROWS_WITH_AS(log_avg_miss_rate({}, only_r, EvalConfig{}, Subset::heavy, 1),
                         doctest::Contains("empty subset"), PreconditionError);
  }
  SUBCASE("interleaved toy against the brute-force sweep") {
    // 4 images: TP 0.9, FP 0.8, TP 0.7, FP 0.6, TP 0.5, FP 0.4, TP 0.3.
    const std::vector<Detection> dets{{0, 0.9, 0},          {1, 0.8, std::nullopt}, {1, 0.7, 1},
                                      {2, 0.6, std::nullopt}, {2, 0.5, 2},          {3, 0.4, std::nullopt},
                                      {3, 0.3, 3}};
    const auto points = EvalConfig::default_fppi_points();
    for (auto s : kSubsets) {
      CHECK(log_avg_miss_rate(dets, gts, EvalConfig{}, s, 4) ==
            oracle::brute_force_mr(dets, gts, points, s, 4));
    }
    // R+HO by hand: the six points below 0.25 FPPI see miss 0.75, 10^-0.5 sees
    // 0.5, 10^-0.25 sees 0.25 and 1 sees 0, clamped.
    const double expected =
        std::exp((6 * std::log(0.75) + std::log(0.5) + std::log(0.25) + std::log(1e-4)) / 9.0);
    CHECK(log_avg_miss_rate(dets, gts, EvalConfig{}, Subset::reasonable_heavy, 4) ==
          doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("log_avg_miss_rate matches the brute-force sweep on random toys") {
  Rng rng(101);
  const auto points = EvalConfig::default_fppi_points();
  int checked = 0;
  for (int t = 0; t < 200; ++t) {
    const Toy toy = random_toy(rng);
    for (auto s : kSubsets) {
      if (!has_subset(toy, s)) continue;
      CHECK(mr(toy, s) == oracle::brute_force_mr(toy.dets, toy.gts, points, s, toy.images));
      ++checked;
    }
  }
  CHECK(checked > 300);
}

TEST_CASE("miss rate is bounded and monotone") {
  Rng rng(202);
  for (int t = 0; t < 150; ++t) {
    Toy toy = random_toy(rng);
    for (auto s : kSubsets) {
      if (!has_subset(toy, s)) continue;
      const double base = mr(toy, s);
      CHECK(base >= 1e-4);
      CHECK(base <= 1.0);

      Toy more_fp = toy;
      more_fp.dets.push_back({rng.uniform_index(toy.images), rng.uniform(), std::nullopt});
      CHECK(mr(more_fp, s) >= base);

      // Drop the first detection that is a true positive at its own threshold.
      for (std::size_t i = 0; i < toy.dets.size(); ++i) {
        const auto& d = toy.dets[i];
        if (!d.target || *d.target >= toy.gts.size()) continue;
        if (!in_subset(toy.gts[*d.target].visibility, s)) continue;
        const bool dup = std::any_of(toy.dets.begin(), toy.dets.end(), [&](const Detection& o) {
          return &o != &d && o.target == d.target;
        });
        if (dup) continue;
        Toy fewer = toy;
        fewer.dets.erase(fewer.dets.begin() + static_cast<std::ptrdiff_t>(i));
        CHECK(mr(fewer, s) >= base);
        break;
      }
    }
  }
}

TEST_CASE("subset_of") {
  CHECK(subset_of(0.9) == std::vector<Subset>{Subset::reasonable, Subset::reasonable_heavy});
  CHECK(subset_of(0.4) == std::vector<Subset>{Subset::heavy, Subset::reasonable_heavy});
  CHECK(subset_of(0.65) == std::vector<Subset>{Subset::reasonable, Subset::reasonable_heavy});
  CHECK(subset_of(0.2) == std::vector<Subset>{Subset::heavy, Subset::reasonable_heavy});
  CHECK(subset_of(0.1).empty());
  CHECK_THROWS_AS((subset_of(1.5)), PreconditionError);
  for (int i = 0; i <= 1000; ++i) {
    const double v = i / 1000.0;
    const bool r = in_subset(v, Subset::reasonable), h = in_subset(v, Subset::heavy);
    CHECK_FALSE((r && h));
    CHECK((r || h) == in_subset(v, Subset::reasonable_heavy));
    CHECK(in_subset(v, Subset::reasonable_heavy) == (v >= 0.2));
  }
  CHECK(std::string(to_string(Subset::reasonable_heavy)) == "R+HO");
}

TEST_CASE("compactness_ratio") {
  Rng rng(3);
  const FeatureShape s{2, 2, 2};
  std::vector<FeatureMap> visible, raw;
  for (int i = 0; i < 30; ++i) {
    FeatureMap v(s), r(s);
    for (auto& x : v.values()) x = rng.normal(5.0, 1.0);
    for (auto& x : r.values()) x = rng.normal(0.0, 3.0);
    visible.push_back(v);
    raw.push_back(r);
  }
  CHECK(compactness_ratio(raw, raw, visible) == 1.0);
  CHECK(compactness_ratio(visible, visible, raw) == 1.0);
  CHECK(compactness_ratio(raw, visible, visible) < 1.0);
  // Hand value: centroid 0, raw at distance^2 8*4 = 32, completed at 8*1 = 8.
  const std::vector<FeatureMap> v0{constant(s, 1.0), constant(s, -1.0)};
  const std::vector<FeatureMap> r0{constant(s, 2.0)};
  const std::vector<FeatureMap> c0{constant(s, -1.0)};
  CHECK(compactness_ratio(r0, c0, v0) == 0.25);
  CHECK_THROWS_AS((compactness_ratio({}, raw, visible)), PreconditionError);
  CHECK_THROWS_AS((compactness_ratio(raw, raw, std::vector<FeatureMap>{constant({1, 1, 1}, 0.0)})),
                  PreconditionError);
}

TEST_CASE("probe_accuracy") {
  Rng rng(4);
  const World w = gen_world(WorldConfig{});
  std::vector<FeatureMap> a, far;
  for (int i = 0; i < 100; ++i) {
    a.push_back(gen_pedestrian(w, sample_scale(w, rng), rng).features);
    FeatureMap g = a.back();
    for (auto& x : g.values()) x += 30.0;
    far.push_back(g);
  }
  std::vector<FeatureMap> b = a;
  for (std::size_t i = b.size(); i > 1; --i) std::swap(b[i - 1], b[rng.uniform_index(i)]);
  const double chance = probe_accuracy(a, b, 7);
  CHECK(chance >= 0.35);
  CHECK(chance <= 0.65);
  CHECK(probe_accuracy(a, far, 7) > 0.9);
  CHECK(probe_accuracy(a, far, 7) == probe_accuracy(a, far, 7));
  const std::vector<FeatureMap> few(a.begin(), a.begin() + 39);
  CHECK_THROWS_AS((probe_accuracy(few, a, 1)), PreconditionError);
  CHECK_THROWS_AS((probe_accuracy({}, a, 1)), PreconditionError);
}

TEST_CASE("mask_iou") {
  const GridShape g{7, 7};
  OcclusionMask pred(g), truth(g);
  for (std::size_t x = 0; x < 4; ++x) {
    for (std::size_t y = 0; y < 7; ++y) {
      truth.set(x, y, true);
      if (x < 3) pred.set(x, y, true);
    }
  }
  CHECK(pred.count() == 21);
  CHECK(truth.count() == 28);
  CHECK(mask_iou(pred, truth) == 0.75);
  CHECK(mask_iou(truth, pred) == 0.75);
  CHECK(mask_iou(truth, truth) == 1.0);
  CHECK(mask_iou(OcclusionMask(g), OcclusionMask(g)) == 1.0);
  OcclusionMask right(g);
  right.set(6, 6, true);
  CHECK(mask_iou(pred, right) == 0.0);
  CHECK_THROWS_AS((mask_iou(pred, OcclusionMask({2, 2}))), PreconditionError);

  Rng rng(5);
  for (int t = 0; t < 200; ++t) {
    OcclusionMask a(g), b(g);
    for (std::size_t x = 0; x < 7; ++x) {
      for (std::size_t y = 0; y < 7; ++y) {
        a.set(x, y, rng.bernoulli(0.3));
        b.set(x, y, rng.bernoulli(0.3));
      }
    }
    CHECK(mask_iou(a, b) == mask_iou(b, a));
    if (!a.empty() || !b.empty()) CHECK((mask_iou(a, b) == 1.0) == (a == b));
  }
}

#pragma once

// Independent reference implementations used by the unit and acceptance tests.
// They favour obviousness over speed and share no code with the library paths
// they check.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "featcomp/eval.hpp"
#include "featcomp/networks.hpp"
#include "featcomp/ndnum.hpp"
#include "featcomp/rng.hpp"

namespace oracle {

using Points = std::vector<std::vector<double>>;

// Within-cluster sum of squares of a labelling; +inf if any cluster is empty.
inline double partition_ss(const Points& pts, const std::vector<std::size_t>& labels, std::size_t k) {
  const std::size_t d = pts.front().size();
  std::vector<std::vector<double>> sum(k, std::vector<double>(d, 0.0));
  std::vector<std::size_t> count(k, 0);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    ++count[labels[i]];
    for (std::size_t j = 0; j < d; ++j) sum[labels[i]][j] += pts[i][j];
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (count[c] == 0) return std::numeric_limits<double>::infinity();
    for (auto& v : sum[c]) v /= static_cast<double>(count[c]);
  }
  double ss = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      const double t = pts[i][j] - sum[labels[i]][j];
      ss += t * t;
    }
  }
  return ss;
}

// Global optimum over all labellings of the points into k non-empty clusters.
inline double brute_force_kmeans(const Points& pts, std::size_t k) {
  const std::size_t n = pts.size();
  std::vector<std::size_t> labels(n, 0);
  double best = std::numeric_limits<double>::infinity();
  for (;;) {
    best = std::min(best, partition_ss(pts, labels, k));
    std::size_t i = 0;
    while (i < n && ++labels[i] == k) labels[i++] = 0;
    if (i == n) break;
  }
  return best;
}

// Miss rate summarised by enumerating every score threshold independently:
// at each threshold the kept detections are matched as a set.
inline double brute_force_mr(std::span<const featcomp::Detection> dets,
                             std::span<const featcomp::GroundTruth> gts,
                             std::span<const double> fppi_points, featcomp::Subset subset,
                             std::size_t images) {
  std::map<std::uint64_t, double> vis;
  for (const auto& g : gts) vis[g.id] = g.visibility;
  std::size_t n_gt = 0;
  for (const auto& g : gts) n_gt += featcomp::in_subset(g.visibility, subset);

  std::set<double> thresholds;
  for (const auto& d : dets) thresholds.insert(d.score);
  struct Point {
    double fppi, miss;
  };
  std::vector<Point> points{{0.0, 1.0}};
  for (double t : thresholds) {
    std::map<std::uint64_t, std::size_t> hits;
    std::size_t fp = 0;
    for (const auto& d : dets) {
      if (d.score < t) continue;
      if (!d.target || !vis.count(*d.target)) {
        ++fp;
      } else if (featcomp::in_subset(vis[*d.target], subset)) {
        ++hits[*d.target];
      }
    }
    for (const auto& [id, h] : hits) fp += h - 1;
    const std::size_t tp = hits.size();
    points.push_back({static_cast<double>(fp) / static_cast<double>(images),
                      static_cast<double>(n_gt - tp) / static_cast<double>(n_gt)});
  }
  double sum = 0.0;
  for (double p : fppi_points) {
    double best = 1.0;
    for (const auto& q : points) {
      if (q.fppi <= p && q.miss < best) best = q.miss;
    }
    sum += std::log(std::max(best, 1e-4));
  }
  return std::exp(sum / static_cast<double>(fppi_points.size()));
}

// Generator written out cell by cell from its defining formula.
inline std::vector<double> generator_forward(const featcomp::Generator& g,
                                             const featcomp::FeatureMap& f) {
  const auto& s = f.shape();
  const auto& w1 = g.l1().weights();
  const auto& b1 = g.l1().bias();
  const auto& w2 = g.l2().weights();
  const auto& b2 = g.l2().bias();
  const std::size_t C = s.channels, H = g.l1().out_dim();
  std::vector<double> out(f.size());
  for (std::size_t x = 0; x < s.width; ++x) {
    for (std::size_t y = 0; y < s.height; ++y) {
      std::vector<double> h(H);
      for (std::size_t j = 0; j < H; ++j) {
        double a = b1[j];
        for (std::size_t c = 0; c < C; ++c) a += w1.at(j, c) * (f.at(c, x, y) / g.kappa());
        h[j] = a > 0.0 ? a : 0.0;
      }
      for (std::size_t c = 0; c < C; ++c) {
        double z = b2[c];
        for (std::size_t j = 0; j < H; ++j) z += w2.at(c, j) * h[j];
        out[(c * s.width + x) * s.height + y] = f.at(c, x, y) + g.gain() * z;
      }
    }
  }
  return out;
}

// D(G(x)) as a function of every generator and discriminator parameter.
class Chain : public featcomp::ndnum::DifferentiableObjective {
 public:
  Chain(featcomp::Generator g, featcomp::Discriminator d, featcomp::FeatureShape shape)
      : gen(std::move(g)), disc(std::move(d)), shape_(shape) {}

  std::vector<std::span<double>> parameters() override {
    return {gen.l1().weights().values(), gen.l1().bias().values(), gen.l2().weights().values(),
            gen.l2().bias().values(), disc.l1().weights().values(), disc.l1().bias().values(),
            disc.l2().weights().values(), disc.l2().bias().values()};
  }

  double value(const featcomp::ndnum::Tensor& input) override {
    const auto y = gen.forward(as_map(input));
    return disc.probability(y.values());
  }

  std::vector<double> gradient(const featcomp::ndnum::Tensor& input) override {
    featcomp::Generator::Tape gt;
    featcomp::Discriminator::Tape dt;
    const auto y = gen.forward(as_map(input), gt);
    disc.probability(y.values(), dt);
    auto dg = disc.zero_grads();
    auto gg = gen.zero_grads();
    std::vector<double> dy(y.size());
    disc.backward(dt, 1.0, dg, dy);
    gen.backward(gt, dy, gg, {});
    std::vector<double> out;
    for (const auto* v : {&gg.l1.weights, &gg.l1.bias, &gg.l2.weights, &gg.l2.bias,
                          &dg.l1.weights, &dg.l1.bias, &dg.l2.weights, &dg.l2.bias}) {
      out.insert(out.end(), v->begin(), v->end());
    }
    return out;
  }

  featcomp::Generator gen;
  featcomp::Discriminator disc;

 private:
  featcomp::FeatureMap as_map(const featcomp::ndnum::Tensor& t) const {
    return featcomp::FeatureMap(shape_, std::vector<double>(t.values().begin(), t.values().end()));
  }
  featcomp::FeatureShape shape_;
};

// A random small chain with every layer non-zero.
inline Chain random_chain(featcomp::Rng& rng, featcomp::ndnum::Tensor& input) {
  using featcomp::ndnum::Activation;
  using featcomp::ndnum::DenseLayer;
  const featcomp::FeatureShape shape{2 + rng.uniform_index(4), 1 + rng.uniform_index(3),
                                     1 + rng.uniform_index(3)};
  const std::size_t C = shape.channels;
  const double kappa = 1.0 + 4.0 * rng.uniform();
  auto l1 = DenseLayer::random(C, C, Activation::relu, rng);
  auto l2 = DenseLayer::random(C, C, Activation::identity, rng, 0.5);
  for (auto& b : l1.bias().values()) b = rng.normal(0.0, 0.2);
  for (auto& b : l2.bias().values()) b = rng.normal(0.0, 0.2);
  featcomp::Generator g(l1, l2, kappa, 0.5 + rng.uniform());
  auto d = featcomp::Discriminator::random(shape, 2 + rng.uniform_index(7), kappa, rng);
  for (auto& b : d.l1().bias().values()) b = rng.normal(0.0, 0.2);
  std::vector<double> x(shape.size());
  for (auto& v : x) v = rng.normal(0.0, kappa);
  input = featcomp::ndnum::Tensor::vector(x);
  return Chain(std::move(g), std::move(d), shape);
}

// Small detection benchmark with coarse scores, duplicate hits, unknown
// targets and every visibility band.
struct Toy {
  std::vector<featcomp::GroundTruth> gts;
  std::vector<featcomp::Detection> dets;
  std::size_t images = 0;
};

inline Toy random_toy(featcomp::Rng& rng) {
  Toy t;
  t.images = 2 + rng.uniform_index(8);
  const double vis_choices[] = {1.0, 0.9, 0.65, 0.64, 0.4, 0.2, 0.1};
  std::uint64_t id = 0;
  for (std::size_t img = 0; img < t.images; ++img) {
    const std::size_t n = 1 + rng.uniform_index(4);
    for (std::size_t k = 0; k < n; ++k) t.gts.push_back({id++, img, vis_choices[rng.uniform_index(7)]});
  }
  // Coarse scores force ties.
  const auto score = [&] { return static_cast<double>(rng.uniform_index(12)) / 11.0; };
  for (const auto& g : t.gts) {
    if (rng.bernoulli(0.8)) t.dets.push_back({g.image, score(), g.id});
    if (rng.bernoulli(0.15)) t.dets.push_back({g.image, score(), g.id});
  }
  const std::size_t fps = rng.uniform_index(3 * t.images);
  for (std::size_t k = 0; k < fps; ++k) t.dets.push_back({rng.uniform_index(t.images), score(), std::nullopt});
  if (rng.bernoulli(0.3)) t.dets.push_back({0, score(), 9999});
  for (std::size_t i = t.dets.size(); i > 1; --i) std::swap(t.dets[i - 1], t.dets[rng.uniform_index(i)]);
  return t;
}

}  // namespace oracle

#include "featcomp/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include "featcomp/error.hpp"
#include "featcomp/networks.hpp"
#include "featcomp/rng.hpp"

namespace featcomp {

const char* to_string(Subset subset) {
  switch (subset) {
    case Subset::reasonable:
      return "R";
    case Subset::heavy:
      return "HO";
    case Subset::reasonable_heavy:
      break;
  }
  return "R+HO";
}

std::vector<double> EvalConfig::default_fppi_points() {
  std::vector<double> p(9);
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = std::pow(10.0, -2.0 + 0.25 * static_cast<double>(i));
  return p;
}

void EvalConfig::validate() const {
  if (fppi_points.empty()) throw PreconditionError("at least one FPPI point is required");
  for (std::size_t i = 1; i < fppi_points.size(); ++i) {
    if (!(fppi_points[i] > fppi_points[i - 1])) {
      throw PreconditionError("FPPI points must be strictly increasing");
    }
  }
  if (!(fppi_points.front() > 0.0)) throw PreconditionError("FPPI points must be positive");
}

bool in_subset(double visibility, Subset subset) {
  switch (subset) {
    case Subset::reasonable:
      return visibility >= 0.65;
    case Subset::heavy:
      return visibility >= 0.20 && visibility < 0.65;
    case Subset::reasonable_heavy:
      break;
  }
  return visibility >= 0.20;
}

std::vector<Subset> subset_of(double visibility) {
  if (!(visibility >= 0.0 && visibility <= 1.0)) {
    throw PreconditionError("visibility must lie in [0, 1]");
  }
  std::vector<Subset> out;
  for (auto s : kSubsets) {
    if (in_subset(visibility, s)) out.push_back(s);
  }
  return out;
}

std::vector<CurvePoint> miss_rate_curve(std::span<const Detection> detections,
                                        std::span<const GroundTruth> ground_truths, Subset subset,
                                        std::size_t num_images) {
  if (num_images == 0) throw PreconditionError("evaluation needs at least one image");
  std::unordered_map<std::uint64_t, std::size_t> gt_index;
  std::size_t n_gt = 0;
  for (std::size_t i = 0; i < ground_truths.size(); ++i) {
    const auto& g = ground_truths[i];
    if (!(g.visibility >= 0.0 && g.visibility <= 1.0)) {
      throw PreconditionError("ground truth " + std::to_string(g.id) + " has invalid visibility");
    }
    gt_index.emplace(g.id, i);
    if (in_subset(g.visibility, subset)) ++n_gt;
  }
  if (n_gt == 0) throw PreconditionError(std::string("empty subset ") + to_string(subset));

  std::vector<std::size_t> order(detections.size());
  std::iota(order.begin(), order.end(), 0);
  for (const auto& d : detections) {
    if (!std::isfinite(d.score)) throw PreconditionError("detection scores must be finite");
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return detections[a].score > detections[b].score;
  });

  std::vector<bool> matched(ground_truths.size(), false);
  std::size_t tp = 0, fp = 0;
  const double n = static_cast<double>(n_gt);
  const double imgs = static_cast<double>(num_images);
  std::vector<CurvePoint> curve{{0.0, 1.0}};
  for (std::size_t k = 0; k < order.size(); ++k) {
    const auto& d = detections[order[k]];
    const auto it = d.target ? gt_index.find(*d.target) : gt_index.end();
    if (it == gt_index.end()) {
      ++fp;
    } else if (in_subset(ground_truths[it->second].visibility, subset)) {
      if (matched[it->second]) {
        ++fp;
      } else {
        matched[it->second] = true;
        ++tp;
      }
    }
    const bool group_end = k + 1 == order.size() || detections[order[k + 1]].score != d.score;
    if (group_end) {
      curve.push_back({static_cast<double>(fp) / imgs, static_cast<double>(n_gt - tp) / n});
    }
  }
  return curve;
}

double summarize_curve(std::span<const CurvePoint> curve, std::span<const double> fppi_points) {
  double sum = 0.0;
  for (double p : fppi_points) {
    double best = 1.0;
    for (const auto& c : curve) {
      if (c.fppi <= p) best = std::min(best, c.miss_rate);
    }
    sum += std::log(std::max(best, kMissRateFloor));
  }
  return std::exp(sum / static_cast<double>(fppi_points.size()));
}

double log_avg_miss_rate(std::span<const Detection> detections,
                         std::span<const GroundTruth> ground_truths, const EvalConfig& config,
                         Subset subset, std::size_t num_images) {
  config.validate();
  const auto curve = miss_rate_curve(detections, ground_truths, subset, num_images);
  return summarize_curve(curve, config.fppi_points);
}

namespace {

std::vector<double> centroid(std::span<const FeatureMap> set) {
  std::vector<double> c(set.front().size(), 0.0);
  for (const auto& f : set) {
    for (std::size_t i = 0; i < c.size(); ++i) c[i] += f.values()[i];
  }
  for (auto& v : c) v /= static_cast<double>(set.size());
  return c;
}

double mean_sq_dist(std::span<const FeatureMap> set, const std::vector<double>& c) {
  double total = 0.0;
  for (const auto& f : set) {
    double s = 0.0;
    for (std::size_t i = 0; i < c.size(); ++i) {
      const double t = f.values()[i] - c[i];
      s += t * t;
    }
    total += s;
  }
  return total / static_cast<double>(set.size());
}

}  // namespace

double compactness_ratio(std::span<const FeatureMap> raw_occluded,
                         std::span<const FeatureMap> completed_occluded,
                         std::span<const FeatureMap> visible) {
  if (raw_occluded.empty() || completed_occluded.empty() || visible.empty()) {
    throw PreconditionError("compactness_ratio needs non-empty sets");
  }
  const FeatureShape s = visible.front().shape();
  for (auto set : {raw_occluded, completed_occluded, visible}) {
    for (const auto& f : set) {
      if (f.shape() != s) throw PreconditionError("compactness_ratio needs equal shapes");
    }
  }
  const auto c = centroid(visible);
  const double num = mean_sq_dist(completed_occluded, c);
  const double den = mean_sq_dist(raw_occluded, c);
  if (den == 0.0) {
    if (num == 0.0) return 1.0;
    throw PreconditionError("raw occluded features coincide with the visible centroid");
  }
  return num / den;
}

double probe_accuracy(std::span<const FeatureMap> a, std::span<const FeatureMap> b,
                      std::uint64_t seed, const ProbeConfig& config) {
  if (a.size() < kMinProbeSamples || b.size() < kMinProbeSamples) {
    throw PreconditionError("probe_accuracy needs at least " + std::to_string(kMinProbeSamples) +
                            " samples per set, got " + std::to_string(a.size()) + " and " +
                            std::to_string(b.size()));
  }
  const FeatureShape shape = a.front().shape();
  std::vector<const FeatureMap*> xs;
  std::vector<int> ys;
  for (const auto& f : a) {
    xs.push_back(&f);
    ys.push_back(1);
  }
  for (const auto& f : b) {
    xs.push_back(&f);
    ys.push_back(0);
  }
  for (auto* f : xs) {
    if (f->shape() != shape) throw PreconditionError("probe inputs must share one shape");
  }

  Rng rng = Rng(seed).split(0x9b0be);
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), 0);
  shuffle(order, rng);
  const std::size_t n_train = order.size() * 7 / 10;
  std::vector<std::size_t> train(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  const std::vector<std::size_t> test(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());

  Discriminator d = Discriminator::random(shape, config.hidden, config.kappa, rng);
  Discriminator::Tape tape;
  for (std::size_t e = 0; e < config.epochs; ++e) {
    shuffle(train, rng);
    for (std::size_t start = 0; start < train.size(); start += config.batch) {
      const std::size_t end = std::min(train.size(), start + config.batch);
      const double inv = 1.0 / static_cast<double>(end - start);
      auto grads = d.zero_grads();
      for (std::size_t j = start; j < end; ++j) {
        const std::size_t i = train[j];
        const double p = d.probability(xs[i]->values(), tape);
        const bool inside = p > ndnum::kProbFloor && p < 1.0 - ndnum::kProbFloor;
        const double g = !inside ? 0.0 : ys[i] ? 1.0 / p : -1.0 / (1.0 - p);
        d.backward(tape, g * inv, grads, {});
      }
      d.step(grads, config.rate, ndnum::Direction::ascend);
    }
  }
  std::size_t correct = 0;
  for (std::size_t i : test) {
    const bool predicted_a = d.probability(xs[i]->values()) > 0.5;
    correct += predicted_a == (ys[i] == 1) ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

double mask_iou(const OcclusionMask& predicted, const OcclusionMask& truth) {
  if (predicted.shape() != truth.shape()) throw PreconditionError("mask_iou needs equal mask shapes");
  std::size_t inter = 0, uni = 0;
  const auto p = predicted.cells();
  const auto t = truth.cells();
  for (std::size_t i = 0; i < p.size(); ++i) {
    inter += (p[i] && t[i]) ? 1 : 0;
    uni += (p[i] || t[i]) ? 1 : 0;
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace featcomp

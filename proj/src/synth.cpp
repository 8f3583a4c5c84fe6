#include "featcomp/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "featcomp/error.hpp"
#include "featcomp/ndnum.hpp"

namespace featcomp {
namespace {

constexpr std::size_t kLayoutSide = 7;

int layout7(std::size_t x, std::size_t y) {
  if ((y == 0 && x >= 2 && x <= 4) || (x == 3 && y == 1)) return static_cast<int>(Part::head);
  if (y <= 4) {
    if (x <= 1) return static_cast<int>(Part::left_arm);
    if (x >= 5) return static_cast<int>(Part::right_arm);
    return static_cast<int>(Part::torso);
  }
  return static_cast<int>(x <= 3 ? Part::left_leg : Part::right_leg);
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0.0 || bb == 0.0) return 1.0;
  return ab / std::sqrt(aa * bb);
}

// Each component is truncated at half the distance to its nearest neighbour.
double truncation_radius(const ScaleMixture& mix, std::size_t k) {
  double r = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < mix.means.size(); ++j) {
    if (j != k) r = std::min(r, std::abs(mix.means[j] - mix.means[k]) / 2.0);
  }
  if (!std::isfinite(r)) r = 3.0 * mix.stds[k];
  return r;
}

std::vector<double> object_template(const World& world, Rng& rng) {
  const auto& cfg = world.config;
  std::vector<double> t(cfg.channels, 0.0);
  const auto& pool = world.object_channels;
  const std::size_t n = std::min<std::size_t>(2, pool.size());
  for (auto i : sample_without_replacement(pool.size(), n, rng)) t[pool[i]] = cfg.template_gain;
  return t;
}

}  // namespace

const char* to_string(MaskPattern pattern) {
  switch (pattern) {
    case MaskPattern::left_half:
      return "left-half";
    case MaskPattern::right_half:
      return "right-half";
    case MaskPattern::bottom:
      return "bottom";
    case MaskPattern::rect:
      return "rect";
    case MaskPattern::person_shape:
      break;
  }
  return "person-shape";
}

std::vector<int> default_part_layout(std::size_t width, std::size_t height) {
  std::vector<int> layout(width * height);
  const GridShape grid{width, height};
  for (std::size_t x = 0; x < width; ++x) {
    for (std::size_t y = 0; y < height; ++y) {
      layout[grid.index(x, y)] = layout7(x * kLayoutSide / width, y * kLayoutSide / height);
    }
  }
  return layout;
}

void WorldConfig::validate() const {
  if (channels == 0 || width == 0 || height == 0) {
    throw PreconditionError("world grid C x X x Y must be non-empty");
  }
  if (!part_layout.empty()) {
    if (part_layout.size() != width * height) {
      throw PreconditionError("part layout must assign every one of the " +
                              std::to_string(width * height) + " cells");
    }
    for (int p : part_layout) {
      if (p < 0 || p >= static_cast<int>(kPartCount)) {
        throw PreconditionError("part id " + std::to_string(p) + " out of range");
      }
    }
  }
  if (!(sigma_id >= 0.0)) throw PreconditionError("sigma_id must be >= 0");
  if (scales.means.empty() || scales.means.size() != scales.stds.size() ||
      scales.means.size() != scales.weights.size()) {
    throw PreconditionError("scale mixture needs matching means, stds and weights");
  }
  for (std::size_t k = 0; k < scales.means.size(); ++k) {
    if (!(scales.means[k] > 0.0)) throw PreconditionError("scale means must be positive");
    if (!(scales.stds[k] >= 0.0)) throw PreconditionError("scale stds must be >= 0");
    if (!(scales.weights[k] >= 0.0)) throw PreconditionError("scale weights must be >= 0");
  }
  if (!(std::accumulate(scales.weights.begin(), scales.weights.end(), 0.0) > 0.0)) {
    throw PreconditionError("scale weights must not all be zero");
  }
  if (!(template_gain > 0.0) || !(weak_gain > 0.0)) {
    throw PreconditionError("template gains must be positive");
  }
  if (channels_per_part == 0) throw PreconditionError("channels_per_part must be >= 1");
}

World gen_world(const WorldConfig& config) {
  config.validate();
  World world;
  world.config = config;
  world.layout = config.part_layout.empty() ? default_part_layout(config.width, config.height)
                                            : config.part_layout;
  Rng rng = Rng(config.seed).split(0x7e3b1a7e);
  const std::size_t C = config.channels;
  const std::size_t cpp = config.channels_per_part;

  for (int attempt = 0;; ++attempt) {
    if (attempt == 1000) {
      throw PreconditionError("cannot draw part templates with pairwise cosine <= 0.9 for C=" +
                              std::to_string(C));
    }
    const auto perm = sample_without_replacement(C, C, rng);
    std::vector<std::vector<double>> templates(kPartCount, std::vector<double>(C, 0.0));
    for (std::size_t p = 0; p < kPartCount; ++p) {
      const double gain = config.template_gain *
                          (static_cast<int>(p) == config.weak_part ? config.weak_gain : 1.0);
      for (std::size_t j = 0; j < cpp; ++j) templates[p][perm[(p * cpp + j) % C]] = gain;
    }
    bool ok = true;
    for (std::size_t a = 0; a < kPartCount && ok; ++a) {
      for (std::size_t b = a + 1; b < kPartCount && ok; ++b) {
        ok = cosine(templates[a], templates[b]) <= 0.9;
      }
    }
    if (!ok) continue;
    world.templates = std::move(templates);
    const std::size_t used = kPartCount * cpp;
    if (C >= used + 2) {
      world.object_channels.assign(perm.begin() + static_cast<std::ptrdiff_t>(used), perm.end());
    } else {
      world.object_channels = perm;
    }
    break;
  }
  return world;
}

double sample_scale(const World& world, Rng& rng) {
  const auto& mix = world.config.scales;
  const double total = std::accumulate(mix.weights.begin(), mix.weights.end(), 0.0);
  double u = rng.uniform() * total;
  std::size_t k = 0;
  while (k + 1 < mix.weights.size() && u >= mix.weights[k]) u -= mix.weights[k++];
  const double radius = truncation_radius(mix, k);
  for (;;) {
    const double s = rng.normal(mix.means[k], mix.stds[k]);
    if (std::abs(s - mix.means[k]) <= radius && s > 0.0) return s;
  }
}

Proposal gen_pedestrian(const World& world, double scale, Rng& rng) {
  if (!(scale > 0.0)) throw PreconditionError("pedestrian scale must be positive");
  const auto& cfg = world.config;
  const double s = scale / kScaleNorm;
  FeatureMap f(cfg.feature_shape());
  for (std::size_t c = 0; c < cfg.channels; ++c) {
    for (std::size_t x = 0; x < cfg.width; ++x) {
      for (std::size_t y = 0; y < cfg.height; ++y) {
        const double t = world.templates[static_cast<std::size_t>(world.part_at(x, y))][c];
        const double eta = cfg.sigma_id > 0.0 ? rng.normal(0.0, cfg.sigma_id) : 0.0;
        f.at(c, x, y) = s * (t + eta);
      }
    }
  }
  Proposal p;
  p.label = Label::pedestrian;
  p.scale = scale;
  p.visibility = 1.0;
  p.features = std::move(f);
  return p;
}

OcclusionMask sample_mask(const World& world, MaskPattern pattern, Rng& rng) {
  const std::size_t X = world.config.width;
  const std::size_t Y = world.config.height;
  const GridShape grid = world.config.grid();
  constexpr std::array<int, 4> kShiftX{-3, -2, 2, 3};

  for (;;) {
    OcclusionMask m(grid);
    m.shift_x = kShiftX[rng.uniform_index(kShiftX.size())];
    m.shift_y = static_cast<int>(rng.uniform_index(3)) - 1;
    switch (pattern) {
      case MaskPattern::left_half:
      case MaskPattern::right_half: {
        const std::size_t w = X / 2 + rng.uniform_index((X + 1) / 2 - X / 2 + 1);
        for (std::size_t i = 0; i < w; ++i) {
          const std::size_t x = pattern == MaskPattern::left_half ? i : X - 1 - i;
          for (std::size_t y = 0; y < Y; ++y) m.set(x, y, true);
        }
        break;
      }
      case MaskPattern::bottom: {
        const auto lo = static_cast<std::size_t>(std::ceil(0.2 * static_cast<double>(Y)));
        const auto hi = std::max(lo, static_cast<std::size_t>(std::floor(0.8 * static_cast<double>(Y))));
        const std::size_t h = lo + rng.uniform_index(hi - lo + 1);
        for (std::size_t x = 0; x < X; ++x) {
          for (std::size_t y = Y - std::min(h, Y); y < Y; ++y) m.set(x, y, true);
        }
        break;
      }
      case MaskPattern::rect: {
        const std::size_t w = 1 + rng.uniform_index(X);
        const std::size_t h = 1 + rng.uniform_index(Y);
        const std::size_t x0 = rng.uniform_index(X - w + 1);
        const std::size_t y0 = rng.uniform_index(Y - h + 1);
        for (std::size_t x = x0; x < x0 + w; ++x) {
          for (std::size_t y = y0; y < y0 + h; ++y) m.set(x, y, true);
        }
        break;
      }
      case MaskPattern::person_shape: {
        // Part regions of a second body standing at the mask's shift.
        std::array<bool, kPartCount> keep{};
        for (auto& k : keep) k = rng.bernoulli(0.7);
        for (std::size_t x = 0; x < X; ++x) {
          for (std::size_t y = 0; y < Y; ++y) {
            const auto sx = static_cast<std::ptrdiff_t>(x) - m.shift_x;
            const auto sy = static_cast<std::ptrdiff_t>(y) - m.shift_y;
            if (sx < 0 || sy < 0 || sx >= static_cast<std::ptrdiff_t>(X) ||
                sy >= static_cast<std::ptrdiff_t>(Y)) {
              continue;
            }
            const int part = world.part_at(static_cast<std::size_t>(sx), static_cast<std::size_t>(sy));
            if (keep[static_cast<std::size_t>(part)]) m.set(x, y, true);
          }
        }
        break;
      }
    }
    const double frac = m.fraction();
    if (frac >= 0.2 && frac <= 0.8) return m;
  }
}

Proposal gen_occluded(const World& world, const Proposal& base, const OcclusionMask& mask,
                      Occluder occluder, Rng& rng) {
  if (base.label != Label::pedestrian || base.visibility != 1.0 || base.true_mask) {
    throw PreconditionError("gen_occluded needs a fully visible pedestrian as its base");
  }
  const auto& cfg = world.config;
  if (mask.shape() != cfg.grid() || base.features.shape() != cfg.feature_shape()) {
    throw PreconditionError("mask and base must match the world grid");
  }
  Proposal out = base;
  const std::size_t X = cfg.width;
  const std::size_t Y = cfg.height;
  const double s = base.scale / kScaleNorm;

  if (occluder == Occluder::pedestrian) {
    const Proposal other = gen_pedestrian(world, sample_scale(world, rng), rng);
    const auto wrap = [](std::ptrdiff_t v, std::size_t n) {
      const auto m = static_cast<std::ptrdiff_t>(n);
      return static_cast<std::size_t>(((v % m) + m) % m);
    };
    for (std::size_t x = 0; x < X; ++x) {
      for (std::size_t y = 0; y < Y; ++y) {
        if (!mask.at(x, y)) continue;
        const std::size_t sx = wrap(static_cast<std::ptrdiff_t>(x) - mask.shift_x, X);
        const std::size_t sy = wrap(static_cast<std::ptrdiff_t>(y) - mask.shift_y, Y);
        for (std::size_t c = 0; c < cfg.channels; ++c) out.features.at(c, x, y) = other.features.at(c, sx, sy);
      }
    }
  } else {
    const auto o = object_template(world, rng);
    for (std::size_t x = 0; x < X; ++x) {
      for (std::size_t y = 0; y < Y; ++y) {
        if (!mask.at(x, y)) continue;
        for (std::size_t c = 0; c < cfg.channels; ++c) {
          const double eta = cfg.sigma_id > 0.0 ? rng.normal(0.0, cfg.sigma_id) : 0.0;
          out.features.at(c, x, y) = s * (o[c] + eta);
        }
      }
    }
  }
  out.true_mask = mask;
  out.visibility = 1.0 - static_cast<double>(mask.count()) / static_cast<double>(mask.shape().cells());
  return out;
}

Proposal gen_background(const World& world, Rng& rng) {
  const auto& cfg = world.config;
  const double scale = sample_scale(world, rng);
  const double s = scale / kScaleNorm;
  const std::size_t parts = world.part_count();
  FeatureMap f(cfg.feature_shape());
  for (std::size_t x = 0; x < cfg.width; ++x) {
    for (std::size_t y = 0; y < cfg.height; ++y) {
      const auto own = static_cast<std::size_t>(world.part_at(x, y));
      std::size_t q = rng.uniform_index(parts - 1);
      if (q >= own) ++q;
      const double energy = rng.exponential(1.0);
      for (std::size_t c = 0; c < cfg.channels; ++c) {
        const double clutter = std::abs(rng.normal(0.0, 3.0 * cfg.sigma_id)) * energy;
        f.at(c, x, y) = s * (world.templates[q][c] + clutter);
      }
    }
  }
  Proposal p;
  p.label = Label::background;
  p.scale = scale;
  p.visibility = 0.0;
  p.features = std::move(f);
  return p;
}

double base_score(const World& world, const Proposal& proposal, Rng& rng) {
  const auto& m = world.config.score;
  double logit;
  if (proposal.label == Label::pedestrian) {
    logit = m.pedestrian_bias + m.visibility_slope * (proposal.visibility - 1.0) +
            rng.normal(0.0, m.pedestrian_noise);
  } else {
    logit = m.background_bias + rng.normal(0.0, m.background_noise);
  }
  return ndnum::sigmoid(logit);
}

std::vector<Proposal> gen_dataset(const World& world, const DatasetPlan& plan, Rng& rng) {
  if (plan.proposals_per_image == 0) throw PreconditionError("proposals_per_image must be >= 1");
  if (plan.visible_fraction < 0.0 || plan.occluded_fraction < 0.0 ||
      plan.visible_fraction + plan.occluded_fraction > 1.0) {
    throw PreconditionError("visible and occluded fractions must be >= 0 and sum to <= 1");
  }
  const std::size_t n = plan.images * plan.proposals_per_image;
  std::vector<Proposal> out(n);
  const Rng base = rng.split(0xda7a);
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < n; ++i) {
    Rng r = base.split(i);
    const double u = r.uniform();
    Proposal p = [&] {
      if (u < plan.visible_fraction) return gen_pedestrian(world, sample_scale(world, r), r);
      if (u >= plan.visible_fraction + plan.occluded_fraction) return gen_background(world, r);
      const Proposal visible = gen_pedestrian(world, sample_scale(world, r), r);
      const MaskPattern pattern = kMaskPatterns[r.uniform_index(kMaskPatterns.size())];
      const OcclusionMask mask = sample_mask(world, pattern, r);
      const Occluder occ = r.bernoulli(plan.pedestrian_occluder_prob) ? Occluder::pedestrian
                                                                      : Occluder::object;
      return gen_occluded(world, visible, mask, occ, r);
    }();
    p.id = i;
    p.score = base_score(world, p, r);
    out[i] = std::move(p);
  }
  return out;
}

}  // namespace featcomp

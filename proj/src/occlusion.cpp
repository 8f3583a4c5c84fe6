#include "featcomp/occlusion.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "featcomp/error.hpp"
#include "featcomp/rng.hpp"

namespace featcomp {
namespace {

void require_same_shape(const FeatureMap& a, const FeatureMap& b) {
  if (a.shape() != b.shape()) {
    throw PreconditionError("correlation needs equal shapes, got " + to_string(a.shape()) +
                            " and " + to_string(b.shape()));
  }
}

double eq1(double a, double b) { return a * b / (1.0 + std::abs(a - b)); }

}  // namespace

void OcclusionConfig::validate() const {
  if (!(alpha > 0.0 && alpha < 1.0)) throw PreconditionError("alpha must lie in (0, 1)");
  if (!std::isfinite(beta)) throw PreconditionError("beta must be finite");
}

double CorrelationMap::mean() const {
  if (values.empty()) return 0.0;
  // Offsetting by the minimum keeps a constant map exactly at its own mean.
  const double m0 = *std::min_element(values.begin(), values.end());
  double s = 0.0;
  for (double v : values) s += v - m0;
  return m0 + s / static_cast<double>(values.size());
}

CorrelationMap channel_correlation(const FeatureMap& a, const FeatureMap& b, std::size_t channel) {
  require_same_shape(a, b);
  if (channel >= a.shape().channels) {
    throw PreconditionError("channel " + std::to_string(channel) + " out of range for " +
                            std::to_string(a.shape().channels) + " channels");
  }
  CorrelationMap m;
  m.shape = a.shape().grid();
  m.values.resize(m.shape.cells());
  for (std::size_t x = 0; x < m.shape.width; ++x) {
    for (std::size_t y = 0; y < m.shape.height; ++y) {
      m.values[m.shape.index(x, y)] = eq1(a.at(channel, x, y), b.at(channel, x, y));
    }
  }
  return m;
}

CorrelationMap correlation_map(const FeatureMap& a, const FeatureMap& b, ChannelAggregate aggregate) {
  require_same_shape(a, b);
  const FeatureShape s = a.shape();
  if (s.channels == 0) throw PreconditionError("correlation needs at least one channel");
  CorrelationMap m;
  m.shape = s.grid();
  m.values.assign(m.shape.cells(), 0.0);
  for (std::size_t x = 0; x < s.width; ++x) {
    for (std::size_t y = 0; y < s.height; ++y) {
      double acc = aggregate == ChannelAggregate::max ? -INFINITY : 0.0;
      for (std::size_t c = 0; c < s.channels; ++c) {
        const double v = eq1(a.at(c, x, y), b.at(c, x, y));
        acc = aggregate == ChannelAggregate::max ? std::max(acc, v) : acc + v;
      }
      if (aggregate == ChannelAggregate::mean) acc /= static_cast<double>(s.channels);
      m.values[m.shape.index(x, y)] = acc;
    }
  }
  return m;
}

OcclusionMask occluded_cells(const CorrelationMap& map) {
  OcclusionMask mask(map.shape);
  const double mean = map.mean();
  for (std::size_t x = 0; x < map.shape.width; ++x) {
    for (std::size_t y = 0; y < map.shape.height; ++y) mask.set(x, y, map.at(x, y) < mean);
  }
  return mask;
}

bool is_occluded(const OcclusionMask& mask, const OcclusionConfig& config) {
  return mask.fraction() > config.alpha;
}

OcclusionMask completion_mask(const CorrelationMap& map, const OcclusionConfig& config) {
  if (config.beta_mode == BetaMode::dynamic_mean) return occluded_cells(map);
  OcclusionMask mask(map.shape);
  for (std::size_t x = 0; x < map.shape.width; ++x) {
    for (std::size_t y = 0; y < map.shape.height; ++y) mask.set(x, y, map.at(x, y) < config.beta);
  }
  return mask;
}

bool xor_toy_check(const OcclusionMask& mask) {
  const GridShape g = mask.shape();
  FeatureMap visible(FeatureShape{1, g.width, g.height}, 1.0);
  FeatureMap occluded = visible;
  for (std::size_t x = 0; x < g.width; ++x) {
    for (std::size_t y = 0; y < g.height; ++y) {
      if (mask.at(x, y)) occluded.at(0, x, y) = 0.0;
    }
  }
  const CorrelationMap c = correlation_map(visible, occluded);
  const OcclusionMask flagged = occluded_cells(c);
  for (std::size_t x = 0; x < g.width; ++x) {
    for (std::size_t y = 0; y < g.height; ++y) {
      const bool high = !flagged.at(x, y) && c.at(x, y) > 0.0;
      if (high == mask.at(x, y)) return false;
    }
  }
  return true;
}

bool xor_toy_check() {
  const GridShape g{7, 7};
  OcclusionMask full(g, std::vector<std::uint8_t>(g.cells(), 1));
  if (!xor_toy_check(OcclusionMask(g)) || !xor_toy_check(full)) return false;
  Rng rng(0x0f16'4a11);
  for (int trial = 0; trial < 100; ++trial) {
    OcclusionMask m(g);
    for (std::size_t x = 0; x < g.width; ++x) {
      for (std::size_t y = 0; y < g.height; ++y) m.set(x, y, rng.bernoulli(0.5));
    }
    if (!xor_toy_check(m)) return false;
  }
  return true;
}

std::string grid_pgm(const GridShape& shape, const std::vector<double>& values) {
  if (values.size() != shape.cells()) throw PreconditionError("grid value count mismatch");
  std::string out = "P5\n" + std::to_string(shape.width) + " " + std::to_string(shape.height) + "\n255\n";
  double lo = 0.0, hi = 0.0;
  if (!values.empty()) {
    const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
    lo = *mn;
    hi = *mx;
  }
  for (std::size_t y = 0; y < shape.height; ++y) {
    for (std::size_t x = 0; x < shape.width; ++x) {
      const double v = values[shape.index(x, y)];
      const double t = hi > lo ? (v - lo) / (hi - lo) : 0.0;
      out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(t * 255.0))));
    }
  }
  return out;
}

std::string grid_csv(const GridShape& shape, const std::vector<double>& values) {
  if (values.size() != shape.cells()) throw PreconditionError("grid value count mismatch");
  std::string out;
  char buf[32];
  for (std::size_t y = 0; y < shape.height; ++y) {
    for (std::size_t x = 0; x < shape.width; ++x) {
      std::snprintf(buf, sizeof buf, "%.17g", values[shape.index(x, y)]);
      if (x) out += ',';
      out += buf;
    }
    out += '\n';
  }
  return out;
}

std::vector<double> mask_values(const OcclusionMask& mask) {
  return {mask.cells().begin(), mask.cells().end()};
}

}  // namespace featcomp

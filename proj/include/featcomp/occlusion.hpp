#pragma once

// Correlation-based occlusion modelling: per-cell correlation between a
// proposal and its prototype, below-mean cell detection, proposal-level
// classification and the completion mask.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "featcomp/grid.hpp"

namespace featcomp {

enum class ChannelAggregate { mean, max };
enum class BetaMode { dynamic_mean, fixed };

struct OcclusionConfig {
  double alpha = 0.30;
  BetaMode beta_mode = BetaMode::dynamic_mean;
  double beta = 0.0;
  ChannelAggregate aggregate = ChannelAggregate::mean;

  void validate() const;
};

struct CorrelationMap {
  GridShape shape;
  std::vector<double> values;  // indexed like GridShape::index
  std::uint64_t source_a = 0;
  std::uint64_t source_b = 0;

  double at(std::size_t x, std::size_t y) const { return values[shape.index(x, y)]; }
  double mean() const;
};

// c(x,y) = a*b / (1 + |a - b|) on one channel.
CorrelationMap channel_correlation(const FeatureMap& a, const FeatureMap& b, std::size_t channel);

CorrelationMap correlation_map(const FeatureMap& a, const FeatureMap& b,
                               ChannelAggregate aggregate = ChannelAggregate::mean);

// Cells strictly below the map mean.
OcclusionMask occluded_cells(const CorrelationMap& map);

bool is_occluded(const OcclusionMask& mask, const OcclusionConfig& config);

OcclusionMask completion_mask(const CorrelationMap& map, const OcclusionConfig& config);

// Toy XOR setup: every part shares one colour, occluded cells carry zero. A cell
// reads as visible when it is not flagged and its correlation is positive.
bool xor_toy_check(const OcclusionMask& mask);
bool xor_toy_check();

// 8-bit binary PGM, values min-max scaled to 0..255 (all zero for a constant grid).
std::string grid_pgm(const GridShape& shape, const std::vector<double>& values);
// One CSV row per y, one column per x.
std::string grid_csv(const GridShape& shape, const std::vector<double>& values);
std::vector<double> mask_values(const OcclusionMask& mask);

}  // namespace featcomp

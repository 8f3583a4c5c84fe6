#include "featcomp/grid.hpp"

#include <algorithm>
#include <cmath>

#include "featcomp/error.hpp"

namespace featcomp {

std::string to_string(const FeatureShape& shape) {
  return std::to_string(shape.channels) + "x" + std::to_string(shape.width) + "x" +
         std::to_string(shape.height);
}

FeatureMap::FeatureMap(FeatureShape shape, double fill)
    : shape_(shape), values_(shape.size(), fill) {
  if (!std::isfinite(fill)) throw PreconditionError("feature map fill value must be finite");
}

FeatureMap::FeatureMap(FeatureShape shape, std::vector<double> values)
    : shape_(shape), values_(std::move(values)) {
  if (values_.size() != shape_.size()) {
    throw PreconditionError("feature map of shape " + to_string(shape_) + " needs " +
                            std::to_string(shape_.size()) + " values, got " +
                            std::to_string(values_.size()));
  }
  if (!std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); })) {
    throw PreconditionError("feature map contains non-finite values");
  }
}

OcclusionMask::OcclusionMask(GridShape shape) : shape_(shape), cells_(shape.cells(), 0) {}

OcclusionMask::OcclusionMask(GridShape shape, std::vector<std::uint8_t> cells)
    : shape_(shape), cells_(std::move(cells)) {
  if (cells_.size() != shape_.cells()) {
    throw PreconditionError("mask of " + std::to_string(shape_.width) + "x" +
                            std::to_string(shape_.height) + " needs " +
                            std::to_string(shape_.cells()) + " cells, got " +
                            std::to_string(cells_.size()));
  }
  for (auto& c : cells_) c = c != 0 ? 1 : 0;
}

std::size_t OcclusionMask::count() const {
  return static_cast<std::size_t>(std::count(cells_.begin(), cells_.end(), std::uint8_t{1}));
}

double OcclusionMask::fraction() const {
  if (cells_.empty()) return 0.0;
  return static_cast<double>(count()) / static_cast<double>(cells_.size());
}

}  // namespace featcomp

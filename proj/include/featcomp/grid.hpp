#pragma once

// Grid-shaped value types shared by every module: per-proposal feature maps
// (C x X x Y) and binary cell masks (X x Y).

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace featcomp {

struct GridShape {
  std::size_t width = 0;   // X, horizontal cells
  std::size_t height = 0;  // Y, vertical cells

  std::size_t cells() const { return width * height; }
  std::size_t index(std::size_t x, std::size_t y) const { return x * height + y; }
  bool operator==(const GridShape&) const = default;
};

struct FeatureShape {
  std::size_t channels = 0;
  std::size_t width = 0;
  std::size_t height = 0;

  GridShape grid() const { return {width, height}; }
  std::size_t size() const { return channels * width * height; }
  bool operator==(const FeatureShape&) const = default;
};

std::string to_string(const FeatureShape& shape);

// Dense C x X x Y feature map, row-major with the channel as the slowest axis:
// value(c, x, y) lives at (c * X + x) * Y + y.
class FeatureMap {
 public:
  FeatureMap() = default;
  explicit FeatureMap(FeatureShape shape, double fill = 0.0);
  FeatureMap(FeatureShape shape, std::vector<double> values);

  const FeatureShape& shape() const { return shape_; }
  std::size_t size() const { return values_.size(); }

  double& at(std::size_t c, std::size_t x, std::size_t y) {
    return values_[(c * shape_.width + x) * shape_.height + y];
  }
  double at(std::size_t c, std::size_t x, std::size_t y) const {
    return values_[(c * shape_.width + x) * shape_.height + y];
  }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  bool operator==(const FeatureMap&) const = default;

 private:
  FeatureShape shape_;
  std::vector<double> values_;
};

// Binary X x Y mask, 1 = occluded. The shift records the offset of the occluding
// body for person-shaped occlusions; other patterns carry a random shift that
// pedestrian occluders use to misalign their cells.
class OcclusionMask {
 public:
  OcclusionMask() = default;
  explicit OcclusionMask(GridShape shape);
  OcclusionMask(GridShape shape, std::vector<std::uint8_t> cells);

  const GridShape& shape() const { return shape_; }

  bool at(std::size_t x, std::size_t y) const { return cells_[shape_.index(x, y)] != 0; }
  void set(std::size_t x, std::size_t y, bool occluded) {
    cells_[shape_.index(x, y)] = occluded ? 1 : 0;
  }
  std::span<const std::uint8_t> cells() const { return cells_; }

  std::size_t count() const;
  double fraction() const;
  bool empty() const { return count() == 0; }

  int shift_x = 0;
  int shift_y = 0;

  // Equality compares cells only; the shift is generation metadata.
  bool operator==(const OcclusionMask& other) const {
    return shape_ == other.shape_ && cells_ == other.cells_;
  }

 private:
  GridShape shape_;
  std::vector<std::uint8_t> cells_;
};

}  // namespace featcomp

#pragma once

// Evaluation protocol (log-average miss rate over FPPI, visibility subsets) and
// feature-space diagnostics.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "featcomp/grid.hpp"

namespace featcomp {

enum class Subset { reasonable, heavy, reasonable_heavy };
inline constexpr std::array<Subset, 3> kSubsets{Subset::reasonable, Subset::heavy,
                                                Subset::reasonable_heavy};

const char* to_string(Subset subset);  // "R", "HO", "R+HO"

struct EvalConfig {
  std::vector<double> fppi_points = default_fppi_points();
  double iou_match_threshold = 0.5;

  static std::vector<double> default_fppi_points();
  void validate() const;
};

// Visibility 0.65 belongs to R, 0.20 to HO.
std::vector<Subset> subset_of(double visibility);
bool in_subset(double visibility, Subset subset);

struct GroundTruth {
  std::uint64_t id = 0;
  std::uint64_t image = 0;
  double visibility = 1.0;
};

struct Detection {
  std::uint64_t image = 0;
  double score = 0.0;
  std::optional<std::uint64_t> target;  // ground-truth id, empty for background
};

struct CurvePoint {
  double fppi;
  double miss_rate;
};

// Points for the empty threshold and after each distinct score, highest first.
std::vector<CurvePoint> miss_rate_curve(std::span<const Detection> detections,
                                        std::span<const GroundTruth> ground_truths, Subset subset,
                                        std::size_t num_images);

double log_avg_miss_rate(std::span<const Detection> detections,
                         std::span<const GroundTruth> ground_truths, const EvalConfig& config,
                         Subset subset, std::size_t num_images);

inline constexpr double kMissRateFloor = 1e-4;

// Geometric mean of max(miss rate, 1e-4) at each FPPI point, taking the
// smallest miss rate whose FPPI does not exceed the point.
double summarize_curve(std::span<const CurvePoint> curve, std::span<const double> fppi_points);

double compactness_ratio(std::span<const FeatureMap> raw_occluded,
                         std::span<const FeatureMap> completed_occluded,
                         std::span<const FeatureMap> visible);

struct ProbeConfig {
  std::size_t hidden = 64;
  double kappa = 30.0;
  std::size_t epochs = 30;
  std::size_t batch = 16;
  double rate = 0.05;
};

inline constexpr std::size_t kMinProbeSamples = 40;

double probe_accuracy(std::span<const FeatureMap> a, std::span<const FeatureMap> b,
                      std::uint64_t seed, const ProbeConfig& config = {});

double mask_iou(const OcclusionMask& predicted, const OcclusionMask& truth);

}  // namespace featcomp

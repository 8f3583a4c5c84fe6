#pragma once

// Synthetic part-structured feature world: part templates laid out on the RoI
// grid, fully visible and occluded pedestrians with known masks, occluders and
// misaligned background clutter.

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "featcomp/grid.hpp"
#include "featcomp/rng.hpp"

namespace featcomp {

enum class Part : int { head = 0, torso, left_arm, right_arm, left_leg, right_leg };
inline constexpr std::size_t kPartCount = 6;

struct ScaleMixture {
  std::vector<double> means{64.0, 105.0, 181.0, 340.0};
  std::vector<double> stds{9.44, 19.33, 36.62, 131.33};
  std::vector<double> weights{0.4, 0.3, 0.2, 0.1};
};

// Synthetic stand-in for the base detector's confidence on each proposal.
struct ScoreModel {
  double pedestrian_bias = 2.5;
  double visibility_slope = 5.0;  // logit change per unit of visibility lost
  double pedestrian_noise = 1.0;
  double background_bias = -1.0;
  double background_noise = 1.2;
};

struct WorldConfig {
  std::size_t channels = 16;
  std::size_t width = 7;
  std::size_t height = 7;
  // Cell -> part id, indexed like GridShape::index. Empty means the default
  // six-part body layout.
  std::vector<int> part_layout;
  double sigma_id = 0.05;
  ScaleMixture scales;
  double template_gain = 30.0;
  std::size_t channels_per_part = 2;
  int weak_part = static_cast<int>(Part::head);
  double weak_gain = 0.9;
  ScoreModel score;
  std::uint64_t seed = 42;

  FeatureShape feature_shape() const { return {channels, width, height}; }
  GridShape grid() const { return {width, height}; }
  void validate() const;
};

// Head / torso / arms / legs on 7x7; other grid sizes resample this layout.
std::vector<int> default_part_layout(std::size_t width, std::size_t height);

struct World {
  WorldConfig config;
  std::vector<int> layout;                          // cell -> part
  std::vector<std::vector<double>> templates;       // part -> C values
  std::vector<std::size_t> object_channels;         // channels free for object occluders

  int part_at(std::size_t x, std::size_t y) const { return layout[config.grid().index(x, y)]; }
  std::size_t part_count() const { return templates.size(); }
};

enum class Label : std::uint8_t { background = 0, pedestrian = 1 };

struct Proposal {
  std::uint64_t id = 0;
  Label label = Label::background;
  double scale = 0.0;
  double score = 0.0;
  double visibility = 0.0;
  std::optional<OcclusionMask> true_mask;
  FeatureMap features;

  bool fully_visible() const { return label == Label::pedestrian && visibility >= 0.99; }
  bool operator==(const Proposal&) const = default;
};

enum class MaskPattern { left_half, right_half, bottom, rect, person_shape };
inline constexpr std::array<MaskPattern, 5> kMaskPatterns{
    MaskPattern::left_half, MaskPattern::right_half, MaskPattern::bottom, MaskPattern::rect,
    MaskPattern::person_shape};

enum class Occluder { object, pedestrian };

const char* to_string(MaskPattern pattern);

// Feature magnitude is scale / kScaleNorm.
inline constexpr double kScaleNorm = 181.0;

World gen_world(const WorldConfig& config);

double sample_scale(const World& world, Rng& rng);

Proposal gen_pedestrian(const World& world, double scale, Rng& rng);

OcclusionMask sample_mask(const World& world, MaskPattern pattern, Rng& rng);

Proposal gen_occluded(const World& world, const Proposal& base, const OcclusionMask& mask,
                      Occluder occluder, Rng& rng);

Proposal gen_background(const World& world, Rng& rng);

double base_score(const World& world, const Proposal& proposal, Rng& rng);

// Images of a detection benchmark: each image holds `proposals_per_image`
// proposals with consecutive ids starting at image * proposals_per_image.
struct DatasetPlan {
  std::size_t images = 0;
  std::size_t proposals_per_image = 8;
  double visible_fraction = 0.25;
  double occluded_fraction = 0.35;  // remainder is background
  double pedestrian_occluder_prob = 0.3;
};

std::vector<Proposal> gen_dataset(const World& world, const DatasetPlan& plan, Rng& rng);

}  // namespace featcomp

#pragma once

// Flat key=value run configuration ("world.C=16"), archived next to every
// output so a run can be replayed.

#include <cstdint>
#include <filesystem>
#include <string>

#include "featcomp/completion.hpp"
#include "featcomp/eval.hpp"
#include "featcomp/occlusion.hpp"
#include "featcomp/prototypes.hpp"
#include "featcomp/synth.hpp"

namespace featcomp {

struct PrototypeConfig {
  std::size_t K = 5;
  std::size_t restarts = 5;
  std::size_t max_iters = 100;
  LookupMode lookup = LookupMode::scale;
};

struct DataConfig {
  std::size_t train_images = 600;
  std::size_t eval_images = 250;
  std::size_t proposals_per_image = 8;
  double visible_fraction = 0.25;
  double occluded_fraction = 0.35;
  double pedestrian_occluder_prob = 0.3;

  DatasetPlan plan(std::size_t images) const;
};

struct RunConfig {
  std::uint64_t seed = 42;
  std::string out = "out";
  int threads = 1;
  WorldConfig world;
  DataConfig data;
  PrototypeConfig proto;
  OcclusionConfig occlusion;
  NetworkConfig network;
  TrainConfig stage1{2000, 1, 32, 2e-3, Stage::synthetic};
  TrainConfig stage2{2000, 1, 32, 2e-4, Stage::real};
  HeadConfig head;
  ProbeConfig probe;
  EvalConfig eval;

  void validate() const;
  // WorldConfig with the run seed applied.
  WorldConfig world_config() const;
};

// Applies "key=value" lines on top of `base`; '#' starts a comment.
RunConfig parse_config(const std::string& text, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});
void set_config_value(RunConfig& config, const std::string& key, const std::string& value);
std::string serialize_config(const RunConfig& config);

}  // namespace featcomp

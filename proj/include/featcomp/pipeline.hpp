#pragma once

// End-to-end experiment steps behind the CLI subcommands. Each cmd_* reads and
// writes files; the in-memory variants are shared with the tests.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "featcomp/completion.hpp"
#include "featcomp/config.hpp"
#include "featcomp/dataset_io.hpp"
#include "featcomp/eval.hpp"
#include "featcomp/prototypes.hpp"

namespace featcomp {

namespace fs = std::filesystem;

struct SynthOutput {
  Dataset train;
  Dataset eval;
  std::string manifest;  // JSON
};

SynthOutput synthesize(const RunConfig& config);
SynthOutput cmd_synth(const RunConfig& config, const fs::path& out_dir);

PrototypeBank build_prototypes(const Dataset& dataset, const RunConfig& config);
// "cluster k: mean ± std px (n members)" lines.
std::string describe_bank(const PrototypeBank& bank);
PrototypeBank cmd_build_prototypes(const fs::path& dataset, const RunConfig& config,
                                   const fs::path& out_dir);

struct TrainOutput {
  Model model;
  std::vector<HistoryRow> history;
  std::size_t visible = 0;
  std::size_t occluded = 0;
  std::size_t masks = 0;
};

// Training pedestrians split into the visible pool and the occluded pool
// (not fully visible and flagged by is_occluded).
struct TrainingSets {
  std::vector<Proposal> visible;
  std::vector<Proposal> occluded;
  std::vector<Proposal> background;
};

TrainingSets training_sets(const Dataset& dataset, const PrototypeBank& bank,
                           const OcclusionConfig& config);

ScoringHead fit_head(const TrainingSets& sets, const PrototypeBank& bank, const RunConfig& config,
                     Rng& rng);

enum class Schedule { progressive, direct };

TrainOutput train_model(const Dataset& dataset, const PrototypeBank& bank, const RunConfig& config,
                        Schedule schedule = Schedule::progressive);
TrainOutput cmd_train(const fs::path& dataset, const fs::path& bank, const RunConfig& config,
                      const fs::path& out_dir);

// Ground-truth occluded pedestrians of one subset with their completions, plus
// every fully visible pedestrian.
struct CompletionSets {
  std::vector<FeatureMap> raw;
  std::vector<FeatureMap> completed;
  std::vector<FeatureMap> visible;
  std::vector<double> iou;
};

CompletionSets completion_sets(const Dataset& dataset, const PrototypeBank& bank,
                               const OcclusionConfig& config, const Generator& gen, Subset subset,
                               LookupMode lookup = LookupMode::scale);

struct SubsetMetrics {
  Subset subset = Subset::reasonable;
  double mr_baseline = 1.0;
  double mr_completed = 1.0;
  double delta_mr_pp = 0.0;  // baseline - completed, percentage points
  double compactness = 0.0;
  double probe_raw = 0.0;
  double probe_completed = 0.0;
  double mean_iou = 0.0;
  std::size_t ground_truths = 0;
  std::size_t occluded = 0;
  std::size_t visible = 0;
};

struct EvalOutput {
  std::vector<SubsetMetrics> rows;
  std::string csv;
};

EvalOutput evaluate(const Dataset& dataset, const PrototypeBank& bank, const Model& model,
                    const RunConfig& config);
EvalOutput cmd_eval(const fs::path& dataset, const fs::path& bank, const fs::path& model,
                    const RunConfig& config, const fs::path& out_dir);

struct InspectOutput {
  Label label = Label::background;
  double visibility = 0.0;
  double flagged_fraction = 0.0;
  bool occluded = false;
  std::optional<double> iou;  // against the true mask when present
  std::vector<fs::path> files;
};

InspectOutput cmd_inspect(const fs::path& dataset, const fs::path& bank, std::uint64_t id,
                          const RunConfig& config, const fs::path& out_dir);

void archive_config(const RunConfig& config, const fs::path& out_dir);

}  // namespace featcomp

#pragma once

// Feature completion: copy-paste from the nearest prototype, adversarial
// refinement of the pasted map (generator vs discriminator, minibatch SGD),
// the two-stage progressive schedule, and rescoring of occluded proposals.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "featcomp/grid.hpp"
#include "featcomp/networks.hpp"
#include "featcomp/occlusion.hpp"
#include "featcomp/prototypes.hpp"
#include "featcomp/rng.hpp"
#include "featcomp/synth.hpp"

namespace featcomp {

enum class Stage : std::uint8_t { synthetic = 0, real = 1 };

struct TrainConfig {
  std::size_t T = 2000;
  std::size_t K_disc = 1;
  std::size_t m = 32;
  double gamma = 2e-3;
  Stage stage = Stage::synthetic;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

struct NetworkConfig {
  double kappa = 30.0;
  double gen_gain = 1.0;
  std::size_t disc_hidden = 64;
};

struct FeaturePools {
  std::vector<FeatureMap> occ;
  std::vector<FeatureMap> vis;
  // Paired pools draw the same indices from both sides (occ[i] belongs with vis[i]).
  bool paired = false;
};

struct HistoryRow {
  std::size_t iteration = 0;
  double disc_objective = 0.0;
  double gen_objective = 0.0;
  double probe_accuracy = 0.0;  // discriminator accuracy on the iteration's last minibatch

  bool operator==(const HistoryRow&) const = default;
};

struct AdversarialLosses {
  double disc_objective;  // ascended by the discriminator
  double gen_objective;   // descended by the generator
};

FeatureMap copy_paste(const FeatureMap& f_occ, const FeatureMap& prototype, const OcclusionMask& mask);

FeatureMap generate(const Generator& gen, const FeatureMap& pasted);

AdversarialLosses adversarial_losses(double d_vis, double d_gen);

enum class TrainPhase { discriminator, generator };
// Called after every parameter update.
using StepObserver = std::function<void(std::size_t iteration, TrainPhase phase,
                                        const Generator&, const Discriminator&)>;

std::vector<HistoryRow> train_adversarial(const FeaturePools& pools, Generator& gen,
                                          Discriminator& disc, const TrainConfig& config,
                                          Rng& rng, const StepObserver& observer = {});

// Non-empty completion masks of the given proposals against their nearest prototypes.
std::vector<OcclusionMask> harvest_masks(std::span<const Proposal> proposals,
                                         const PrototypeBank& bank, const OcclusionConfig& config);

inline constexpr std::size_t kMinMaskLibrary = 50;

// Harvested masks, topped up with sample_mask draws when fewer than
// kMinMaskLibrary were found and a world is available.
std::vector<OcclusionMask> build_mask_library(std::span<const Proposal> occluded,
                                              const PrototypeBank& bank,
                                              const OcclusionConfig& config, const World* world,
                                              Rng& rng);

struct TrainingResult {
  Generator gen;
  Discriminator disc;
  std::vector<HistoryRow> history;
};

struct Networks {
  Generator gen;
  Discriminator disc;
};

Networks init_networks(const FeatureShape& shape, const NetworkConfig& config, Rng& rng);

// Stage-1 pools: each visible sample, masked by a library mask and copy-pasted,
// paired with its own original.
FeaturePools synthetic_stage_pools(std::span<const Proposal> visible, const PrototypeBank& bank,
                                   std::span<const OcclusionMask> masks, Rng& rng);
// Stage-2 pools: copy-pasted real occluded samples against the visible pool.
FeaturePools real_stage_pools(std::span<const Proposal> visible, std::span<const Proposal> occluded,
                              const PrototypeBank& bank, const OcclusionConfig& config);

TrainingResult progressive_train(std::span<const Proposal> visible,
                                 std::span<const Proposal> occluded, const PrototypeBank& bank,
                                 const OcclusionConfig& occ_config,
                                 std::span<const OcclusionMask> masks, const TrainConfig& stage1,
                                 const TrainConfig& stage2, Networks init, Rng& rng);

// Stage-2 pairing for both schedule segments (stage1's T and gamma, then stage2's).
TrainingResult direct_train(std::span<const Proposal> visible, std::span<const Proposal> occluded,
                            const PrototypeBank& bank, const OcclusionConfig& occ_config,
                            const TrainConfig& stage1, const TrainConfig& stage2, Networks init,
                            Rng& rng);

struct Completion {
  CorrelationMap correlation;
  OcclusionMask mask;
  bool occluded = false;
  FeatureMap pasted;
  FeatureMap completed;
};

Completion complete(const Proposal& proposal, const PrototypeBank& bank,
                    const OcclusionConfig& config, const Generator& gen,
                    LookupMode lookup = LookupMode::scale);

// Head probability on the completed map for occluded proposals with a
// non-empty completion mask; the original score otherwise.
double rescore(const Proposal& proposal, const Completion& completion, const ScoringHead& head);

struct HeadConfig {
  std::size_t epochs = 40;
  std::size_t batch = 32;
  double rate = 0.05;
};

ScoringHead train_head(std::span<const FeatureMap> positives, std::span<const FeatureMap> negatives,
                       double kappa, const HeadConfig& config, Rng& rng);

struct Model {
  Generator gen;
  Discriminator disc;
  TrainConfig stage1;
  TrainConfig stage2;
  ScoringHead head;

  bool operator==(const Model&) const = default;
};

inline constexpr std::uint32_t kModelVersion = 1;

std::vector<std::uint8_t> encode_model(const Model& model);
Model decode_model(std::span<const std::uint8_t> bytes);
void write_model(const Model& model, const std::filesystem::path& path);
Model read_model(const std::filesystem::path& path);

std::string history_csv(std::span<const HistoryRow> history);

}  // namespace featcomp

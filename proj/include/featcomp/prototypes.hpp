#pragma once

// Offline prototype bank: K-means over fully visible pedestrian features, looked
// up at inference time by proposal scale.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "featcomp/grid.hpp"
#include "featcomp/kernels.hpp"
#include "featcomp/synth.hpp"

namespace featcomp {

struct PoolEntry {
  FeatureMap features;
  double scale = 0.0;
  std::uint64_t source_id = 0;
};

struct FeaturePool {
  FeatureShape shape;
  std::vector<PoolEntry> entries;

  std::size_t size() const { return entries.size(); }
};

// Pedestrians with visibility >= 0.99.
FeaturePool build_pool(std::span<const Proposal> proposals);

struct Prototype {
  FeatureMap center;
  double scale_mean = 0.0;
  double scale_std = 0.0;
  std::size_t member_count = 0;

  bool operator==(const Prototype&) const = default;
};

struct PrototypeBank {
  std::vector<Prototype> prototypes;  // ascending scale_mean

  std::size_t size() const { return prototypes.size(); }
  FeatureShape shape() const { return prototypes.empty() ? FeatureShape{} : prototypes[0].center.shape(); }
  bool operator==(const PrototypeBank&) const = default;
};

struct KMeansOptions {
  std::size_t k = 5;
  std::size_t restarts = 5;
  std::size_t max_iters = 100;
  std::uint64_t seed = 0;
  kernels::Backend backend = kernels::Backend::serial;
};

struct KMeansResult {
  PrototypeBank bank;
  std::vector<std::size_t> assignment;  // pool entry -> index into bank.prototypes
  double objective = 0.0;               // within-cluster sum of squares
  std::size_t iterations = 0;
  std::vector<double> trace;            // objective after each Lloyd update, best restart
};

KMeansResult kmeans_detailed(const FeaturePool& pool, const KMeansOptions& options);
PrototypeBank kmeans(const FeaturePool& pool, std::size_t k, std::uint64_t seed,
                     std::size_t max_iters);

// Sum over entries, in entry order, of the squared distance to the assigned center.
double within_cluster_ss(const FeaturePool& pool, const PrototypeBank& bank,
                         std::span<const std::size_t> assignment);

enum class LookupMode { scale, feature };

// Minimises |scale - scale_mean|; ties go to the smaller scale_mean.
std::size_t nearest_prototype_index(const PrototypeBank& bank, double scale);
const Prototype& nearest_prototype(const PrototypeBank& bank, double scale);
// Minimises squared feature distance; ties go to the lower index.
std::size_t nearest_prototype_by_features(const PrototypeBank& bank, const FeatureMap& features);
const Prototype& lookup_prototype(const PrototypeBank& bank, const Proposal& proposal,
                                  LookupMode mode);

inline constexpr std::uint32_t kBankVersion = 1;

std::vector<std::uint8_t> encode_bank(const PrototypeBank& bank);
PrototypeBank decode_bank(std::span<const std::uint8_t> bytes);
void write_bank(const PrototypeBank& bank, const std::filesystem::path& path);
PrototypeBank read_bank(const std::filesystem::path& path);

}  // namespace featcomp

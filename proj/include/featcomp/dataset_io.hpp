#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "featcomp/grid.hpp"
#include "featcomp/synth.hpp"

namespace featcomp {

inline constexpr std::uint32_t kDatasetVersion = 1;

struct Dataset {
  FeatureShape shape;
  std::vector<Proposal> proposals;

  bool operator==(const Dataset&) const = default;
};

std::vector<std::uint8_t> encode_dataset(const Dataset& dataset);
Dataset decode_dataset(std::span<const std::uint8_t> bytes);

void write_dataset(const Dataset& dataset, const std::filesystem::path& path);
Dataset read_dataset(const std::filesystem::path& path);

}  // namespace featcomp

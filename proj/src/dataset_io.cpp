#include "featcomp/dataset_io.hpp"

#include <cmath>

#include "featcomp/binio.hpp"
#include "featcomp/error.hpp"

namespace featcomp {

std::vector<std::uint8_t> encode_dataset(const Dataset& dataset) {
  binio::Writer w;
  w.magic("FCDS");
  w.u32(kDatasetVersion);
  w.u32(static_cast<std::uint32_t>(dataset.proposals.size()));
  w.u32(static_cast<std::uint32_t>(dataset.shape.channels));
  w.u32(static_cast<std::uint32_t>(dataset.shape.width));
  w.u32(static_cast<std::uint32_t>(dataset.shape.height));
  for (const auto& p : dataset.proposals) {
    if (p.features.shape() != dataset.shape) {
      throw PreconditionError("proposal " + std::to_string(p.id) + " has shape " +
                              to_string(p.features.shape()) + ", dataset expects " +
                              to_string(dataset.shape));
    }
    w.u64(p.id);
    w.u8(static_cast<std::uint8_t>(p.label));
    w.f64(p.scale);
    w.f64(p.score);
    w.f64(p.visibility);
    w.u8(p.true_mask ? 1 : 0);
    if (p.true_mask) {
      if (p.true_mask->shape() != dataset.shape.grid()) {
        throw PreconditionError("proposal " + std::to_string(p.id) + " mask does not match the grid");
      }
      w.bytes(p.true_mask->cells());
    }
    w.f64s(p.features.values());
  }
  return w.data();
}

Dataset decode_dataset(std::span<const std::uint8_t> bytes) {
  binio::Reader r(bytes);
  r.magic("FCDS");
  const std::uint32_t version = r.u32();
  if (version != kDatasetVersion) r.fail("unsupported dataset version " + std::to_string(version));
  const std::uint32_t count = r.u32();
  Dataset ds;
  ds.shape.channels = r.u32();
  ds.shape.width = r.u32();
  ds.shape.height = r.u32();
  const std::size_t cells = ds.shape.grid().cells();
  if (count > 0 && ds.shape.size() == 0) r.fail("dataset with proposals has an empty feature shape");
  ds.proposals.reserve(std::min<std::size_t>(count, r.remaining() / 42 + 1));
  for (std::uint32_t i = 0; i < count; ++i) {
    Proposal p;
    p.id = r.u64();
    const std::uint8_t label = r.u8();
    if (label > 1) r.fail("invalid label " + std::to_string(label));
    p.label = static_cast<Label>(label);
    p.scale = r.f64();
    p.score = r.f64();
    p.visibility = r.f64();
    if (!std::isfinite(p.scale) || !std::isfinite(p.score) || !std::isfinite(p.visibility)) {
      r.fail("non-finite proposal field");
    }
    const std::uint8_t has_mask = r.u8();
    if (has_mask > 1) r.fail("invalid mask flag " + std::to_string(has_mask));
    if (has_mask) {
      const std::size_t at = r.offset();
      auto cells_raw = r.bytes(cells);
      for (auto b : cells_raw) {
        if (b > 1) throw FormatError("mask byte must be 0 or 1", at);
      }
      p.true_mask = OcclusionMask(ds.shape.grid(), std::move(cells_raw));
    }
    const std::size_t at = r.offset();
    auto values = r.f64s(ds.shape.size());
    for (double v : values) {
      if (!std::isfinite(v)) throw FormatError("non-finite feature value", at);
    }
    p.features = FeatureMap(ds.shape, std::move(values));
    ds.proposals.push_back(std::move(p));
  }
  r.expect_end();
  return ds;
}

void write_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  binio::write_file(path, encode_dataset(dataset));
}

Dataset read_dataset(const std::filesystem::path& path) {
  return decode_dataset(binio::read_file(path));
}

}  // namespace featcomp

#include <doctest.h>

#include <filesystem>

#include "featcomp/binio.hpp"
#include "featcomp/dataset_io.hpp"
#include "featcomp/error.hpp"

using namespace featcomp;

namespace {

Dataset sample_dataset() {
  const World w = gen_world(WorldConfig{});
  Rng rng(12);
  return Dataset{w.config.feature_shape(), gen_dataset(w, DatasetPlan{.images = 6}, rng)};
}

}  // namespace

TEST_CASE("round trip is lossless") {
  const Dataset d = sample_dataset();
  const auto bytes = encode_dataset(d);
  CHECK(decode_dataset(bytes) == d);

  const auto dir = std::filesystem::temp_directory_path() / "featcomp_dataset_io";
  std::filesystem::create_directories(dir);
  write_dataset(d, dir / "d.fcds");
  CHECK(read_dataset(dir / "d.fcds") == d);
  std::filesystem::remove_all(dir);
}

TEST_CASE("header layout") {
  const Dataset d = sample_dataset();
  const auto bytes = encode_dataset(d);
  binio::Reader r(bytes);
  r.magic("FCDS");
  CHECK(r.u32() == kDatasetVersion);
  CHECK(r.u32() == d.proposals.size());
  CHECK(r.u32() == 16);
  CHECK(r.u32() == 7);
  CHECK(r.u32() == 7);
  CHECK(r.u64() == d.proposals[0].id);
}

TEST_CASE("empty dataset") {
  const Dataset d{FeatureShape{16, 7, 7}, {}};
  const auto bytes = encode_dataset(d);
  CHECK(bytes.size() == 4 + 5 * 4);
  const Dataset back = decode_dataset(bytes);
  CHECK(back.proposals.empty());
  CHECK(back.shape == d.shape);
}

TEST_CASE("truncated input reports a byte offset") {
  const auto bytes = encode_dataset(sample_dataset());
  for (std::size_t cut : {std::size_t{0}, std::size_t{3}, std::size_t{10}, std::size_t{24},
                          std::size_t{40}, bytes.size() / 2, bytes.size() - 1}) {
    const std::span<const std::uint8_t> head(bytes.data(), cut);
    try {
      decode_dataset(head);
      FAIL("expected a format error at cut " << cut);
    } catch (const FormatError& e) {
      CHECK(e.offset() <= cut);
    }
  }
}

TEST_CASE("malformed input") {
  auto bytes = encode_dataset(sample_dataset());
  SUBCASE("bad magic") {
    bytes[0] = 'X';
    CHECK_THROWS_AS((decode_dataset(bytes)), FormatError);
  }
  SUBCASE("bad version") {
    bytes[4] = 9;
    CHECK_THROWS_AS((decode_dataset(bytes)), FormatError);
  }
  SUBCASE("trailing bytes") {
    bytes.push_back(0);
    CHECK_THROWS_AS((decode_dataset(bytes)), FormatError);
  }
  SUBCASE("bad label") {
    bytes[24 + 8] = 7;
    CHECK_THROWS_AS((decode_dataset(bytes)), FormatError);
  }
}

TEST_CASE("missing file is an io error") {
  CHECK_THROWS_AS((read_dataset("/nonexistent/featcomp/none.fcds")), IoError);
}

#include <doctest.h>

#include "featcomp/config.hpp"
#include "featcomp/error.hpp"

using namespace featcomp;

TEST_CASE("defaults serialize and parse back to the same text") {
  const RunConfig d;
  const std::string text = serialize_config(d);
  CHECK(text.find("world.C=16\n") != std::string::npos);
  CHECK(text.find("proto.K=5\n") != std::string::npos);
  CHECK(text.find("occlusion.alpha=0.29999999999999999\n") != std::string::npos);
  CHECK(serialize_config(parse_config(text)) == text);
}

TEST_CASE("non-default values survive a round trip bit for bit") {
  RunConfig c;
  c.seed = 123456789012345ull;
  c.out = "runs/a b";
  c.world.sigma_id = 0.1 + 0.2;
  c.world.scales.means = {50.5, 99.25};
  c.world.scales.stds = {1.0 / 3.0, 2.0};
  c.world.scales.weights = {0.7, 0.3};
  c.occlusion.beta_mode = BetaMode::fixed;
  c.occlusion.beta = -1.0;
  c.occlusion.aggregate = ChannelAggregate::max;
  c.proto.lookup = LookupMode::feature;
  c.stage1.T = 7;
  c.stage2.gamma = 3.3e-5;
  c.network.gen_gain = 2.5;
  c.eval.fppi_points = {0.1, 0.5, 1.0};
  const RunConfig back = parse_config(serialize_config(c));
  CHECK(back.seed == c.seed);
  CHECK(back.out == c.out);
  CHECK(back.world.sigma_id == c.world.sigma_id);
  CHECK(back.world.scales.means == c.world.scales.means);
  CHECK(back.world.scales.stds == c.world.scales.stds);
  CHECK(back.occlusion.beta_mode == BetaMode::fixed);
  CHECK(back.occlusion.beta == -1.0);
  CHECK(back.occlusion.aggregate == ChannelAggregate::max);
  CHECK(back.proto.lookup == LookupMode::feature);
  CHECK(back.stage1 == c.stage1);
  CHECK(back.stage2 == c.stage2);
  CHECK(back.network.gen_gain == 2.5);
  CHECK(back.eval.fppi_points == c.eval.fppi_points);
  CHECK(serialize_config(back) == serialize_config(c));
}

TEST_CASE("parse_config overlays comments and blank lines") {
  const RunConfig c = parse_config("# run\n\nworld.C = 8\nstage1.T=3  # short\n");
  CHECK(c.world.channels == 8);
  CHECK(c.stage1.T == 3);
  CHECK(c.stage2.T == 2000);
}

TEST_CASE("bad config input") {
  CHECK_THROWS_AS((parse_config("nokey\n")), PreconditionError);
  CHECK_THROWS_AS((parse_config("world.nonsense=1\n")), PreconditionError);
  CHECK_THROWS_AS((parse_config("world.C=abc\n")), PreconditionError);
  CHECK_THROWS_AS((parse_config("stage1.T=-1\n")), PreconditionError);
  CHECK_THROWS_AS((parse_config("occlusion.beta_mode=sometimes\n")), PreconditionError);
  RunConfig c;
  c.occlusion.alpha = 0.0;
  CHECK_THROWS_AS((c.validate()), PreconditionError);
  c = RunConfig{};
  c.stage1.m = 0;
  CHECK_THROWS_AS((c.validate()), PreconditionError);
  c = RunConfig{};
  c.threads = 0;
  CHECK_THROWS_AS((c.validate()), PreconditionError);
  CHECK_THROWS_AS((load_config("/nonexistent/featcomp.cfg")), IoError);
}

TEST_CASE("world_config applies the run seed") {
  RunConfig c;
  c.seed = 9;
  CHECK(c.world_config().seed == 9);
}

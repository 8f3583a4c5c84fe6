#include "featcomp/config.hpp"

#include <charconv>
#include <cstdio>
#include <functional>
#include <sstream>
#include <vector>

#include "featcomp/binio.hpp"
#include "featcomp/error.hpp"

namespace featcomp {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw PreconditionError("config key '" + key + "': '" + v + "' is not a number");
  }
  return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw PreconditionError("config key '" + key + "': '" + v + "' is not a non-negative integer");
  }
  return out;
}

int to_int(const std::string& key, const std::string& v) {
  int out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw PreconditionError("config key '" + key + "': '" + v + "' is not an integer");
  }
  return out;
}

std::vector<double> to_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_double(key, trim(item)));
  return out;
}

std::string from_list(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt(v[i]);
  return s;
}

struct Field {
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

#define FC_SIZE(KEY, MEMBER)                                                              \
  Field{KEY, [](const RunConfig& c) { return std::to_string(c.MEMBER); },                \
        [](RunConfig& c, const std::string& v) { c.MEMBER = static_cast<std::size_t>(to_u64(KEY, v)); }}
#define FC_REAL(KEY, MEMBER)                                                              \
  Field{KEY, [](const RunConfig& c) { return fmt(c.MEMBER); },                           \
        [](RunConfig& c, const std::string& v) { c.MEMBER = to_double(KEY, v); }}
#define FC_LIST(KEY, MEMBER)                                                              \
  Field{KEY, [](const RunConfig& c) { return from_list(c.MEMBER); },                     \
        [](RunConfig& c, const std::string& v) { c.MEMBER = to_list(KEY, v); }}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      Field{"seed", [](const RunConfig& c) { return std::to_string(c.seed); },
            [](RunConfig& c, const std::string& v) { c.seed = to_u64("seed", v); }},
      Field{"out", [](const RunConfig& c) { return c.out; },
            [](RunConfig& c, const std::string& v) { c.out = v; }},
      Field{"threads", [](const RunConfig& c) { return std::to_string(c.threads); },
            [](RunConfig& c, const std::string& v) { c.threads = to_int("threads", v); }},
      FC_SIZE("world.C", world.channels),
      FC_SIZE("world.X", world.width),
      FC_SIZE("world.Y", world.height),
      FC_REAL("world.sigma_id", world.sigma_id),
      FC_LIST("world.scale_means", world.scales.means),
      FC_LIST("world.scale_stds", world.scales.stds),
      FC_LIST("world.scale_weights", world.scales.weights),
      FC_REAL("world.template_gain", world.template_gain),
      FC_SIZE("world.channels_per_part", world.channels_per_part),
      Field{"world.weak_part", [](const RunConfig& c) { return std::to_string(c.world.weak_part); },
            [](RunConfig& c, const std::string& v) { c.world.weak_part = to_int("world.weak_part", v); }},
      FC_REAL("world.weak_gain", world.weak_gain),
      FC_REAL("world.score.pedestrian_bias", world.score.pedestrian_bias),
      FC_REAL("world.score.visibility_slope", world.score.visibility_slope),
      FC_REAL("world.score.pedestrian_noise", world.score.pedestrian_noise),
      FC_REAL("world.score.background_bias", world.score.background_bias),
      FC_REAL("world.score.background_noise", world.score.background_noise),
      FC_SIZE("data.train_images", data.train_images),
      FC_SIZE("data.eval_images", data.eval_images),
      FC_SIZE("data.proposals_per_image", data.proposals_per_image),
      FC_REAL("data.visible_fraction", data.visible_fraction),
      FC_REAL("data.occluded_fraction", data.occluded_fraction),
      FC_REAL("data.pedestrian_occluder_prob", data.pedestrian_occluder_prob),
      FC_SIZE("proto.K", proto.K),
      FC_SIZE("proto.restarts", proto.restarts),
      FC_SIZE("proto.max_iters", proto.max_iters),
      Field{"proto.lookup",
            [](const RunConfig& c) { return std::string(c.proto.lookup == LookupMode::scale ? "scale" : "feature"); },
            [](RunConfig& c, const std::string& v) {
              if (v == "scale") c.proto.lookup = LookupMode::scale;
              else if (v == "feature") c.proto.lookup = LookupMode::feature;
              else throw PreconditionError("proto.lookup must be scale or feature");
            }},
      FC_REAL("occlusion.alpha", occlusion.alpha),
      Field{"occlusion.beta_mode",
            [](const RunConfig& c) {
              return std::string(c.occlusion.beta_mode == BetaMode::dynamic_mean ? "dynamic-mean" : "fixed");
            },
            [](RunConfig& c, const std::string& v) {
              if (v == "dynamic-mean") c.occlusion.beta_mode = BetaMode::dynamic_mean;
              else if (v == "fixed") c.occlusion.beta_mode = BetaMode::fixed;
              else throw PreconditionError("occlusion.beta_mode must be dynamic-mean or fixed");
            }},
      FC_REAL("occlusion.beta", occlusion.beta),
      Field{"occlusion.aggregate",
            [](const RunConfig& c) {
              return std::string(c.occlusion.aggregate == ChannelAggregate::mean ? "mean" : "max");
            },
            [](RunConfig& c, const std::string& v) {
              if (v == "mean") c.occlusion.aggregate = ChannelAggregate::mean;
              else if (v == "max") c.occlusion.aggregate = ChannelAggregate::max;
              else throw PreconditionError("occlusion.aggregate must be mean or max");
            }},
      FC_REAL("network.kappa", network.kappa),
      FC_REAL("network.gen_gain", network.gen_gain),
      FC_SIZE("network.disc_hidden", network.disc_hidden),
      FC_SIZE("stage1.T", stage1.T),
      FC_SIZE("stage1.K_disc", stage1.K_disc),
      FC_SIZE("stage1.m", stage1.m),
      FC_REAL("stage1.gamma", stage1.gamma),
      FC_SIZE("stage2.T", stage2.T),
      FC_SIZE("stage2.K_disc", stage2.K_disc),
      FC_SIZE("stage2.m", stage2.m),
      FC_REAL("stage2.gamma", stage2.gamma),
      FC_SIZE("head.epochs", head.epochs),
      FC_SIZE("head.batch", head.batch),
      FC_REAL("head.rate", head.rate),
      FC_SIZE("probe.hidden", probe.hidden),
      FC_SIZE("probe.epochs", probe.epochs),
      FC_SIZE("probe.batch", probe.batch),
      FC_REAL("probe.rate", probe.rate),
      FC_LIST("eval.fppi_points", eval.fppi_points),
      FC_REAL("eval.iou_match_threshold", eval.iou_match_threshold),
  };
  return table;
}

#undef FC_SIZE
#undef FC_REAL
#undef FC_LIST

}  // namespace

DatasetPlan DataConfig::plan(std::size_t images) const {
  DatasetPlan p;
  p.images = images;
  p.proposals_per_image = proposals_per_image;
  p.visible_fraction = visible_fraction;
  p.occluded_fraction = occluded_fraction;
  p.pedestrian_occluder_prob = pedestrian_occluder_prob;
  return p;
}

WorldConfig RunConfig::world_config() const {
  WorldConfig w = world;
  w.seed = seed;
  return w;
}

void RunConfig::validate() const {
  if (threads < 1) throw PreconditionError("threads must be >= 1");
  world_config().validate();
  if (data.proposals_per_image == 0) throw PreconditionError("data.proposals_per_image must be >= 1");
  if (data.visible_fraction < 0.0 || data.occluded_fraction < 0.0 ||
      data.visible_fraction + data.occluded_fraction > 1.0) {
    throw PreconditionError("data fractions must be >= 0 and sum to <= 1");
  }
  if (!(data.pedestrian_occluder_prob >= 0.0 && data.pedestrian_occluder_prob <= 1.0)) {
    throw PreconditionError("data.pedestrian_occluder_prob must lie in [0, 1]");
  }
  if (proto.K == 0 || proto.restarts == 0) throw PreconditionError("proto.K and proto.restarts must be >= 1");
  occlusion.validate();
  if (!(network.kappa > 0.0) || !(network.gen_gain > 0.0) || network.disc_hidden == 0) {
    throw PreconditionError("network.kappa and network.gen_gain must be positive, network.disc_hidden >= 1");
  }
  stage1.validate();
  stage2.validate();
  eval.validate();
}

void set_config_value(RunConfig& config, const std::string& key, const std::string& value) {
  for (const auto& f : fields()) {
    if (f.key == key) {
      f.set(config, value);
      return;
    }
  }
  throw PreconditionError("unknown config key '" + key + "'");
}

RunConfig parse_config(const std::string& text, RunConfig base) {
  std::stringstream ss(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw PreconditionError("config line " + std::to_string(lineno) + ": expected key=value");
    }
    set_config_value(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  base.stage1.stage = Stage::synthetic;
  base.stage2.stage = Stage::real;
  return base;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
  const auto bytes = binio::read_file(path);
  return parse_config(std::string(bytes.begin(), bytes.end()), std::move(base));
}

std::string serialize_config(const RunConfig& config) {
  std::string out;
  for (const auto& f : fields()) out += f.key + "=" + f.get(config) + "\n";
  return out;
}

}  // namespace featcomp

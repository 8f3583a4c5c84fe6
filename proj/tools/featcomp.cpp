// featcomp: synthetic occluded-pedestrian feature completion experiments.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "featcomp/config.hpp"
#include "featcomp/error.hpp"
#include "featcomp/kernels.hpp"
#include "featcomp/log.hpp"
#include "featcomp/pipeline.hpp"

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> threads;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "key=value config file")->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "run seed (overrides the config)");
  cmd->add_option("--out", c.out, "output directory (overrides the config)");
  cmd->add_option("--threads", c.threads, "OpenMP threads, default 1");
}

featcomp::RunConfig resolve(const Common& c) {
  featcomp::RunConfig cfg;
  if (!c.config.empty()) cfg = featcomp::load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (c.out) cfg.out = *c.out;
  if (c.threads) cfg.threads = *c.threads;
  cfg.validate();
  featcomp::kernels::set_threads(cfg.threads);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Occluded-pedestrian feature completion on a synthetic feature world"};
  app.require_subcommand(1);

  Common common;
  std::string dataset, bank, model;
  std::uint64_t id = 0;

  auto* synth = app.add_subcommand("synth-data", "generate train/eval datasets and a manifest");
  add_common(synth, common);

  auto* protos = app.add_subcommand("build-prototypes", "cluster fully visible features into a bank");
  add_common(protos, common);
  protos->add_option("--dataset", dataset, "training dataset (.fcds)")->required();

  auto* train = app.add_subcommand("train", "progressive adversarial training");
  add_common(train, common);
  train->add_option("--dataset", dataset, "training dataset (.fcds)")->required();
  train->add_option("--bank", bank, "prototype bank (.fcpb)")->required();

  auto* eval = app.add_subcommand("eval", "baseline vs completed detection metrics");
  add_common(eval, common);
  eval->add_option("--dataset", dataset, "evaluation dataset (.fcds)")->required();
  eval->add_option("--bank", bank, "prototype bank (.fcpb)")->required();
  eval->add_option("--model", model, "trained model (.fcgd)")->required();

  auto* inspect = app.add_subcommand("inspect", "correlation and mask heatmaps for one proposal");
  add_common(inspect, common);
  inspect->add_option("--dataset", dataset, "dataset (.fcds)")->required();
  inspect->add_option("--bank", bank, "prototype bank (.fcpb)")->required();
  inspect->add_option("--id", id, "proposal id")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const featcomp::RunConfig cfg = resolve(common);
    const std::string out = cfg.out;
    if (synth->parsed()) {
      featcomp::cmd_synth(cfg, out);
    } else if (protos->parsed()) {
      featcomp::cmd_build_prototypes(dataset, cfg, out);
    } else if (train->parsed()) {
      featcomp::cmd_train(dataset, bank, cfg, out);
    } else if (eval->parsed()) {
      featcomp::cmd_eval(dataset, bank, model, cfg, out);
    } else if (inspect->parsed()) {
      const auto r = featcomp::cmd_inspect(dataset, bank, id, cfg, out);
      std::cout << "flagged fraction " << r.flagged_fraction << (r.occluded ? " (occluded)" : "");
      if (r.iou) std::cout << ", IoU vs true mask " << *r.iou;
      std::cout << "\n";
    }
  } catch (const featcomp::PreconditionError& e) {
    featcomp::log::error(e.what());
    return 2;
  } catch (const featcomp::IoError& e) {
    featcomp::log::error(e.what());
    return 3;
  } catch (const std::exception& e) {
    featcomp::log::error(e.what());
    return 1;
  }
  return 0;
}

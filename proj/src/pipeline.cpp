#include "featcomp/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <limits>
#include <mutex>
#include <set>

#include <json.hpp>

#include "featcomp/binio.hpp"
#include "featcomp/error.hpp"
#include "featcomp/kernels.hpp"
#include "featcomp/log.hpp"

namespace featcomp {

namespace log {
namespace {

Level from_env() {
  const char* v = std::getenv("FEATCOMP_LOG");
  if (v == nullptr) return Level::info;
  const std::string s(v);
  if (s == "error") return Level::error;
  if (s == "debug") return Level::debug;
  return Level::info;
}

Level& current() {
  static Level l = from_env();
  return l;
}

}  // namespace

Level level() { return current(); }
void set_level(Level l) { current() = l; }

void write(Level l, const std::string& message) {
  if (static_cast<int>(l) > static_cast<int>(current())) return;
  static std::mutex mu;
  const std::lock_guard<std::mutex> lock(mu);
  static const char* names[] = {"error", "info", "debug"};
  std::cerr << "[" << names[static_cast<int>(l)] << "] " << message << "\n";
}

}  // namespace log

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw IoError("cannot create output directory '" + dir.string() + "'");
  }
}

nlohmann::ordered_json counts(const Dataset& ds) {
  std::size_t ped = 0, bg = 0, vis = 0, occ = 0;
  std::size_t r = 0, ho = 0, rho = 0;
  for (const auto& p : ds.proposals) {
    if (p.label == Label::background) {
      ++bg;
      continue;
    }
    ++ped;
    if (p.fully_visible()) ++vis; else ++occ;
    r += in_subset(p.visibility, Subset::reasonable) ? 1 : 0;
    ho += in_subset(p.visibility, Subset::heavy) ? 1 : 0;
    rho += in_subset(p.visibility, Subset::reasonable_heavy) ? 1 : 0;
  }
  nlohmann::ordered_json j;
  j["proposals"] = ds.proposals.size();
  j["pedestrian"] = ped;
  j["background"] = bg;
  j["fully_visible"] = vis;
  j["occluded"] = occ;
  j["subsets"] = {{"R", r}, {"HO", ho}, {"R+HO", rho}};
  return j;
}

std::size_t image_count(const Dataset& ds, std::size_t per_image) {
  std::set<std::uint64_t> images;
  for (const auto& p : ds.proposals) images.insert(p.id / per_image);
  return images.size();
}

std::vector<Completion> complete_all(const Dataset& ds, const PrototypeBank& bank,
                                     const OcclusionConfig& config, const Generator& gen,
                                     LookupMode lookup) {
  std::vector<Completion> out(ds.proposals.size());
  const auto n = static_cast<std::ptrdiff_t>(ds.proposals.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    out[static_cast<std::size_t>(i)] = complete(ds.proposals[static_cast<std::size_t>(i)], bank, config, gen, lookup);
  }
  return out;
}

}  // namespace

void archive_config(const RunConfig& config, const fs::path& out_dir) {
  ensure_dir(out_dir);
  binio::write_text(out_dir / "config.txt", serialize_config(config));
}

SynthOutput synthesize(const RunConfig& config) {
  config.validate();
  const World world = gen_world(config.world_config());
  const Rng root(config.seed);
  SynthOutput out;
  Rng rt = root.split(1);
  Rng re = root.split(2);
  out.train = {world.config.feature_shape(), gen_dataset(world, config.data.plan(config.data.train_images), rt)};
  out.eval = {world.config.feature_shape(), gen_dataset(world, config.data.plan(config.data.eval_images), re)};
  nlohmann::ordered_json m;
  m["seed"] = config.seed;
  m["shape"] = {world.config.channels, world.config.width, world.config.height};
  m["proposals_per_image"] = config.data.proposals_per_image;
  m["train"] = counts(out.train);
  m["eval"] = counts(out.eval);
  out.manifest = m.dump(2) + "\n";
  return out;
}

SynthOutput cmd_synth(const RunConfig& config, const fs::path& out_dir) {
  SynthOutput out = synthesize(config);
  ensure_dir(out_dir);
  write_dataset(out.train, out_dir / "train.fcds");
  write_dataset(out.eval, out_dir / "eval.fcds");
  binio::write_text(out_dir / "manifest.json", out.manifest);
  archive_config(config, out_dir);
  log::info("wrote " + std::to_string(out.train.proposals.size()) + " train and " +
            std::to_string(out.eval.proposals.size()) + " eval proposals to " + out_dir.string());
  return out;
}

PrototypeBank build_prototypes(const Dataset& dataset, const RunConfig& config) {
  const FeaturePool pool = build_pool(dataset.proposals);
  KMeansOptions o;
  o.k = config.proto.K;
  o.restarts = config.proto.restarts;
  o.max_iters = config.proto.max_iters;
  o.seed = Rng(config.seed).split(3).next_u64();
  o.backend = config.threads > 1 ? kernels::Backend::openmp : kernels::Backend::serial;
  return kmeans_detailed(pool, o).bank;
}

std::string describe_bank(const PrototypeBank& bank) {
  std::string out;
  char buf[128];
  for (std::size_t k = 0; k < bank.size(); ++k) {
    const auto& p = bank.prototypes[k];
    std::snprintf(buf, sizeof buf, "cluster %zu: %.2f \xC2\xB1 %.2f px (%zu members)\n", k,
                  p.scale_mean, p.scale_std, p.member_count);
    out += buf;
  }
  return out;
}

PrototypeBank cmd_build_prototypes(const fs::path& dataset, const RunConfig& config,
                                   const fs::path& out_dir) {
  const Dataset ds = read_dataset(dataset);
  PrototypeBank bank = build_prototypes(ds, config);
  ensure_dir(out_dir);
  write_bank(bank, out_dir / "bank.fcpb");
  archive_config(config, out_dir);
  std::cout << describe_bank(bank);
  return bank;
}

TrainingSets training_sets(const Dataset& dataset, const PrototypeBank& bank,
                           const OcclusionConfig& config) {
  TrainingSets s;
  for (const auto& p : dataset.proposals) {
    if (p.label == Label::background) {
      s.background.push_back(p);
    } else if (p.fully_visible()) {
      s.visible.push_back(p);
    } else {
      const auto& proto = nearest_prototype(bank, p.scale);
      if (is_occluded(occluded_cells(correlation_map(proto.center, p.features, config.aggregate)), config)) {
        s.occluded.push_back(p);
      }
    }
  }
  return s;
}

ScoringHead fit_head(const TrainingSets& sets, const PrototypeBank& bank, const RunConfig& config,
                     Rng& rng) {
  // Negatives include copy-pasted backgrounds, since the head only ever sees
  // completed maps at inference.
  Rng init = rng.split(0);
  const Generator identity = Generator::identity(config.world.channels, config.network.kappa, init);
  std::vector<FeatureMap> pos, neg;
  for (const auto& v : sets.visible) pos.push_back(v.features);
  for (const auto& b : sets.background) {
    neg.push_back(b.features);
    neg.push_back(complete(b, bank, config.occlusion, identity, config.proto.lookup).completed);
  }
  Rng fit = rng.split(1);
  return train_head(pos, neg, config.network.kappa, config.head, fit);
}

TrainOutput train_model(const Dataset& dataset, const PrototypeBank& bank, const RunConfig& config,
                        Schedule schedule) {
  config.validate();
  if (dataset.shape != bank.shape()) {
    throw PreconditionError("dataset shape " + to_string(dataset.shape) + " does not match bank shape " +
                            to_string(bank.shape()));
  }
  const TrainingSets sets = training_sets(dataset, bank, config.occlusion);
  if (sets.visible.empty()) throw PreconditionError("no fully visible samples");
  if (sets.occluded.empty()) throw PreconditionError("no occluded training samples");
  const Rng root = Rng(config.seed).split(10);

  TrainOutput out;
  out.visible = sets.visible.size();
  out.occluded = sets.occluded.size();
  Rng head_rng = root.split(1);
  out.model.head = fit_head(sets, bank, config, head_rng);
  log::info("scoring head trained on " + std::to_string(sets.visible.size()) + " visible / " +
            std::to_string(2 * sets.background.size()) + " background maps");

  Rng net_rng = root.split(2);
  Networks init = init_networks(dataset.shape, config.network, net_rng);
  Rng train_rng = root.split(3);
  TrainingResult r;
  if (schedule == Schedule::progressive) {
    const World world = gen_world(config.world_config());
    Rng mask_rng = root.split(4);
    const auto masks = build_mask_library(sets.occluded, bank, config.occlusion, &world, mask_rng);
    out.masks = masks.size();
    r = progressive_train(sets.visible, sets.occluded, bank, config.occlusion, masks, config.stage1,
                          config.stage2, std::move(init), train_rng);
  } else {
    r = direct_train(sets.visible, sets.occluded, bank, config.occlusion, config.stage1,
                     config.stage2, std::move(init), train_rng);
  }
  out.model.gen = std::move(r.gen);
  out.model.disc = std::move(r.disc);
  out.model.stage1 = config.stage1;
  out.model.stage2 = config.stage2;
  out.history = std::move(r.history);
  return out;
}

TrainOutput cmd_train(const fs::path& dataset, const fs::path& bank, const RunConfig& config,
                      const fs::path& out_dir) {
  const Dataset ds = read_dataset(dataset);
  const PrototypeBank b = read_bank(bank);
  TrainOutput out = train_model(ds, b, config);
  ensure_dir(out_dir);
  write_model(out.model, out_dir / "model.fcgd");
  binio::write_text(out_dir / "history.csv", history_csv(out.history));
  archive_config(config, out_dir);
  log::info("trained on " + std::to_string(out.visible) + " visible / " + std::to_string(out.occluded) +
            " occluded samples, " + std::to_string(out.history.size()) + " iterations");
  return out;
}

CompletionSets completion_sets(const Dataset& dataset, const PrototypeBank& bank,
                               const OcclusionConfig& config, const Generator& gen, Subset subset,
                               LookupMode lookup) {
  CompletionSets s;
  for (const auto& p : dataset.proposals) {
    if (p.label != Label::pedestrian) continue;
    if (p.fully_visible()) {
      s.visible.push_back(p.features);
      continue;
    }
    if (!p.true_mask || p.true_mask->empty() || !in_subset(p.visibility, subset)) continue;
    Completion c = complete(p, bank, config, gen, lookup);
    s.raw.push_back(p.features);
    s.iou.push_back(mask_iou(c.mask, *p.true_mask));
    s.completed.push_back(std::move(c.completed));
  }
  return s;
}

EvalOutput evaluate(const Dataset& dataset, const PrototypeBank& bank, const Model& model,
                    const RunConfig& config) {
  config.validate();
  if (dataset.shape != bank.shape()) throw PreconditionError("dataset and bank shapes differ");
  if (!model.head.trained()) throw PreconditionError("model carries no scoring head");
  const std::size_t ppi = config.data.proposals_per_image;
  const auto completions = complete_all(dataset, bank, config.occlusion, model.gen, config.proto.lookup);

  std::vector<GroundTruth> gts;
  std::vector<Detection> base, comp;
  for (std::size_t i = 0; i < dataset.proposals.size(); ++i) {
    const auto& p = dataset.proposals[i];
    Detection d;
    d.image = p.id / ppi;
    if (p.label == Label::pedestrian) {
      d.target = p.id;
      gts.push_back({p.id, p.id / ppi, p.visibility});
    }
    d.score = p.score;
    base.push_back(d);
    d.score = rescore(p, completions[i], model.head);
    comp.push_back(d);
  }
  const std::size_t images = image_count(dataset, ppi);

  std::vector<FeatureMap> visible;
  for (const auto& p : dataset.proposals) {
    if (p.fully_visible()) visible.push_back(p.features);
  }

  EvalOutput out;
  out.csv =
      "subset,mr_baseline,mr_completed,delta_mr_pp,compactness_ratio,probe_accuracy_raw,"
      "probe_accuracy_completed,mean_mask_iou,n_ground_truth,n_occluded,n_visible\n";
  for (std::size_t si = 0; si < kSubsets.size(); ++si) {
    const Subset s = kSubsets[si];
    SubsetMetrics m;
    m.subset = s;
    m.mr_baseline = log_avg_miss_rate(base, gts, config.eval, s, images);
    m.mr_completed = log_avg_miss_rate(comp, gts, config.eval, s, images);
    m.delta_mr_pp = 100.0 * (m.mr_baseline - m.mr_completed);
    for (const auto& g : gts) m.ground_truths += in_subset(g.visibility, s) ? 1 : 0;

    std::vector<FeatureMap> raw, done;
    double iou_sum = 0.0;
    for (std::size_t i = 0; i < dataset.proposals.size(); ++i) {
      const auto& p = dataset.proposals[i];
      if (p.label != Label::pedestrian || p.fully_visible() || !p.true_mask || p.true_mask->empty() ||
          !in_subset(p.visibility, s)) {
        continue;
      }
      raw.push_back(p.features);
      done.push_back(completions[i].completed);
      iou_sum += mask_iou(completions[i].mask, *p.true_mask);
    }
    m.occluded = raw.size();
    m.visible = visible.size();
    m.compactness = raw.empty() || visible.empty() ? kNaN : compactness_ratio(raw, done, visible);
    m.mean_iou = raw.empty() ? kNaN : iou_sum / static_cast<double>(raw.size());
    const bool probe_ok = raw.size() >= kMinProbeSamples && visible.size() >= kMinProbeSamples;
    const std::uint64_t probe_seed = config.seed * 16 + si;
    m.probe_raw = probe_ok ? probe_accuracy(raw, visible, probe_seed, config.probe) : kNaN;
    m.probe_completed = probe_ok ? probe_accuracy(done, visible, probe_seed, config.probe) : kNaN;

    out.csv += std::string(to_string(s)) + "," + fmt(m.mr_baseline) + "," + fmt(m.mr_completed) + "," +
               fmt(m.delta_mr_pp) + "," + fmt(m.compactness) + "," + fmt(m.probe_raw) + "," +
               fmt(m.probe_completed) + "," + fmt(m.mean_iou) + "," + std::to_string(m.ground_truths) +
               "," + std::to_string(m.occluded) + "," + std::to_string(m.visible) + "\n";
    out.rows.push_back(m);
  }
  return out;
}

EvalOutput cmd_eval(const fs::path& dataset, const fs::path& bank, const fs::path& model,
                    const RunConfig& config, const fs::path& out_dir) {
  const Dataset ds = read_dataset(dataset);
  const PrototypeBank b = read_bank(bank);
  const Model m = read_model(model);
  EvalOutput out = evaluate(ds, b, m, config);
  ensure_dir(out_dir);
  binio::write_text(out_dir / "metrics.csv", out.csv);
  archive_config(config, out_dir);
  std::cout << out.csv;
  return out;
}

InspectOutput cmd_inspect(const fs::path& dataset, const fs::path& bank, std::uint64_t id,
                          const RunConfig& config, const fs::path& out_dir) {
  const Dataset ds = read_dataset(dataset);
  const PrototypeBank b = read_bank(bank);
  const Proposal* found = nullptr;
  for (const auto& p : ds.proposals) {
    if (p.id == id) {
      found = &p;
      break;
    }
  }
  if (found == nullptr) throw PreconditionError("no proposal with id " + std::to_string(id));
  const Proposal& p = *found;
  const Prototype& proto = lookup_prototype(b, p, config.proto.lookup);
  const CorrelationMap corr = correlation_map(proto.center, p.features, config.occlusion.aggregate);
  const OcclusionMask mask = occluded_cells(corr);

  ensure_dir(out_dir);
  InspectOutput out;
  out.label = p.label;
  out.visibility = p.visibility;
  out.flagged_fraction = mask.fraction();
  out.occluded = is_occluded(mask, config.occlusion);
  const GridShape g = corr.shape;
  auto emit = [&](const std::string& name, const std::string& body) {
    const fs::path path = out_dir / name;
    binio::write_text(path, body);
    out.files.push_back(path);
  };
  emit("correlation.pgm", grid_pgm(g, corr.values));
  emit("correlation.csv", grid_csv(g, corr.values));
  emit("mask.pgm", grid_pgm(g, mask_values(mask)));
  emit("mask.csv", grid_csv(g, mask_values(mask)));
  if (p.true_mask) {
    emit("true_mask.pgm", grid_pgm(g, mask_values(*p.true_mask)));
    out.iou = mask_iou(mask, *p.true_mask);
  }
  for (std::size_t c = 0; c < p.features.shape().channels; ++c) {
    char name[32];
    std::snprintf(name, sizeof name, "channel_%02zu.csv", c);
    emit(name, grid_csv(g, channel_correlation(proto.center, p.features, c).values));
  }
  archive_config(config, out_dir);
  return out;
}

}  // namespace featcomp

#include "featcomp/completion.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "featcomp/binio.hpp"
#include "featcomp/error.hpp"

namespace featcomp {

using ndnum::clamp_probability;
using ndnum::Direction;

namespace {

// d/dp of log(clamp(p)); zero where the clamp is active.
double dlog(double p) {
  return (p > ndnum::kProbFloor && p < 1.0 - ndnum::kProbFloor) ? 1.0 / p : 0.0;
}

double dlog1m(double p) {
  return (p > ndnum::kProbFloor && p < 1.0 - ndnum::kProbFloor) ? -1.0 / (1.0 - p) : 0.0;
}

std::vector<std::size_t> minibatch(std::size_t n, std::size_t m, Rng& rng) {
  return sample_without_replacement(n, m, rng);
}

void check_pool_shapes(const std::vector<FeatureMap>& pool, const FeatureShape& shape) {
  for (const auto& f : pool) {
    if (f.shape() != shape) throw PreconditionError("training pool entries must share one shape");
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (K_disc < 1) throw PreconditionError("K_disc must be >= 1");
  if (m < 1) throw PreconditionError("minibatch size m must be >= 1");
  if (!(gamma > 0.0)) throw PreconditionError("learning rate gamma must be positive");
}

FeatureMap copy_paste(const FeatureMap& f_occ, const FeatureMap& prototype, const OcclusionMask& mask) {
  const FeatureShape s = f_occ.shape();
  if (prototype.shape() != s || mask.shape() != s.grid()) {
    throw PreconditionError("copy_paste needs matching shapes, got " + to_string(s) + ", " +
                            to_string(prototype.shape()) + " and a " +
                            std::to_string(mask.shape().width) + "x" +
                            std::to_string(mask.shape().height) + " mask");
  }
  FeatureMap out = f_occ;
  for (std::size_t x = 0; x < s.width; ++x) {
    for (std::size_t y = 0; y < s.height; ++y) {
      if (!mask.at(x, y)) continue;
      for (std::size_t c = 0; c < s.channels; ++c) out.at(c, x, y) = prototype.at(c, x, y);
    }
  }
  return out;
}

FeatureMap generate(const Generator& gen, const FeatureMap& pasted) { return gen.forward(pasted); }

AdversarialLosses adversarial_losses(double d_vis, double d_gen) {
  const double v = clamp_probability(d_vis);
  const double g = clamp_probability(d_gen);
  return {std::log(v) + std::log(1.0 - g), std::log(1.0 - g)};
}

std::vector<HistoryRow> train_adversarial(const FeaturePools& pools, Generator& gen,
                                          Discriminator& disc, const TrainConfig& config,
                                          Rng& rng, const StepObserver& observer) {
  config.validate();
  if (pools.occ.empty() || pools.vis.empty()) throw PreconditionError("training pools must be non-empty");
  if (config.m > pools.occ.size() || config.m > pools.vis.size()) {
    throw PreconditionError("minibatch size m=" + std::to_string(config.m) +
                            " exceeds a pool (occ " + std::to_string(pools.occ.size()) + ", vis " +
                            std::to_string(pools.vis.size()) + ")");
  }
  if (pools.paired && pools.occ.size() != pools.vis.size()) {
    throw PreconditionError("paired pools must have equal sizes");
  }
  const FeatureShape shape = pools.vis.front().shape();
  check_pool_shapes(pools.occ, shape);
  check_pool_shapes(pools.vis, shape);
  if (shape.size() != disc.input_dim() || shape.channels != gen.channels()) {
    throw PreconditionError("network dimensions do not match feature shape " + to_string(shape));
  }

  const std::size_t m = config.m;
  const double inv_m = 1.0 / static_cast<double>(m);
  std::vector<HistoryRow> history;
  history.reserve(config.T);
  Generator::Tape gtape;
  Discriminator::Tape dtape;
  std::vector<double> grad_x(shape.size());

  for (std::size_t t = 1; t <= config.T; ++t) {
    HistoryRow row;
    row.iteration = t;

    for (std::size_t k = 0; k < config.K_disc; ++k) {
      const auto iv = minibatch(pools.vis.size(), m, rng);
      const auto io = pools.paired ? iv : minibatch(pools.occ.size(), m, rng);
      auto grads = disc.zero_grads();
      double objective = 0.0;
      std::size_t correct = 0;
      for (std::size_t i = 0; i < m; ++i) {
        const double pv = disc.probability(pools.vis[iv[i]].values(), dtape);
        disc.backward(dtape, dlog(pv) * inv_m, grads, {});
        const FeatureMap fake = gen.forward(pools.occ[io[i]]);
        const double pg = disc.probability(fake.values(), dtape);
        disc.backward(dtape, dlog1m(pg) * inv_m, grads, {});
        objective += adversarial_losses(pv, pg).disc_objective;
        correct += (pv > 0.5 ? 1 : 0) + (pg < 0.5 ? 1 : 0);
      }
      disc.step(grads, config.gamma, Direction::ascend);
      row.disc_objective = objective * inv_m;
      row.probe_accuracy = static_cast<double>(correct) / static_cast<double>(2 * m);
      if (observer) observer(t, TrainPhase::discriminator, gen, disc);
    }

    const auto io = minibatch(pools.occ.size(), m, rng);
    auto ggrads = gen.zero_grads();
    auto scratch = disc.zero_grads();
    double objective = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const FeatureMap fake = gen.forward(pools.occ[io[i]], gtape);
      const double pg = disc.probability(fake.values(), dtape);
      objective += adversarial_losses(0.5, pg).gen_objective;
      const double g = dlog1m(pg) * inv_m;
      if (g == 0.0) continue;
      disc.backward(dtape, g, scratch, grad_x);
      gen.backward(gtape, grad_x, ggrads, {});
    }
    gen.step(ggrads, config.gamma, Direction::descend);
    row.gen_objective = objective * inv_m;
    if (observer) observer(t, TrainPhase::generator, gen, disc);
    history.push_back(row);
  }
  return history;
}

std::vector<OcclusionMask> harvest_masks(std::span<const Proposal> proposals,
                                         const PrototypeBank& bank, const OcclusionConfig& config) {
  std::vector<OcclusionMask> out;
  for (const auto& p : proposals) {
    const auto& proto = nearest_prototype(bank, p.scale);
    OcclusionMask m = completion_mask(correlation_map(proto.center, p.features, config.aggregate), config);
    if (!m.empty()) out.push_back(std::move(m));
  }
  return out;
}

std::vector<OcclusionMask> build_mask_library(std::span<const Proposal> occluded,
                                              const PrototypeBank& bank,
                                              const OcclusionConfig& config, const World* world,
                                              Rng& rng) {
  auto masks = harvest_masks(occluded, bank, config);
  if (masks.size() < kMinMaskLibrary && world != nullptr) {
    while (masks.size() < kMinMaskLibrary) {
      const MaskPattern pattern = kMaskPatterns[rng.uniform_index(kMaskPatterns.size())];
      masks.push_back(sample_mask(*world, pattern, rng));
    }
  }
  return masks;
}

Networks init_networks(const FeatureShape& shape, const NetworkConfig& config, Rng& rng) {
  Networks n;
  n.gen = Generator::identity(shape.channels, config.kappa, rng, config.gen_gain);
  n.disc = Discriminator::random(shape, config.disc_hidden, config.kappa, rng);
  return n;
}

FeaturePools synthetic_stage_pools(std::span<const Proposal> visible, const PrototypeBank& bank,
                                   std::span<const OcclusionMask> masks, Rng& rng) {
  if (masks.empty()) throw PreconditionError("mask library is empty");
  FeaturePools pools;
  pools.paired = true;
  for (const auto& v : visible) {
    const OcclusionMask& mask = masks[rng.uniform_index(masks.size())];
    pools.occ.push_back(copy_paste(v.features, nearest_prototype(bank, v.scale).center, mask));
    pools.vis.push_back(v.features);
  }
  return pools;
}

FeaturePools real_stage_pools(std::span<const Proposal> visible, std::span<const Proposal> occluded,
                              const PrototypeBank& bank, const OcclusionConfig& config) {
  FeaturePools pools;
  for (const auto& o : occluded) {
    const auto& proto = nearest_prototype(bank, o.scale);
    const OcclusionMask mask = completion_mask(correlation_map(proto.center, o.features, config.aggregate), config);
    pools.occ.push_back(copy_paste(o.features, proto.center, mask));
  }
  for (const auto& v : visible) pools.vis.push_back(v.features);
  return pools;
}

TrainingResult progressive_train(std::span<const Proposal> visible,
                                 std::span<const Proposal> occluded, const PrototypeBank& bank,
                                 const OcclusionConfig& occ_config,
                                 std::span<const OcclusionMask> masks, const TrainConfig& stage1,
                                 const TrainConfig& stage2, Networks init, Rng& rng) {
  stage1.validate();
  stage2.validate();
  if (masks.empty()) throw PreconditionError("mask library is empty");
  TrainingResult r{std::move(init.gen), std::move(init.disc), {}};

  Rng s1 = rng.split(1);
  const FeaturePools synthetic = synthetic_stage_pools(visible, bank, masks, s1);
  r.history = train_adversarial(synthetic, r.gen, r.disc, stage1, s1);

  Rng s2 = rng.split(2);
  const FeaturePools real = real_stage_pools(visible, occluded, bank, occ_config);
  auto h2 = train_adversarial(real, r.gen, r.disc, stage2, s2);
  for (auto& row : h2) row.iteration += stage1.T;
  r.history.insert(r.history.end(), h2.begin(), h2.end());
  return r;
}

TrainingResult direct_train(std::span<const Proposal> visible, std::span<const Proposal> occluded,
                            const PrototypeBank& bank, const OcclusionConfig& occ_config,
                            const TrainConfig& stage1, const TrainConfig& stage2, Networks init,
                            Rng& rng) {
  stage1.validate();
  stage2.validate();
  TrainingResult r{std::move(init.gen), std::move(init.disc), {}};
  const FeaturePools real = real_stage_pools(visible, occluded, bank, occ_config);
  Rng s1 = rng.split(1);
  r.history = train_adversarial(real, r.gen, r.disc, stage1, s1);
  Rng s2 = rng.split(2);
  auto h2 = train_adversarial(real, r.gen, r.disc, stage2, s2);
  for (auto& row : h2) row.iteration += stage1.T;
  r.history.insert(r.history.end(), h2.begin(), h2.end());
  return r;
}

Completion complete(const Proposal& proposal, const PrototypeBank& bank,
                    const OcclusionConfig& config, const Generator& gen, LookupMode lookup) {
  const auto& proto = lookup_prototype(bank, proposal, lookup);
  Completion c;
  c.correlation = correlation_map(proto.center, proposal.features, config.aggregate);
  c.occluded = is_occluded(occluded_cells(c.correlation), config);
  c.mask = completion_mask(c.correlation, config);
  c.pasted = copy_paste(proposal.features, proto.center, c.mask);
  c.completed = gen.forward(c.pasted);
  return c;
}

double rescore(const Proposal& proposal, const Completion& completion, const ScoringHead& head) {
  if (!head.trained()) throw PreconditionError("scoring head is untrained");
  if (!completion.occluded || completion.mask.empty()) return proposal.score;
  return head.score(completion.completed);
}

ScoringHead train_head(std::span<const FeatureMap> positives, std::span<const FeatureMap> negatives,
                       double kappa, const HeadConfig& config, Rng& rng) {
  if (positives.empty() || negatives.empty()) {
    throw PreconditionError("scoring head needs positive and negative examples");
  }
  if (config.batch == 0 || config.epochs == 0 || !(config.rate > 0.0)) {
    throw PreconditionError("scoring head needs epochs, batch >= 1 and a positive rate");
  }
  const std::size_t d = positives.front().size();
  std::vector<const FeatureMap*> xs;
  std::vector<double> ys;
  for (const auto& f : positives) {
    xs.push_back(&f);
    ys.push_back(1.0);
  }
  for (const auto& f : negatives) {
    xs.push_back(&f);
    ys.push_back(0.0);
  }
  for (auto* f : xs) {
    if (f->size() != d) throw PreconditionError("scoring head inputs must share one shape");
  }
  ScoringHead head(ndnum::DenseLayer(d, 1, ndnum::Activation::sigmoid), kappa);
  auto& layer = head.layer();
  std::vector<std::size_t> order(xs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<double> u(d);
  LayerGrads grads(layer);
  for (std::size_t e = 0; e < config.epochs; ++e) {
    shuffle(order, rng);
    for (std::size_t start = 0; start < order.size(); start += config.batch) {
      const std::size_t end = std::min(order.size(), start + config.batch);
      grads.zero();
      for (std::size_t j = start; j < end; ++j) {
        const auto& f = *xs[order[j]];
        for (std::size_t i = 0; i < d; ++i) u[i] = f.values()[i] / kappa;
        double pre = 0.0, p = 0.0;
        layer.forward(u, {&pre, 1}, {&p, 1});
        // Cross-entropy through the sigmoid: dLoss/dpre = p - y.
        const double delta = (p - ys[order[j]]) / static_cast<double>(end - start);
        grads.bias[0] += delta;
        for (std::size_t i = 0; i < d; ++i) grads.weights[i] += delta * u[i];
      }
      apply(layer, grads, config.rate, Direction::descend);
    }
  }
  return head;
}

namespace {

void put_layer(binio::Writer& w, const ndnum::DenseLayer& l) {
  w.f64s(l.weights().values());
  w.f64s(l.bias().values());
}

ndnum::DenseLayer get_layer(binio::Reader& r, std::size_t in, std::size_t out, ndnum::Activation a) {
  auto check = [&](const std::vector<double>& v) {
    for (double x : v) {
      if (!std::isfinite(x)) r.fail("non-finite weight");
    }
  };
  auto w = r.f64s(in * out);
  check(w);
  auto b = r.f64s(out);
  check(b);
  return ndnum::DenseLayer(ndnum::Tensor({out, in}, std::move(w)), ndnum::Tensor({out}, std::move(b)), a);
}

void put_config(binio::Writer& w, const TrainConfig& c) {
  w.u64(c.T);
  w.u64(c.K_disc);
  w.u64(c.m);
  w.f64(c.gamma);
  w.u8(static_cast<std::uint8_t>(c.stage));
}

TrainConfig get_config(binio::Reader& r) {
  TrainConfig c;
  c.T = r.u64();
  c.K_disc = r.u64();
  c.m = r.u64();
  c.gamma = r.f64();
  const std::uint8_t stage = r.u8();
  if (stage > 1) r.fail("invalid stage tag");
  c.stage = static_cast<Stage>(stage);
  return c;
}

std::size_t dim(binio::Reader& r, const char* what) {
  const std::uint32_t v = r.u32();
  if (v == 0 || v > (1u << 24)) r.fail(std::string("invalid ") + what + " " + std::to_string(v));
  return v;
}

double positive(binio::Reader& r, const char* what) {
  const double v = r.f64();
  if (!(v > 0.0) || !std::isfinite(v)) r.fail(std::string("invalid ") + what);
  return v;
}

}  // namespace

std::vector<std::uint8_t> encode_model(const Model& model) {
  binio::Writer w;
  w.magic("FCGD");
  w.u32(kModelVersion);
  w.u32(static_cast<std::uint32_t>(model.gen.channels()));
  w.f64(model.gen.kappa());
  w.f64(model.gen.gain());
  put_layer(w, model.gen.l1());
  put_layer(w, model.gen.l2());
  w.u32(static_cast<std::uint32_t>(model.disc.input_dim()));
  w.u32(static_cast<std::uint32_t>(model.disc.hidden()));
  w.f64(model.disc.kappa());
  put_layer(w, model.disc.l1());
  put_layer(w, model.disc.l2());
  put_config(w, model.stage1);
  put_config(w, model.stage2);
  w.u8(model.head.trained() ? 1 : 0);
  if (model.head.trained()) {
    w.u32(static_cast<std::uint32_t>(model.head.layer().in_dim()));
    w.f64(model.head.kappa());
    put_layer(w, model.head.layer());
  }
  return w.data();
}

Model decode_model(std::span<const std::uint8_t> bytes) {
  using ndnum::Activation;
  binio::Reader r(bytes);
  r.magic("FCGD");
  const std::uint32_t version = r.u32();
  if (version != kModelVersion) r.fail("unsupported model version " + std::to_string(version));
  Model m;
  const std::size_t c = dim(r, "generator channels");
  const double gk = positive(r, "generator kappa");
  const double gg = positive(r, "generator gain");
  auto g1 = get_layer(r, c, c, Activation::relu);
  auto g2 = get_layer(r, c, c, Activation::identity);
  m.gen = Generator(std::move(g1), std::move(g2), gk, gg);
  const std::size_t in = dim(r, "discriminator input");
  const std::size_t hidden = dim(r, "discriminator width");
  const double dk = positive(r, "discriminator kappa");
  auto d1 = get_layer(r, in, hidden, Activation::relu);
  auto d2 = get_layer(r, hidden, 1, Activation::sigmoid);
  m.disc = Discriminator(std::move(d1), std::move(d2), dk);
  m.stage1 = get_config(r);
  m.stage2 = get_config(r);
  const std::uint8_t has_head = r.u8();
  if (has_head > 1) r.fail("invalid head flag");
  if (has_head) {
    const std::size_t hin = dim(r, "head input");
    const double hk = positive(r, "head kappa");
    m.head = ScoringHead(get_layer(r, hin, 1, Activation::sigmoid), hk);
  }
  r.expect_end();
  return m;
}

void write_model(const Model& model, const std::filesystem::path& path) {
  binio::write_file(path, encode_model(model));
}

Model read_model(const std::filesystem::path& path) { return decode_model(binio::read_file(path)); }

std::string history_csv(std::span<const HistoryRow> history) {
  std::string out = "iteration,disc_objective,gen_objective,probe_accuracy\n";
  char buf[128];
  for (const auto& h : history) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", h.iteration, h.disc_objective,
                  h.gen_objective, h.probe_accuracy);
    out += buf;
  }
  return out;
}

}  // namespace featcomp

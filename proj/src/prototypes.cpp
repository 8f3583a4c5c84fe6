#include "featcomp/prototypes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "featcomp/binio.hpp"
#include "featcomp/error.hpp"
#include "featcomp/rng.hpp"

namespace featcomp {
namespace {

struct Run {
  std::vector<double> centers;  // k x d
  std::vector<std::size_t> labels;
  double objective = 0.0;
  std::size_t iterations = 0;
  std::vector<double> trace;
};

double sq_dist(const double* a, const double* b, std::size_t d) {
  double s = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    const double t = a[j] - b[j];
    s += t * t;
  }
  return s;
}

// Means of members, summed in point order.
void update_centers(const std::vector<double>& pts, std::size_t n, std::size_t d, std::size_t k,
                    const std::vector<std::size_t>& labels, std::vector<double>& centers) {
  std::vector<double> sum(k * d, 0.0);
  std::vector<std::size_t> count(k, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t c = labels[i];
    ++count[c];
    for (std::size_t j = 0; j < d; ++j) sum[c * d + j] += pts[i * d + j];
  }
  for (std::size_t c = 0; c < k; ++c) {
    for (std::size_t j = 0; j < d; ++j) {
      centers[c * d + j] = sum[c * d + j] / static_cast<double>(count[c]);
    }
  }
}

// Moves the point farthest from its center into each empty cluster.
void repair_empty(std::size_t n, std::size_t k, std::vector<std::size_t>& labels,
                  std::vector<double>& dist2) {
  std::vector<std::size_t> count(k, 0);
  for (std::size_t i = 0; i < n; ++i) ++count[labels[i]];
  for (std::size_t c = 0; c < k; ++c) {
    if (count[c] > 0) continue;
    std::size_t best = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (count[labels[i]] < 2) continue;
      if (best == n || dist2[i] > dist2[best]) best = i;
    }
    --count[labels[best]];
    labels[best] = c;
    dist2[best] = 0.0;
    ++count[c];
  }
}

double objective_of(const std::vector<double>& pts, std::size_t n, std::size_t d,
                    const std::vector<double>& centers, const std::vector<std::size_t>& labels) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += sq_dist(&pts[i * d], &centers[labels[i] * d], d);
  return s;
}

Run lloyd(const std::vector<double>& pts, std::size_t n, std::size_t d, std::size_t k,
          std::size_t max_iters, Rng& rng, kernels::Backend backend) {
  Run run;
  run.centers.assign(k * d, 0.0);

  // K-means++ seeding.
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  std::size_t first = rng.uniform_index(n);
  std::copy_n(&pts[first * d], d, run.centers.begin());
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], sq_dist(&pts[i * d], &run.centers[(c - 1) * d], d));
      total += nearest[i];
    }
    std::size_t pick = n - 1;
    if (total > 0.0) {
      double u = rng.uniform() * total;
      for (std::size_t i = 0; i < n; ++i) {
        if (u < nearest[i]) {
          pick = i;
          break;
        }
        u -= nearest[i];
      }
    } else {
      pick = rng.uniform_index(n);
    }
    std::copy_n(&pts[pick * d], d, run.centers.begin() + static_cast<std::ptrdiff_t>(c * d));
  }

  run.labels.assign(n, 0);
  std::vector<double> dist2(n, 0.0);
  kernels::assign_nearest(pts, n, d, run.centers, k, run.labels, dist2, backend);
  std::vector<std::size_t> next(n);
  for (run.iterations = 0; run.iterations < max_iters;) {
    repair_empty(n, k, run.labels, dist2);
    update_centers(pts, n, d, k, run.labels, run.centers);
    run.trace.push_back(objective_of(pts, n, d, run.centers, run.labels));
    ++run.iterations;
    kernels::assign_nearest(pts, n, d, run.centers, k, next, dist2, backend);
    if (next == run.labels) break;
    run.labels.swap(next);
  }
  // The last reassignment may have emptied a cluster when max_iters cut the loop short.
  std::vector<std::size_t> count(k, 0);
  for (auto l : run.labels) ++count[l];
  if (std::find(count.begin(), count.end(), 0) != count.end()) {
    repair_empty(n, k, run.labels, dist2);
    update_centers(pts, n, d, k, run.labels, run.centers);
  }
  run.objective = objective_of(pts, n, d, run.centers, run.labels);
  return run;
}

}  // namespace

FeaturePool build_pool(std::span<const Proposal> proposals) {
  FeaturePool pool;
  for (const auto& p : proposals) {
    if (!p.fully_visible()) continue;
    if (pool.entries.empty()) {
      pool.shape = p.features.shape();
    } else if (p.features.shape() != pool.shape) {
      throw PreconditionError("feature pool entries must share one shape");
    }
    pool.entries.push_back({p.features, p.scale, p.id});
  }
  if (pool.entries.empty()) throw PreconditionError("no fully visible samples");
  return pool;
}

KMeansResult kmeans_detailed(const FeaturePool& pool, const KMeansOptions& options) {
  const std::size_t n = pool.size();
  const std::size_t k = options.k;
  if (k == 0) throw PreconditionError("kmeans needs K >= 1");
  if (n < k) {
    throw PreconditionError("kmeans needs at least K=" + std::to_string(k) +
                            " pool entries, got " + std::to_string(n));
  }
  if (options.restarts == 0) throw PreconditionError("kmeans needs at least one restart");
  const std::size_t d = pool.shape.size();
  std::vector<double> pts(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    const auto v = pool.entries[i].features.values();
    std::copy(v.begin(), v.end(), pts.begin() + static_cast<std::ptrdiff_t>(i * d));
  }

  const Rng root = Rng(options.seed).split(0x6b6d);
  Run best;
  bool have = false;
  for (std::size_t r = 0; r < options.restarts; ++r) {
    Rng rng = root.split(r);
    Run run = lloyd(pts, n, d, k, std::max<std::size_t>(options.max_iters, 1), rng, options.backend);
    if (!have || run.objective < best.objective) {
      best = std::move(run);
      have = true;
    }
  }

  // Sort clusters by scale mean.
  std::vector<Prototype> protos(k);
  std::vector<double> scale_sum(k, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    ++protos[best.labels[i]].member_count;
    scale_sum[best.labels[i]] += pool.entries[i].scale;
  }
  for (std::size_t c = 0; c < k; ++c) {
    auto& p = protos[c];
    p.scale_mean = scale_sum[c] / static_cast<double>(p.member_count);
    p.center = FeatureMap(pool.shape, std::vector<double>(best.centers.begin() + static_cast<std::ptrdiff_t>(c * d),
                                                          best.centers.begin() + static_cast<std::ptrdiff_t>((c + 1) * d)));
  }
  std::vector<double> var(k, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = pool.entries[i].scale - protos[best.labels[i]].scale_mean;
    var[best.labels[i]] += t * t;
  }
  for (std::size_t c = 0; c < k; ++c) {
    protos[c].scale_std = std::sqrt(var[c] / static_cast<double>(protos[c].member_count));
  }
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return protos[a].scale_mean < protos[b].scale_mean;
  });
  std::vector<std::size_t> rank(k);
  KMeansResult result;
  for (std::size_t r = 0; r < k; ++r) {
    rank[order[r]] = r;
    result.bank.prototypes.push_back(std::move(protos[order[r]]));
  }
  result.assignment.resize(n);
  for (std::size_t i = 0; i < n; ++i) result.assignment[i] = rank[best.labels[i]];
  result.objective = best.objective;
  result.iterations = best.iterations;
  result.trace = std::move(best.trace);
  return result;
}

PrototypeBank kmeans(const FeaturePool& pool, std::size_t k, std::uint64_t seed,
                     std::size_t max_iters) {
  KMeansOptions o;
  o.k = k;
  o.seed = seed;
  o.max_iters = max_iters;
  return kmeans_detailed(pool, o).bank;
}

double within_cluster_ss(const FeaturePool& pool, const PrototypeBank& bank,
                         std::span<const std::size_t> assignment) {
  if (assignment.size() != pool.size()) throw PreconditionError("assignment size mismatch");
  const std::size_t d = pool.shape.size();
  double s = 0.0;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    s += sq_dist(pool.entries[i].features.values().data(),
                 bank.prototypes.at(assignment[i]).center.values().data(), d);
  }
  return s;
}

std::size_t nearest_prototype_index(const PrototypeBank& bank, double scale) {
  if (bank.prototypes.empty()) throw PreconditionError("prototype bank is empty");
  if (!(scale > 0.0)) throw PreconditionError("lookup scale must be positive");
  std::size_t best = 0;
  double best_gap = std::abs(scale - bank.prototypes[0].scale_mean);
  for (std::size_t i = 1; i < bank.size(); ++i) {
    const double gap = std::abs(scale - bank.prototypes[i].scale_mean);
    if (gap < best_gap ||
        (gap == best_gap && bank.prototypes[i].scale_mean < bank.prototypes[best].scale_mean)) {
      best = i;
      best_gap = gap;
    }
  }
  return best;
}

const Prototype& nearest_prototype(const PrototypeBank& bank, double scale) {
  return bank.prototypes[nearest_prototype_index(bank, scale)];
}

std::size_t nearest_prototype_by_features(const PrototypeBank& bank, const FeatureMap& features) {
  if (bank.prototypes.empty()) throw PreconditionError("prototype bank is empty");
  if (features.shape() != bank.shape()) throw PreconditionError("feature shape does not match the bank");
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < bank.size(); ++i) {
    const double dd = sq_dist(features.values().data(), bank.prototypes[i].center.values().data(),
                              features.size());
    if (dd < best_d) {
      best = i;
      best_d = dd;
    }
  }
  return best;
}

const Prototype& lookup_prototype(const PrototypeBank& bank, const Proposal& proposal,
                                  LookupMode mode) {
  if (mode == LookupMode::feature) {
    return bank.prototypes[nearest_prototype_by_features(bank, proposal.features)];
  }
  return nearest_prototype(bank, proposal.scale);
}

std::vector<std::uint8_t> encode_bank(const PrototypeBank& bank) {
  binio::Writer w;
  w.magic("FCPB");
  w.u32(kBankVersion);
  w.u32(static_cast<std::uint32_t>(bank.size()));
  const FeatureShape shape = bank.shape();
  w.u32(static_cast<std::uint32_t>(shape.channels));
  w.u32(static_cast<std::uint32_t>(shape.width));
  w.u32(static_cast<std::uint32_t>(shape.height));
  for (const auto& p : bank.prototypes) {
    if (p.center.shape() != shape) throw PreconditionError("prototype shapes differ");
    w.f64(p.scale_mean);
    w.f64(p.scale_std);
    w.u64(p.member_count);
    w.f64s(p.center.values());
  }
  return w.data();
}

PrototypeBank decode_bank(std::span<const std::uint8_t> bytes) {
  binio::Reader r(bytes);
  r.magic("FCPB");
  const std::uint32_t version = r.u32();
  if (version != kBankVersion) r.fail("unsupported bank version " + std::to_string(version));
  const std::uint32_t k = r.u32();
  FeatureShape shape;
  shape.channels = r.u32();
  shape.width = r.u32();
  shape.height = r.u32();
  if (k == 0) r.fail("bank holds no prototypes");
  if (shape.size() == 0) r.fail("bank has an empty feature shape");
  PrototypeBank bank;
  for (std::uint32_t i = 0; i < k; ++i) {
    Prototype p;
    p.scale_mean = r.f64();
    p.scale_std = r.f64();
    p.member_count = r.u64();
    if (p.member_count == 0) r.fail("prototype with zero members");
    const std::size_t at = r.offset();
    auto values = r.f64s(shape.size());
    for (double v : values) {
      if (!std::isfinite(v)) throw FormatError("non-finite prototype value", at);
    }
    p.center = FeatureMap(shape, std::move(values));
    if (!bank.prototypes.empty() && p.scale_mean < bank.prototypes.back().scale_mean) {
      r.fail("prototype scale means are not ascending");
    }
    bank.prototypes.push_back(std::move(p));
  }
  r.expect_end();
  return bank;
}

void write_bank(const PrototypeBank& bank, const std::filesystem::path& path) {
  binio::write_file(path, encode_bank(bank));
}

PrototypeBank read_bank(const std::filesystem::path& path) {
  return decode_bank(binio::read_file(path));
}

}  // namespace featcomp

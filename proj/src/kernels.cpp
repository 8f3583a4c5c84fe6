#include "featcomp/kernels.hpp"

#include <omp.h>

#include <limits>

#include "featcomp/error.hpp"
#include "featcomp/networks.hpp"
#include "featcomp/occlusion.hpp"

namespace featcomp::kernels {
namespace {

void assign_one(const double* p, std::size_t d, std::span<const double> centers, std::size_t k,
                std::size_t& label, double& dist2) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < k; ++c) {
    const double* q = centers.data() + c * d;
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double t = p[j] - q[j];
      s += t * t;
    }
    if (s < best_d) {
      best_d = s;
      best = c;
    }
  }
  label = best;
  dist2 = best_d;
}

}  // namespace

void set_threads(int threads) {
  if (threads < 1) throw PreconditionError("thread count must be >= 1");
  omp_set_num_threads(threads);
}

int max_threads() { return omp_get_max_threads(); }

void assign_nearest(std::span<const double> points, std::size_t n, std::size_t d,
                    std::span<const double> centers, std::size_t k,
                    std::span<std::size_t> labels, std::span<double> dist2, Backend backend) {
  if (points.size() != n * d || centers.size() != k * d || labels.size() != n ||
      dist2.size() != n || k == 0) {
    throw PreconditionError("assign_nearest: inconsistent buffer sizes");
  }
  const auto sn = static_cast<std::ptrdiff_t>(n);
  if (backend == Backend::openmp) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < sn; ++i) {
      const auto u = static_cast<std::size_t>(i);
      assign_one(points.data() + u * d, d, centers, k, labels[u], dist2[u]);
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      assign_one(points.data() + i * d, d, centers, k, labels[i], dist2[i]);
    }
  }
}

std::vector<CorrelationMap> correlation_maps(std::span<const FeatureMap* const> a,
                                             std::span<const FeatureMap* const> b,
                                             ChannelAggregate aggregate, Backend backend) {
  if (a.size() != b.size()) throw PreconditionError("correlation_maps: batch sizes differ");
  std::vector<CorrelationMap> out(a.size());
  const auto n = static_cast<std::ptrdiff_t>(a.size());
  if (backend == Backend::openmp) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = correlation_map(*a[i], *b[i], aggregate);
  } else {
    for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = correlation_map(*a[i], *b[i], aggregate);
  }
  return out;
}

std::vector<double> discriminator_scores(const Discriminator& disc,
                                         std::span<const FeatureMap> features, Backend backend) {
  std::vector<double> out(features.size());
  const auto n = static_cast<std::ptrdiff_t>(features.size());
  if (backend == Backend::openmp) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = disc.probability(features[i].values());
  } else {
    for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = disc.probability(features[i].values());
  }
  return out;
}

}  // namespace featcomp::kernels

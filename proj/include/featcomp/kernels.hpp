#pragma once

// Data-parallel hot loops, each with a serial reference and an OpenMP variant
// that must produce bit-identical results.

#include <cstddef>
#include <span>
#include <vector>

namespace featcomp {
class FeatureMap;
class Discriminator;
struct CorrelationMap;
enum class ChannelAggregate;
}  // namespace featcomp

namespace featcomp::kernels {

enum class Backend { serial, openmp };

void set_threads(int threads);
int max_threads();

// points: n x d row-major, centers: k x d. Ties go to the lower center index.
void assign_nearest(std::span<const double> points, std::size_t n, std::size_t d,
                    std::span<const double> centers, std::size_t k,
                    std::span<std::size_t> labels, std::span<double> dist2, Backend backend);

// out[i] = correlation_map(*a[i], *b[i]).
std::vector<CorrelationMap> correlation_maps(std::span<const FeatureMap* const> a,
                                             std::span<const FeatureMap* const> b,
                                             ChannelAggregate aggregate, Backend backend);

std::vector<double> discriminator_scores(const Discriminator& disc,
                                         std::span<const FeatureMap> features,
                                         Backend backend);

}  // namespace featcomp::kernels

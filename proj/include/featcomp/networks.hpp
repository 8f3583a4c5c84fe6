#pragma once

// Generator, discriminator and rescoring head. All three read features divided
// by a fixed scale kappa so that raw feature magnitudes (tens) map to O(1)
// activations.

#include <cstddef>
#include <span>
#include <vector>

#include "featcomp/grid.hpp"
#include "featcomp/ndnum.hpp"
#include "featcomp/rng.hpp"

namespace featcomp {

struct LayerGrads {
  std::vector<double> weights;
  std::vector<double> bias;

  explicit LayerGrads(const ndnum::DenseLayer& layer = {})
      : weights(layer.weights().size(), 0.0), bias(layer.bias().size(), 0.0) {}
  void zero();
  void scale(double factor);
};

void apply(ndnum::DenseLayer& layer, const LayerGrads& grads, double rate,
           ndnum::Direction direction);

// Per-cell channel mixing with a residual:
//   y(x,y) = f(x,y) + gain * L2(relu(L1(f(x,y) / kappa)))
class Generator {
 public:
  struct Grads {
    LayerGrads l1, l2;
  };
  struct Tape {
    std::vector<double> u, pre1, h, pre2;  // cells x C each
  };

  Generator() = default;
  Generator(ndnum::DenseLayer l1, ndnum::DenseLayer l2, double kappa, double gain = 1.0);
  // Random L1, zero L2: exactly the identity map.
  static Generator identity(std::size_t channels, double kappa, Rng& rng, double gain = 1.0);

  std::size_t channels() const { return l1_.in_dim(); }
  double kappa() const { return kappa_; }
  double gain() const { return gain_; }
  ndnum::DenseLayer& l1() { return l1_; }
  ndnum::DenseLayer& l2() { return l2_; }
  const ndnum::DenseLayer& l1() const { return l1_; }
  const ndnum::DenseLayer& l2() const { return l2_; }

  FeatureMap forward(const FeatureMap& input) const;
  FeatureMap forward(const FeatureMap& input, Tape& tape) const;
  // grad_output is dLoss/dy laid out like FeatureMap values. Parameter
  // gradients are accumulated; grad_input, when non-empty, is overwritten.
  void backward(const Tape& tape, std::span<const double> grad_output, Grads& grads,
                std::span<double> grad_input) const;
  Grads zero_grads() const { return {LayerGrads(l1_), LayerGrads(l2_)}; }
  void step(const Grads& grads, double rate, ndnum::Direction direction);

  bool operator==(const Generator&) const = default;

 private:
  ndnum::DenseLayer l1_, l2_;
  double kappa_ = 1.0;
  double gain_ = 1.0;
};

// flatten(f / kappa) -> dense(hidden, relu) -> dense(1, sigmoid).
class Discriminator {
 public:
  struct Grads {
    LayerGrads l1, l2;
  };
  struct Tape {
    std::vector<double> u, pre1, h;
    double pre2 = 0.0;
    double prob = 0.0;
  };

  Discriminator() = default;
  Discriminator(ndnum::DenseLayer l1, ndnum::DenseLayer l2, double kappa);
  static Discriminator random(const FeatureShape& shape, std::size_t hidden, double kappa, Rng& rng);

  std::size_t input_dim() const { return l1_.in_dim(); }
  std::size_t hidden() const { return l1_.out_dim(); }
  double kappa() const { return kappa_; }
  ndnum::DenseLayer& l1() { return l1_; }
  ndnum::DenseLayer& l2() { return l2_; }
  const ndnum::DenseLayer& l1() const { return l1_; }
  const ndnum::DenseLayer& l2() const { return l2_; }

  // Raw sigmoid output; callers clamp before taking logs.
  double probability(std::span<const double> features) const;
  double probability(std::span<const double> features, Tape& tape) const;
  // grad_prob = dLoss/dprob.
  void backward(const Tape& tape, double grad_prob, Grads& grads, std::span<double> grad_input) const;
  Grads zero_grads() const { return {LayerGrads(l1_), LayerGrads(l2_)}; }
  void step(const Grads& grads, double rate, ndnum::Direction direction);

  bool operator==(const Discriminator&) const = default;

 private:
  ndnum::DenseLayer l1_, l2_;
  double kappa_ = 1.0;
};

// Logistic rescoring head: sigmoid(w . f / kappa + b).
class ScoringHead {
 public:
  ScoringHead() = default;
  ScoringHead(ndnum::DenseLayer layer, double kappa);

  bool trained() const { return layer_.in_dim() > 0; }
  double kappa() const { return kappa_; }
  ndnum::DenseLayer& layer() { return layer_; }
  const ndnum::DenseLayer& layer() const { return layer_; }

  double score(const FeatureMap& features) const;

  bool operator==(const ScoringHead&) const = default;

 private:
  ndnum::DenseLayer layer_;
  double kappa_ = 1.0;
};

}  // namespace featcomp

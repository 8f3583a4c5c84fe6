#include "featcomp/networks.hpp"

#include <algorithm>

#include "featcomp/error.hpp"

namespace featcomp {

using ndnum::Activation;
using ndnum::DenseLayer;

void LayerGrads::zero() {
  std::fill(weights.begin(), weights.end(), 0.0);
  std::fill(bias.begin(), bias.end(), 0.0);
}

void LayerGrads::scale(double factor) {
  for (auto& v : weights) v *= factor;
  for (auto& v : bias) v *= factor;
}

void apply(DenseLayer& layer, const LayerGrads& grads, double rate, ndnum::Direction direction) {
  ndnum::sgd_step(layer.weights().values(), grads.weights, rate, direction);
  ndnum::sgd_step(layer.bias().values(), grads.bias, rate, direction);
}

Generator::Generator(DenseLayer l1, DenseLayer l2, double kappa, double gain)
    : l1_(std::move(l1)), l2_(std::move(l2)), kappa_(kappa), gain_(gain) {
  const std::size_t c = l1_.in_dim();
  if (l1_.out_dim() != c || l2_.in_dim() != c || l2_.out_dim() != c) {
    throw PreconditionError("generator layers must both be C->C");
  }
  if (!(kappa_ > 0.0) || !(gain_ > 0.0)) {
    throw PreconditionError("generator kappa and gain must be positive");
  }
}

Generator Generator::identity(std::size_t channels, double kappa, Rng& rng, double gain) {
  return Generator(DenseLayer::random(channels, channels, Activation::relu, rng),
                   DenseLayer(channels, channels, Activation::identity), kappa, gain);
}

FeatureMap Generator::forward(const FeatureMap& input) const {
  Tape tape;
  return forward(input, tape);
}

FeatureMap Generator::forward(const FeatureMap& input, Tape& tape) const {
  const FeatureShape s = input.shape();
  const std::size_t C = channels();
  if (s.channels != C) {
    throw PreconditionError("generator expects " + std::to_string(C) + " channels, got " +
                            std::to_string(s.channels));
  }
  const std::size_t cells = s.width * s.height;
  tape.u.assign(cells * C, 0.0);
  tape.pre1.assign(cells * C, 0.0);
  tape.h.assign(cells * C, 0.0);
  tape.pre2.assign(cells * C, 0.0);
  std::vector<double> z(C);
  FeatureMap out = input;
  auto vals = input.values();
  auto outv = out.values();
  for (std::size_t cell = 0; cell < cells; ++cell) {
    double* u = &tape.u[cell * C];
    for (std::size_t c = 0; c < C; ++c) u[c] = vals[c * cells + cell] / kappa_;
    l1_.forward({u, C}, {&tape.pre1[cell * C], C}, {&tape.h[cell * C], C});
    l2_.forward({&tape.h[cell * C], C}, {&tape.pre2[cell * C], C}, z);
    for (std::size_t c = 0; c < C; ++c) outv[c * cells + cell] += gain_ * z[c];
  }
  return out;
}

void Generator::backward(const Tape& tape, std::span<const double> grad_output, Grads& grads,
                         std::span<double> grad_input) const {
  const std::size_t C = channels();
  const std::size_t cells = tape.u.size() / C;
  if (grad_output.size() != cells * C) throw PreconditionError("generator gradient size mismatch");
  const bool want_input = !grad_input.empty();
  std::vector<double> gz(C), gh(C), gu(C);
  for (std::size_t cell = 0; cell < cells; ++cell) {
    for (std::size_t c = 0; c < C; ++c) gz[c] = gain_ * grad_output[c * cells + cell];
    l2_.backward({&tape.h[cell * C], C}, {&tape.pre2[cell * C], C}, gz, grads.l2.weights,
                 grads.l2.bias, gh);
    l1_.backward({&tape.u[cell * C], C}, {&tape.pre1[cell * C], C}, gh, grads.l1.weights,
                 grads.l1.bias, want_input ? std::span<double>(gu) : std::span<double>());
    if (want_input) {
      for (std::size_t c = 0; c < C; ++c) {
        grad_input[c * cells + cell] = grad_output[c * cells + cell] + gu[c] / kappa_;
      }
    }
  }
}

void Generator::step(const Grads& grads, double rate, ndnum::Direction direction) {
  apply(l1_, grads.l1, rate, direction);
  apply(l2_, grads.l2, rate, direction);
}

Discriminator::Discriminator(DenseLayer l1, DenseLayer l2, double kappa)
    : l1_(std::move(l1)), l2_(std::move(l2)), kappa_(kappa) {
  if (l2_.in_dim() != l1_.out_dim() || l2_.out_dim() != 1) {
    throw PreconditionError("discriminator layers are inconsistent");
  }
  if (!(kappa_ > 0.0)) throw PreconditionError("discriminator kappa must be positive");
}

Discriminator Discriminator::random(const FeatureShape& shape, std::size_t hidden, double kappa,
                                    Rng& rng) {
  return Discriminator(DenseLayer::random(shape.size(), hidden, Activation::relu, rng),
                       DenseLayer::random(hidden, 1, Activation::sigmoid, rng, 0.5), kappa);
}

double Discriminator::probability(std::span<const double> features) const {
  Tape tape;
  return probability(features, tape);
}

double Discriminator::probability(std::span<const double> features, Tape& tape) const {
  const std::size_t n = input_dim();
  if (features.size() != n) {
    throw PreconditionError("discriminator expects " + std::to_string(n) + " inputs, got " +
                            std::to_string(features.size()));
  }
  tape.u.resize(n);
  for (std::size_t i = 0; i < n; ++i) tape.u[i] = features[i] / kappa_;
  tape.pre1.resize(hidden());
  tape.h.resize(hidden());
  l1_.forward(tape.u, tape.pre1, tape.h);
  l2_.forward(tape.h, {&tape.pre2, 1}, {&tape.prob, 1});
  return tape.prob;
}

void Discriminator::backward(const Tape& tape, double grad_prob, Grads& grads,
                             std::span<double> grad_input) const {
  std::vector<double> gh(hidden());
  l2_.backward(tape.h, {&tape.pre2, 1}, {&grad_prob, 1}, grads.l2.weights, grads.l2.bias, gh);
  l1_.backward(tape.u, tape.pre1, gh, grads.l1.weights, grads.l1.bias, grad_input);
  for (auto& g : grad_input) g /= kappa_;
}

void Discriminator::step(const Grads& grads, double rate, ndnum::Direction direction) {
  apply(l1_, grads.l1, rate, direction);
  apply(l2_, grads.l2, rate, direction);
}

ScoringHead::ScoringHead(DenseLayer layer, double kappa) : layer_(std::move(layer)), kappa_(kappa) {
  if (layer_.out_dim() != 1 || layer_.activation() != Activation::sigmoid) {
    throw PreconditionError("scoring head must be a single sigmoid unit");
  }
  if (!(kappa_ > 0.0)) throw PreconditionError("scoring head kappa must be positive");
}

double ScoringHead::score(const FeatureMap& features) const {
  if (!trained()) throw PreconditionError("scoring head is untrained");
  if (features.size() != layer_.in_dim()) {
    throw PreconditionError("scoring head expects " + std::to_string(layer_.in_dim()) +
                            " inputs, got " + std::to_string(features.size()));
  }
  std::vector<double> u(features.size());
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = features.values()[i] / kappa_;
  double pre = 0.0, out = 0.0;
  layer_.forward(u, {&pre, 1}, {&out, 1});
  return out;
}

}  // namespace featcomp

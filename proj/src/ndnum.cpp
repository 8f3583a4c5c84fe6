#include "featcomp/ndnum.hpp"

#include <algorithm>
#include <cmath>

#include "featcomp/error.hpp"

namespace featcomp::ndnum {
namespace {

std::size_t product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

void require_positive(const std::vector<std::size_t>& shape) {
  if (shape.empty()) throw PreconditionError("tensor shape must have at least one axis");
  for (auto d : shape) {
    if (d == 0) throw PreconditionError("tensor shape " + shape_string(shape) + " has a zero axis");
  }
}

double activate(Activation a, double z) {
  switch (a) {
    case Activation::relu:
      return z > 0.0 ? z : 0.0;
    case Activation::sigmoid:
      return sigmoid(z);
    case Activation::identity:
      break;
  }
  return z;
}

double activate_slope(Activation a, double z) {
  switch (a) {
    case Activation::relu:
      return z > 0.0 ? 1.0 : 0.0;
    case Activation::sigmoid: {
      const double s = sigmoid(z);
      return s * (1.0 - s);
    }
    case Activation::identity:
      break;
  }
  return 1.0;
}

}  // namespace

double clamp_probability(double p) { return std::clamp(p, kProbFloor, 1.0 - kProbFloor); }

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)) {
  require_positive(shape_);
  if (!std::isfinite(fill)) throw PreconditionError("tensor fill must be finite");
  data_.assign(product(shape_), fill);
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  require_positive(shape_);
  if (product(shape_) != data_.size()) {
    throw PreconditionError("tensor shape " + shape_string(shape_) + " needs " +
                            std::to_string(product(shape_)) + " values, got " +
                            std::to_string(data_.size()));
  }
  if (!all_finite()) throw PreconditionError("tensor data contains non-finite values");
}

Tensor Tensor::vector(std::vector<double> data) {
  const std::size_t n = data.size();
  return Tensor({n}, std::move(data));
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

const char* to_string(Activation activation) {
  switch (activation) {
    case Activation::relu:
      return "relu";
    case Activation::sigmoid:
      return "sigmoid";
    case Activation::identity:
      break;
  }
  return "identity";
}

Activation activation_from_string(const std::string& name) {
  if (name == "relu") return Activation::relu;
  if (name == "sigmoid") return Activation::sigmoid;
  if (name == "identity") return Activation::identity;
  throw PreconditionError("unknown activation '" + name + "'");
}

DenseLayer::DenseLayer(std::size_t in_dim, std::size_t out_dim, Activation activation)
    : in_dim_(in_dim),
      out_dim_(out_dim),
      activation_(activation),
      weights_({out_dim, in_dim}, 0.0),
      bias_({out_dim}, 0.0) {}

DenseLayer::DenseLayer(Tensor weights, Tensor bias, Activation activation)
    : activation_(activation), weights_(std::move(weights)), bias_(std::move(bias)) {
  if (weights_.rank() != 2 || bias_.rank() != 1 || bias_.dim(0) != weights_.dim(0)) {
    throw PreconditionError("dense layer weights " + shape_string(weights_.shape()) +
                            " and bias " + shape_string(bias_.shape()) + " are inconsistent");
  }
  out_dim_ = weights_.dim(0);
  in_dim_ = weights_.dim(1);
}

DenseLayer DenseLayer::random(std::size_t in_dim, std::size_t out_dim, Activation activation,
                              Rng& rng, double gain) {
  DenseLayer layer(in_dim, out_dim, activation);
  const double sd = gain * std::sqrt(2.0 / static_cast<double>(in_dim));
  for (auto& w : layer.weights_.values()) w = rng.normal(0.0, sd);
  return layer;
}

void DenseLayer::forward(std::span<const double> input, std::span<double> pre,
                         std::span<double> output) const {
  if (input.size() != in_dim_) {
    throw PreconditionError("dense layer expects input of length " + std::to_string(in_dim_) +
                            ", got " + std::to_string(input.size()));
  }
  const double* w = weights_.values().data();
  for (std::size_t o = 0; o < out_dim_; ++o) {
    double z = bias_[o];
    const double* row = w + o * in_dim_;
    for (std::size_t i = 0; i < in_dim_; ++i) z += row[i] * input[i];
    pre[o] = z;
    output[o] = activate(activation_, z);
  }
}

void DenseLayer::backward(std::span<const double> input, std::span<const double> pre,
                          std::span<const double> upstream, std::span<double> grad_weights,
                          std::span<double> grad_bias, std::span<double> input_grad) const {
  if (upstream.size() != out_dim_) {
    throw PreconditionError("dense layer expects upstream gradient of length " +
                            std::to_string(out_dim_) + ", got " +
                            std::to_string(upstream.size()));
  }
  const bool want_input = !input_grad.empty();
  if (want_input) std::fill(input_grad.begin(), input_grad.end(), 0.0);
  const double* w = weights_.values().data();
  for (std::size_t o = 0; o < out_dim_; ++o) {
    const double delta = upstream[o] * activate_slope(activation_, pre[o]);
    if (delta == 0.0) continue;
    grad_bias[o] += delta;
    double* gw = grad_weights.data() + o * in_dim_;
    const double* row = w + o * in_dim_;
    for (std::size_t i = 0; i < in_dim_; ++i) {
      gw[i] += delta * input[i];
      if (want_input) input_grad[i] += delta * row[i];
    }
  }
}

Tensor DenseLayer::forward(const Tensor& input) {
  if (input.size() != in_dim_) {
    throw PreconditionError("dense layer expects input of length " + std::to_string(in_dim_) +
                            ", got " + std::to_string(input.size()));
  }
  Cache cache{input, Tensor({out_dim_}, 0.0)};
  Tensor output({out_dim_}, 0.0);
  forward(input.values(), cache.pre.values(), output.values());
  cache_ = std::move(cache);
  if (!output.all_finite()) throw Error("dense layer produced non-finite output");
  return output;
}

DenseGrads DenseLayer::backward(const Tensor& upstream) const {
  if (!cache_) throw PreconditionError("dense layer backward called without a forward pass");
  DenseGrads g{Tensor({out_dim_, in_dim_}, 0.0), Tensor({out_dim_}, 0.0), Tensor({in_dim_}, 0.0)};
  backward(cache_->input.values(), cache_->pre.values(), upstream.values(), g.weights.values(),
           g.bias.values(), g.input.values());
  return g;
}

void sgd_step(std::span<double> params, std::span<const double> grads, double rate,
              Direction direction) {
  if (params.size() != grads.size()) {
    throw PreconditionError("sgd step: " + std::to_string(params.size()) + " parameters but " +
                            std::to_string(grads.size()) + " gradients");
  }
  if (!(rate > 0.0)) throw PreconditionError("sgd step: rate must be positive");
  if (direction == Direction::ascend) {
    for (std::size_t i = 0; i < params.size(); ++i) params[i] += rate * grads[i];
  } else {
    for (std::size_t i = 0; i < params.size(); ++i) params[i] -= rate * grads[i];
  }
}

void sgd_step(DenseLayer& layer, const DenseGrads& grads, double rate, Direction direction) {
  if (grads.weights.shape() != layer.weights().shape() ||
      grads.bias.shape() != layer.bias().shape()) {
    throw PreconditionError("sgd step: gradient shapes do not match the layer");
  }
  sgd_step(layer.weights().values(), grads.weights.values(), rate, direction);
  sgd_step(layer.bias().values(), grads.bias.values(), rate, direction);
}

double finite_diff_check(DifferentiableObjective& objective, const Tensor& input,
                         double epsilon) {
  if (!(epsilon > 0.0 && epsilon <= 1e-2)) {
    throw PreconditionError("finite_diff_check: epsilon must lie in (0, 1e-2]");
  }
  const std::vector<double> analytic = objective.gradient(input);
  double worst = 0.0;
  std::size_t k = 0;
  for (auto block : objective.parameters()) {
    for (auto& p : block) {
      const double saved = p;
      // Divide by the step actually taken, not the nominal 2 * epsilon.
      const double hi = saved + epsilon;
      const double lo = saved - epsilon;
      p = hi;
      const double up = objective.value(input);
      p = lo;
      const double down = objective.value(input);
      p = saved;
      const double central = (up - down) / (hi - lo);
      const double a = analytic.at(k++);
      const double scale = std::max({std::abs(a), std::abs(central), 1e-12});
      worst = std::max(worst, std::abs(a - central) / scale);
    }
  }
  return worst;
}

Mlp::Mlp(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  for (std::size_t i = 1; i < layers_.size(); ++i) {
    if (layers_[i].in_dim() != layers_[i - 1].out_dim()) {
      throw PreconditionError("mlp layer " + std::to_string(i) + " expects " +
                              std::to_string(layers_[i].in_dim()) + " inputs but layer " +
                              std::to_string(i - 1) + " produces " +
                              std::to_string(layers_[i - 1].out_dim()));
    }
  }
}

Tensor Mlp::forward(const Tensor& input) {
  Tensor x = input;
  for (auto& layer : layers_) x = layer.forward(x);
  return x;
}

std::vector<std::span<double>> Mlp::parameters() {
  std::vector<std::span<double>> out;
  for (auto& layer : layers_) {
    out.push_back(layer.weights().values());
    out.push_back(layer.bias().values());
  }
  return out;
}

double Mlp::value(const Tensor& input) {
  const Tensor y = forward(input);
  double s = 0.0;
  for (double v : y.values()) s += v;
  return s;
}

std::vector<double> Mlp::gradient(const Tensor& input) {
  const Tensor y = forward(input);
  Tensor upstream(y.shape(), 1.0);
  std::vector<DenseGrads> grads(layers_.size());
  for (std::size_t i = layers_.size(); i-- > 0;) {
    grads[i] = layers_[i].backward(upstream);
    upstream = grads[i].input;
  }
  std::vector<double> flat;
  for (const auto& g : grads) {
    flat.insert(flat.end(), g.weights.values().begin(), g.weights.values().end());
    flat.insert(flat.end(), g.bias.values().begin(), g.bias.values().end());
  }
  return flat;
}

}  // namespace featcomp::ndnum

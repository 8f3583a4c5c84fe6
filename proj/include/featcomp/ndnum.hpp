#pragma once

// Minimal numeric core: dense tensors, fully connected layers with hand-written
// reverse-mode gradients, plain SGD, and a central-difference gradient checker.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "featcomp/rng.hpp"

namespace featcomp::ndnum {

// Probabilities are clamped to [kProbFloor, 1 - kProbFloor] before any log.
inline constexpr double kProbFloor = 1e-7;

double clamp_probability(double p);
double sigmoid(double z);

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor vector(std::vector<double> data);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t row, std::size_t col) { return data_[row * shape_[1] + col]; }
  double at(std::size_t row, std::size_t col) const { return data_[row * shape_[1] + col]; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  bool all_finite() const;
  bool operator==(const Tensor&) const = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

std::string shape_string(const std::vector<std::size_t>& shape);

enum class Activation { relu, sigmoid, identity };

const char* to_string(Activation activation);
Activation activation_from_string(const std::string& name);

struct DenseGrads {
  Tensor weights;  // out x in
  Tensor bias;     // out
  Tensor input;    // in
};

// Fully connected layer y = act(W x + b).
//
// Two calling styles share the same math. forward()/backward() on Tensors keep
// a one-sample cache inside the layer. The span overloads are stateless: the
// caller owns the input and pre-activation buffers, which is what the per-cell
// generator and minibatch loops use.
class DenseLayer {
 public:
  DenseLayer() = default;
  DenseLayer(std::size_t in_dim, std::size_t out_dim, Activation activation);
  DenseLayer(Tensor weights, Tensor bias, Activation activation);

  // He-style normal init scaled by `gain`; bias zero.
  static DenseLayer random(std::size_t in_dim, std::size_t out_dim, Activation activation,
                           Rng& rng, double gain = 1.0);

  std::size_t in_dim() const { return in_dim_; }
  std::size_t out_dim() const { return out_dim_; }
  Activation activation() const { return activation_; }

  Tensor& weights() { return weights_; }
  const Tensor& weights() const { return weights_; }
  Tensor& bias() { return bias_; }
  const Tensor& bias() const { return bias_; }
  std::size_t parameter_count() const { return weights_.size() + bias_.size(); }

  Tensor forward(const Tensor& input);
  DenseGrads backward(const Tensor& upstream) const;
  void clear_cache() { cache_.reset(); }

  void forward(std::span<const double> input, std::span<double> pre,
               std::span<double> output) const;
  // Adds parameter gradients into grad_weights/grad_bias. input_grad, when
  // non-empty, is overwritten with dLoss/dinput.
  void backward(std::span<const double> input, std::span<const double> pre,
                std::span<const double> upstream, std::span<double> grad_weights,
                std::span<double> grad_bias, std::span<double> input_grad) const;

  bool operator==(const DenseLayer& other) const {
    return in_dim_ == other.in_dim_ && out_dim_ == other.out_dim_ &&
           activation_ == other.activation_ && weights_ == other.weights_ &&
           bias_ == other.bias_;
  }

 private:
  struct Cache {
    Tensor input;
    Tensor pre;
  };

  std::size_t in_dim_ = 0;
  std::size_t out_dim_ = 0;
  Activation activation_ = Activation::identity;
  Tensor weights_;
  Tensor bias_;
  std::optional<Cache> cache_;
};

enum class Direction { ascend, descend };

// ascend: p <- p + rate * g; descend: p <- p - rate * g.
void sgd_step(std::span<double> params, std::span<const double> grads, double rate,
              Direction direction);
void sgd_step(DenseLayer& layer, const DenseGrads& grads, double rate, Direction direction);

// Scalar function of an input with mutable parameters; the gradient is returned
// flattened in the order of parameters().
class DifferentiableObjective {
 public:
  virtual ~DifferentiableObjective() = default;
  virtual std::vector<std::span<double>> parameters() = 0;
  virtual double value(const Tensor& input) = 0;
  virtual std::vector<double> gradient(const Tensor& input) = 0;
};

// max over parameters of |analytic - central| / max(|analytic|, |central|, 1e-12).
// epsilon must lie in (0, 1e-2].
double finite_diff_check(DifferentiableObjective& objective, const Tensor& input,
                         double epsilon);

// Stack of dense layers whose objective is the sum of the final outputs.
class Mlp : public DifferentiableObjective {
 public:
  Mlp() = default;
  explicit Mlp(std::vector<DenseLayer> layers);

  std::vector<DenseLayer>& layers() { return layers_; }
  Tensor forward(const Tensor& input);

  std::vector<std::span<double>> parameters() override;
  double value(const Tensor& input) override;
  std::vector<double> gradient(const Tensor& input) override;

 private:
  std::vector<DenseLayer> layers_;
};

}  // namespace featcomp::ndnum

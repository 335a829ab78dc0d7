#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "qrlforge/rng.hpp"

namespace qrlforge::nn {

// Feed-forward network with tanh hidden layers and an affine output layer.
// Parameters live in one flat vector: for each layer the weight matrix
// (out x in, row-major) followed by the bias vector.
class DenseNet {
 public:
  // Activations recorded by forward() for a later backward().
  struct Tape {
    std::vector<std::vector<double>> activations;  // [0] = input, back() = output
    std::span<const double> output() const { return activations.back(); }
  };

  struct Gradients {
    std::vector<double> params;
    std::vector<double> input;
  };

  explicit DenseNet(std::vector<std::size_t> layer_sizes);

  // Weights and biases ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
  void init_uniform(Rng& rng);

  std::size_t input_size() const noexcept { return sizes_.front(); }
  std::size_t output_size() const noexcept { return sizes_.back(); }
  std::size_t layer_count() const noexcept { return sizes_.size() - 1; }
  const std::vector<std::size_t>& layer_sizes() const noexcept { return sizes_; }
  std::size_t parameter_count() const noexcept { return params_.size(); }

  std::span<double> parameters() noexcept { return params_; }
  std::span<const double> parameters() const noexcept { return params_; }

  std::span<double> weights(std::size_t layer);
  std::span<double> biases(std::size_t layer);

  std::vector<double> forward(std::span<const double> input) const;
  void forward(std::span<const double> input, Tape& tape) const;

  Gradients backward(std::span<const double> input, std::span<const double> output_gradient) const;

  // Adds d(output . output_gradient)/d(params) into param_grad. If
  // input_grad is non-null it receives the input gradient.
  void backward(const Tape& tape, std::span<const double> output_gradient,
                std::span<double> param_grad, std::vector<double>* input_grad = nullptr) const;

  // Same, evaluated with an external parameter vector of matching length.
  void forward(std::span<const double> params, std::span<const double> input, Tape& tape) const;
  void backward(std::span<const double> params, const Tape& tape,
                std::span<const double> output_gradient, std::span<double> param_grad,
                std::vector<double>* input_grad = nullptr) const;

 private:
  std::vector<std::size_t> sizes_;
  std::vector<std::size_t> offsets_;  // start of each layer's weight block
  std::vector<double> params_;
};

// Bias-corrected Adam with a per-element learning rate.
struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::vector<double> learning_rates;
  std::uint64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double lr_scale = 1.0;

  AdamState() = default;
  AdamState(std::size_t n, double lr) : m(n, 0.0), v(n, 0.0), learning_rates(n, lr) {}
  explicit AdamState(std::vector<double> per_element_lr)
      : m(per_element_lr.size(), 0.0), v(per_element_lr.size(), 0.0),
        learning_rates(std::move(per_element_lr)) {}
};

// Throws ArgumentError on shape mismatch.
void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads);

// Rescales grads in place so that their L2 norm is at most max_norm.
// Returns the norm before clipping.
double clip_grad_norm(std::span<double> grads, double max_norm);

}  // namespace qrlforge::nn

#include "qrlforge/nn.hpp"

#include <cmath>
#include <string>

#include "qrlforge/error.hpp"

namespace qrlforge::nn {

DenseNet::DenseNet(std::vector<std::size_t> layer_sizes) : sizes_(std::move(layer_sizes)) {
  if (sizes_.size() < 2) throw ArgumentError("network needs at least an input and output layer");
  for (auto s : sizes_) {
    if (s == 0) throw ArgumentError("layer sizes must be positive");
  }
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    offsets_.push_back(total);
    total += sizes_[l] * sizes_[l + 1] + sizes_[l + 1];
  }
  params_.assign(total, 0.0);
}

void DenseNet::init_uniform(Rng& rng) {
  for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(sizes_[l]));
    for (auto& w : weights(l)) w = rng.uniform(-bound, bound);
    for (auto& b : biases(l)) b = rng.uniform(-bound, bound);
  }
}

std::span<double> DenseNet::weights(std::size_t layer) {
  return std::span<double>(params_).subspan(offsets_.at(layer), sizes_[layer] * sizes_[layer + 1]);
}

std::span<double> DenseNet::biases(std::size_t layer) {
  return std::span<double>(params_).subspan(offsets_.at(layer) + sizes_[layer] * sizes_[layer + 1],
                                            sizes_[layer + 1]);
}

std::vector<double> DenseNet::forward(std::span<const double> input) const {
  Tape tape;
  forward(input, tape);
  return tape.activations.back();
}

void DenseNet::forward(std::span<const double> input, Tape& tape) const {
  forward(params_, input, tape);
}

void DenseNet::forward(std::span<const double> params, std::span<const double> input,
                       Tape& tape) const {
  if (params.size() != params_.size()) throw ArgumentError("network parameter size mismatch");
  if (input.size() != sizes_.front()) {
    throw ArgumentError("network input has length " + std::to_string(input.size()) +
                        ", expected " + std::to_string(sizes_.front()));
  }
  const std::size_t n_layers = sizes_.size() - 1;
  tape.activations.resize(n_layers + 1);
  tape.activations[0].assign(input.begin(), input.end());
  for (std::size_t l = 0; l < n_layers; ++l) {
    const std::size_t in = sizes_[l], out = sizes_[l + 1];
    const double* w = params.data() + offsets_[l];
    const double* b = w + in * out;
    const std::vector<double>& x = tape.activations[l];
    std::vector<double>& y = tape.activations[l + 1];
    y.resize(out);
    for (std::size_t o = 0; o < out; ++o) {
      const double* row = w + o * in;
      double acc = b[o];
      for (std::size_t i = 0; i < in; ++i) acc += row[i] * x[i];
      y[o] = acc;
    }
    if (l + 1 < n_layers) {
      for (auto& v : y) v = std::tanh(v);
    }
  }
}

DenseNet::Gradients DenseNet::backward(std::span<const double> input,
                                       std::span<const double> output_gradient) const {
  Tape tape;
  forward(input, tape);
  Gradients g;
  g.params.assign(params_.size(), 0.0);
  backward(tape, output_gradient, g.params, &g.input);
  return g;
}

void DenseNet::backward(const Tape& tape, std::span<const double> output_gradient,
                        std::span<double> param_grad, std::vector<double>* input_grad) const {
  backward(params_, tape, output_gradient, param_grad, input_grad);
}

void DenseNet::backward(std::span<const double> params, const Tape& tape,
                        std::span<const double> output_gradient, std::span<double> param_grad,
                        std::vector<double>* input_grad) const {
  if (params.size() != params_.size()) throw ArgumentError("network parameter size mismatch");
  if (output_gradient.size() != sizes_.back()) {
    throw ArgumentError("output gradient has length " + std::to_string(output_gradient.size()) +
                        ", expected " + std::to_string(sizes_.back()));
  }
  if (param_grad.size() != params_.size()) throw ArgumentError("parameter gradient size mismatch");
  const std::size_t n_layers = sizes_.size() - 1;

  std::vector<double> delta(output_gradient.begin(), output_gradient.end());
  std::vector<double> prev;
  for (std::size_t l = n_layers; l-- > 0;) {
    const std::size_t in = sizes_[l], out = sizes_[l + 1];
    const double* w = params.data() + offsets_[l];
    double* gw = param_grad.data() + offsets_[l];
    double* gb = gw + in * out;
    const std::vector<double>& x = tape.activations[l];

    for (std::size_t o = 0; o < out; ++o) {
      const double d = delta[o];
      gb[o] += d;
      if (d == 0.0) continue;
      double* grow = gw + o * in;
      for (std::size_t i = 0; i < in; ++i) grow[i] += d * x[i];
    }
    if (l == 0 && !input_grad) break;

    prev.assign(in, 0.0);
    for (std::size_t o = 0; o < out; ++o) {
      const double d = delta[o];
      if (d == 0.0) continue;
      const double* row = w + o * in;
      for (std::size_t i = 0; i < in; ++i) prev[i] += d * row[i];
    }
    if (l > 0) {
      // x = tanh(pre-activation), so d tanh = 1 - x^2.
      for (std::size_t i = 0; i < in; ++i) prev[i] *= 1.0 - x[i] * x[i];
    }
    delta.swap(prev);
  }
  if (input_grad) *input_grad = delta;
}

void adam_step(AdamState& s, std::span<double> params, std::span<const double> grads) {
  if (params.size() != grads.size() || params.size() != s.m.size() ||
      params.size() != s.v.size() || params.size() != s.learning_rates.size()) {
    throw ArgumentError("adam: parameter, gradient and state shapes differ");
  }
  ++s.step;
  const double t = static_cast<double>(s.step);
  const double bc1 = 1.0 - std::pow(s.beta1, t);
  const double bc2 = 1.0 - std::pow(s.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    s.m[i] = s.beta1 * s.m[i] + (1.0 - s.beta1) * g;
    s.v[i] = s.beta2 * s.v[i] + (1.0 - s.beta2) * g * g;
    const double m_hat = s.m[i] / bc1;
    const double v_hat = s.v[i] / bc2;
    params[i] -= s.lr_scale * s.learning_rates[i] * m_hat / (std::sqrt(v_hat) + s.epsilon);
  }
}

double clip_grad_norm(std::span<double> grads, double max_norm) {
  double sq = 0.0;
  for (double g : grads) sq += g * g;
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / (norm + 1e-6);
    for (auto& g : grads) g *= scale;
  }
  return norm;
}

}  // namespace qrlforge::nn

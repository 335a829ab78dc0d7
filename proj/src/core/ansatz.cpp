#include "qrlforge/ansatz.hpp"

#include <algorithm>
#include <set>
#include <string>

#include "qrlforge/error.hpp"

namespace qrlforge::ansatz {
namespace {

using qsim::GateKind;

GateTemplate single(GateKind kind, int q, Binding b = Binding::none()) {
  return {kind, {q, -1}, b, {}};
}

GateTemplate pair(GateKind kind, int a, int b, Binding binding = Binding::none()) {
  return {kind, {a, b}, binding, {}};
}

}  // namespace

void AnsatzSpec::validate() const {
  if (n_qubits < 1) throw ArgumentError("ansatz needs at least one qubit");
  if (observables.empty()) throw ArgumentError("ansatz needs at least one observable");
  for (const auto& g : gates) {
    const bool two = qsim::is_two_qubit(g.kind);
    const int wires = two ? 2 : 1;
    for (int k = 0; k < wires; ++k) {
      if (g.wires[k] < 0 || g.wires[k] >= n_qubits) {
        throw ArgumentError("gate wire out of range in ansatz '" + family + "'");
      }
    }
    if (two && g.wires[0] == g.wires[1]) throw ArgumentError("gate wires must be distinct");
    const bool angled = qsim::is_rotation(g.kind);
    const bool has_binding = g.binding.kind != Binding::Kind::None;
    if (angled != has_binding) {
      throw ArgumentError(std::string(qsim::gate_name(g.kind)) +
                          (angled ? " requires an angle binding" : " takes no angle binding"));
    }
    switch (g.binding.kind) {
      case Binding::Kind::Theta:
        if (g.binding.param >= n_theta) throw ArgumentError("theta index out of range");
        break;
      case Binding::Kind::ScaledFeature:
        if (g.binding.param >= n_lambda) throw ArgumentError("lambda index out of range");
        if (g.binding.feature >= n_features) throw ArgumentError("feature index out of range");
        break;
      case Binding::Kind::ThetaFeature:
        if (g.binding.param >= n_theta) throw ArgumentError("theta index out of range");
        [[fallthrough]];
      case Binding::Kind::Feature:
        if (g.binding.feature >= n_features) throw ArgumentError("feature index out of range");
        break;
      default:
        break;
    }
    for (auto f : g.requires_features) {
      if (f >= n_features) throw ArgumentError("mask feature index out of range");
    }
  }
}

std::vector<qsim::Gate> bind(const AnsatzSpec& spec, std::span<const double> theta,
                             std::span<const double> lambda, std::span<const double> features) {
  if (features.size() != spec.n_features) {
    throw ArgumentError("feature vector has length " + std::to_string(features.size()) +
                        ", ansatz expects " + std::to_string(spec.n_features));
  }
  if (theta.size() != spec.n_theta || lambda.size() != spec.n_lambda) {
    throw ArgumentError("parameter lengths do not match the ansatz");
  }

  std::vector<qsim::Gate> out;
  out.reserve(spec.gates.size());
  for (const auto& t : spec.gates) {
    const bool masked = std::any_of(t.requires_features.begin(), t.requires_features.end(),
                                    [&](std::size_t f) { return features[f] == 0.0; });
    if (masked) continue;

    qsim::Gate g{t.kind, t.wires, 0.0, {}};
    const Binding& b = t.binding;
    switch (b.kind) {
      case Binding::Kind::None:
        break;
      case Binding::Kind::Constant:
        g.angle = b.value;
        break;
      case Binding::Kind::Theta:
        g.angle = b.value * theta[b.param];
        g.param = qsim::ParamRef{b.param, b.value};
        break;
      case Binding::Kind::ScaledFeature:
        g.angle = lambda[b.param] * features[b.feature];
        g.param = qsim::ParamRef{spec.n_theta + b.param, features[b.feature]};
        break;
      case Binding::Kind::ThetaFeature: {
        const double m = b.value * features[b.feature];
        g.angle = m * theta[b.param];
        g.param = qsim::ParamRef{b.param, m};
        break;
      }
      case Binding::Kind::Feature:
        g.angle = b.value * features[b.feature];
        break;
    }
    out.push_back(g);
  }
  return out;
}

AnsatzSpec build_hardware_efficient(int n_qubits, int n_layers, int n_actions) {
  if (n_qubits < 1 || n_layers < 1 || n_actions < 1) {
    throw ArgumentError("hardware-efficient ansatz needs positive qubits, layers and actions");
  }
  if (n_actions > n_qubits) {
    throw ArgumentError("n_actions (" + std::to_string(n_actions) + ") exceeds n_qubits (" +
                        std::to_string(n_qubits) + ")");
  }

  AnsatzSpec spec;
  spec.family = "hardware_efficient";
  spec.n_qubits = n_qubits;
  spec.n_features = static_cast<std::size_t>(n_qubits);
  spec.n_theta = 2 * static_cast<std::size_t>(n_qubits * n_layers);
  spec.n_lambda = static_cast<std::size_t>(n_qubits * n_layers);

  for (int l = 0; l < n_layers; ++l) {
    for (int q = 0; q < n_qubits; ++q) {
      spec.gates.push_back(single(GateKind::RX, q,
                                  Binding::scaled_feature(static_cast<std::size_t>(l * n_qubits + q),
                                                          static_cast<std::size_t>(q))));
    }
    for (int q = 0; q < n_qubits; ++q) {
      const auto base = static_cast<std::size_t>(2 * (l * n_qubits + q));
      spec.gates.push_back(single(GateKind::RY, q, Binding::theta(base)));
      spec.gates.push_back(single(GateKind::RZ, q, Binding::theta(base + 1)));
    }
    if (n_qubits == 2) {
      spec.gates.push_back(pair(GateKind::CZ, 0, 1));
    } else if (n_qubits > 2) {
      for (int q = 0; q < n_qubits; ++q) {
        spec.gates.push_back(pair(GateKind::CZ, q, (q + 1) % n_qubits));
      }
    }
  }
  for (int a = 0; a < n_actions; ++a) spec.observables.push_back(qsim::Observable::z(a));
  spec.validate();
  return spec;
}

std::size_t edge_count(int n_nodes) noexcept {
  return static_cast<std::size_t>(n_nodes) * static_cast<std::size_t>(n_nodes - 1) / 2;
}

std::size_t edge_index(int n_nodes, int i, int j) noexcept {
  if (i > j) std::swap(i, j);
  // Rows 0..i-1 hold (n-1) + (n-2) + ... + (n-i) entries.
  const auto n = static_cast<std::size_t>(n_nodes);
  const auto ii = static_cast<std::size_t>(i);
  return ii * n - ii * (ii + 1) / 2 + static_cast<std::size_t>(j - i - 1);
}

AnsatzSpec build_graph_equivariant(int n_nodes, int n_layers) {
  if (n_nodes < 2) throw ArgumentError("graph ansatz needs at least 2 nodes");
  if (n_layers < 1) throw ArgumentError("graph ansatz needs at least 1 layer");

  AnsatzSpec spec;
  spec.family = "graph_equivariant";
  spec.n_qubits = n_nodes;
  const std::size_t n_edges = edge_count(n_nodes);
  spec.n_features = n_edges + static_cast<std::size_t>(n_nodes);
  spec.n_theta = 2 * static_cast<std::size_t>(n_layers);

  for (int q = 0; q < n_nodes; ++q) spec.gates.push_back(single(GateKind::H, q));
  for (int l = 0; l < n_layers; ++l) {
    const auto gamma = static_cast<std::size_t>(2 * l);
    for (int i = 0; i < n_nodes; ++i) {
      for (int j = i + 1; j < n_nodes; ++j) {
        GateTemplate g = pair(GateKind::ZZ, i, j,
                              Binding::theta_feature(gamma, edge_index(n_nodes, i, j)));
        g.requires_features = {n_edges + static_cast<std::size_t>(i),
                               n_edges + static_cast<std::size_t>(j)};
        spec.gates.push_back(std::move(g));
      }
    }
    for (int q = 0; q < n_nodes; ++q) {
      spec.gates.push_back(single(GateKind::RX, q, Binding::theta(gamma + 1)));
    }
  }
  for (int q = 0; q < n_nodes; ++q) spec.observables.push_back(qsim::Observable::z(q));
  spec.validate();
  return spec;
}

KnapsackCost::KnapsackCost(std::vector<double> values, std::vector<double> weights,
                           double capacity, double penalty)
    : values_(std::move(values)), weights_(std::move(weights)), capacity_(capacity),
      penalty_(penalty) {
  if (values_.size() != weights_.size()) {
    throw ArgumentError("knapsack values and weights differ in length");
  }
  if (values_.empty()) throw ArgumentError("knapsack needs at least one item");
}

double KnapsackCost::operator()(std::uint64_t x) const {
  const std::size_t n = values_.size();
  double value = 0.0, weight = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if ((x >> (n - 1 - i)) & 1U) {
      value += values_[i];
      weight += weights_[i];
    }
  }
  return -value + penalty_ * std::max(0.0, weight - capacity_);
}

double KnapsackCost::quadratic(std::uint64_t x) const {
  const std::size_t n = values_.size();
  double value = 0.0, weight = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if ((x >> (n - 1 - i)) & 1U) {
      value += values_[i];
      weight += weights_[i];
    }
  }
  const double excess = weight - capacity_;
  return -value + penalty_ * excess * excess;
}

double KnapsackCost::expectation(const qsim::Statevector& state) const {
  if (static_cast<std::size_t>(state.n_qubits()) != values_.size()) {
    throw ArgumentError("state size does not match the knapsack instance");
  }
  const auto amps = state.amplitudes();
  double acc = 0.0;
  for (std::size_t x = 0; x < amps.size(); ++x) {
    const double p = std::norm(amps[x]);
    if (p != 0.0) acc += p * (*this)(x);
  }
  return acc;
}

IsingTerms knapsack_ising(std::span<const double> values, std::span<const double> weights,
                          double capacity, double penalty) {
  if (values.size() != weights.size()) {
    throw ArgumentError("knapsack values and weights differ in length");
  }
  const std::size_t n = values.size();
  // x_i = (1 - z_i) / 2, so sum w_i x_i - C = D - sum a_i z_i.
  double total_value = 0.0, total_weight = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    total_value += values[i];
    total_weight += weights[i];
  }
  const double d = total_weight / 2.0 - capacity;

  IsingTerms t;
  t.h.resize(n);
  t.j.assign(edge_count(static_cast<int>(n)), 0.0);
  double sum_a2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = weights[i] / 2.0;
    sum_a2 += a * a;
    t.h[i] = values[i] / 2.0 - 2.0 * penalty * d * a;
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = i + 1; k < n; ++k) {
      t.j[edge_index(static_cast<int>(n), static_cast<int>(i), static_cast<int>(k))] =
          2.0 * penalty * (weights[i] / 2.0) * (weights[k] / 2.0);
    }
  }
  t.offset = -total_value / 2.0 + penalty * (d * d + sum_a2);
  return t;
}

KnapsackAnsatz build_cost_hamiltonian_knapsack(std::span<const double> values,
                                               std::span<const double> weights, double capacity,
                                               double penalty, int n_layers) {
  if (values.size() != weights.size()) {
    throw ArgumentError("knapsack values and weights differ in length");
  }
  if (values.empty()) throw ArgumentError("knapsack needs at least one item");
  if (n_layers < 1) throw ArgumentError("knapsack ansatz needs at least 1 layer");
  const int n = static_cast<int>(values.size());
  const IsingTerms ising = knapsack_ising(values, weights, capacity, penalty);

  AnsatzSpec spec;
  spec.family = "cost_hamiltonian_knapsack";
  spec.n_qubits = n;
  spec.n_theta = 2 * static_cast<std::size_t>(n_layers);

  for (int q = 0; q < n; ++q) spec.gates.push_back(single(GateKind::H, q));
  for (int l = 0; l < n_layers; ++l) {
    const auto gamma = static_cast<std::size_t>(2 * l);
    // exp(-i gamma h Z) == RZ(2 gamma h); exp(-i gamma J ZZ) == ZZ(2 gamma J).
    for (int i = 0; i < n; ++i) {
      const double h = ising.h[static_cast<std::size_t>(i)];
      if (h != 0.0) spec.gates.push_back(single(GateKind::RZ, i, Binding::theta(gamma, 2.0 * h)));
    }
    for (int i = 0; i < n; ++i) {
      for (int k = i + 1; k < n; ++k) {
        const double j = ising.j[edge_index(n, i, k)];
        if (j != 0.0) spec.gates.push_back(pair(GateKind::ZZ, i, k, Binding::theta(gamma, 2.0 * j)));
      }
    }
    for (int q = 0; q < n; ++q) spec.gates.push_back(single(GateKind::RX, q, Binding::theta(gamma + 1)));
  }
  for (int q = 0; q < n; ++q) spec.observables.push_back(qsim::Observable::z(q));
  spec.validate();

  return {std::move(spec),
          KnapsackCost(std::vector<double>(values.begin(), values.end()),
                       std::vector<double>(weights.begin(), weights.end()), capacity, penalty)};
}

}  // namespace qrlforge::ansatz

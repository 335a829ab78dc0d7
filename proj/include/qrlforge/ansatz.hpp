#pragma once

// Circuit families used as function approximators. An AnsatzSpec is a gate
// program with symbolic angle bindings; bind() resolves it against a
// parameter set and an input feature vector.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "qrlforge/qsim.hpp"

namespace qrlforge::ansatz {

// Angle source of one gate.
//   Constant:      angle = value
//   Theta:         angle = value * theta[param]
//   ScaledFeature: angle = lambda[param] * features[feature]
//   ThetaFeature:  angle = value * theta[param] * features[feature]
//   Feature:       angle = value * features[feature]
struct Binding {
  enum class Kind { None, Constant, Theta, ScaledFeature, ThetaFeature, Feature };

  Kind kind = Kind::None;
  double value = 1.0;
  std::size_t param = 0;
  std::size_t feature = 0;

  static Binding none() { return {}; }
  static Binding constant(double angle) { return {Kind::Constant, angle, 0, 0}; }
  static Binding theta(std::size_t i, double multiplier = 1.0) { return {Kind::Theta, multiplier, i, 0}; }
  static Binding scaled_feature(std::size_t lambda_index, std::size_t feature_index) {
    return {Kind::ScaledFeature, 1.0, lambda_index, feature_index};
  }
  static Binding theta_feature(std::size_t theta_index, std::size_t feature_index,
                               double multiplier = 1.0) {
    return {Kind::ThetaFeature, multiplier, theta_index, feature_index};
  }
  static Binding from_feature(std::size_t feature_index, double multiplier = 1.0) {
    return {Kind::Feature, multiplier, 0, feature_index};
  }
};

struct GateTemplate {
  qsim::GateKind kind = qsim::GateKind::H;
  std::array<int, 2> wires{0, -1};
  Binding binding;
  // The gate is dropped at bind time unless every listed feature is non-zero.
  std::vector<std::size_t> requires_features;
};

struct AnsatzSpec {
  std::string family;
  int n_qubits = 0;
  std::vector<GateTemplate> gates;
  std::vector<qsim::Observable> observables;
  std::size_t n_theta = 0;
  std::size_t n_lambda = 0;
  std::size_t n_features = 0;

  // Throws ArgumentError if any invariant is violated.
  void validate() const;
};

struct ParamSet {
  std::vector<double> theta;
  std::vector<double> lambda;
  std::vector<double> w;
};

// Resolves every binding. Each gate whose angle depends on theta or lambda
// carries a qsim::ParamRef into the concatenated vector [theta..., lambda...],
// so the result feeds straight into qsim::parameter_shift_gradient.
std::vector<qsim::Gate> bind(const AnsatzSpec& spec, std::span<const double> theta,
                             std::span<const double> lambda, std::span<const double> features);

inline std::vector<qsim::Gate> bind(const AnsatzSpec& spec, const ParamSet& params,
                                    std::span<const double> features) {
  return ansatz::bind(spec, params.theta, params.lambda, features);
}

// Data re-uploading hardware-efficient circuit: per layer an RX(lambda*s)
// encoding block, an RY/RZ variational block and a CZ ring, followed by Z
// readout on qubits 0..n_actions-1.
AnsatzSpec build_hardware_efficient(int n_qubits, int n_layers, int n_actions);

// Number of upper-triangular node pairs, i.e. n(n-1)/2.
std::size_t edge_count(int n_nodes) noexcept;
// Index of pair (i, j), i < j, in row-major upper-triangular order.
std::size_t edge_index(int n_nodes, int i, int j) noexcept;

// Permutation-equivariant graph circuit: H on every node qubit, then per layer
// ZZ(gamma_l * d_ij) on every available edge and RX(beta_l) on every qubit.
// Features: upper-triangular edge weights followed by per-node availability.
// theta layout: [gamma_0, beta_0, gamma_1, beta_1, ...].
AnsatzSpec build_graph_equivariant(int n_nodes, int n_layers);

// Diagonal knapsack cost
//   cost(x) = -sum v_i x_i + penalty * max(0, sum w_i x_i - capacity)
// Item i corresponds to qubit i, so x_i is bit (n-1-i) of the basis index.
class KnapsackCost {
 public:
  KnapsackCost(std::vector<double> values, std::vector<double> weights, double capacity,
               double penalty);

  std::size_t n_items() const noexcept { return values_.size(); }
  double operator()(std::uint64_t basis_index) const;
  // Quadratic-penalty variant used by the circuit phase layer.
  double quadratic(std::uint64_t basis_index) const;
  // sum_x |<x|psi>|^2 cost(x)
  double expectation(const qsim::Statevector& state) const;

 private:
  std::vector<double> values_;
  std::vector<double> weights_;
  double capacity_;
  double penalty_;
};

// Ising form of the quadratic-penalty cost: H = offset + sum h_i Z_i + sum J_ij Z_i Z_j.
struct IsingTerms {
  double offset = 0.0;
  std::vector<double> h;
  std::vector<double> j;  // upper-triangular, edge_index order
};

IsingTerms knapsack_ising(std::span<const double> values, std::span<const double> weights,
                          double capacity, double penalty);

struct KnapsackAnsatz {
  AnsatzSpec spec;
  KnapsackCost cost;
};

// QAOA-style alternation: H on every qubit, then per layer the phase
// separator exp(-i gamma_l H_quad) as RZ/ZZ rotations and an RX(beta_l) mixer.
// Readout is Z on every item qubit. theta layout as for the graph circuit.
// Terms with an exactly-zero coefficient are omitted.
KnapsackAnsatz build_cost_hamiltonian_knapsack(std::span<const double> values,
                                               std::span<const double> weights, double capacity,
                                               double penalty, int n_layers = 1);

}  // namespace qrlforge::ansatz

#pragma once

// Dense statevector simulator for small parametrized circuits.
//
// Qubit ordering: qubit 0 is the most significant bit of the basis index, so
// for n qubits the basis state |q0 q1 ... q(n-1)> has index
// q0 * 2^(n-1) + ... + q(n-1). The same convention is used by every module.

#include <array>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include "qrlforge/execution_counter.hpp"
#include "qrlforge/rng.hpp"

namespace qrlforge::qsim {

inline constexpr int kMaxQubits = 24;

using Amplitude = std::complex<double>;

enum class GateKind { H, RX, RY, RZ, CZ, CNOT, ZZ };

bool is_two_qubit(GateKind kind) noexcept;
bool is_rotation(GateKind kind) noexcept;
const char* gate_name(GateKind kind) noexcept;

// How a resolved angle depends on the flat parameter vector handed to the
// gradient routine: d(angle)/d(params[index]) == multiplier.
struct ParamRef {
  std::size_t index = 0;
  double multiplier = 1.0;
};

// A gate with a concrete angle. RX/RY/RZ/ZZ use `angle`; H/CZ/CNOT ignore it.
// For CNOT, wires[0] is the control.
struct Gate {
  GateKind kind = GateKind::H;
  std::array<int, 2> wires{0, -1};
  double angle = 0.0;
  std::optional<ParamRef> param;

  static Gate h(int q) { return {GateKind::H, {q, -1}, 0.0, {}}; }
  static Gate rx(int q, double a) { return {GateKind::RX, {q, -1}, a, {}}; }
  static Gate ry(int q, double a) { return {GateKind::RY, {q, -1}, a, {}}; }
  static Gate rz(int q, double a) { return {GateKind::RZ, {q, -1}, a, {}}; }
  static Gate cz(int a, int b) { return {GateKind::CZ, {a, b}, 0.0, {}}; }
  static Gate cnot(int control, int target) { return {GateKind::CNOT, {control, target}, 0.0, {}}; }
  static Gate zz(int a, int b, double phi) { return {GateKind::ZZ, {a, b}, phi, {}}; }

  Gate with_param(std::size_t index, double multiplier = 1.0) const {
    Gate g = *this;
    g.param = ParamRef{index, multiplier};
    return g;
  }
};

class Statevector {
 public:
  // |0...0> on n qubits; throws CapacityError outside [1, kMaxQubits].
  explicit Statevector(int n_qubits);

  // Computational basis state |index>.
  static Statevector basis(int n_qubits, std::uint64_t index);

  int n_qubits() const noexcept { return n_; }
  std::size_t size() const noexcept { return amps_.size(); }
  std::span<const Amplitude> amplitudes() const noexcept { return amps_; }
  Amplitude operator[](std::size_t i) const { return amps_[i]; }

  double norm_squared() const noexcept;

  // Applies the gate in place. Throws IndexError on invalid wires.
  void apply(const Gate& gate);

 private:
  void apply_single(int qubit, const Amplitude u[4]);

  int n_;
  std::vector<Amplitude> amps_;
};

Statevector zero_state(int n_qubits);

// Returns a copy of `state` with the gate applied.
Statevector apply_gate(Statevector state, const Gate& gate);

// Throws IndexError / ArgumentError if the gate is malformed for n qubits.
void validate_gate(const Gate& gate, int n_qubits);

// Folds the gates over |0...0>. Adds exactly one execution to `counter`.
Statevector run_circuit(int n_qubits, std::span<const Gate> gates,
                        metrics::ExecutionCounter* counter = nullptr);

enum class Pauli : char { X = 'X', Y = 'Y', Z = 'Z' };

// coefficient * (tensor product of the listed Paulis, identity elsewhere).
struct Observable {
  std::map<int, Pauli> paulis;
  double coefficient = 1.0;

  static Observable z(int q, double coefficient = 1.0) { return {{{q, Pauli::Z}}, coefficient}; }
  static Observable identity(double coefficient = 1.0) { return {{}, coefficient}; }
  bool is_diagonal() const;
};

double expectation(const Statevector& state, const Observable& obs);

// Finite-shot estimate: measures the Pauli string `shots` times in its
// eigenbasis and averages the +-1 outcomes (times the coefficient).
double sample_expectation(const Statevector& state, const Observable& obs, std::uint64_t shots,
                          Rng& rng);

// Exact when shots == 0, otherwise sampled with `rng`.
struct Estimator {
  std::uint64_t shots = 0;
  Rng* rng = nullptr;

  double operator()(const Statevector& state, const Observable& obs) const;
};

std::vector<double> expectations(const Statevector& state, std::span<const Observable> obs,
                                 const Estimator& estimator = {});

// Row-major observables x parameters.
struct Jacobian {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Jacobian() = default;
  Jacobian(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

// Number of gates carrying a parameter dependence.
std::size_t parameter_occurrences(std::span<const Gate> gates) noexcept;

// Parameter-shift derivatives of every observable with respect to every
// entry of an n_params-long parameter vector. Every gate with a ParamRef is
// shifted by +-pi/2 in its own angle, and the difference is scaled by the
// ParamRef multiplier. Costs exactly 2 executions per occurrence.
//
// Throws UnsupportedBindingError if a non-rotation gate carries a ParamRef.
Jacobian parameter_shift_gradient(int n_qubits, std::span<const Gate> gates, std::size_t n_params,
                                  std::span<const Observable> observables,
                                  metrics::ExecutionCounter* counter = nullptr,
                                  const Estimator& estimator = {});

using CircuitBuilder = std::function<std::vector<Gate>(std::span<const double>)>;

Jacobian parameter_shift_gradient(int n_qubits, const CircuitBuilder& builder,
                                  std::span<const double> params,
                                  std::span<const Observable> observables,
                                  metrics::ExecutionCounter* counter = nullptr,
                                  const Estimator& estimator = {});

}  // namespace qrlforge::qsim

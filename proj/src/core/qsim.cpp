#include "qrlforge/qsim.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "qrlforge/error.hpp"

namespace qrlforge::qsim {
namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kShift = M_PI / 2.0;

inline int parity(std::uint64_t x) noexcept { return __builtin_popcountll(x) & 1; }

void check_qubit_count(int n) {
  if (n < 1 || n > kMaxQubits) {
    throw CapacityError("qubit count " + std::to_string(n) + " outside [1, " +
                        std::to_string(kMaxQubits) + "]");
  }
}

}  // namespace

bool is_two_qubit(GateKind kind) noexcept {
  return kind == GateKind::CZ || kind == GateKind::CNOT || kind == GateKind::ZZ;
}

bool is_rotation(GateKind kind) noexcept {
  return kind == GateKind::RX || kind == GateKind::RY || kind == GateKind::RZ ||
         kind == GateKind::ZZ;
}

const char* gate_name(GateKind kind) noexcept {
  switch (kind) {
    case GateKind::H: return "H";
    case GateKind::RX: return "RX";
    case GateKind::RY: return "RY";
    case GateKind::RZ: return "RZ";
    case GateKind::CZ: return "CZ";
    case GateKind::CNOT: return "CNOT";
    case GateKind::ZZ: return "ZZ";
  }
  return "?";
}

void validate_gate(const Gate& gate, int n_qubits) {
  auto check = [&](int q) {
    if (q < 0 || q >= n_qubits) {
      throw IndexError(std::string(gate_name(gate.kind)) + " wire " + std::to_string(q) +
                       " out of range for " + std::to_string(n_qubits) + " qubits");
    }
  };
  check(gate.wires[0]);
  if (is_two_qubit(gate.kind)) {
    check(gate.wires[1]);
    if (gate.wires[0] == gate.wires[1]) {
      throw ArgumentError(std::string(gate_name(gate.kind)) + " wires must be distinct");
    }
  }
}

Statevector::Statevector(int n_qubits) : n_(n_qubits) {
  check_qubit_count(n_qubits);
  amps_.assign(std::size_t{1} << n_qubits, Amplitude{0.0, 0.0});
  amps_[0] = 1.0;
}

Statevector Statevector::basis(int n_qubits, std::uint64_t index) {
  Statevector s(n_qubits);
  if (index >= s.size()) {
    throw IndexError("basis index " + std::to_string(index) + " out of range");
  }
  s.amps_[0] = 0.0;
  s.amps_[index] = 1.0;
  return s;
}

double Statevector::norm_squared() const noexcept {
  double acc = 0.0;
  for (const auto& a : amps_) acc += std::norm(a);
  return acc;
}

void Statevector::apply_single(int qubit, const Amplitude u[4]) {
  const std::size_t stride = std::size_t{1} << (n_ - 1 - qubit);
  const std::size_t dim = amps_.size();
  Amplitude* a = amps_.data();
  for (std::size_t block = 0; block < dim; block += 2 * stride) {
    for (std::size_t k = block; k < block + stride; ++k) {
      const Amplitude a0 = a[k];
      const Amplitude a1 = a[k + stride];
      a[k] = u[0] * a0 + u[1] * a1;
      a[k + stride] = u[2] * a0 + u[3] * a1;
    }
  }
}

void Statevector::apply(const Gate& gate) {
  validate_gate(gate, n_);
  const std::size_t dim = amps_.size();
  Amplitude* a = amps_.data();
  const int q0 = gate.wires[0];
  const std::uint64_t m0 = std::uint64_t{1} << (n_ - 1 - q0);

  switch (gate.kind) {
    case GateKind::H: {
      const std::size_t stride = m0;
      for (std::size_t block = 0; block < dim; block += 2 * stride) {
        for (std::size_t k = block; k < block + stride; ++k) {
          const Amplitude a0 = a[k];
          const Amplitude a1 = a[k + stride];
          a[k] = (a0 + a1) * kInvSqrt2;
          a[k + stride] = (a0 - a1) * kInvSqrt2;
        }
      }
      return;
    }
    case GateKind::RX: {
      const double c = std::cos(gate.angle / 2), s = std::sin(gate.angle / 2);
      const Amplitude u[4] = {c, {0, -s}, {0, -s}, c};
      apply_single(q0, u);
      return;
    }
    case GateKind::RY: {
      const double c = std::cos(gate.angle / 2), s = std::sin(gate.angle / 2);
      const std::size_t stride = m0;
      for (std::size_t block = 0; block < dim; block += 2 * stride) {
        for (std::size_t k = block; k < block + stride; ++k) {
          const Amplitude a0 = a[k];
          const Amplitude a1 = a[k + stride];
          a[k] = c * a0 - s * a1;
          a[k + stride] = s * a0 + c * a1;
        }
      }
      return;
    }
    case GateKind::RZ: {
      const Amplitude p0 = std::polar(1.0, -gate.angle / 2);
      const Amplitude p1 = std::conj(p0);
      for (std::size_t i = 0; i < dim; ++i) a[i] *= (i & m0) ? p1 : p0;
      return;
    }
    case GateKind::CZ: {
      const std::uint64_t both = m0 | (std::uint64_t{1} << (n_ - 1 - gate.wires[1]));
      for (std::size_t i = 0; i < dim; ++i) {
        if ((i & both) == both) a[i] = -a[i];
      }
      return;
    }
    case GateKind::CNOT: {
      const std::uint64_t mt = std::uint64_t{1} << (n_ - 1 - gate.wires[1]);
      for (std::size_t i = 0; i < dim; ++i) {
        if ((i & m0) && !(i & mt)) std::swap(a[i], a[i | mt]);
      }
      return;
    }
    case GateKind::ZZ: {
      const std::uint64_t m1 = std::uint64_t{1} << (n_ - 1 - gate.wires[1]);
      const Amplitude same = std::polar(1.0, -gate.angle / 2);
      const Amplitude diff = std::conj(same);
      for (std::size_t i = 0; i < dim; ++i) {
        const bool b0 = (i & m0) != 0;
        const bool b1 = (i & m1) != 0;
        a[i] *= (b0 == b1) ? same : diff;
      }
      return;
    }
  }
}

Statevector zero_state(int n_qubits) { return Statevector(n_qubits); }

Statevector apply_gate(Statevector state, const Gate& gate) {
  state.apply(gate);
  return state;
}

Statevector run_circuit(int n_qubits, std::span<const Gate> gates,
                        metrics::ExecutionCounter* counter) {
  Statevector state(n_qubits);
  for (const auto& g : gates) state.apply(g);
  if (counter) counter->add(1);
  return state;
}

bool Observable::is_diagonal() const {
  return std::all_of(paulis.begin(), paulis.end(),
                     [](const auto& kv) { return kv.second == Pauli::Z; });
}

namespace {

struct PauliMasks {
  std::uint64_t flip = 0;   // X or Y
  std::uint64_t phase = 0;  // Z or Y
  int n_y = 0;
};

PauliMasks masks_for(const Observable& obs, int n) {
  PauliMasks m;
  for (const auto& [q, p] : obs.paulis) {
    if (q < 0 || q >= n) {
      throw IndexError("observable qubit " + std::to_string(q) + " out of range for " +
                       std::to_string(n) + " qubits");
    }
    const std::uint64_t bit = std::uint64_t{1} << (n - 1 - q);
    if (p != Pauli::Z) m.flip |= bit;
    if (p != Pauli::X) m.phase |= bit;
    if (p == Pauli::Y) ++m.n_y;
  }
  return m;
}

}  // namespace

double expectation(const Statevector& state, const Observable& obs) {
  const PauliMasks m = masks_for(obs, state.n_qubits());
  const auto amps = state.amplitudes();
  const std::size_t dim = amps.size();

  if (m.flip == 0) {
    double acc = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
      const double p = std::norm(amps[i]);
      acc += parity(i & m.phase) ? -p : p;
    }
    return obs.coefficient * acc;
  }

  // <psi|P|psi> = sum_i conj(a[i ^ flip]) * i^n_y * (-1)^popcount(i & phase) * a[i]
  Amplitude acc{0.0, 0.0};
  for (std::size_t i = 0; i < dim; ++i) {
    const Amplitude term = std::conj(amps[i ^ m.flip]) * amps[i];
    acc += parity(i & m.phase) ? -term : term;
  }
  static constexpr Amplitude kIPow[4] = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
  return obs.coefficient * (acc * kIPow[m.n_y % 4]).real();
}

double sample_expectation(const Statevector& state, const Observable& obs, std::uint64_t shots,
                          Rng& rng) {
  if (shots == 0) throw ArgumentError("shots must be positive");
  const int n = state.n_qubits();
  const PauliMasks m = masks_for(obs, n);
  if (obs.paulis.empty()) return obs.coefficient;

  // Rotate into the eigenbasis: X -> H, Y -> S^dagger then H.
  Statevector rotated = state;
  for (const auto& [q, p] : obs.paulis) {
    if (p == Pauli::Y) rotated.apply(Gate::rz(q, -M_PI / 2));
    if (p != Pauli::Z) rotated.apply(Gate::h(q));
  }
  const std::uint64_t measured = m.flip | m.phase;

  const auto amps = rotated.amplitudes();
  std::vector<double> cdf(amps.size());
  double acc = 0.0;
  std::size_t last_nonzero = 0;
  for (std::size_t i = 0; i < amps.size(); ++i) {
    const double p = std::norm(amps[i]);
    if (p > 0.0) last_nonzero = i;
    acc += p;
    cdf[i] = acc;
  }

  std::int64_t sum = 0;
  for (std::uint64_t s = 0; s < shots; ++s) {
    const double u = rng.uniform() * acc;
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    std::size_t idx = static_cast<std::size_t>(it - cdf.begin());
    if (idx > last_nonzero) idx = last_nonzero;
    sum += parity(idx & measured) ? -1 : 1;
  }
  return obs.coefficient * static_cast<double>(sum) / static_cast<double>(shots);
}

double Estimator::operator()(const Statevector& state, const Observable& obs) const {
  if (shots == 0) return expectation(state, obs);
  if (!rng) throw ArgumentError("finite-shot estimation requires a random source");
  return sample_expectation(state, obs, shots, *rng);
}

std::vector<double> expectations(const Statevector& state, std::span<const Observable> obs,
                                 const Estimator& estimator) {
  std::vector<double> out;
  out.reserve(obs.size());
  for (const auto& o : obs) out.push_back(estimator(state, o));
  return out;
}

std::size_t parameter_occurrences(std::span<const Gate> gates) noexcept {
  return static_cast<std::size_t>(
      std::count_if(gates.begin(), gates.end(), [](const Gate& g) { return g.param.has_value(); }));
}

Jacobian parameter_shift_gradient(int n_qubits, std::span<const Gate> gates, std::size_t n_params,
                                  std::span<const Observable> observables,
                                  metrics::ExecutionCounter* counter,
                                  const Estimator& estimator) {
  check_qubit_count(n_qubits);
  for (const auto& g : gates) {
    validate_gate(g, n_qubits);
    if (!g.param) continue;
    if (!is_rotation(g.kind)) {
      throw UnsupportedBindingError(std::string("parameter bound to non-rotation gate ") +
                                    gate_name(g.kind));
    }
    if (g.param->index >= n_params) {
      throw IndexError("parameter index " + std::to_string(g.param->index) + " >= " +
                       std::to_string(n_params));
    }
  }
  for (const auto& o : observables) masks_for(o, n_qubits);

  Jacobian jac(observables.size(), n_params);
  Statevector prefix(n_qubits);
  Statevector work(n_qubits);

  auto run_shifted = [&](std::size_t at, double delta, std::vector<double>& out) {
    work = prefix;
    Gate shifted = gates[at];
    shifted.angle += delta;
    work.apply(shifted);
    for (std::size_t k = at + 1; k < gates.size(); ++k) work.apply(gates[k]);
    if (counter) counter->add(1);
    for (std::size_t r = 0; r < observables.size(); ++r) out[r] = estimator(work, observables[r]);
  };

  std::vector<double> plus(observables.size()), minus(observables.size());
  for (std::size_t g = 0; g < gates.size(); ++g) {
    if (const auto& ref = gates[g].param) {
      run_shifted(g, kShift, plus);
      run_shifted(g, -kShift, minus);
      for (std::size_t r = 0; r < observables.size(); ++r) {
        jac(r, ref->index) += ref->multiplier * 0.5 * (plus[r] - minus[r]);
      }
    }
    prefix.apply(gates[g]);
  }
  return jac;
}

Jacobian parameter_shift_gradient(int n_qubits, const CircuitBuilder& builder,
                                  std::span<const double> params,
                                  std::span<const Observable> observables,
                                  metrics::ExecutionCounter* counter,
                                  const Estimator& estimator) {
  const std::vector<Gate> gates = builder(params);
  return parameter_shift_gradient(n_qubits, gates, params.size(), observables, counter, estimator);
}

}  // namespace qrlforge::qsim

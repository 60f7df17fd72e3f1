#include "qednet/qsim.hpp"

#include <cmath>
#include <string>

namespace qednet::qsim {

namespace {

constexpr double kHalfPi = 3.1415926535897932385 / 2.0;

void check_qubit(int q, int n_qubits) {
  require(q >= 0 && q < n_qubits, "qubit index out of range");
}

}  // namespace

StateVector StateVector::zero_state(int n_qubits) {
  require(n_qubits >= 1 && n_qubits <= kMaxQubits,
          "n_qubits must be in [1, 4]");
  StateVector s;
  s.n_qubits = n_qubits;
  s.amps[0] = 1.0;
  return s;
}

double StateVector::norm_sq() const {
  double t = 0.0;
  for (std::size_t b = 0; b < size(); ++b) t += std::norm(amps[b]);
  return t;
}

void Circuit::validate() const {
  require(n_qubits >= 1 && n_qubits <= kMaxQubits,
          "n_qubits must be in [1, 4]");
  require(n_params >= 0, "n_params must be non-negative");
  for (const Gate& g : gates) {
    const int arity = gate_arity(g.kind);
    for (int i = 0; i < arity; ++i) {
      check_qubit(g.targets[i], n_qubits);
      for (int j = i + 1; j < arity; ++j) {
        require(g.targets[i] != g.targets[j], "gate targets must be distinct");
      }
    }
    if (gate_has_param(g.kind)) {
      require(g.param_slot >= 0 && g.param_slot < n_params,
              "param_slot out of range");
    } else {
      require(g.param_slot < 0, "NOT/Toffoli take no parameter");
    }
  }
  for (std::size_t i = 0; i < readout.size(); ++i) {
    check_qubit(readout[i], n_qubits);
    for (std::size_t j = i + 1; j < readout.size(); ++j) {
      require(readout[i] != readout[j], "readout qubits must be distinct");
    }
  }
}

GateMatrix gate_matrix(GateKind kind, double theta) {
  require(std::isfinite(theta), "gate angle must be finite");
  const double d = std::cos(theta / 2.0);
  const double g = std::sin(theta / 2.0);
  GateMatrix m;
  switch (kind) {
    case GateKind::RX:
      m.dim = 2;
      m.at(0, 0) = d;
      m.at(0, 1) = c64(0.0, -g);
      m.at(1, 0) = c64(0.0, -g);
      m.at(1, 1) = d;
      break;
    case GateKind::RY:
      m.dim = 2;
      m.at(0, 0) = d;
      m.at(0, 1) = -g;
      m.at(1, 0) = g;
      m.at(1, 1) = d;
      break;
    case GateKind::IsingXX:
      m.dim = 4;
      for (int i = 0; i < 4; ++i) {
        m.at(i, i) = d;
        m.at(i, 3 - i) = c64(0.0, -g);
      }
      break;
    case GateKind::NOT:
      m.dim = 2;
      m.at(0, 1) = 1.0;
      m.at(1, 0) = 1.0;
      break;
    case GateKind::Toffoli:
      // DIAG(I4, X, I2) in the (c1, c0, t) local basis.
      m.dim = 8;
      for (int i = 0; i < 8; ++i) {
        if (i == 4 || i == 5) continue;
        m.at(i, i) = 1.0;
      }
      m.at(4, 5) = 1.0;
      m.at(5, 4) = 1.0;
      break;
  }
  return m;
}

void apply_rx(StateVector& s, int q, double theta) {
  check_qubit(q, s.n_qubits);
  const double d = std::cos(theta / 2.0);
  const double g = std::sin(theta / 2.0);
  const std::size_t bit = std::size_t(1) << q;
  const std::size_t n = s.size();
  for (std::size_t b = 0; b < n; ++b) {
    if (b & bit) continue;
    const c64 a0 = s.amps[b], a1 = s.amps[b | bit];
    s.amps[b] = d * a0 + c64(g * a1.imag(), -g * a1.real());   // d*a0 - i g*a1
    s.amps[b | bit] = c64(g * a0.imag(), -g * a0.real()) + d * a1;
  }
}

void apply_ry(StateVector& s, int q, double theta) {
  check_qubit(q, s.n_qubits);
  const double d = std::cos(theta / 2.0);
  const double g = std::sin(theta / 2.0);
  const std::size_t bit = std::size_t(1) << q;
  const std::size_t n = s.size();
  for (std::size_t b = 0; b < n; ++b) {
    if (b & bit) continue;
    const c64 a0 = s.amps[b], a1 = s.amps[b | bit];
    s.amps[b] = d * a0 - g * a1;
    s.amps[b | bit] = g * a0 + d * a1;
  }
}

void apply_ising_xx(StateVector& s, int qa, int qb, double theta) {
  check_qubit(qa, s.n_qubits);
  check_qubit(qb, s.n_qubits);
  require(qa != qb, "IsingXX targets must be distinct");
  const double d = std::cos(theta / 2.0);
  const double g = std::sin(theta / 2.0);
  // XX(theta) = d*I - i g*(X (x) X); X (x) X maps |b> to |b ^ mask>.
  const std::size_t mask = (std::size_t(1) << qa) | (std::size_t(1) << qb);
  const std::size_t n = s.size();
  for (std::size_t b = 0; b < n; ++b) {
    const std::size_t p = b ^ mask;
    if (b >= p) continue;
    const c64 a0 = s.amps[b], a1 = s.amps[p];
    s.amps[b] = d * a0 + c64(g * a1.imag(), -g * a1.real());
    s.amps[p] = d * a1 + c64(g * a0.imag(), -g * a0.real());
  }
}

void apply_not(StateVector& s, int q) {
  check_qubit(q, s.n_qubits);
  const std::size_t bit = std::size_t(1) << q;
  const std::size_t n = s.size();
  for (std::size_t b = 0; b < n; ++b) {
    if (b & bit) continue;
    std::swap(s.amps[b], s.amps[b | bit]);
  }
}

void apply_toffoli(StateVector& s, int c1, int c0, int t) {
  check_qubit(c1, s.n_qubits);
  check_qubit(c0, s.n_qubits);
  check_qubit(t, s.n_qubits);
  require(c1 != c0 && c1 != t && c0 != t, "Toffoli targets must be distinct");
  const std::size_t b1 = std::size_t(1) << c1;
  const std::size_t b0 = std::size_t(1) << c0;
  const std::size_t bt = std::size_t(1) << t;
  const std::size_t n = s.size();
  // Fires on control pattern (c1, c0) = (1, 0).
  for (std::size_t b = 0; b < n; ++b) {
    if ((b & b1) && !(b & b0) && !(b & bt)) {
      std::swap(s.amps[b], s.amps[b | bt]);
    }
  }
}

void apply_gate(StateVector& s, const Gate& g, std::span<const double> params) {
  double theta = 0.0;
  if (gate_has_param(g.kind)) {
    require(g.param_slot >= 0 &&
                g.param_slot < static_cast<int>(params.size()),
            "param_slot out of range for the supplied parameter vector");
    theta = params[static_cast<std::size_t>(g.param_slot)];
  }
  switch (g.kind) {
    case GateKind::RX:
      apply_rx(s, g.targets[0], theta);
      break;
    case GateKind::RY:
      apply_ry(s, g.targets[0], theta);
      break;
    case GateKind::IsingXX:
      apply_ising_xx(s, g.targets[0], g.targets[1], theta);
      break;
    case GateKind::NOT:
      apply_not(s, g.targets[0]);
      break;
    case GateKind::Toffoli:
      apply_toffoli(s, g.targets[0], g.targets[1], g.targets[2]);
      break;
  }
}

namespace {

// One angle may be offset during a run: either a single gate occurrence
// (by position in the gate list) or a single encoding rotation.
struct Shift {
  int gate_index = -1;  // offset gates[gate_index]'s angle
  int enc_qubit = -1;   // offset the encoding RY on this qubit
  double delta = 0.0;
};

StateVector run_shifted(const Circuit& c, std::span<const double> params,
                        std::span<const double> input_angles,
                        const Shift& shift) {
  StateVector s = StateVector::zero_state(c.n_qubits);
  for (int q = 0; q < c.n_qubits; ++q) {
    double a = input_angles[static_cast<std::size_t>(q)];
    if (q == shift.enc_qubit) a += shift.delta;
    apply_ry(s, q, a);
  }
  for (std::size_t i = 0; i < c.gates.size(); ++i) {
    const Gate& g = c.gates[i];
    if (static_cast<int>(i) == shift.gate_index && gate_has_param(g.kind)) {
      const double theta =
          params[static_cast<std::size_t>(g.param_slot)] + shift.delta;
      switch (g.kind) {
        case GateKind::RX:
          apply_rx(s, g.targets[0], theta);
          break;
        case GateKind::RY:
          apply_ry(s, g.targets[0], theta);
          break;
        default:
          apply_ising_xx(s, g.targets[0], g.targets[1], theta);
          break;
      }
    } else {
      apply_gate(s, g, params);
    }
  }
  return s;
}

}  // namespace

StateVector run_circuit(const Circuit& c, std::span<const double> params,
                        std::span<const double> input_angles) {
  require(static_cast<int>(params.size()) == c.n_params,
          "parameter vector length must equal n_params");
  require(static_cast<int>(input_angles.size()) == c.n_qubits,
          "one input angle per qubit required");
  for (double a : input_angles) require(std::isfinite(a), "angle not finite");
  for (double p : params) require(std::isfinite(p), "parameter not finite");
  return run_shifted(c, params, input_angles, Shift{});
}

double expect_z(const StateVector& s, int qubit) {
  check_qubit(qubit, s.n_qubits);
  const std::size_t bit = std::size_t(1) << qubit;
  double z = 0.0;
  for (std::size_t b = 0; b < s.size(); ++b) {
    const double p = std::norm(s.amps[b]);
    z += (b & bit) ? -p : p;
  }
  return z;
}

double readout_objective(const StateVector& s, std::span<const int> readout,
                         std::span<const double> weights) {
  require(readout.size() == weights.size(),
          "one weight per readout qubit required");
  double f = 0.0;
  for (std::size_t k = 0; k < readout.size(); ++k) {
    f += weights[k] * expect_z(s, readout[k]);
  }
  return f;
}

void param_shift_grad(const Circuit& c, std::span<const double> params,
                      std::span<const double> input_angles,
                      std::span<const double> readout_weights,
                      std::span<double> grad_params,
                      std::span<double> grad_input_angles) {
  require(static_cast<int>(params.size()) == c.n_params,
          "parameter vector length must equal n_params");
  require(static_cast<int>(input_angles.size()) == c.n_qubits,
          "one input angle per qubit required");
  require(grad_params.size() == params.size(), "grad_params size mismatch");
  require(grad_input_angles.empty() ||
              grad_input_angles.size() == input_angles.size(),
          "grad_input_angles size mismatch");
  require(readout_weights.size() == c.readout.size(),
          "one weight per readout qubit required");

  auto objective = [&](const Shift& shift) {
    const StateVector s = run_shifted(c, params, input_angles, shift);
    return readout_objective(s, c.readout, readout_weights);
  };

  for (auto& g : grad_params) g = 0.0;
  for (std::size_t i = 0; i < c.gates.size(); ++i) {
    if (!gate_has_param(c.gates[i].kind)) continue;
    const double plus = objective({static_cast<int>(i), -1, kHalfPi});
    const double minus = objective({static_cast<int>(i), -1, -kHalfPi});
    grad_params[static_cast<std::size_t>(c.gates[i].param_slot)] +=
        0.5 * (plus - minus);
  }
  if (grad_input_angles.empty()) return;  // encoding gradients not requested
  for (int q = 0; q < c.n_qubits; ++q) {
    const double plus = objective({-1, q, kHalfPi});
    const double minus = objective({-1, q, -kHalfPi});
    grad_input_angles[static_cast<std::size_t>(q)] = 0.5 * (plus - minus);
  }
}

}  // namespace qednet::qsim

#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include "qednet/tensor.hpp"

// Exact statevector simulation for registers of up to four qubits.
//
// Qubit ordering is little-endian: qubit q is bit q of the basis index, so
// |q3 q2 q1 q0> = |b> with b = q3*8 + q2*4 + q1*2 + q0. Multi-qubit gate
// matrices use the gate-local convention that targets[0] is the MOST
// significant bit of the local basis index; for the Toffoli with targets
// (c1, c0, t) this makes the unitary DIAG(I4, X, I2): it flips the target
// exactly when the first control reads 1 and the second control reads 0.
namespace qednet::qsim {

using c64 = std::complex<double>;

inline constexpr int kMaxQubits = 4;

enum class GateKind { RX, RY, IsingXX, NOT, Toffoli };

inline constexpr int gate_arity(GateKind k) {
  switch (k) {
    case GateKind::RX:
    case GateKind::RY:
    case GateKind::NOT:
      return 1;
    case GateKind::IsingXX:
      return 2;
    case GateKind::Toffoli:
      return 3;
  }
  return 0;
}

inline constexpr bool gate_has_param(GateKind k) {
  return k == GateKind::RX || k == GateKind::RY || k == GateKind::IsingXX;
}

struct Gate {
  GateKind kind;
  std::array<int, 3> targets{-1, -1, -1};  // first gate_arity(kind) entries
  int param_slot = -1;                     // index into the parameter vector
};

struct StateVector {
  int n_qubits = 1;
  std::array<c64, 1 << kMaxQubits> amps{};

  static StateVector zero_state(int n_qubits);

  std::size_t size() const { return std::size_t(1) << n_qubits; }
  double norm_sq() const;
};

struct Circuit {
  int n_qubits = 1;
  std::vector<Gate> gates;
  int n_params = 0;
  std::vector<int> readout;  // qubits measured with Pauli-Z at the end

  // Throws std::invalid_argument on any structural violation (targets out of
  // range or duplicated, parameter slots out of range, bad readout list).
  void validate() const;
};

// Dense unitary of one gate in the gate-local basis (2x2, 4x4 or 8x8).
struct GateMatrix {
  int dim = 0;
  std::array<c64, 64> a{};  // row-major

  c64& at(int r, int c) { return a[static_cast<std::size_t>(r) * dim + c]; }
  c64 at(int r, int c) const {
    return a[static_cast<std::size_t>(r) * dim + c];
  }
};

// The closed-form unitary of a gate kind; theta is ignored for NOT/Toffoli.
GateMatrix gate_matrix(GateKind kind, double theta = 0.0);

// In-place stride walk over amplitude pairs; never materializes the
// 2^n x 2^n register unitary.
void apply_gate(StateVector& state, const Gate& gate,
                std::span<const double> params);

// Convenience single-gate entry points used by the circuit builders.
void apply_rx(StateVector& state, int qubit, double theta);
void apply_ry(StateVector& state, int qubit, double theta);
void apply_ising_xx(StateVector& state, int qubit_a, int qubit_b,
                    double theta);
void apply_not(StateVector& state, int qubit);
void apply_toffoli(StateVector& state, int control1, int control0,
                   int target);

// Starts from |0...0>, applies one encoding RY(input_angles[q]) per qubit,
// then every gate in order.
StateVector run_circuit(const Circuit& circuit, std::span<const double> params,
                        std::span<const double> input_angles);

// <Z_qubit> = sum_b |amp_b|^2 * (+1 if bit(b, qubit) == 0 else -1).
double expect_z(const StateVector& state, int qubit);

// Scalar objective sum_k weights[k] * <Z_readout[k]>.
double readout_objective(const StateVector& state,
                         std::span<const int> readout,
                         std::span<const double> weights);

// Parameter-shift gradient of the readout objective with respect to all
// circuit parameters and all encoding angles. Exact for gates of the form
// exp(-i theta G / 2) with G^2 = I, which covers RX, RY, IsingXX and the
// encoding RYs. A parameter feeding several gates accumulates one shift
// term per occurrence. Passing an empty grad_input_angles span skips the
// encoding-angle gradients (and their circuit evaluations).
void param_shift_grad(const Circuit& circuit, std::span<const double> params,
                      std::span<const double> input_angles,
                      std::span<const double> readout_weights,
                      std::span<double> grad_params,
                      std::span<double> grad_input_angles);

// Classical embedding: x in [0,1] enters as an RY(pi*x) rotation, and a
// Pauli-Z expectation leaves as (1 - <Z>)/2 in [0,1]. Inputs outside [0,1]
// are clamped before encoding.
inline double encode_angle(double x) {
  const double t = x < 0.0 ? 0.0 : (x > 1.0 ? 1.0 : x);
  return 3.1415926535897932385 * t;
}

inline double decode_z(double z) { return 0.5 * (1.0 - z); }

// d(encode_angle)/dx; 0 outside [0,1] (clamped region), pi inside. The
// closed interval counts as inside so boundary inputs keep a subgradient.
inline double encode_angle_derivative(double x) {
  return (x < 0.0 || x > 1.0) ? 0.0 : 3.1415926535897932385;
}

}  // namespace qednet::qsim

#include "qednet/qsim.hpp"

#include <cmath>
#include <numbers>

#include "doctest.h"
#include "oracles.hpp"
#include "qednet/rng.hpp"

using namespace qednet;
using namespace qednet::qsim;
using oracles::rel_err;

namespace {

constexpr double kPi = std::numbers::pi;

Circuit random_circuit(Rng& rng, int n_qubits, int n_gates) {
  Circuit c;
  c.n_qubits = n_qubits;
  c.n_params = 0;
  for (int i = 0; i < n_gates; ++i) {
    Gate g;
    const int pick = static_cast<int>(rng.uniform_int(5));
    g.kind = static_cast<GateKind>(pick);
    const int arity = gate_arity(g.kind);
    if (arity > n_qubits) {
      g.kind = GateKind::RY;
    }
    std::vector<int> qubits;
    for (int q = 0; q < n_qubits; ++q) qubits.push_back(q);
    rng.shuffle(qubits);
    for (int t = 0; t < gate_arity(g.kind); ++t) g.targets[t] = qubits[t];
    if (gate_has_param(g.kind)) g.param_slot = c.n_params++;
    c.gates.push_back(g);
  }
  for (int q = 0; q < n_qubits; ++q) c.readout.push_back(q);
  c.validate();
  return c;
}

std::vector<double> random_angles(Rng& rng, int n, double lo = -2 * kPi,
                                  double hi = 2 * kPi) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(lo, hi);
  return v;
}

}  // namespace

TEST_CASE("gate_matrix closed forms") {
  // RY(0) is the identity.
  auto id = gate_matrix(GateKind::RY, 0.0);
  CHECK(id.at(0, 0).real() == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(std::abs(id.at(0, 1)) == doctest::Approx(0.0).epsilon(1e-15));

  // RY(pi) = [[0, -1], [1, 0]].
  auto ry_pi = gate_matrix(GateKind::RY, kPi);
  CHECK(std::abs(ry_pi.at(0, 0)) < 1e-12);
  CHECK(std::abs(ry_pi.at(0, 1) - c64(-1.0, 0.0)) < 1e-12);
  CHECK(std::abs(ry_pi.at(1, 0) - c64(1.0, 0.0)) < 1e-12);
  CHECK(std::abs(ry_pi.at(1, 1)) < 1e-12);

  // IsingXX(pi): zero diagonal, -i anti-diagonal.
  auto xx_pi = gate_matrix(GateKind::IsingXX, kPi);
  for (int i = 0; i < 4; ++i) {
    CHECK(std::abs(xx_pi.at(i, i)) < 1e-12);
    CHECK(std::abs(xx_pi.at(i, 3 - i) - c64(0.0, -1.0)) < 1e-12);
  }

  // Toffoli swaps |100> and |101> in the (c1, c0, t) ordering only.
  auto tof = gate_matrix(GateKind::Toffoli);
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < 8; ++j) {
      const bool expect_one = (i == j && i != 4 && i != 5) ||
                              (i == 4 && j == 5) || (i == 5 && j == 4);
      CHECK(std::abs(tof.at(i, j) - (expect_one ? 1.0 : 0.0)) < 1e-15);
    }
  }
}

TEST_CASE("gate matrices are unitary at random angles") {
  Rng rng(20240601);
  const GateKind kinds[] = {GateKind::RX, GateKind::RY, GateKind::IsingXX,
                            GateKind::NOT, GateKind::Toffoli};
  for (int trial = 0; trial < 1000; ++trial) {
    for (GateKind k : kinds) {
      const double theta = rng.uniform(-2 * kPi, 2 * kPi);
      const GateMatrix m = gate_matrix(k, theta);
      // Frobenius norm of U^dagger U - I.
      double frob = 0.0;
      for (int r = 0; r < m.dim; ++r) {
        for (int c = 0; c < m.dim; ++c) {
          c64 acc(0.0, 0.0);
          for (int i = 0; i < m.dim; ++i) {
            acc += std::conj(m.at(i, r)) * m.at(i, c);
          }
          if (r == c) acc -= 1.0;
          frob += std::norm(acc);
        }
      }
      CHECK(std::sqrt(frob) < 1e-12);
    }
  }
}

TEST_CASE("RY composition: angles add") {
  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const double t1 = rng.uniform(-2 * kPi, 2 * kPi);
    const double t2 = rng.uniform(-2 * kPi, 2 * kPi);
    const auto a = gate_matrix(GateKind::RY, t1);
    const auto b = gate_matrix(GateKind::RY, t2);
    const auto ab = gate_matrix(GateKind::RY, t1 + t2);
    for (int r = 0; r < 2; ++r) {
      for (int c = 0; c < 2; ++c) {
        c64 acc(0.0, 0.0);
        for (int k = 0; k < 2; ++k) acc += a.at(r, k) * b.at(k, c);
        CHECK(std::abs(acc - ab.at(r, c)) < 1e-12);
      }
    }
  }
}

TEST_CASE("apply_gate basics") {
  // RY(pi) on qubit 0 of |0> gives |1> with +1 amplitude.
  auto s = StateVector::zero_state(1);
  apply_ry(s, 0, kPi);
  CHECK(std::abs(s.amps[0]) < 1e-12);
  CHECK(std::abs(s.amps[1] - c64(1.0, 0.0)) < 1e-12);

  // Toffoli(c1=q2, c0=q1, t=q0): |c1=1,c0=0,t=0> -> |c1=1,c0=0,t=1>.
  auto t = StateVector::zero_state(3);
  t.amps[0] = 0.0;
  t.amps[0b100] = 1.0;  // q2=1, q1=0, q0=0
  apply_toffoli(t, 2, 1, 0);
  CHECK(std::abs(t.amps[0b100]) < 1e-15);
  CHECK(std::abs(t.amps[0b101] - c64(1.0, 0.0)) < 1e-15);

  // IsingXX(0) leaves any 2-qubit state unchanged.
  auto u = StateVector::zero_state(2);
  apply_ry(u, 0, 0.7);
  apply_ry(u, 1, -1.3);
  auto before = u.amps;
  apply_ising_xx(u, 0, 1, 0.0);
  for (int b = 0; b < 4; ++b) CHECK(std::abs(u.amps[b] - before[b]) < 1e-15);

  // Out-of-range target is a contract violation.
  auto v = StateVector::zero_state(2);
  CHECK_THROWS_AS(apply_ry(v, 2, 0.1), std::invalid_argument);
}

TEST_CASE("stride walk equals dense embedding on all basis states") {
  Rng rng(99);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform_int(4));
    Circuit c = random_circuit(rng, n, 1);
    const Gate& g = c.gates[0];
    std::vector<double> params(static_cast<std::size_t>(c.n_params));
    for (auto& p : params) p = rng.uniform(-2 * kPi, 2 * kPi);

    const auto dense = oracles::gate_full_matrix(g, params, n);
    const std::size_t dim = std::size_t(1) << n;
    for (std::size_t b = 0; b < dim; ++b) {
      StateVector s = StateVector::zero_state(n);
      s.amps[0] = 0.0;
      s.amps[b] = 1.0;
      apply_gate(s, g, params);

      std::vector<c64> x(dim, c64(0.0, 0.0));
      x[b] = 1.0;
      const auto y = oracles::apply_dense(dense, x);
      for (std::size_t i = 0; i < dim; ++i) {
        CHECK(std::abs(s.amps[i] - y[i]) < 1e-12);
      }
    }
  }
}

TEST_CASE("norm preserved by random circuits") {
  Rng rng(4242);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform_int(4));
    const int len = 1 + static_cast<int>(rng.uniform_int(50));
    Circuit c = random_circuit(rng, n, len);
    const auto params = random_angles(rng, c.n_params);
    const auto angles = random_angles(rng, n, 0.0, kPi);
    const StateVector s = run_circuit(c, params, angles);
    CHECK(std::fabs(s.norm_sq() - 1.0) < 1e-12);
  }
}

TEST_CASE("run_circuit composes encoding then gates") {
  // Empty gate list, zero angles: |0...0>.
  Circuit c;
  c.n_qubits = 3;
  const std::vector<double> no_params;
  const StateVector s0 = run_circuit(c, no_params, std::vector<double>(3, 0.0));
  CHECK(std::abs(s0.amps[0] - c64(1.0, 0.0)) < 1e-15);

  // Empty gate list, angles (pi, 0) on 2 qubits: |q1=0, q0=1>.
  Circuit c2;
  c2.n_qubits = 2;
  const StateVector s1 =
      run_circuit(c2, no_params, std::vector<double>{kPi, 0.0});
  CHECK(std::abs(s1.amps[0b01] - c64(1.0, 0.0)) < 1e-12);

  // Length mismatches are contract violations.
  CHECK_THROWS_AS(run_circuit(c2, no_params, std::vector<double>{0.0}),
                  std::invalid_argument);
  CHECK_THROWS_AS(run_circuit(c2, std::vector<double>{1.0},
                              std::vector<double>{0.0, 0.0}),
                  std::invalid_argument);
}

TEST_CASE("run_circuit equals dense product oracle") {
  Rng rng(31337);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 2 + static_cast<int>(rng.uniform_int(3));
    Circuit c = random_circuit(rng, n, 12);
    const auto params = random_angles(rng, c.n_params);
    const auto angles = random_angles(rng, n, 0.0, kPi);

    const StateVector got = run_circuit(c, params, angles);
    const auto u = oracles::circuit_full_unitary(c, params, angles);
    std::vector<c64> x(std::size_t(1) << n, c64(0.0, 0.0));
    x[0] = 1.0;
    const auto want = oracles::apply_dense(u, x);
    for (std::size_t b = 0; b < want.size(); ++b) {
      CHECK(std::abs(got.amps[b] - want[b]) < 1e-12);
    }
  }
}

TEST_CASE("expect_z") {
  auto s = StateVector::zero_state(1);
  CHECK(expect_z(s, 0) == doctest::Approx(1.0).epsilon(1e-15));
  apply_not(s, 0);
  CHECK(expect_z(s, 0) == doctest::Approx(-1.0).epsilon(1e-15));

  auto h = StateVector::zero_state(1);
  apply_ry(h, 0, kPi / 2.0);
  CHECK(std::fabs(expect_z(h, 0)) < 1e-12);
}

TEST_CASE("parameter shift on a single RY matches cos derivative") {
  Circuit c;
  c.n_qubits = 1;
  c.n_params = 1;
  c.gates.push_back(Gate{GateKind::RY, {0, -1, -1}, 0});
  c.readout = {0};
  c.validate();

  const std::vector<double> w{1.0};
  const std::vector<double> zero_angle{0.0};
  std::vector<double> gp(1), ga(1);

  // theta = 0: d cos(theta)/d theta = 0.
  param_shift_grad(c, std::vector<double>{0.0}, zero_angle, w, gp, ga);
  CHECK(std::fabs(gp[0]) < 1e-12);

  // theta = pi/2: derivative -1.
  param_shift_grad(c, std::vector<double>{kPi / 2.0}, zero_angle, w, gp, ga);
  CHECK(gp[0] == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("parameter shift matches central finite differences") {
  Rng rng(555);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + static_cast<int>(rng.uniform_int(3));
    Circuit c = random_circuit(rng, n, 10);
    auto params = random_angles(rng, c.n_params, -kPi, kPi);
    auto angles = random_angles(rng, n, 0.1, kPi - 0.1);
    std::vector<double> w(c.readout.size());
    for (auto& x : w) x = rng.uniform(-1.0, 1.0);

    std::vector<double> gp(params.size()), ga(angles.size());
    param_shift_grad(c, params, angles, w, gp, ga);

    auto objective = [&](const std::vector<double>& p,
                         const std::vector<double>& a) {
      return readout_objective(run_circuit(c, p, a), c.readout, w);
    };
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double fd = oracles::central_diff(
          [&](double x) {
            auto p = params;
            p[i] = x;
            return objective(p, angles);
          },
          params[i]);
      CHECK(rel_err(gp[i], fd) < 1e-4);
    }
    for (std::size_t q = 0; q < angles.size(); ++q) {
      const double fd = oracles::central_diff(
          [&](double x) {
            auto a = angles;
            a[q] = x;
            return objective(params, a);
          },
          angles[q]);
      CHECK(rel_err(ga[q], fd) < 1e-4);
    }
  }
}

TEST_CASE("shared parameter slots accumulate per occurrence") {
  // Two RY gates driven by one slot: f = <Z> of RY(2*theta)|0> = cos(2 theta).
  Circuit c;
  c.n_qubits = 1;
  c.n_params = 1;
  c.gates.push_back(Gate{GateKind::RY, {0, -1, -1}, 0});
  c.gates.push_back(Gate{GateKind::RY, {0, -1, -1}, 0});
  c.readout = {0};
  c.validate();

  const double theta = 0.37;
  std::vector<double> gp(1), ga(1);
  param_shift_grad(c, std::vector<double>{theta}, std::vector<double>{0.0},
                   std::vector<double>{1.0}, gp, ga);
  CHECK(gp[0] == doctest::Approx(-2.0 * std::sin(2.0 * theta)).epsilon(1e-10));
}

TEST_CASE("encode/decode") {
  CHECK(encode_angle(0.0) == doctest::Approx(0.0));
  CHECK(encode_angle(1.0) == doctest::Approx(kPi));
  CHECK(decode_z(1.0) == doctest::Approx(0.0));
  CHECK(decode_z(-1.0) == doctest::Approx(1.0));
  CHECK(decode_z(0.0) == doctest::Approx(0.5));
  // Clamping outside [0, 1].
  CHECK(encode_angle(-0.5) == doctest::Approx(0.0));
  CHECK(encode_angle(1.5) == doctest::Approx(kPi));

  // decode(expect_z(RY(encode(x))|0>)) == sin^2(pi x / 2).
  Rng rng(11);
  for (int i = 0; i < 50; ++i) {
    const double x = rng.uniform();
    auto s = StateVector::zero_state(1);
    apply_ry(s, 0, encode_angle(x));
    const double y = decode_z(expect_z(s, 0));
    const double want = std::pow(std::sin(kPi * x / 2.0), 2);
    CHECK(y == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("circuit validation rejects malformed programs") {
  Circuit c;
  c.n_qubits = 2;
  c.n_params = 1;
  c.gates.push_back(Gate{GateKind::IsingXX, {0, 0, -1}, 0});
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);

  c.gates[0].targets = {0, 1, -1};
  c.gates[0].param_slot = 3;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);

  c.gates[0].param_slot = 0;
  c.readout = {0, 0};
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);

  c.readout = {0, 1};
  CHECK_NOTHROW(c.validate());
}

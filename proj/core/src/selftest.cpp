#include "qednet/selftest.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "qednet/circuits.hpp"
#include "qednet/data.hpp"
#include "qednet/indices.hpp"
#include "qednet/metrics.hpp"
#include "qednet/model.hpp"
#include "qednet/qsim.hpp"
#include "qednet/rng.hpp"
#include "qednet/train.hpp"

namespace qednet::selftest {

namespace {

constexpr double kPi = 3.1415926535897932385;

struct Runner {
  std::ostream& out;
  int failures = 0;

  void check(const std::string& name, const std::function<bool()>& fn) {
    bool ok = false;
    std::string detail;
    try {
      ok = fn();
    } catch (const std::exception& e) {
      detail = e.what();
    }
    out << (ok ? "ok   " : "FAIL ") << name;
    if (!ok && !detail.empty()) out << " (" << detail << ")";
    out << "\n";
    if (!ok) ++failures;
  }
};

bool gates_unitary() {
  Rng rng(1);
  using qsim::GateKind;
  const GateKind kinds[] = {GateKind::RX, GateKind::RY, GateKind::IsingXX,
                            GateKind::NOT, GateKind::Toffoli};
  for (int trial = 0; trial < 200; ++trial) {
    for (auto k : kinds) {
      const auto m = qsim::gate_matrix(k, rng.uniform(-2 * kPi, 2 * kPi));
      double frob = 0.0;
      for (int r = 0; r < m.dim; ++r) {
        for (int c = 0; c < m.dim; ++c) {
          std::complex<double> acc(0.0, 0.0);
          for (int i = 0; i < m.dim; ++i) {
            acc += std::conj(m.at(i, r)) * m.at(i, c);
          }
          if (r == c) acc -= 1.0;
          frob += std::norm(acc);
        }
      }
      if (std::sqrt(frob) >= 1e-12) return false;
    }
  }
  return true;
}

bool norms_preserved() {
  Rng rng(2);
  std::vector<double> params(circuits::kSpectralGroupParams);
  for (int trial = 0; trial < 200; ++trial) {
    for (auto& p : params) p = rng.uniform(-kPi, kPi);
    std::vector<double> angles(4);
    for (auto& a : angles) a = rng.uniform(0.0, kPi);
    const auto s = qsim::run_circuit(circuits::spectral_encoder_circuit(),
                                     params, angles);
    if (std::fabs(s.norm_sq() - 1.0) >= 1e-12) return false;
  }
  return true;
}

bool gradients_match_fd() {
  Rng rng(3);
  const auto& circuit = circuits::qfm_circuit();
  std::vector<double> params(circuits::kQfmParams);
  for (int trial = 0; trial < 10; ++trial) {
    for (auto& p : params) p = rng.uniform(-kPi, kPi);
    std::vector<double> angles{rng.uniform(0.2, 2.9), rng.uniform(0.2, 2.9),
                               rng.uniform(0.2, 2.9)};
    const std::vector<double> w{rng.uniform(-1.0, 1.0)};
    std::vector<double> gp(params.size()), ga(angles.size());
    qsim::param_shift_grad(circuit, params, angles, w, gp, ga);

    auto objective = [&](const std::vector<double>& p) {
      return qsim::readout_objective(qsim::run_circuit(circuit, p, angles),
                                     circuit.readout, w);
    };
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto p_hi = params, p_lo = params;
      p_hi[i] += 1e-5;
      p_lo[i] -= 1e-5;
      const double fd = (objective(p_hi) - objective(p_lo)) / 2e-5;
      const double scale = std::max({std::fabs(fd), std::fabs(gp[i]), 1e-6});
      if (std::fabs(gp[i] - fd) / scale >= 1e-4) return false;
    }
  }
  return true;
}

bool outputs_in_range() {
  Rng rng(4);
  std::vector<double> spatial(circuits::kSpatialParams);
  std::vector<double> qfm_p(circuits::kQfmParams);
  for (int trial = 0; trial < 500; ++trial) {
    for (auto& p : spatial) p = rng.uniform(-kPi, kPi);
    for (auto& p : qfm_p) p = rng.uniform(-kPi, kPi);
    const std::vector<double> patch{rng.uniform(), rng.uniform(),
                                    rng.uniform(), rng.uniform()};
    const double s = circuits::spatial_encode(patch, spatial);
    if (s < 0.0 || s > 1.0) return false;
    const std::vector<double> in3{rng.uniform(), rng.uniform(), rng.uniform()};
    const double q = circuits::qfm(in3, qfm_p);
    if (q < 0.0 || q > 1.0) return false;
  }
  return true;
}

bool threshold_rule() {
  // Ramp 0.00..0.99: robust max 0.90, threshold 0.45, 54 pixels above.
  Map m(10, 10);
  for (int i = 0; i < 100; ++i) m.v[static_cast<std::size_t>(i)] = i / 100.0;
  const auto r = model::auto_threshold(m);
  if (std::fabs(r.threshold - 0.45) > 1e-12) return false;
  int ones = 0;
  for (auto b : r.map.v) ones += b;
  return ones == 54;
}

bool metric_formulas() {
  metrics::ConfusionMatrix cm;
  cm.counts[0][0] = 4;
  cm.counts[0][1] = 1;
  cm.counts[1][0] = 1;
  cm.counts[1][1] = 4;
  return std::fabs(metrics::oa_percent(cm) - 80.0) < 1e-9 &&
         std::fabs(metrics::kappa(cm) - 0.6) < 1e-12 &&
         std::fabs(metrics::aa_percent(cm) - 80.0) < 1e-9;
}

bool index_formulas() {
  data::Raster r;
  r.height = 1;
  r.width = 1;
  r.bands = 12;
  r.band_names = data::default_band_names();
  r.values.assign(12, 0.0f);
  auto set = [&](const char* name, float v) {
    for (int b = 0; b < 12; ++b) {
      if (r.band_names[static_cast<std::size_t>(b)] == name) {
        r.at(0, 0, b) = v;
      }
    }
  };
  // Exactly representable float values keep the expectations exact.
  set("NIR", 0.75f);
  set("Red", 0.25f);
  set("Green", 0.125f);
  set("SWIR1", 0.375f);
  set("SWIR2", 0.0625f);
  const double nd = indices::ndvi(r).map.at(0, 0);   // 0.5 / 1.0
  const double mv = indices::mvi(r).map.at(0, 0);    // 0.625 / 0.25
  return std::fabs(nd - 0.5) < 1e-12 && std::fabs(mv - 2.5) < 1e-12;
}

bool optimizer_steps() {
  if (std::fabs(train::cosine_lr(0, 200) - 1e-4) > 1e-18) return false;
  if (std::fabs(train::cosine_lr(200, 200)) > 1e-18) return false;
  if (std::fabs(train::cosine_lr(100, 200) - 5e-5) > 1e-18) return false;

  train::AdamwState st(1);
  std::vector<double> theta{1.0};
  // Decay-only step.
  train::adamw_step(st, theta, std::vector<double>{0.0}, 1e-4, {});
  return std::fabs(theta[0] - (1.0 - 1e-6)) < 1e-15;
}

bool container_round_trip() {
  const auto dir = std::filesystem::temp_directory_path() / "qednet_selftest";
  std::filesystem::create_directories(dir);
  data::SynthSpec spec;
  spec.seed = 5;
  spec.height = 8;
  spec.width = 8;
  const auto scene = data::synth_scene(spec);
  const auto rp = dir / "scene.mqr";
  const auto mp = dir / "scene.mqm";
  data::write_raster(rp, scene.raster);
  data::write_mask(mp, scene.mask);
  const auto r2 = data::read_raster(rp);
  const auto m2 = data::read_mask(mp);
  const bool ok = r2.values == scene.raster.values &&
                  m2.v == scene.mask.v &&
                  r2.band_names == scene.raster.band_names;
  std::filesystem::remove_all(dir);
  return ok;
}

}  // namespace

int run(std::ostream& out) {
  Runner r{out};
  r.check("gate unitarity", gates_unitary);
  r.check("statevector norm preservation", norms_preserved);
  r.check("parameter-shift vs finite differences", gradients_match_fd);
  r.check("module outputs stay in [0,1]", outputs_in_range);
  r.check("automatic threshold rule", threshold_rule);
  r.check("metric formulas", metric_formulas);
  r.check("index formulas", index_formulas);
  r.check("optimizer and schedule", optimizer_steps);
  r.check("container round trip", container_round_trip);
  out << (r.failures == 0 ? "selftest passed" : "selftest FAILED") << "\n";
  return r.failures;
}

}  // namespace qednet::selftest

#include "qednet/circuits.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "qednet/parallel.hpp"

namespace qednet::circuits {

using qsim::Circuit;
using qsim::Gate;
using qsim::GateKind;

namespace {

Gate rot(GateKind kind, int qubit, int slot) {
  return Gate{kind, {qubit, -1, -1}, slot};
}

Gate ising(int qa, int qb, int slot) {
  return Gate{GateKind::IsingXX, {qa, qb, -1}, slot};
}

Gate toffoli(int c1, int c0, int t) {
  return Gate{GateKind::Toffoli, {c1, c0, t}, -1};
}

Circuit build_spatial() {
  Circuit c;
  c.n_qubits = 4;
  c.n_params = kSpatialParams;
  int slot = 0;
  for (int q = 0; q < 4; ++q) c.gates.push_back(rot(GateKind::RY, q, slot++));
  for (int q = 0; q < 3; ++q) c.gates.push_back(ising(q, q + 1, slot++));
  for (int q = 0; q < 4; ++q) {
    c.gates.push_back(toffoli(q, (q + 1) % 4, (q + 2) % 4));
  }
  c.readout = {3};
  c.validate();
  return c;
}

Circuit build_spectral() {
  Circuit c;
  c.n_qubits = 4;
  c.n_params = kSpectralGroupParams;
  int slot = 0;
  for (int q = 0; q < 4; ++q) c.gates.push_back(rot(GateKind::RY, q, slot++));
  for (int q = 0; q < 4; ++q) c.gates.push_back(ising(q, (q + 1) % 4, slot++));
  for (int q = 0; q < 4; ++q) c.gates.push_back(rot(GateKind::RX, q, slot++));
  for (int q = 0; q < 4; ++q) c.gates.push_back(ising(q, (q + 1) % 4, slot++));
  for (int q = 0; q < 4; ++q) c.gates.push_back(rot(GateKind::RY, q, slot++));
  for (int q = 0; q < 4; ++q) {
    c.gates.push_back(toffoli(q, (q + 1) % 4, (q + 2) % 4));
  }
  c.readout = {0, 1, 2, 3};
  c.validate();
  return c;
}

Circuit build_qfm() {
  Circuit c;
  c.n_qubits = 3;
  c.n_params = kQfmParams;
  int slot = 0;
  for (int q = 0; q < 3; ++q) c.gates.push_back(rot(GateKind::RY, q, slot++));
  c.gates.push_back(ising(0, 1, slot++));
  c.gates.push_back(ising(1, 2, slot++));
  for (int q = 0; q < 3; ++q) c.gates.push_back(rot(GateKind::RX, q, slot++));
  c.gates.push_back(ising(2, 0, slot++));
  for (int q = 0; q < 3; ++q) c.gates.push_back(rot(GateKind::RY, q, slot++));
  for (int q = 0; q < 3; ++q) {
    c.gates.push_back(toffoli(q, (q + 1) % 3, (q + 2) % 3));
  }
  c.readout = {2};
  c.validate();
  return c;
}

void encode_inputs(std::span<const double> inputs01,
                   std::span<double> angles) {
  for (std::size_t i = 0; i < inputs01.size(); ++i) {
    angles[i] = qsim::encode_angle(inputs01[i]);
  }
}

std::span<const double> spatial_slice(std::span<const double> qnn) {
  return qnn.subspan(kSpatialOffset, kSpatialParams);
}

std::span<const double> spectral_slice(std::span<const double> qnn, int g) {
  return qnn.subspan(kSpectralOffset + g * kSpectralGroupParams,
                     kSpectralGroupParams);
}

std::span<const double> ffb_slice(std::span<const double> qnn) {
  return qnn.subspan(kFfbOffset, kFfbParams);
}

}  // namespace

const Circuit& spatial_encoder_circuit() {
  static const Circuit c = build_spatial();
  return c;
}

const Circuit& spectral_encoder_circuit() {
  static const Circuit c = build_spectral();
  return c;
}

const Circuit& qfm_circuit() {
  static const Circuit c = build_qfm();
  return c;
}

void circuit_vjp(const Circuit& circuit, std::span<const double> params,
                 std::span<const double> inputs01,
                 std::span<const double> out_grads,
                 std::span<double> grad_params,
                 std::span<double> grad_inputs) {
  require(static_cast<int>(inputs01.size()) == circuit.n_qubits,
          "one classical input per qubit required");
  require(out_grads.size() == circuit.readout.size(),
          "one upstream gradient per readout required");
  require(grad_params.size() == params.size(), "grad_params size mismatch");
  require(grad_inputs.empty() || grad_inputs.size() == inputs01.size(),
          "grad_inputs size mismatch");

  std::array<double, qsim::kMaxQubits> angles{};
  encode_inputs(inputs01, std::span<double>(angles.data(), inputs01.size()));

  // decoded = (1 - <Z>)/2, so d(decoded)/d<Z> = -1/2.
  std::array<double, qsim::kMaxQubits> weights{};
  for (std::size_t k = 0; k < out_grads.size(); ++k) {
    weights[k] = -0.5 * out_grads[k];
  }

  std::array<double, 64> gp{};
  std::array<double, qsim::kMaxQubits> ga{};
  qsim::param_shift_grad(
      circuit, params, std::span<const double>(angles.data(), inputs01.size()),
      std::span<const double>(weights.data(), out_grads.size()),
      std::span<double>(gp.data(), params.size()),
      grad_inputs.empty()
          ? std::span<double>()
          : std::span<double>(ga.data(), inputs01.size()));

  for (std::size_t i = 0; i < params.size(); ++i) grad_params[i] += gp[i];
  if (!grad_inputs.empty()) {
    for (std::size_t q = 0; q < inputs01.size(); ++q) {
      grad_inputs[q] += ga[q] * qsim::encode_angle_derivative(inputs01[q]);
    }
  }
}

double spatial_encode(std::span<const double> patch,
                      std::span<const double> params) {
  require(patch.size() == 4, "spatial encoder takes a 2x2 patch");
  require(params.size() == kSpatialParams, "spatial encoder takes 7 angles");
  std::array<double, 4> angles;
  encode_inputs(patch, angles);
  const auto state = qsim::run_circuit(spatial_encoder_circuit(), params,
                                       angles);
  return qsim::decode_z(qsim::expect_z(state, 3));
}

void spectral_encode(std::span<const double> group_values,
                     std::span<const double> params, std::span<double> out) {
  require(group_values.size() == kGroupSize, "spectral group holds 4 bands");
  require(params.size() == kSpectralGroupParams,
          "spectral encoder takes 20 angles per group");
  require(out.size() == kGroupSize, "spectral encoder emits 4 values");
  std::array<double, 4> angles;
  encode_inputs(group_values, angles);
  const auto state =
      qsim::run_circuit(spectral_encoder_circuit(), params, angles);
  for (int q = 0; q < kGroupSize; ++q) {
    out[static_cast<std::size_t>(q)] =
        qsim::decode_z(qsim::expect_z(state, q));
  }
}

double qfm(std::span<const double> inputs, std::span<const double> params) {
  require(inputs.size() == 3, "QFM takes 3 inputs");
  require(params.size() == kQfmParams, "QFM takes 12 angles");
  std::array<double, 3> angles;
  encode_inputs(inputs, angles);
  const auto state = qsim::run_circuit(qfm_circuit(), params, angles);
  return qsim::decode_z(qsim::expect_z(state, 2));
}

namespace {

// Shortcut merge: average of the group QFM output and the group's 4th
// channel, keeping the value in [0, 1].
struct FfbTrace {
  std::array<double, kNumGroups> qfm_out;
  std::array<double, kNumGroups> merged;
  double top = 0.0;
};

FfbTrace ffb_trace(std::span<const double> channels,
                   std::span<const double> params) {
  FfbTrace t;
  for (int g = 0; g < kNumGroups; ++g) {
    const auto group_params = params.subspan(g * kQfmParams, kQfmParams);
    t.qfm_out[g] = qfm(channels.subspan(g * kGroupSize, 3), group_params);
    t.merged[g] = 0.5 * (t.qfm_out[g] + channels[g * kGroupSize + 3]);
  }
  t.top = qfm(std::span<const double>(t.merged.data(), kNumGroups),
              params.subspan(kNumGroups * kQfmParams, kQfmParams));
  return t;
}

}  // namespace

double ffb(std::span<const double> channels, std::span<const double> params) {
  require(channels.size() == kNumBands, "FFB takes 12 channels");
  require(params.size() == kFfbParams, "FFB takes 48 angles");
  return ffb_trace(channels, params).top;
}

void ffb_vjp(std::span<const double> channels, std::span<const double> params,
             double out_grad, std::span<double> grad_params,
             std::span<double> grad_channels) {
  require(channels.size() == kNumBands, "FFB takes 12 channels");
  require(params.size() == kFfbParams, "FFB takes 48 angles");
  require(grad_params.size() == kFfbParams, "grad_params size mismatch");
  require(grad_channels.empty() || grad_channels.size() == kNumBands,
          "grad_channels size mismatch");

  const FfbTrace t = ffb_trace(channels, params);

  // Top QFM: gradient w.r.t. its params and its three merged inputs.
  std::array<double, kNumGroups> grad_merged{};
  circuit_vjp(qfm_circuit(), params.subspan(kNumGroups * kQfmParams, kQfmParams),
              std::span<const double>(t.merged.data(), kNumGroups),
              std::span<const double>(&out_grad, 1),
              grad_params.subspan(kNumGroups * kQfmParams, kQfmParams),
              grad_merged);

  for (int g = 0; g < kNumGroups; ++g) {
    const double d_qfm = 0.5 * grad_merged[static_cast<std::size_t>(g)];
    const double d_shortcut = 0.5 * grad_merged[static_cast<std::size_t>(g)];
    std::array<double, 3> grad_in{};
    circuit_vjp(qfm_circuit(), params.subspan(g * kQfmParams, kQfmParams),
                channels.subspan(g * kGroupSize, 3),
                std::span<const double>(&d_qfm, 1),
                grad_params.subspan(g * kQfmParams, kQfmParams),
                grad_channels.empty() ? std::span<double>()
                                      : std::span<double>(grad_in));
    if (!grad_channels.empty()) {
      for (int i = 0; i < 3; ++i) {
        grad_channels[g * kGroupSize + i] += grad_in[static_cast<std::size_t>(i)];
      }
      grad_channels[g * kGroupSize + 3] += d_shortcut;
    }
  }
}

Map qnn_forward(const Tensor& x, std::span<const double> qnn_params,
                int workers, QnnCache* cache) {
  require(x.c == kNumBands, "QNN input must have 12 channels");
  require(x.h >= 2 && x.w >= 2, "QNN input must be at least 2x2");
  require(x.h % 2 == 0 && x.w % 2 == 0,
          "QNN input dimensions must be even (pad first)");
  require(qnn_params.size() == kQnnParams, "QNN takes 115 angles");

  const int h2 = x.h / 2, w2 = x.w / 2;
  QnnCache local;
  QnnCache& c = cache ? *cache : local;
  c.spatial = Tensor(h2, w2, kNumBands);
  c.spectral = Tensor(h2, w2, kNumBands);
  c.fused_groups = Tensor(h2, w2, kNumGroups);
  c.fused = Map(h2, w2);

  const auto spatial_params = spatial_slice(qnn_params);
  const auto ffb_params = ffb_slice(qnn_params);
  const std::size_t n_px = static_cast<std::size_t>(h2) * w2;

  parallel_for(n_px, workers, [&](std::size_t p) {
    const int py = static_cast<int>(p) / w2;
    const int px = static_cast<int>(p) % w2;
    const int y = 2 * py, xx = 2 * px;

    // Spatial stage: one 2x2 patch per channel, weights shared everywhere.
    for (int ch = 0; ch < kNumBands; ++ch) {
      const std::array<double, 4> patch{
          x.at(y, xx, ch), x.at(y, xx + 1, ch), x.at(y + 1, xx, ch),
          x.at(y + 1, xx + 1, ch)};
      c.spatial.at(py, px, ch) = spatial_encode(patch, spatial_params);
    }
    // Spectral stage: per 4-band group, per-group weights shared across
    // pixels.
    for (int g = 0; g < kNumGroups; ++g) {
      std::array<double, kGroupSize> in;
      for (int i = 0; i < kGroupSize; ++i) {
        in[static_cast<std::size_t>(i)] =
            c.spatial.at(py, px, g * kGroupSize + i);
      }
      std::array<double, kGroupSize> out;
      spectral_encode(in, spectral_slice(qnn_params, g), out);
      for (int i = 0; i < kGroupSize; ++i) {
        c.spectral.at(py, px, g * kGroupSize + i) =
            out[static_cast<std::size_t>(i)];
      }
    }
    // Fusion stage.
    const FfbTrace t = ffb_trace(
        std::span<const double>(c.spectral.pixel(py, px), kNumBands),
        ffb_params);
    for (int g = 0; g < kNumGroups; ++g) {
      c.fused_groups.at(py, px, g) = t.merged[static_cast<std::size_t>(g)];
    }
    c.fused.at(py, px) = t.top;
  });

  return bicubic_upsample(c.fused, 2);
}

void qnn_backward(const Tensor& x, std::span<const double> qnn_params,
                  const QnnCache& cache, const Map& upstream,
                  std::span<double> grad_params, int workers) {
  require(qnn_params.size() == kQnnParams, "QNN takes 115 angles");
  require(grad_params.size() == kQnnParams, "grad size mismatch");
  require(upstream.h == x.h && upstream.w == x.w, "upstream shape mismatch");

  const int h2 = x.h / 2, w2 = x.w / 2;
  const Map d_fused = bicubic_adjoint(upstream, h2, w2, 2);

  const auto spatial_params = spatial_slice(qnn_params);
  const auto ffb_params = ffb_slice(qnn_params);
  const std::size_t n_px = static_cast<std::size_t>(h2) * w2;

  // Fixed chunk partition so the gradient reduction order does not depend
  // on the worker count.
  const std::size_t n_chunks = std::min<std::size_t>(n_px, 64);
  std::vector<std::vector<double>> partial(
      n_chunks, std::vector<double>(kQnnParams, 0.0));

  parallel_chunks(n_px, workers, n_chunks,
                  [&](std::size_t b, std::size_t e, std::size_t chunk) {
    std::span<double> acc(partial[chunk]);
    auto acc_spatial = acc.subspan(kSpatialOffset, kSpatialParams);
    auto acc_ffb = acc.subspan(kFfbOffset, kFfbParams);
    for (std::size_t p = b; p < e; ++p) {
      const int py = static_cast<int>(p) / w2;
      const int px = static_cast<int>(p) % w2;
      const double up = d_fused.at(py, px);
      if (up == 0.0) continue;

      // Fusion stage backward.
      std::array<double, kNumBands> d_spectral{};
      ffb_vjp(std::span<const double>(cache.spectral.pixel(py, px), kNumBands),
              ffb_params, up, acc_ffb, d_spectral);

      // Spectral stage backward per group.
      std::array<double, kNumBands> d_spatial{};
      for (int g = 0; g < kNumGroups; ++g) {
        circuit_vjp(spectral_encoder_circuit(), spectral_slice(qnn_params, g),
                    std::span<const double>(
                        cache.spatial.pixel(py, px) + g * kGroupSize,
                        kGroupSize),
                    std::span<const double>(d_spectral.data() + g * kGroupSize,
                                            kGroupSize),
                    acc.subspan(kSpectralOffset + g * kSpectralGroupParams,
                                kSpectralGroupParams),
                    std::span<double>(d_spatial.data() + g * kGroupSize,
                                      kGroupSize));
      }

      // Spatial stage backward; patch inputs are data, no input grads.
      const int y = 2 * py, xx = 2 * px;
      for (int ch = 0; ch < kNumBands; ++ch) {
        const double d = d_spatial[static_cast<std::size_t>(ch)];
        if (d == 0.0) continue;
        const std::array<double, 4> patch{
            x.at(y, xx, ch), x.at(y, xx + 1, ch), x.at(y + 1, xx, ch),
            x.at(y + 1, xx + 1, ch)};
        circuit_vjp(spatial_encoder_circuit(), spatial_params, patch,
                    std::span<const double>(&d, 1), acc_spatial, {});
      }
    }
  });

  for (const auto& part : partial) {
    for (int i = 0; i < kQnnParams; ++i) {
      grad_params[static_cast<std::size_t>(i)] += part[static_cast<std::size_t>(i)];
    }
  }
}

namespace {

struct Taps {
  std::array<int, 4> idx;
  std::array<double, 4> w;
};

double catmull_rom(double d) {
  d = std::fabs(d);
  if (d <= 1.0) return (1.5 * d - 2.5) * d * d + 1.0;
  if (d < 2.0) return ((-0.5 * d + 2.5) * d - 4.0) * d + 2.0;
  return 0.0;
}

std::vector<Taps> make_taps(int out_n, int in_n, int factor) {
  std::vector<Taps> taps(static_cast<std::size_t>(out_n));
  for (int o = 0; o < out_n; ++o) {
    const double s = (o + 0.5) / factor - 0.5;
    const int base = static_cast<int>(std::floor(s));
    Taps& t = taps[static_cast<std::size_t>(o)];
    for (int k = 0; k < 4; ++k) {
      const int i = base - 1 + k;
      t.idx[static_cast<std::size_t>(k)] =
          i < 0 ? 0 : (i >= in_n ? in_n - 1 : i);
      t.w[static_cast<std::size_t>(k)] = catmull_rom(s - i);
    }
  }
  return taps;
}

}  // namespace

Map bicubic_upsample(const Map& in, int factor) {
  require(in.h >= 2 && in.w >= 2, "bicubic needs at least a 2x2 map");
  require(factor >= 1, "factor must be positive");
  const int oh = in.h * factor, ow = in.w * factor;
  const auto row_taps = make_taps(oh, in.h, factor);
  const auto col_taps = make_taps(ow, in.w, factor);

  // Separable: horizontal pass then vertical pass.
  Map mid(in.h, ow);
  for (int y = 0; y < in.h; ++y) {
    for (int ox = 0; ox < ow; ++ox) {
      const Taps& t = col_taps[static_cast<std::size_t>(ox)];
      double acc = 0.0;
      for (int k = 0; k < 4; ++k) {
        acc += t.w[static_cast<std::size_t>(k)] *
               in.at(y, t.idx[static_cast<std::size_t>(k)]);
      }
      mid.at(y, ox) = acc;
    }
  }
  Map out(oh, ow);
  for (int oy = 0; oy < oh; ++oy) {
    const Taps& t = row_taps[static_cast<std::size_t>(oy)];
    for (int ox = 0; ox < ow; ++ox) {
      double acc = 0.0;
      for (int k = 0; k < 4; ++k) {
        acc += t.w[static_cast<std::size_t>(k)] *
               mid.at(t.idx[static_cast<std::size_t>(k)], ox);
      }
      out.at(oy, ox) = acc;
    }
  }
  return out;
}

Map bicubic_adjoint(const Map& upstream, int in_h, int in_w, int factor) {
  require(upstream.h == in_h * factor && upstream.w == in_w * factor,
          "upstream shape must be (in_h*factor, in_w*factor)");
  const auto row_taps = make_taps(upstream.h, in_h, factor);
  const auto col_taps = make_taps(upstream.w, in_w, factor);

  // Transpose of the vertical pass, then of the horizontal pass.
  Map mid(in_h, upstream.w);
  for (int oy = 0; oy < upstream.h; ++oy) {
    const Taps& t = row_taps[static_cast<std::size_t>(oy)];
    for (int ox = 0; ox < upstream.w; ++ox) {
      const double g = upstream.at(oy, ox);
      if (g == 0.0) continue;
      for (int k = 0; k < 4; ++k) {
        mid.at(t.idx[static_cast<std::size_t>(k)], ox) +=
            t.w[static_cast<std::size_t>(k)] * g;
      }
    }
  }
  Map out(in_h, in_w);
  for (int y = 0; y < in_h; ++y) {
    for (int ox = 0; ox < upstream.w; ++ox) {
      const Taps& t = col_taps[static_cast<std::size_t>(ox)];
      const double g = mid.at(y, ox);
      if (g == 0.0) continue;
      for (int k = 0; k < 4; ++k) {
        out.at(y, t.idx[static_cast<std::size_t>(k)]) +=
            t.w[static_cast<std::size_t>(k)] * g;
      }
    }
  }
  return out;
}

}  // namespace qednet::circuits

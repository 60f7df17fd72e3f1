#pragma once

#include <span>

#include "qednet/qsim.hpp"
#include "qednet/tensor.hpp"

// The QNN branch: a spatial encoder that fuses each 2x2 patch of a channel
// into one value, a spectral encoder that refines each 4-band group, and a
// feature fusion block (two tiers of 3-qubit fusion circuits with shortcut
// merges) that reduces the 12 channels to one, followed by a x2 bicubic
// upsample back to the input resolution.
namespace qednet::circuits {

inline constexpr int kNumBands = 12;
inline constexpr int kNumGroups = 3;
inline constexpr int kGroupSize = 4;

inline constexpr int kSpatialParams = 7;        // 4 RY + 3 IsingXX
inline constexpr int kSpectralGroupParams = 20; // RY4 + XX4 + RX4 + XX4 + RY4
inline constexpr int kSpectralParams = kNumGroups * kSpectralGroupParams;
inline constexpr int kQfmParams = 12;           // RY3 + XX2 + RX3 + XX1 + RY3
inline constexpr int kFfbParams = (kNumGroups + 1) * kQfmParams;
inline constexpr int kQnnParams = kSpatialParams + kSpectralParams + kFfbParams;

// Offsets of each block inside the flat 115-angle QNN parameter vector.
inline constexpr int kSpatialOffset = 0;
inline constexpr int kSpectralOffset = kSpatialParams;
inline constexpr int kFfbOffset = kSpatialParams + kSpectralParams;

// Circuit programs (built once, immutable).
const qsim::Circuit& spatial_encoder_circuit();   // 4 qubits, readout {3}
const qsim::Circuit& spectral_encoder_circuit();  // 4 qubits, readout {0..3}
const qsim::Circuit& qfm_circuit();               // 3 qubits, readout {2}

// Gradient of sum_k out_grads[k] * decoded_output[k] with respect to the
// circuit parameters (accumulated into grad_params) and the raw classical
// inputs (accumulated into grad_inputs, skipped when empty). Uses the
// parameter-shift rule end to end, chained through the angle encoding and
// the expectation decoding analytically.
void circuit_vjp(const qsim::Circuit& circuit, std::span<const double> params,
                 std::span<const double> inputs01,
                 std::span<const double> out_grads,
                 std::span<double> grad_params, std::span<double> grad_inputs);

// patch holds the 2x2 patch in row-major order; result is in [0, 1].
double spatial_encode(std::span<const double> patch,
                      std::span<const double> params);

// One 4-band group in, four refined values out (Z measured on every wire).
void spectral_encode(std::span<const double> group_values,
                     std::span<const double> params, std::span<double> out);

// 3-input quantum fusion module; result in [0, 1].
double qfm(std::span<const double> inputs, std::span<const double> params);

// Feature fusion block over the 12 per-pixel channels: per group g the first
// three channels pass through a QFM whose output is averaged with the fourth
// channel (the shortcut), and the three merged values feed a final QFM.
double ffb(std::span<const double> channels, std::span<const double> params);
void ffb_vjp(std::span<const double> channels, std::span<const double> params,
             double out_grad, std::span<double> grad_params,
             std::span<double> grad_channels);

// Intermediates kept by qnn_forward so the backward pass can rebuild each
// stage's inputs without recomputing the pipeline.
struct QnnCache {
  Tensor spatial;       // (h/2, w/2, 12) spatially fused channels
  Tensor spectral;      // (h/2, w/2, 12) spectrally refined channels
  Tensor fused_groups;  // (h/2, w/2, 3)  per-group shortcut merges
  Map fused;            // (h/2, w/2)     pre-upsample QNN feature
};

// Full QNN branch: (H, W, 12) -> (H, W) with H, W even. Weights are shared
// across all patches for the spatial stage and across all pixels of a group
// for the spectral stage, so the trainable angle count stays at 115
// regardless of image size.
Map qnn_forward(const Tensor& x, std::span<const double> qnn_params,
                int workers, QnnCache* cache = nullptr);

// Accumulates d(loss)/d(qnn_params) given d(loss)/d(output map).
void qnn_backward(const Tensor& x, std::span<const double> qnn_params,
                  const QnnCache& cache, const Map& upstream,
                  std::span<double> grad_params, int workers);

// Half-pixel-centered Catmull-Rom (a = -0.5) upsampling with edge clamping.
Map bicubic_upsample(const Map& in, int factor = 2);

// Exact transpose of bicubic_upsample as a linear operator: maps a gradient
// on the (in_h*factor, in_w*factor) output back to the (in_h, in_w) input.
Map bicubic_adjoint(const Map& upstream, int in_h, int in_w, int factor = 2);

}  // namespace qednet::circuits

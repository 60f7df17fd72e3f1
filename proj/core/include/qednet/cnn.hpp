#pragma once

#include <span>

#include "qednet/tensor.hpp"

// Lightweight CNN branch: a 3x3 embedding convolution, two 3x3 convolutions
// with LeakyReLU(0.2) between and after them, and a per-pixel channel
// projection down to one feature map. All convolutions are stride-1 with
// zero padding 1, so every layer preserves H x W. Backward passes are exact
// (hand-derived) and checked against finite differences in the tests.
namespace qednet::cnn {

inline constexpr int kKernel = 3;
inline constexpr double kLeakySlope = 0.2;

// kernel layout: (out_ch, in_ch, ky, kx), row-major; bias: (out_ch).
struct ConvLayerView {
  int in_ch = 0;
  int out_ch = 0;
  std::span<const double> kernel;
  std::span<const double> bias;
};

struct ConvLayerGrads {
  std::span<double> kernel;
  std::span<double> bias;
};

inline int conv_kernel_size(int in_ch, int out_ch) {
  return in_ch * out_ch * kKernel * kKernel;
}

void conv2d_forward(const Tensor& in, const ConvLayerView& layer, Tensor& out,
                    int workers);

// dIn may be null when the layer input is data. dKernel/dBias accumulate.
void conv2d_backward(const Tensor& in, const ConvLayerView& layer,
                     const Tensor& d_out, Tensor* d_in,
                     const ConvLayerGrads& grads, int workers);

// x >= 0 ? x : 0.2 x; the subgradient at 0 is taken as 1.
void leaky_relu_forward(Tensor& t);
void leaky_relu_backward(const Tensor& pre_activation, Tensor& grad);

inline double leaky_relu(double x) { return x >= 0.0 ? x : kLeakySlope * x; }

// Parameter views for the whole branch, over externally owned storage.
struct CnnView {
  int feat = 0;  // feature width C_f
  ConvLayerView embed;  // 12 -> C_f
  ConvLayerView conv1;  // C_f -> C_f
  ConvLayerView conv2;  // C_f -> C_f
  std::span<const double> fcl_w;  // C_f
  std::span<const double> fcl_b;  // 1
};

struct CnnGrads {
  ConvLayerGrads embed, conv1, conv2;
  std::span<double> fcl_w;
  std::span<double> fcl_b;
};

// Intermediates reused by the backward pass.
struct CnnCache {
  Tensor embed_out;   // also the encoder input (no activation after embed)
  Tensor conv1_pre;   // conv1 output before LeakyReLU
  Tensor conv1_act;
  Tensor conv2_pre;
  Tensor conv2_act;
};

Map cnn_forward(const Tensor& x, const CnnView& view, int workers,
                CnnCache* cache = nullptr);

void cnn_backward(const Tensor& x, const CnnView& view, const CnnCache& cache,
                  const Map& d_out, const CnnGrads& grads, int workers);

// Trainable scalar count for one branch at feature width `feat`.
long cnn_param_count(int feat, int in_bands = 12);

}  // namespace qednet::cnn

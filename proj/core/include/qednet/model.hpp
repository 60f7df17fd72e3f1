#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "qednet/circuits.hpp"
#include "qednet/cnn.hpp"
#include "qednet/tensor.hpp"

// Dual-branch classifier: Y = sigmoid(F_CNN + F_QNN), with ablation variants
// that drop the quantum branch or replace it with a second, independently
// weighted CNN. Every trainable scalar lives exactly once in a flat vector;
// the layout hands out structured views into it.
namespace qednet::model {

enum class Variant { CnnOnly, CnnCnn, CnnQnn };

std::string variant_name(Variant v);
Variant parse_variant(const std::string& name);  // throws on unknown names

class ModelLayout {
 public:
  ModelLayout() = default;
  ModelLayout(Variant variant, int feat_width);

  Variant variant() const { return variant_; }
  int feat_width() const { return feat_; }
  std::size_t total_params() const { return total_; }
  std::size_t qnn_angle_count() const {
    return variant_ == Variant::CnnQnn ? circuits::kQnnParams : 0;
  }

  cnn::CnnView cnn1(std::span<const double> flat) const;
  cnn::CnnView cnn2(std::span<const double> flat) const;  // CnnCnn only
  std::span<const double> qnn(std::span<const double> flat) const;
  cnn::CnnGrads cnn1_grads(std::span<double> flat) const;
  cnn::CnnGrads cnn2_grads(std::span<double> flat) const;
  std::span<double> qnn_grads(std::span<double> flat) const;

  // 1 for scalars subject to decoupled weight decay (convolution and
  // projection weights), 0 for biases and quantum angles.
  std::vector<std::uint8_t> decay_mask() const;

 private:
  Variant variant_ = Variant::CnnQnn;
  int feat_ = 64;
  std::size_t cnn_block_ = 0;  // scalar count of one CNN branch
  std::size_t total_ = 0;
};

struct ModelParams {
  ModelLayout layout;
  std::vector<double> values;
};

// Seeded initialization: Kaiming-style fan-in scaling for convolution and
// projection weights, zero biases, quantum angles uniform in [-0.1, 0.1].
ModelParams init_params(Variant variant, int feat_width, std::uint64_t seed);

struct ForwardCache {
  cnn::CnnCache cnn1, cnn2;
  circuits::QnnCache qnn;
  Map logits;
};

// Pre-sigmoid fusion of the active branches.
Map forward_logits(const Tensor& x, const ModelParams& params, int workers,
                   ForwardCache* cache = nullptr);

// Y = sigmoid(logits); every value strictly inside (0, 1).
Map forward(const Tensor& x, const ModelParams& params, int workers,
            ForwardCache* cache = nullptr);

// Accumulates d(loss)/d(flat params) given d(loss)/d(logits).
void backward(const Tensor& x, const ModelParams& params,
              const ForwardCache& cache, const Map& d_logits,
              std::span<double> grad_flat, int workers);

struct ThresholdResult {
  double threshold = 0.0;
  Mask map;
};

// Robust-max rule: discard the top tenth of sigmoid values, halve what
// remains the maximum, classify strictly above it.
ThresholdResult auto_threshold(const Map& sigmoid_map);

Mask apply_threshold(const Map& sigmoid_map, double threshold);

}  // namespace qednet::model

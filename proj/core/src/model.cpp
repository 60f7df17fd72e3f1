#include "qednet/model.hpp"

#include <algorithm>
#include <cmath>

#include "qednet/rng.hpp"

namespace qednet::model {

namespace {

constexpr int kInBands = circuits::kNumBands;

struct CnnOffsets {
  std::size_t embed_k, embed_b, conv1_k, conv1_b, conv2_k, conv2_b, fcl_w,
      fcl_b, end;
};

CnnOffsets cnn_offsets(std::size_t base, int feat) {
  CnnOffsets o{};
  const std::size_t embed_n =
      static_cast<std::size_t>(cnn::conv_kernel_size(kInBands, feat));
  const std::size_t conv_n =
      static_cast<std::size_t>(cnn::conv_kernel_size(feat, feat));
  o.embed_k = base;
  o.embed_b = o.embed_k + embed_n;
  o.conv1_k = o.embed_b + feat;
  o.conv1_b = o.conv1_k + conv_n;
  o.conv2_k = o.conv1_b + feat;
  o.conv2_b = o.conv2_k + conv_n;
  o.fcl_w = o.conv2_b + feat;
  o.fcl_b = o.fcl_w + feat;
  o.end = o.fcl_b + 1;
  return o;
}

cnn::CnnView make_view(std::span<const double> flat, std::size_t base,
                       int feat) {
  const CnnOffsets o = cnn_offsets(base, feat);
  cnn::CnnView v;
  v.feat = feat;
  v.embed = {kInBands, feat, flat.subspan(o.embed_k, o.embed_b - o.embed_k),
             flat.subspan(o.embed_b, static_cast<std::size_t>(feat))};
  v.conv1 = {feat, feat, flat.subspan(o.conv1_k, o.conv1_b - o.conv1_k),
             flat.subspan(o.conv1_b, static_cast<std::size_t>(feat))};
  v.conv2 = {feat, feat, flat.subspan(o.conv2_k, o.conv2_b - o.conv2_k),
             flat.subspan(o.conv2_b, static_cast<std::size_t>(feat))};
  v.fcl_w = flat.subspan(o.fcl_w, static_cast<std::size_t>(feat));
  v.fcl_b = flat.subspan(o.fcl_b, 1);
  return v;
}

cnn::CnnGrads make_grads(std::span<double> flat, std::size_t base, int feat) {
  const CnnOffsets o = cnn_offsets(base, feat);
  cnn::CnnGrads g;
  g.embed = {flat.subspan(o.embed_k, o.embed_b - o.embed_k),
             flat.subspan(o.embed_b, static_cast<std::size_t>(feat))};
  g.conv1 = {flat.subspan(o.conv1_k, o.conv1_b - o.conv1_k),
             flat.subspan(o.conv1_b, static_cast<std::size_t>(feat))};
  g.conv2 = {flat.subspan(o.conv2_k, o.conv2_b - o.conv2_k),
             flat.subspan(o.conv2_b, static_cast<std::size_t>(feat))};
  g.fcl_w = flat.subspan(o.fcl_w, static_cast<std::size_t>(feat));
  g.fcl_b = flat.subspan(o.fcl_b, 1);
  return g;
}

}  // namespace

std::string variant_name(Variant v) {
  switch (v) {
    case Variant::CnnOnly:
      return "cnn_only";
    case Variant::CnnCnn:
      return "cnn_cnn";
    case Variant::CnnQnn:
      return "cnn_qnn";
  }
  return "cnn_qnn";
}

Variant parse_variant(const std::string& name) {
  if (name == "cnn_only") return Variant::CnnOnly;
  if (name == "cnn_cnn") return Variant::CnnCnn;
  if (name == "cnn_qnn") return Variant::CnnQnn;
  throw std::invalid_argument("unknown variant: " + name);
}

ModelLayout::ModelLayout(Variant variant, int feat_width)
    : variant_(variant), feat_(feat_width) {
  require(feat_width >= 1, "feature width must be positive");
  cnn_block_ = cnn_offsets(0, feat_).end;
  total_ = cnn_block_;
  if (variant_ == Variant::CnnCnn) total_ += cnn_block_;
  if (variant_ == Variant::CnnQnn) total_ += circuits::kQnnParams;
}

cnn::CnnView ModelLayout::cnn1(std::span<const double> flat) const {
  require(flat.size() == total_, "flat parameter size mismatch");
  return make_view(flat, 0, feat_);
}

cnn::CnnView ModelLayout::cnn2(std::span<const double> flat) const {
  require(variant_ == Variant::CnnCnn, "second CNN exists only for cnn_cnn");
  require(flat.size() == total_, "flat parameter size mismatch");
  return make_view(flat, cnn_block_, feat_);
}

std::span<const double> ModelLayout::qnn(std::span<const double> flat) const {
  require(variant_ == Variant::CnnQnn, "QNN exists only for cnn_qnn");
  require(flat.size() == total_, "flat parameter size mismatch");
  return flat.subspan(cnn_block_, circuits::kQnnParams);
}

cnn::CnnGrads ModelLayout::cnn1_grads(std::span<double> flat) const {
  require(flat.size() == total_, "flat gradient size mismatch");
  return make_grads(flat, 0, feat_);
}

cnn::CnnGrads ModelLayout::cnn2_grads(std::span<double> flat) const {
  require(variant_ == Variant::CnnCnn, "second CNN exists only for cnn_cnn");
  require(flat.size() == total_, "flat gradient size mismatch");
  return make_grads(flat, cnn_block_, feat_);
}

std::span<double> ModelLayout::qnn_grads(std::span<double> flat) const {
  require(variant_ == Variant::CnnQnn, "QNN exists only for cnn_qnn");
  require(flat.size() == total_, "flat gradient size mismatch");
  return flat.subspan(cnn_block_, circuits::kQnnParams);
}

std::vector<std::uint8_t> ModelLayout::decay_mask() const {
  std::vector<std::uint8_t> mask(total_, 0);
  auto mark_cnn = [&](std::size_t base) {
    const CnnOffsets o = cnn_offsets(base, feat_);
    std::fill(mask.begin() + o.embed_k, mask.begin() + o.embed_b, 1);
    std::fill(mask.begin() + o.conv1_k, mask.begin() + o.conv1_b, 1);
    std::fill(mask.begin() + o.conv2_k, mask.begin() + o.conv2_b, 1);
    std::fill(mask.begin() + o.fcl_w, mask.begin() + o.fcl_b, 1);
  };
  mark_cnn(0);
  if (variant_ == Variant::CnnCnn) mark_cnn(cnn_block_);
  return mask;
}

ModelParams init_params(Variant variant, int feat_width, std::uint64_t seed) {
  ModelParams p;
  p.layout = ModelLayout(variant, feat_width);
  p.values.assign(p.layout.total_params(), 0.0);
  Rng rng(seed);

  auto init_cnn = [&](std::size_t base) {
    const CnnOffsets o = cnn_offsets(base, feat_width);
    // LeakyReLU-corrected fan-in scaling; biases stay zero.
    auto fill_kernel = [&](std::size_t begin, std::size_t end, int fan_in) {
      const double stddev =
          std::sqrt(2.0 / ((1.0 + cnn::kLeakySlope * cnn::kLeakySlope) *
                           fan_in));
      for (std::size_t i = begin; i < end; ++i) {
        p.values[i] = rng.normal(0.0, stddev);
      }
    };
    fill_kernel(o.embed_k, o.embed_b, kInBands * 9);
    fill_kernel(o.conv1_k, o.conv1_b, feat_width * 9);
    fill_kernel(o.conv2_k, o.conv2_b, feat_width * 9);
    fill_kernel(o.fcl_w, o.fcl_b, feat_width);
  };

  init_cnn(0);
  if (variant == Variant::CnnCnn) init_cnn(cnn_offsets(0, feat_width).end);
  if (variant == Variant::CnnQnn) {
    auto qnn = p.layout.qnn_grads(p.values);
    // Small angles start every circuit near the identity.
    for (double& a : qnn) a = rng.uniform(-0.1, 0.1);
  }
  return p;
}

Map forward_logits(const Tensor& x, const ModelParams& params, int workers,
                   ForwardCache* cache) {
  require(x.c == kInBands, "model input must have 12 channels");
  require(x.h % 2 == 0 && x.w % 2 == 0, "model input dimensions must be even");
  const ModelLayout& l = params.layout;

  ForwardCache local;
  ForwardCache& c = cache ? *cache : local;

  Map logits =
      cnn::cnn_forward(x, l.cnn1(params.values), workers, &c.cnn1);
  if (l.variant() == Variant::CnnCnn) {
    const Map second =
        cnn::cnn_forward(x, l.cnn2(params.values), workers, &c.cnn2);
    for (std::size_t i = 0; i < logits.v.size(); ++i) {
      logits.v[i] += second.v[i];
    }
  } else if (l.variant() == Variant::CnnQnn) {
    const Map qnn = circuits::qnn_forward(x, l.qnn(params.values), workers,
                                          &c.qnn);
    for (std::size_t i = 0; i < logits.v.size(); ++i) {
      logits.v[i] += qnn.v[i];
    }
  }
  c.logits = logits;
  return logits;
}

Map forward(const Tensor& x, const ModelParams& params, int workers,
            ForwardCache* cache) {
  Map y = forward_logits(x, params, workers, cache);
  for (double& v : y.v) v = 1.0 / (1.0 + std::exp(-v));
  return y;
}

void backward(const Tensor& x, const ModelParams& params,
              const ForwardCache& cache, const Map& d_logits,
              std::span<double> grad_flat, int workers) {
  const ModelLayout& l = params.layout;
  require(grad_flat.size() == l.total_params(), "grad size mismatch");

  cnn::cnn_backward(x, l.cnn1(params.values), cache.cnn1, d_logits,
                    l.cnn1_grads(grad_flat), workers);
  if (l.variant() == Variant::CnnCnn) {
    cnn::cnn_backward(x, l.cnn2(params.values), cache.cnn2, d_logits,
                      l.cnn2_grads(grad_flat), workers);
  } else if (l.variant() == Variant::CnnQnn) {
    circuits::qnn_backward(x, l.qnn(params.values), cache.qnn, d_logits,
                           l.qnn_grads(grad_flat), workers);
  }
}

Mask apply_threshold(const Map& m, double threshold) {
  Mask out(m.h, m.w);
  for (std::size_t i = 0; i < m.v.size(); ++i) {
    out.v[i] = m.v[i] > threshold ? 1 : 0;
  }
  return out;
}

ThresholdResult auto_threshold(const Map& m) {
  require(!m.v.empty(), "auto_threshold needs a nonempty map");
  // Robust maximum: the value at sorted index floor(0.9 n), i.e. the largest
  // value once the top tenth is discarded; ties resolve to the lower index.
  std::vector<double> sorted(m.v);
  std::size_t k = static_cast<std::size_t>(0.9 * static_cast<double>(sorted.size()));
  if (k >= sorted.size()) k = sorted.size() - 1;
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(k),
                   sorted.end());
  ThresholdResult r;
  r.threshold = sorted[k] / 2.0;
  r.map = apply_threshold(m, r.threshold);
  return r;
}

}  // namespace qednet::model

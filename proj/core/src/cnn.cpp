#include "qednet/cnn.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "qednet/parallel.hpp"

namespace qednet::cnn {

namespace {

constexpr std::size_t kReduceChunks = 16;

void check_layer(const Tensor& in, const ConvLayerView& layer) {
  require(in.c == layer.in_ch, "conv input channel mismatch");
  require(layer.kernel.size() ==
              static_cast<std::size_t>(conv_kernel_size(layer.in_ch,
                                                        layer.out_ch)),
          "conv kernel size mismatch");
  require(layer.bias.size() == static_cast<std::size_t>(layer.out_ch),
          "conv bias size mismatch");
}

// (out_ch, in_ch, ky, kx) -> (ky, kx, in_ch, out_ch): contiguous out_ch for
// the per-pixel accumulation loops.
std::vector<double> transpose_oc_last(std::span<const double> kernel,
                                      int in_ch, int out_ch) {
  std::vector<double> kt(kernel.size());
  for (int oc = 0; oc < out_ch; ++oc)
    for (int ic = 0; ic < in_ch; ++ic)
      for (int ky = 0; ky < kKernel; ++ky)
        for (int kx = 0; kx < kKernel; ++kx) {
          kt[(((static_cast<std::size_t>(ky) * kKernel + kx) * in_ch + ic) *
              out_ch) + oc] =
              kernel[((static_cast<std::size_t>(oc) * in_ch + ic) * kKernel +
                      ky) * kKernel + kx];
        }
  return kt;
}

// (out_ch, in_ch, ky, kx) -> (ky, kx, out_ch, in_ch).
std::vector<double> transpose_ic_last(std::span<const double> kernel,
                                      int in_ch, int out_ch) {
  std::vector<double> kt(kernel.size());
  for (int oc = 0; oc < out_ch; ++oc)
    for (int ic = 0; ic < in_ch; ++ic)
      for (int ky = 0; ky < kKernel; ++ky)
        for (int kx = 0; kx < kKernel; ++kx) {
          kt[(((static_cast<std::size_t>(ky) * kKernel + kx) * out_ch + oc) *
              in_ch) + ic] =
              kernel[((static_cast<std::size_t>(oc) * in_ch + ic) * kKernel +
                      ky) * kKernel + kx];
        }
  return kt;
}

}  // namespace

void conv2d_forward(const Tensor& in, const ConvLayerView& layer, Tensor& out,
                    int workers) {
  check_layer(in, layer);
  if (out.h != in.h || out.w != in.w || out.c != layer.out_ch) {
    out = Tensor(in.h, in.w, layer.out_ch);
  }
  const int h = in.h, w = in.w, ic_n = layer.in_ch, oc_n = layer.out_ch;
  const auto kt = transpose_oc_last(layer.kernel, ic_n, oc_n);

  parallel_for(static_cast<std::size_t>(h), workers, [&](std::size_t yy) {
    const int y = static_cast<int>(yy);
    std::vector<double> acc(static_cast<std::size_t>(oc_n));
    for (int x = 0; x < w; ++x) {
      for (int oc = 0; oc < oc_n; ++oc) acc[oc] = layer.bias[oc];
      for (int ky = 0; ky < kKernel; ++ky) {
        const int iy = y + ky - 1;
        if (iy < 0 || iy >= h) continue;
        for (int kx = 0; kx < kKernel; ++kx) {
          const int ix = x + kx - 1;
          if (ix < 0 || ix >= w) continue;
          const double* px = in.pixel(iy, ix);
          const double* wbase =
              kt.data() + (static_cast<std::size_t>(ky) * kKernel + kx) *
                              ic_n * oc_n;
          for (int ic = 0; ic < ic_n; ++ic) {
            const double v = px[ic];
            const double* wrow = wbase + static_cast<std::size_t>(ic) * oc_n;
            for (int oc = 0; oc < oc_n; ++oc) acc[oc] += v * wrow[oc];
          }
        }
      }
      double* opx = out.pixel(y, x);
      for (int oc = 0; oc < oc_n; ++oc) opx[oc] = acc[oc];
    }
  });
}

void conv2d_backward(const Tensor& in, const ConvLayerView& layer,
                     const Tensor& d_out, Tensor* d_in,
                     const ConvLayerGrads& grads, int workers) {
  check_layer(in, layer);
  require(d_out.h == in.h && d_out.w == in.w && d_out.c == layer.out_ch,
          "conv upstream gradient shape mismatch");
  require(grads.kernel.size() == layer.kernel.size() &&
              grads.bias.size() == layer.bias.size(),
          "conv gradient buffer shape mismatch");
  const int h = in.h, w = in.w, ic_n = layer.in_ch, oc_n = layer.out_ch;

  // Input gradient, gathered per input pixel so writes stay disjoint.
  if (d_in != nullptr) {
    if (d_in->h != h || d_in->w != w || d_in->c != ic_n) {
      *d_in = Tensor(h, w, ic_n);
    }
    const auto kt = transpose_ic_last(layer.kernel, ic_n, oc_n);
    parallel_for(static_cast<std::size_t>(h), workers, [&](std::size_t yy) {
      const int y = static_cast<int>(yy);
      std::vector<double> acc(static_cast<std::size_t>(ic_n));
      for (int x = 0; x < w; ++x) {
        std::fill(acc.begin(), acc.end(), 0.0);
        for (int ky = 0; ky < kKernel; ++ky) {
          const int oy = y - (ky - 1);
          if (oy < 0 || oy >= h) continue;
          for (int kx = 0; kx < kKernel; ++kx) {
            const int ox = x - (kx - 1);
            if (ox < 0 || ox >= w) continue;
            const double* gpx = d_out.pixel(oy, ox);
            const double* wbase =
                kt.data() + (static_cast<std::size_t>(ky) * kKernel + kx) *
                                oc_n * ic_n;
            for (int oc = 0; oc < oc_n; ++oc) {
              const double g = gpx[oc];
              if (g == 0.0) continue;
              const double* wrow = wbase + static_cast<std::size_t>(oc) * ic_n;
              for (int ic = 0; ic < ic_n; ++ic) acc[ic] += g * wrow[ic];
            }
          }
        }
        double* ipx = d_in->pixel(y, x);
        for (int ic = 0; ic < ic_n; ++ic) ipx[ic] = acc[ic];
      }
    });
  }

  // Kernel and bias gradients: per-chunk partials merged in chunk order,
  // accumulated in the out_ch-contiguous layout and transposed back once.
  const std::size_t kernel_n = layer.kernel.size();
  const std::size_t n_chunks = std::min<std::size_t>(kReduceChunks,
                                                     static_cast<std::size_t>(h));
  std::vector<std::vector<double>> dkt_part(
      n_chunks, std::vector<double>(kernel_n, 0.0));
  std::vector<std::vector<double>> dbias_part(
      n_chunks, std::vector<double>(static_cast<std::size_t>(oc_n), 0.0));

  parallel_chunks(static_cast<std::size_t>(h), workers, n_chunks,
                  [&](std::size_t b, std::size_t e, std::size_t chunk) {
    auto& dkt = dkt_part[chunk];
    auto& dbias = dbias_part[chunk];
    for (std::size_t yy = b; yy < e; ++yy) {
      const int y = static_cast<int>(yy);
      for (int x = 0; x < w; ++x) {
        const double* gpx = d_out.pixel(y, x);
        double any = 0.0;
        for (int oc = 0; oc < oc_n; ++oc) {
          dbias[oc] += gpx[oc];
          any += std::fabs(gpx[oc]);
        }
        if (any == 0.0) continue;  // masked-out pixel contributes nothing
        for (int ky = 0; ky < kKernel; ++ky) {
          const int iy = y + ky - 1;
          if (iy < 0 || iy >= h) continue;
          for (int kx = 0; kx < kKernel; ++kx) {
            const int ix = x + kx - 1;
            if (ix < 0 || ix >= w) continue;
            const double* px = in.pixel(iy, ix);
            double* dbase =
                dkt.data() + (static_cast<std::size_t>(ky) * kKernel + kx) *
                                 ic_n * oc_n;
            for (int ic = 0; ic < ic_n; ++ic) {
              const double v = px[ic];
              double* drow = dbase + static_cast<std::size_t>(ic) * oc_n;
              for (int oc = 0; oc < oc_n; ++oc) drow[oc] += v * gpx[oc];
            }
          }
        }
      }
    }
  });

  std::vector<double> dkt(kernel_n, 0.0);
  for (std::size_t c = 0; c < n_chunks; ++c) {
    for (std::size_t i = 0; i < kernel_n; ++i) dkt[i] += dkt_part[c][i];
    for (int oc = 0; oc < oc_n; ++oc) grads.bias[oc] += dbias_part[c][oc];
  }
  for (int oc = 0; oc < oc_n; ++oc)
    for (int ic = 0; ic < ic_n; ++ic)
      for (int ky = 0; ky < kKernel; ++ky)
        for (int kx = 0; kx < kKernel; ++kx) {
          grads.kernel[((static_cast<std::size_t>(oc) * ic_n + ic) * kKernel +
                        ky) * kKernel + kx] +=
              dkt[(((static_cast<std::size_t>(ky) * kKernel + kx) * ic_n +
                    ic) * oc_n) + oc];
        }
}

void leaky_relu_forward(Tensor& t) {
  for (double& x : t.v) x = leaky_relu(x);
}

void leaky_relu_backward(const Tensor& pre, Tensor& grad) {
  require(pre.v.size() == grad.v.size(), "LeakyReLU shape mismatch");
  for (std::size_t i = 0; i < grad.v.size(); ++i) {
    if (pre.v[i] < 0.0) grad.v[i] *= kLeakySlope;
  }
}

Map cnn_forward(const Tensor& x, const CnnView& view, int workers,
                CnnCache* cache) {
  CnnCache local;
  CnnCache& c = cache ? *cache : local;

  conv2d_forward(x, view.embed, c.embed_out, workers);
  conv2d_forward(c.embed_out, view.conv1, c.conv1_pre, workers);
  c.conv1_act = c.conv1_pre;
  leaky_relu_forward(c.conv1_act);
  conv2d_forward(c.conv1_act, view.conv2, c.conv2_pre, workers);
  c.conv2_act = c.conv2_pre;
  leaky_relu_forward(c.conv2_act);

  require(view.fcl_w.size() == static_cast<std::size_t>(view.feat) &&
              view.fcl_b.size() == 1,
          "channel projection shape mismatch");
  Map out(x.h, x.w);
  parallel_for(static_cast<std::size_t>(x.h), workers, [&](std::size_t yy) {
    const int y = static_cast<int>(yy);
    for (int px = 0; px < x.w; ++px) {
      const double* f = c.conv2_act.pixel(y, px);
      double acc = view.fcl_b[0];
      for (int ch = 0; ch < view.feat; ++ch) acc += view.fcl_w[ch] * f[ch];
      out.at(y, px) = acc;
    }
  });
  return out;
}

void cnn_backward(const Tensor& x, const CnnView& view, const CnnCache& cache,
                  const Map& d_out, const CnnGrads& grads, int workers) {
  require(d_out.h == x.h && d_out.w == x.w, "upstream shape mismatch");
  const int h = x.h, w = x.w, feat = view.feat;

  // Channel projection backward.
  Tensor d_act2(h, w, feat);
  parallel_for(static_cast<std::size_t>(h), workers, [&](std::size_t yy) {
    const int y = static_cast<int>(yy);
    for (int px = 0; px < w; ++px) {
      const double g = d_out.at(y, px);
      double* d = d_act2.pixel(y, px);
      for (int ch = 0; ch < feat; ++ch) d[ch] = g * view.fcl_w[ch];
    }
  });
  const std::size_t n_chunks = std::min<std::size_t>(kReduceChunks,
                                                     static_cast<std::size_t>(h));
  std::vector<std::vector<double>> dw_part(
      n_chunks, std::vector<double>(static_cast<std::size_t>(feat) + 1, 0.0));
  parallel_chunks(static_cast<std::size_t>(h), workers, n_chunks,
                  [&](std::size_t b, std::size_t e, std::size_t chunk) {
    auto& part = dw_part[chunk];
    for (std::size_t yy = b; yy < e; ++yy) {
      const int y = static_cast<int>(yy);
      for (int px = 0; px < w; ++px) {
        const double g = d_out.at(y, px);
        if (g == 0.0) continue;
        const double* f = cache.conv2_act.pixel(y, px);
        for (int ch = 0; ch < feat; ++ch) part[ch] += g * f[ch];
        part[static_cast<std::size_t>(feat)] += g;
      }
    }
  });
  for (const auto& part : dw_part) {
    for (int ch = 0; ch < feat; ++ch) grads.fcl_w[ch] += part[ch];
    grads.fcl_b[0] += part[static_cast<std::size_t>(feat)];
  }

  // Encoder backward.
  leaky_relu_backward(cache.conv2_pre, d_act2);
  Tensor d_act1;
  conv2d_backward(cache.conv1_act, view.conv2, d_act2, &d_act1, grads.conv2,
                  workers);
  leaky_relu_backward(cache.conv1_pre, d_act1);
  Tensor d_embed;
  conv2d_backward(cache.embed_out, view.conv1, d_act1, &d_embed, grads.conv1,
                  workers);
  conv2d_backward(x, view.embed, d_embed, nullptr, grads.embed, workers);
}

long cnn_param_count(int feat, int in_bands) {
  const long embed = static_cast<long>(in_bands) * feat * 9 + feat;
  const long enc = 2L * (static_cast<long>(feat) * feat * 9 + feat);
  const long fcl = feat + 1;
  return embed + enc + fcl;
}

}  // namespace qednet::cnn

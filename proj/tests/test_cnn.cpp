#include "qednet/cnn.hpp"

#include <cmath>
#include <vector>

#include "doctest.h"
#include "oracles.hpp"
#include "qednet/model.hpp"
#include "qednet/rng.hpp"

using namespace qednet;
using namespace qednet::cnn;
using oracles::rel_err;

namespace {

struct OwnedConv {
  int in_ch, out_ch;
  std::vector<double> kernel, bias;

  OwnedConv(int ic, int oc)
      : in_ch(ic), out_ch(oc),
        kernel(static_cast<std::size_t>(conv_kernel_size(ic, oc)), 0.0),
        bias(static_cast<std::size_t>(oc), 0.0) {}

  ConvLayerView view() const { return {in_ch, out_ch, kernel, bias}; }
  double& k(int oc, int ic, int ky, int kx) {
    return kernel[((static_cast<std::size_t>(oc) * in_ch + ic) * 3 + ky) * 3 +
                  kx];
  }
};

}  // namespace

TEST_CASE("identity kernel reproduces the input") {
  OwnedConv layer(2, 2);
  layer.k(0, 0, 1, 1) = 1.0;
  layer.k(1, 1, 1, 1) = 1.0;

  Rng rng(1);
  Tensor in(5, 4, 2);
  for (double& v : in.v) v = rng.uniform(-1.0, 1.0);
  Tensor out;
  conv2d_forward(in, layer.view(), out, 1);
  for (std::size_t i = 0; i < in.v.size(); ++i) {
    CHECK(out.v[i] == doctest::Approx(in.v[i]).epsilon(1e-15));
  }
}

TEST_CASE("all-ones 3x3 kernel: center 9, corners 4") {
  OwnedConv layer(1, 1);
  for (int ky = 0; ky < 3; ++ky)
    for (int kx = 0; kx < 3; ++kx) layer.k(0, 0, ky, kx) = 1.0;

  Tensor in(3, 3, 1);
  for (double& v : in.v) v = 1.0;
  Tensor out;
  conv2d_forward(in, layer.view(), out, 1);
  CHECK(out.at(1, 1, 0) == doctest::Approx(9.0));
  CHECK(out.at(0, 0, 0) == doctest::Approx(4.0));
  CHECK(out.at(0, 2, 0) == doctest::Approx(4.0));
  CHECK(out.at(2, 0, 0) == doctest::Approx(4.0));
  CHECK(out.at(2, 2, 0) == doctest::Approx(4.0));
  CHECK(out.at(0, 1, 0) == doctest::Approx(6.0));
}

TEST_CASE("channel mismatch is a contract violation") {
  OwnedConv layer(3, 2);
  Tensor in(4, 4, 2);
  Tensor out;
  CHECK_THROWS_AS(conv2d_forward(in, layer.view(), out, 1),
                  std::invalid_argument);
}

TEST_CASE("conv gradients match finite differences") {
  Rng rng(42);
  OwnedConv layer(2, 3);
  for (double& v : layer.kernel) v = rng.uniform(-0.5, 0.5);
  for (double& v : layer.bias) v = rng.uniform(-0.1, 0.1);
  Tensor in(5, 5, 2);
  for (double& v : in.v) v = rng.uniform(-1.0, 1.0);

  // Scalar objective: weighted sum of the conv output.
  Tensor w(5, 5, 3);
  for (double& v : w.v) v = rng.uniform(-1.0, 1.0);
  auto objective = [&](const Tensor& input, const OwnedConv& l) {
    Tensor out;
    conv2d_forward(input, l.view(), out, 1);
    double acc = 0.0;
    for (std::size_t i = 0; i < out.v.size(); ++i) acc += out.v[i] * w.v[i];
    return acc;
  };

  Tensor d_out = w;  // d(objective)/d(out) = w
  Tensor d_in;
  std::vector<double> dk(layer.kernel.size(), 0.0), db(layer.bias.size(), 0.0);
  conv2d_backward(in, layer.view(), d_out, &d_in,
                  ConvLayerGrads{dk, db}, 1);

  for (std::size_t i = 0; i < layer.kernel.size(); i += 3) {
    const double fd = oracles::central_diff(
        [&](double x) {
          OwnedConv l2 = layer;
          l2.kernel[i] = x;
          return objective(in, l2);
        },
        layer.kernel[i]);
    CHECK(rel_err(dk[i], fd) < 1e-5);
  }
  for (std::size_t i = 0; i < layer.bias.size(); ++i) {
    const double fd = oracles::central_diff(
        [&](double x) {
          OwnedConv l2 = layer;
          l2.bias[i] = x;
          return objective(in, l2);
        },
        layer.bias[i]);
    CHECK(rel_err(db[i], fd) < 1e-5);
  }
  for (std::size_t i = 0; i < in.v.size(); i += 7) {
    const double fd = oracles::central_diff(
        [&](double x) {
          Tensor in2 = in;
          in2.v[i] = x;
          return objective(in2, layer);
        },
        in.v[i]);
    CHECK(rel_err(d_in.v[i], fd) < 1e-5);
  }
}

TEST_CASE("conv worker-count invariance") {
  Rng rng(77);
  OwnedConv layer(3, 4);
  for (double& v : layer.kernel) v = rng.uniform(-0.5, 0.5);
  for (double& v : layer.bias) v = rng.uniform(-0.1, 0.1);
  Tensor in(9, 7, 3);
  for (double& v : in.v) v = rng.uniform(-1.0, 1.0);
  Tensor d_out(9, 7, 4);
  for (double& v : d_out.v) v = rng.uniform(-1.0, 1.0);

  Tensor out1, out4;
  conv2d_forward(in, layer.view(), out1, 1);
  conv2d_forward(in, layer.view(), out4, 4);
  CHECK(out1.v == out4.v);

  Tensor din1, din4;
  std::vector<double> dk1(layer.kernel.size(), 0.0), db1(layer.bias.size(), 0.0);
  std::vector<double> dk4(layer.kernel.size(), 0.0), db4(layer.bias.size(), 0.0);
  conv2d_backward(in, layer.view(), d_out, &din1, ConvLayerGrads{dk1, db1}, 1);
  conv2d_backward(in, layer.view(), d_out, &din4, ConvLayerGrads{dk4, db4}, 4);
  CHECK(din1.v == din4.v);
  CHECK(dk1 == dk4);
  CHECK(db1 == db4);
}

TEST_CASE("leaky relu") {
  CHECK(leaky_relu(1.0) == doctest::Approx(1.0));
  CHECK(leaky_relu(-1.0) == doctest::Approx(-0.2));
  CHECK(leaky_relu(0.0) == doctest::Approx(0.0));

  // Subgradient at 0 is 1 by convention.
  Tensor pre(1, 1, 3);
  pre.v = {-2.0, 0.0, 3.0};
  Tensor grad(1, 1, 3);
  grad.v = {1.0, 1.0, 1.0};
  leaky_relu_backward(pre, grad);
  CHECK(grad.v[0] == doctest::Approx(0.2));
  CHECK(grad.v[1] == doctest::Approx(1.0));
  CHECK(grad.v[2] == doctest::Approx(1.0));
}

TEST_CASE("cnn branch: zero input with zero biases gives the zero map") {
  // Kaiming init keeps biases at zero, so sigma(conv(0)) stays 0 end to end.
  const auto params = model::init_params(model::Variant::CnnOnly, 8, 3);
  Tensor x(6, 6, 12);
  const Map out =
      cnn_forward(x, params.layout.cnn1(params.values), 1, nullptr);
  for (double v : out.v) CHECK(std::fabs(v) < 1e-15);
}

TEST_CASE("cnn branch shape and full-pipeline gradient") {
  const auto params = model::init_params(model::Variant::CnnOnly, 4, 9);
  const auto view = params.layout.cnn1(params.values);

  Rng rng(1234);
  Tensor x(8, 8, 12);
  for (double& v : x.v) v = rng.uniform();

  CnnCache cache;
  const Map out = cnn_forward(x, view, 1, &cache);
  CHECK(out.h == 8);
  CHECK(out.w == 8);

  Map w(8, 8);
  for (double& v : w.v) v = rng.uniform(-1.0, 1.0);
  auto objective = [&](const std::vector<double>& flat) {
    model::ModelParams p2;
    p2.layout = params.layout;
    p2.values = flat;
    const Map o = cnn_forward(x, p2.layout.cnn1(p2.values), 1, nullptr);
    double acc = 0.0;
    for (std::size_t i = 0; i < o.v.size(); ++i) acc += o.v[i] * w.v[i];
    return acc;
  };

  std::vector<double> grads(params.values.size(), 0.0);
  cnn_backward(x, view, cache, w, params.layout.cnn1_grads(grads), 1);

  for (std::size_t i = 0; i < params.values.size(); i += 37) {
    const double fd = oracles::central_diff(
        [&](double v) {
          auto flat = params.values;
          flat[i] = v;
          return objective(flat);
        },
        params.values[i]);
    CHECK(rel_err(grads[i], fd) < 1e-4);
  }
}

TEST_CASE("parameter count formula") {
  CHECK(cnn_param_count(64) == 80897);
  CHECK(cnn_param_count(64) <= 100000);
  CHECK(cnn_param_count(4) == 12 * 4 * 9 + 4 + 2 * (4 * 4 * 9 + 4) + 4 + 1);
}

#include "qednet/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>
#include <numeric>

#include "json.hpp"
#include "qednet/container.hpp"
#include "qednet/metrics.hpp"
#include "qednet/parallel.hpp"
#include "qednet/rng.hpp"

namespace qednet::train {

namespace {

constexpr const char* kCheckpointMagic = "MQCKPT01";
constexpr double kClamp = 1e-7;

struct BceRaw {
  double loss_sum = 0.0;
  std::size_t n_valid = 0;
};

// Unnormalized sums; d_raw receives (y - g) on valid pixels, 0 elsewhere.
BceRaw bce_raw(const Map& y, const Mask& gt, const Mask* valid, Map& d_raw) {
  require(y.h == gt.h && y.w == gt.w, "loss shape mismatch");
  if (valid != nullptr) {
    require(valid->h == y.h && valid->w == y.w, "validity shape mismatch");
  }
  d_raw = Map(y.h, y.w);
  BceRaw r;
  for (std::size_t i = 0; i < y.v.size(); ++i) {
    if (valid != nullptr && valid->v[i] == 0) continue;
    const double g = gt.v[i] ? 1.0 : 0.0;
    double p = y.v[i];
    if (p < kClamp) p = kClamp;
    if (p > 1.0 - kClamp) p = 1.0 - kClamp;
    r.loss_sum -= g * std::log(p) + (1.0 - g) * std::log(1.0 - p);
    d_raw.v[i] = y.v[i] - g;
    ++r.n_valid;
  }
  return r;
}

void check_patch(const TrainPatch& p) {
  require(p.x.c == 12, "training patch must have 12 channels");
  require(p.x.h % 2 == 0 && p.x.w % 2 == 0, "training patch must be even");
  require(p.gt.h == p.x.h && p.gt.w == p.x.w, "ground-truth shape mismatch");
  require(p.valid.h == p.x.h && p.valid.w == p.x.w,
          "validity shape mismatch");
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

BceResult bce_loss(const Map& y, const Mask& gt, const Mask* valid) {
  BceResult out;
  BceRaw raw = bce_raw(y, gt, valid, out.d_logits);
  require(raw.n_valid > 0, "loss needs at least one valid pixel");
  const double inv = 1.0 / static_cast<double>(raw.n_valid);
  out.loss = raw.loss_sum * inv;
  for (double& d : out.d_logits.v) d *= inv;
  return out;
}

void adamw_step(AdamwState& state, std::span<double> params,
                std::span<const double> grads, double lr,
                std::span<const std::uint8_t> decay_mask) {
  require(params.size() == grads.size(), "gradient size mismatch");
  require(state.m.size() == params.size() && state.v.size() == params.size(),
          "optimizer state size mismatch");
  require(decay_mask.empty() || decay_mask.size() == params.size(),
          "decay mask size mismatch");

  // Decoupled decay first.
  if (state.weight_decay != 0.0) {
    const double shrink = lr * state.weight_decay;
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (decay_mask.empty() || decay_mask[i]) params[i] -= shrink * params[i];
    }
  }

  ++state.step;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + state.eps);
  }
}

double cosine_lr(int epoch, int max_epochs, double lr0) {
  require(max_epochs >= 1, "max_epochs must be positive");
  require(epoch >= 0 && epoch <= max_epochs, "epoch out of schedule range");
  const double t = 3.1415926535897932385 * epoch / max_epochs;
  return lr0 * 0.5 * (1.0 + std::cos(t));
}

EvalResult evaluate(const model::ModelParams& params,
                    const std::vector<TrainPatch>& set, int workers) {
  require(!set.empty(), "evaluation set must be nonempty");
  double loss_sum = 0.0;
  std::size_t n = 0;
  metrics::ConfusionMatrix cm;
  bool any = false;
  for (const TrainPatch& p : set) {
    const Map y = model::forward(p.x, params, workers);
    Map d_unused;
    const BceRaw raw = bce_raw(y, p.gt, &p.valid, d_unused);
    loss_sum += raw.loss_sum;
    n += raw.n_valid;
    const model::ThresholdResult th = model::auto_threshold(y);
    cm += metrics::confusion(th.map, p.gt, &p.valid);
    any = true;
  }
  require(any && n > 0, "evaluation set has no valid pixels");
  return {loss_sum / static_cast<double>(n), metrics::kappa(cm)};
}

TrainResult train(const std::vector<TrainPatch>& train_set,
                  const std::vector<TrainPatch>& val_set,
                  const TrainConfig& config) {
  require(!train_set.empty(), "training set must be nonempty");
  require(!val_set.empty(), "validation set must be nonempty");
  require(config.max_epochs >= 1, "max_epochs must be at least 1");
  require(config.batch_size >= 1, "batch size must be at least 1");
  for (const TrainPatch& p : train_set) check_patch(p);
  for (const TrainPatch& p : val_set) check_patch(p);

  const int workers = config.workers;
  model::ModelParams params =
      model::init_params(config.variant, config.feat_width, config.seed);
  const auto decay_mask = params.layout.decay_mask();
  AdamwState opt(params.values.size());
  Rng order_rng = Rng(config.seed).fork(1);

  TrainResult result;
  result.best_kappa = -std::numeric_limits<double>::infinity();
  double best_val_loss = std::numeric_limits<double>::infinity();
  int stall = 0;

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> grads(params.values.size(), 0.0);

  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    const double lr = cosine_lr(epoch, config.max_epochs, config.lr0);
    order_rng.shuffle(order);

    double epoch_loss_sum = 0.0;
    std::size_t epoch_pixels = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end = std::min(
          order.size(), start + static_cast<std::size_t>(config.batch_size));

      // First pass: forward + raw loss to get the batch pixel count.
      std::vector<model::ForwardCache> caches(end - start);
      std::vector<Map> d_raws(end - start);
      double batch_loss_sum = 0.0;
      std::size_t batch_pixels = 0;
      for (std::size_t k = start; k < end; ++k) {
        const TrainPatch& p = train_set[order[k]];
        const Map y = model::forward(p.x, params, workers, &caches[k - start]);
        const BceRaw raw = bce_raw(y, p.gt, &p.valid, d_raws[k - start]);
        batch_loss_sum += raw.loss_sum;
        batch_pixels += raw.n_valid;
      }
      require(batch_pixels > 0, "batch has no valid pixels");

      // Second pass: scaled upstream gradients, accumulated sequentially.
      std::fill(grads.begin(), grads.end(), 0.0);
      const double inv = 1.0 / static_cast<double>(batch_pixels);
      for (std::size_t k = start; k < end; ++k) {
        const TrainPatch& p = train_set[order[k]];
        Map& d = d_raws[k - start];
        for (double& v : d.v) v *= inv;
        model::backward(p.x, params, caches[k - start], d, grads, workers);
      }
      adamw_step(opt, params.values, grads, lr, decay_mask);

      epoch_loss_sum += batch_loss_sum;
      epoch_pixels += batch_pixels;
    }

    const EvalResult val = evaluate(params, val_set, workers);
    HistoryRow row;
    row.epoch = epoch;
    row.lr = lr;
    row.train_loss = epoch_loss_sum / static_cast<double>(epoch_pixels);
    row.val_loss = val.loss;
    row.val_kappa = val.kappa;
    result.history.push_back(row);

    if (val.kappa > result.best_kappa) {
      result.best_kappa = val.kappa;
      result.best_epoch = epoch;
      result.best_params = params;
    }

    // Validation-loss convergence: stop after `patience` consecutive epochs
    // without a min_improve improvement over the best loss seen.
    if (best_val_loss - val.loss >= config.min_improve) {
      best_val_loss = val.loss;
      stall = 0;
    } else {
      if (val.loss < best_val_loss) best_val_loss = val.loss;
      ++stall;
      if (stall >= config.patience) {
        result.stopped_early = true;
        break;
      }
    }
  }
  return result;
}

void save_checkpoint(const std::filesystem::path& path,
                     const model::ModelParams& params) {
  nlohmann::json h{{"version", 1},
                   {"variant", model::variant_name(params.layout.variant())},
                   {"feat_width", params.layout.feat_width()},
                   {"n_params", params.values.size()}};
  static_assert(sizeof(double) == 8);
  write_container(path, kCheckpointMagic, h.dump(), params.values.data(),
                  params.values.size() * sizeof(double));
}

model::ModelParams load_checkpoint(const std::filesystem::path& path) {
  const ContainerPayload c = read_container(path, kCheckpointMagic);
  nlohmann::json h = nlohmann::json::parse(c.header_json, nullptr, false);
  if (h.is_discarded() || !h.is_object()) {
    throw ContainerError(ContainerErrorKind::HeaderInvalid,
                         path.string() + ": header is not a JSON object");
  }
  model::ModelParams p;
  std::size_t n_params = 0;
  try {
    const int version = h.at("version").get<int>();
    if (version != 1) {
      throw ContainerError(ContainerErrorKind::VersionMismatch,
                           path.string() + ": unsupported checkpoint version");
    }
    const auto variant = model::parse_variant(h.at("variant").get<std::string>());
    const int feat = h.at("feat_width").get<int>();
    n_params = h.at("n_params").get<std::size_t>();
    p.layout = model::ModelLayout(variant, feat);
  } catch (const nlohmann::json::exception& e) {
    throw ContainerError(ContainerErrorKind::HeaderInvalid,
                         path.string() + ": " + e.what());
  } catch (const std::invalid_argument& e) {
    throw ContainerError(ContainerErrorKind::HeaderInvalid,
                         path.string() + ": " + e.what());
  }
  if (n_params != p.layout.total_params() ||
      c.payload.size() != n_params * sizeof(double)) {
    throw ContainerError(
        ContainerErrorKind::HeaderInvalid,
        path.string() + ": parameter count does not match variant/feat_width");
  }
  p.values.resize(n_params);
  std::memcpy(p.values.data(), c.payload.data(), c.payload.size());
  for (double v : p.values) {
    if (!std::isfinite(v)) {
      throw ContainerError(ContainerErrorKind::HeaderInvalid,
                           path.string() + ": non-finite parameter value");
    }
  }
  return p;
}

void write_history_csv(const std::filesystem::path& path,
                       const std::vector<HistoryRow>& history) {
  std::string out = "epoch,lr,train_loss,val_loss,val_kappa\n";
  for (const HistoryRow& r : history) {
    out += std::to_string(r.epoch);
    out += ',';
    out += format_double(r.lr);
    out += ',';
    out += format_double(r.train_loss);
    out += ',';
    out += format_double(r.val_loss);
    out += ',';
    out += format_double(r.val_kappa);
    out += '\n';
  }
  write_text_atomic(path, out);
}

}  // namespace qednet::train

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "qednet/model.hpp"
#include "qednet/tensor.hpp"

// Hybrid training loop: binary cross-entropy on the sigmoid map, AdamW with
// cosine-annealed learning rate, a hard epoch cap, and checkpointing on the
// best validation kappa. Gradients reach the CNN weights by backpropagation
// and the quantum angles by the parameter-shift rule, including the shifts
// through each stage's input encodings.
namespace qednet::train {

struct TrainPatch {
  Tensor x;    // (H, W, 12), values in [0, 1], H and W even
  Mask gt;     // ground truth
  Mask valid;  // pixels included in loss and metrics
};

struct TrainConfig {
  model::Variant variant = model::Variant::CnnQnn;
  int feat_width = 64;
  int max_epochs = 200;
  double lr0 = 1e-4;
  int batch_size = 1;        // patches per optimizer step
  std::uint64_t seed = 0;
  int patience = 10;         // epochs without val-loss improvement
  double min_improve = 1e-5;
  int workers = 0;           // 0 = hardware concurrency
};

// Mean over valid pixels of -[g ln y + (1-g) ln(1-y)] with y clamped to
// [1e-7, 1-1e-7] inside the logs; d_logits holds (y - g)/n_valid on valid
// pixels and 0 elsewhere.
struct BceResult {
  double loss = 0.0;
  Map d_logits;
};
BceResult bce_loss(const Map& y, const Mask& gt, const Mask* valid = nullptr);

struct AdamwState {
  std::vector<double> m, v;
  long step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;

  explicit AdamwState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

// Decoupled decay theta -= lr * wd * theta applied before the moment
// update, restricted to parameters whose decay_mask entry is nonzero (pass
// an empty mask to decay everything).
void adamw_step(AdamwState& state, std::span<double> params,
                std::span<const double> grads, double lr,
                std::span<const std::uint8_t> decay_mask = {});

// lr0 * (1 + cos(pi * epoch / max_epochs)) / 2.
double cosine_lr(int epoch, int max_epochs, double lr0 = 1e-4);

struct HistoryRow {
  int epoch = 0;  // 0-based, matching the cosine schedule argument
  double lr = 0.0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_kappa = 0.0;
};

struct TrainResult {
  model::ModelParams best_params;
  int best_epoch = -1;
  double best_kappa = 0.0;
  std::vector<HistoryRow> history;
  bool stopped_early = false;
};

// Validation loss plus kappa of the per-patch auto-thresholded predictions
// pooled over all patches.
struct EvalResult {
  double loss = 0.0;
  double kappa = 0.0;
};
EvalResult evaluate(const model::ModelParams& params,
                    const std::vector<TrainPatch>& set, int workers);

TrainResult train(const std::vector<TrainPatch>& train_set,
                  const std::vector<TrainPatch>& val_set,
                  const TrainConfig& config);

// Checkpoint (.mqc): magic "MQCKPT01"; JSON header {"version","variant",
// "feat_width","n_params"}; payload of n_params little-endian float64;
// FNV-1a payload checksum.
void save_checkpoint(const std::filesystem::path& path,
                     const model::ModelParams& params);
model::ModelParams load_checkpoint(const std::filesystem::path& path);

// CSV with header epoch,lr,train_loss,val_loss,val_kappa.
void write_history_csv(const std::filesystem::path& path,
                       const std::vector<HistoryRow>& history);

}  // namespace qednet::train

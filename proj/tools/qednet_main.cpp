// qednet: train/apply the dual-branch mangrove classifier, compute index
// baselines, generate synthetic scenes, and run the library selftest.
//
// Exit codes: 0 success, 1 runtime failure, 2 configuration error, 3 data
// error (unreadable/inconsistent inputs).

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "qednet/container.hpp"
#include "qednet/data.hpp"
#include "qednet/indices.hpp"
#include "qednet/metrics.hpp"
#include "qednet/model.hpp"
#include "qednet/parallel.hpp"
#include "qednet/selftest.hpp"
#include "qednet/train.hpp"

namespace fs = std::filesystem;
using namespace qednet;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

int resolve_workers(int cli_workers) {
  if (const char* env = std::getenv("QEDNET_WORKERS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  return cli_workers >= 1 ? cli_workers : default_workers();
}

// Scene = raster plus sibling mask with the same stem.
std::vector<std::pair<fs::path, fs::path>> list_scenes(const fs::path& dir) {
  if (!fs::is_directory(dir)) {
    throw DataError("not a directory: " + dir.string());
  }
  std::vector<std::pair<fs::path, fs::path>> scenes;
  std::vector<fs::path> rasters;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() == ".mqr") rasters.push_back(entry.path());
  }
  std::sort(rasters.begin(), rasters.end());
  for (const auto& r : rasters) {
    fs::path m = r;
    m.replace_extension(".mqm");
    if (!fs::exists(m)) {
      throw DataError("missing mask for " + r.string());
    }
    scenes.emplace_back(r, m);
  }
  if (scenes.empty()) {
    throw DataError("no .mqr scenes in " + dir.string());
  }
  return scenes;
}

std::vector<train::TrainPatch> load_patch_set(const fs::path& dir,
                                              int patch_size) {
  std::vector<train::TrainPatch> set;
  for (const auto& [rpath, mpath] : list_scenes(dir)) {
    data::Raster raster = data::read_raster(rpath);
    if (raster.bands != data::kModelBands) {
      throw DataError(rpath.string() + ": model input needs 12 bands");
    }
    const Mask gt = data::read_mask(mpath);
    if (gt.h != raster.height || gt.w != raster.width) {
      throw DataError(mpath.string() + ": mask shape mismatch");
    }
    if (raster.scale != 1.0) data::normalize(raster, raster.scale);
    // Clamp the tile size to the scene so small scenes stay one patch.
    const int even_h = raster.height + raster.height % 2;
    const int even_w = raster.width + raster.width % 2;
    const int size = std::min({patch_size, even_h, even_w});
    for (auto& p : data::extract_patches(raster, gt, size, size)) {
      train::TrainPatch tp;
      tp.x = data::tensor_from_raster(p.raster);
      tp.gt = std::move(p.gt);
      tp.valid = std::move(p.valid);
      set.push_back(std::move(tp));
    }
  }
  return set;
}

int cmd_train(const std::string& train_dir, const std::string& val_dir,
              const std::string& out, const std::string& variant_name,
              std::uint64_t seed, int feat_width, int epochs, int batch,
              int workers) {
  train::TrainConfig config;
  config.variant = model::parse_variant(variant_name);
  config.feat_width = feat_width;
  config.max_epochs = epochs;
  config.batch_size = batch;
  config.seed = seed;
  config.workers = resolve_workers(workers);

  const auto train_set = load_patch_set(train_dir, 256);
  const auto val_set = load_patch_set(val_dir, 256);

  const train::TrainResult result = train::train(train_set, val_set, config);
  train::save_checkpoint(out, result.best_params);
  train::write_history_csv(fs::path(out).string() + ".history.csv",
                           result.history);
  std::printf("epochs run      %zu%s\n", result.history.size(),
              result.stopped_early ? " (stopped early)" : "");
  std::printf("best epoch      %d\n", result.best_epoch);
  std::printf("best val kappa  %.6f\n", result.best_kappa);
  std::printf("checkpoint      %s\n", out.c_str());
  return 0;
}

int cmd_predict(const std::string& checkpoint, const std::string& input,
                const std::string& out, std::optional<double> threshold,
                int workers) {
  const model::ModelParams params = train::load_checkpoint(checkpoint);
  data::Raster raster = data::read_raster(input);
  if (raster.bands != data::kModelBands) {
    throw DataError(input + ": model input needs 12 bands");
  }
  if (raster.scale != 1.0) data::normalize(raster, raster.scale);

  const data::PaddedRaster padded = data::pad_even(raster);
  const Tensor x = data::tensor_from_raster(padded.raster);
  const Map y_padded =
      model::forward(x, params, resolve_workers(workers));

  // Crop back to the original extent.
  Map y(raster.height, raster.width);
  for (int yy = 0; yy < raster.height; ++yy) {
    for (int xx = 0; xx < raster.width; ++xx) {
      y.at(yy, xx) = y_padded.at(yy, xx);
    }
  }

  double t;
  Mask cls;
  if (threshold.has_value()) {
    t = *threshold;
    cls = model::apply_threshold(y, t);
  } else {
    auto r = model::auto_threshold(y);
    t = r.threshold;
    cls = std::move(r.map);
  }

  data::Raster sigmoid_raster;
  sigmoid_raster.height = y.h;
  sigmoid_raster.width = y.w;
  sigmoid_raster.bands = 1;
  sigmoid_raster.band_names = {"sigmoid"};
  sigmoid_raster.scale = 1.0;
  sigmoid_raster.values.resize(y.v.size());
  for (std::size_t i = 0; i < y.v.size(); ++i) {
    sigmoid_raster.values[i] = static_cast<float>(y.v[i]);
  }
  data::write_raster(out + ".sigmoid.mqr", sigmoid_raster);
  data::write_mask(out + ".class.mqm", cls);
  std::printf("threshold %.9g (%s)\n", t,
              threshold.has_value() ? "override" : "auto");
  return 0;
}

int cmd_evaluate(const std::string& pred_path, const std::string& gt_path,
                 const std::string& report) {
  const Mask pred = data::read_mask(pred_path);
  const Mask gt = data::read_mask(gt_path);
  if (pred.h != gt.h || pred.w != gt.w) {
    throw DataError("prediction/ground-truth shape mismatch");
  }
  const metrics::ConfusionMatrix cm = metrics::confusion(pred, gt);
  std::fputs(metrics::metrics_table(cm).c_str(), stdout);
  if (!report.empty()) metrics::write_metrics_csv(report, cm);
  return 0;
}

int cmd_index(const std::string& input, const std::string& index_name,
              const std::string& out, std::optional<double> threshold) {
  const indices::IndexKind kind = indices::parse_index(index_name);
  const data::Raster raster = data::read_raster(input);
  const indices::IndexResult result = indices::compute_index(kind, raster);

  data::Raster map_raster;
  map_raster.height = result.map.h;
  map_raster.width = result.map.w;
  map_raster.bands = 1;
  map_raster.band_names = {indices::index_name(kind)};
  map_raster.scale = 1.0;
  map_raster.values.resize(result.map.v.size());
  for (std::size_t i = 0; i < result.map.v.size(); ++i) {
    map_raster.values[i] = static_cast<float>(result.map.v[i]);
  }
  data::write_raster(out + ".mqr", map_raster);
  std::printf("flagged pixels (zero denominator): %zu\n", result.flagged);

  std::optional<double> t = threshold;
  if (!t.has_value()) t = indices::default_threshold(kind);
  if (t.has_value()) {
    const Mask cls = indices::classify_index(result.map, *t);
    data::write_mask(out + ".class.mqm", cls);
    std::printf("threshold %.9g\n", *t);
  } else {
    std::printf("no threshold for %s; map only (pass --threshold)\n",
                indices::index_name(kind).c_str());
  }
  return 0;
}

int cmd_synth(const std::string& out, std::uint64_t seed, int size,
              double noise) {
  data::SynthSpec spec;
  spec.seed = seed;
  spec.height = size;
  spec.width = size;
  spec.noise_std = noise;
  const data::SynthScene scene = data::synth_scene(spec);
  data::write_raster(out + ".mqr", scene.raster);
  data::write_mask(out + ".mqm", scene.mask);
  std::size_t positives = 0;
  for (auto b : scene.mask.v) positives += b;
  std::printf("scene %dx%dx%d, mangrove fraction %.3f\n", scene.raster.height,
              scene.raster.width, scene.raster.bands,
              static_cast<double>(positives) /
                  static_cast<double>(scene.mask.v.size()));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"QEDNet dual-branch mangrove mapping toolkit"};
  app.require_subcommand(1);

  // train
  auto* train_cmd = app.add_subcommand("train", "Train a model");
  std::string train_dir, val_dir, train_out;
  std::string variant = "cnn_qnn";
  std::uint64_t seed = 0;
  int feat_width = 64, epochs = 200, batch = 1, workers = 0;
  train_cmd->add_option("--train-dir", train_dir, "Directory of training scenes")
      ->required();
  train_cmd->add_option("--val-dir", val_dir, "Directory of validation scenes")
      ->required();
  train_cmd->add_option("--out", train_out, "Checkpoint output path")
      ->required();
  train_cmd->add_option("--variant", variant, "cnn_only|cnn_cnn|cnn_qnn")
      ->check(CLI::IsMember({"cnn_only", "cnn_cnn", "cnn_qnn"}));
  train_cmd->add_option("--seed", seed, "Random seed");
  train_cmd->add_option("--feat-width", feat_width, "CNN feature width")
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--epochs", epochs, "Maximum epochs")
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--batch", batch, "Patches per optimizer step")
      ->check(CLI::PositiveNumber);
  train_cmd->add_option("--workers", workers, "Worker threads (0 = auto)");

  // predict
  auto* predict_cmd = app.add_subcommand("predict", "Classify a raster");
  std::string checkpoint, input, predict_out;
  double threshold_value = 0.0;
  auto* predict_threshold =
      predict_cmd->add_option("--threshold", threshold_value,
                              "Override the automatic threshold");
  predict_cmd->add_option("--checkpoint", checkpoint, "Trained checkpoint")
      ->required();
  predict_cmd->add_option("--input", input, "Input raster (.mqr)")->required();
  predict_cmd->add_option("--out", predict_out, "Output stem")->required();
  predict_cmd->add_option("--workers", workers, "Worker threads (0 = auto)");

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "Score a classification");
  std::string pred_path, gt_path, report;
  eval_cmd->add_option("prediction", pred_path, "Predicted mask (.mqm)")
      ->required();
  eval_cmd->add_option("truth", gt_path, "Ground-truth mask (.mqm)")
      ->required();
  eval_cmd->add_option("--report", report, "Write metrics CSV here");

  // index
  auto* index_cmd = app.add_subcommand("index", "Compute an index baseline");
  std::string index_name, index_out, index_input;
  double index_threshold_value = 0.0;
  index_cmd->add_option("--input", index_input, "Input raster (.mqr)")
      ->required();
  index_cmd
      ->add_option("--index", index_name, "ndvi|mndwi|mmri|mvi|emvi")
      ->required()
      ->check(CLI::IsMember({"ndvi", "mndwi", "mmri", "mvi", "emvi"}));
  index_cmd->add_option("--out", index_out, "Output stem")->required();
  auto* index_threshold = index_cmd->add_option(
      "--threshold", index_threshold_value, "Classification threshold");

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic scene");
  std::string synth_out;
  int synth_size = 64;
  double synth_noise = 0.03;
  synth_cmd->add_option("--out", synth_out, "Output stem")->required();
  synth_cmd->add_option("--seed", seed, "Random seed");
  synth_cmd->add_option("--size", synth_size, "Scene height and width")
      ->check(CLI::Range(2, 4096));
  synth_cmd->add_option("--noise", synth_noise, "Gaussian noise std")
      ->check(CLI::NonNegativeNumber);

  // selftest
  auto* selftest_cmd =
      app.add_subcommand("selftest", "Run the library invariant suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (train_cmd->parsed()) {
      return cmd_train(train_dir, val_dir, train_out, variant, seed,
                       feat_width, epochs, batch, workers);
    }
    if (predict_cmd->parsed()) {
      std::optional<double> t;
      if (predict_threshold->count() > 0) t = threshold_value;
      return cmd_predict(checkpoint, input, predict_out, t, workers);
    }
    if (eval_cmd->parsed()) {
      return cmd_evaluate(pred_path, gt_path, report);
    }
    if (index_cmd->parsed()) {
      std::optional<double> t;
      if (index_threshold->count() > 0) t = index_threshold_value;
      return cmd_index(index_input, index_name, index_out, t);
    }
    if (synth_cmd->parsed()) {
      return cmd_synth(synth_out, seed, synth_size, synth_noise);
    }
    if (selftest_cmd->parsed()) {
      return selftest::run(std::cout) == 0 ? 0 : kExitRuntime;
    }
  } catch (const ContainerError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kExitData;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return kExitData;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return kExitConfig;
}

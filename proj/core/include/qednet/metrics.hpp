#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "qednet/tensor.hpp"

// Binary-classification scoring: a 2x2 confusion table of joint
// probabilities P(pred = i, actual = j) and the three summary metrics
// reported on it (overall accuracy, average per-class accuracy, Cohen's
// kappa).
namespace qednet::metrics {

struct ConfusionMatrix {
  // counts[pred][actual]
  std::uint64_t counts[2][2] = {{0, 0}, {0, 0}};

  std::uint64_t total() const {
    return counts[0][0] + counts[0][1] + counts[1][0] + counts[1][1];
  }
  double p(int pred, int actual) const {
    return static_cast<double>(counts[pred][actual]) /
           static_cast<double>(total());
  }
  double pred_marginal(int n) const { return p(n, 0) + p(n, 1); }
  double actual_marginal(int n) const { return p(0, n) + p(1, n); }

  ConfusionMatrix& operator+=(const ConfusionMatrix& other) {
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) counts[i][j] += other.counts[i][j];
    return *this;
  }
};

// Tabulate over pixels where `valid` is nonzero (all pixels when null).
ConfusionMatrix confusion(const Mask& pred, const Mask& actual,
                          const Mask* valid = nullptr);

double oa_percent(const ConfusionMatrix& cm);

// Per-class accuracies averaged with equal class weight. The default
// denominator is the actual-class marginal (mean of per-class recalls);
// Predicted switches to the prediction marginal. A class absent from the
// chosen marginal is skipped and *degenerate is set when provided.
enum class AaMarginal { Actual, Predicted };
double aa_percent(const ConfusionMatrix& cm,
                  AaMarginal marginal = AaMarginal::Actual,
                  bool* degenerate = nullptr);

// Chance-agreement term p_e = sum_n P_n. * P_.n.
double chance_agreement(const ConfusionMatrix& cm);

// kappa = (OA - p_e) / (1 - p_e); defined as 0 when p_e reaches 1.
double kappa(const ConfusionMatrix& cm);

// Aligned plain-text block with one row per metric (OA / AA / kappa).
std::string metrics_table(const ConfusionMatrix& cm);

// CSV with header "metric,value" and rows oa_percent, aa_percent, kappa.
void write_metrics_csv(const std::filesystem::path& path,
                       const ConfusionMatrix& cm);

}  // namespace qednet::metrics

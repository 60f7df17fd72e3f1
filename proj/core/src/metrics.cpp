#include "qednet/metrics.hpp"

#include <cstdio>
#include <fstream>

namespace qednet::metrics {

ConfusionMatrix confusion(const Mask& pred, const Mask& actual,
                          const Mask* valid) {
  require(pred.h == actual.h && pred.w == actual.w,
          "prediction/ground-truth shape mismatch");
  if (valid != nullptr) {
    require(valid->h == pred.h && valid->w == pred.w,
            "validity mask shape mismatch");
  }
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < pred.v.size(); ++i) {
    if (valid != nullptr && valid->v[i] == 0) continue;
    ++cm.counts[pred.v[i] ? 1 : 0][actual.v[i] ? 1 : 0];
  }
  require(cm.total() > 0, "confusion matrix needs at least one valid pixel");
  return cm;
}

double oa_percent(const ConfusionMatrix& cm) {
  return 100.0 * (cm.p(0, 0) + cm.p(1, 1));
}

double aa_percent(const ConfusionMatrix& cm, AaMarginal marginal,
                  bool* degenerate) {
  if (degenerate != nullptr) *degenerate = false;
  double sum = 0.0;
  int present = 0;
  for (int n = 0; n < 2; ++n) {
    const double denom = marginal == AaMarginal::Actual
                             ? cm.actual_marginal(n)
                             : cm.pred_marginal(n);
    if (denom <= 0.0) {
      if (degenerate != nullptr) *degenerate = true;
      continue;
    }
    sum += cm.p(n, n) / denom;
    ++present;
  }
  if (present == 0) return 0.0;
  return 100.0 * sum / present;
}

double chance_agreement(const ConfusionMatrix& cm) {
  double pe = 0.0;
  for (int n = 0; n < 2; ++n) {
    pe += cm.pred_marginal(n) * cm.actual_marginal(n);
  }
  return pe;
}

double kappa(const ConfusionMatrix& cm) {
  const double oa = cm.p(0, 0) + cm.p(1, 1);
  const double pe = chance_agreement(cm);
  if (pe >= 1.0) return 0.0;  // both marginals concentrated on one class
  return (oa - pe) / (1.0 - pe);
}

std::string metrics_table(const ConfusionMatrix& cm) {
  char buf[160];
  std::string out;
  std::snprintf(buf, sizeof(buf), "%-8s %10.2f\n", "OA (%)", oa_percent(cm));
  out += buf;
  std::snprintf(buf, sizeof(buf), "%-8s %10.2f\n", "AA (%)", aa_percent(cm));
  out += buf;
  std::snprintf(buf, sizeof(buf), "%-8s %10.3f\n", "kappa", kappa(cm));
  out += buf;
  return out;
}

void write_metrics_csv(const std::filesystem::path& path,
                       const ConfusionMatrix& cm) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  char buf[64];
  out << "metric,value\n";
  std::snprintf(buf, sizeof(buf), "%.17g", oa_percent(cm));
  out << "oa_percent," << buf << "\n";
  std::snprintf(buf, sizeof(buf), "%.17g", aa_percent(cm));
  out << "aa_percent," << buf << "\n";
  std::snprintf(buf, sizeof(buf), "%.17g", kappa(cm));
  out << "kappa," << buf << "\n";
}

}  // namespace qednet::metrics

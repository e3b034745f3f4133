#include "polypnet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "polypnet/errors.hpp"

namespace polypnet {

ConfusionMatrix confusion(std::span<const double> scores, std::span<const double> labels,
                          double threshold) {
  if (scores.empty() || scores.size() != labels.size()) {
    throw ValueError("confusion: need equal-length, non-empty scores and labels");
  }
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 0.0 && labels[i] != 1.0) {
      throw ValueError("confusion: labels must be binary");
    }
    if (!(scores[i] >= 0.0 && scores[i] <= 1.0)) {
      throw ValueError("confusion: scores must lie in [0,1]");
    }
    const bool positive = scores[i] >= threshold;
    if (labels[i] == 1.0) {
      positive ? ++cm.tp : ++cm.fn;
    } else {
      positive ? ++cm.fp : ++cm.tn;
    }
  }
  return cm;
}

MetricSet metrics(const ConfusionMatrix& cm) {
  const double total = static_cast<double>(cm.total());
  if (cm.total() == 0) throw ValueError("metrics: empty confusion matrix");
  MetricSet m;
  m.accuracy = static_cast<double>(cm.tp + cm.tn) / total;
  m.misclassification = static_cast<double>(cm.fp + cm.fn) / total;
  if (cm.tp + cm.fn > 0) m.sensitivity = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fn);
  if (cm.tp + cm.fp > 0) m.precision = static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fp);
  if (cm.tn + cm.fp > 0) m.specificity = static_cast<double>(cm.tn) / static_cast<double>(cm.tn + cm.fp);
  if (m.precision && m.sensitivity && *m.precision + *m.sensitivity > 0.0) {
    m.f1 = 2.0 * *m.precision * *m.sensitivity / (*m.precision + *m.sensitivity);
  }
  return m;
}

RocCurve roc(std::span<const double> scores, std::span<const double> labels) {
  if (scores.empty() || scores.size() != labels.size()) {
    throw ValueError("roc: need equal-length, non-empty scores and labels");
  }
  std::uint64_t pos = 0, neg = 0;
  for (double y : labels) {
    if (y != 0.0 && y != 1.0) throw ValueError("roc: labels must be binary");
    y == 1.0 ? ++pos : ++neg;
  }
  if (pos == 0 || neg == 0) {
    throw ValueError("roc needs both classes present");
  }

  // Sort by score descending; sweep thresholds over distinct values so tied
  // scores move as one group (this is what makes the trapezoid area equal the
  // tie-corrected pairwise statistic).
  std::vector<std::size_t> order(scores.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocCurve curve;
  curve.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  std::uint64_t tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double s = scores[order[i]];
    while (i < order.size() && scores[order[i]] == s) {
      labels[order[i]] == 1.0 ? ++tp : ++fp;
      ++i;
    }
    curve.points.push_back({s, static_cast<double>(fp) / static_cast<double>(neg),
                            static_cast<double>(tp) / static_cast<double>(pos)});
  }
  // Below-min sentinel; with the >= rule the min threshold already classifies
  // everything positive, so this repeats (1,1) and adds no area.
  curve.points.push_back({-std::numeric_limits<double>::infinity(), 1.0, 1.0});

  double auc = 0.0;
  for (std::size_t k = 1; k < curve.points.size(); ++k) {
    const auto& a = curve.points[k - 1];
    const auto& b = curve.points[k];
    auc += (b.fpr - a.fpr) * (a.tpr + b.tpr) / 2.0;
  }
  curve.auc = auc;
  return curve;
}

}  // namespace polypnet

#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace polypnet {

/// Binary-classification counts; label 1 = polyp = positive class.
struct ConfusionMatrix {
  std::uint64_t tn = 0, fp = 0, fn = 0, tp = 0;
  std::uint64_t total() const { return tn + fp + fn + tp; }
};

/// Tally with the decision rule: predict positive iff score >= threshold.
ConfusionMatrix confusion(std::span<const double> scores, std::span<const double> labels,
                          double threshold = 0.5);

// Derived rates; a 0/0 denominator leaves that metric unset rather than NaN.
struct MetricSet {
  std::optional<double> accuracy, misclassification, sensitivity, precision, specificity, f1;
};

MetricSet metrics(const ConfusionMatrix& cm);

struct RocPoint {
  double threshold = 0.0;  // +-inf at the sentinel endpoints
  double fpr = 0.0, tpr = 0.0;
};

/// Threshold sweep over the distinct score values plus sentinels; fpr/tpr are
/// non-decreasing, endpoints are exactly (0,0) and (1,1), and the trapezoid
/// area equals the tie-corrected pairwise-comparison statistic.
struct RocCurve {
  std::vector<RocPoint> points;
  double auc = 0.0;
};

RocCurve roc(std::span<const double> scores, std::span<const double> labels);

}  // namespace polypnet

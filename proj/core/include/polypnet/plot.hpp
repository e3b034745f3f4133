#pragma once

#include <filesystem>

#include "polypnet/metrics.hpp"
#include "polypnet/train.hpp"

namespace polypnet {

// Self-contained SVG output with a fixed coordinate layout so tests can
// assert on parsed geometry:
//   canvas 720x360 per panel, margins 50 (left/bottom) and 20 (top/right);
//   data polylines carry stable ids (train_acc, val_acc, train_loss,
//   val_loss, roc) and one "x,y" pair per data point.

/// Two panels: accuracy (train/val) and loss (train/val) over epochs.
void write_performance_svg(const TrainingHistory& history, const std::filesystem::path& path);

/// 2x2 grid with the counts; cell text ids cell_tn, cell_fp, cell_fn, cell_tp.
void write_confusion_svg(const ConfusionMatrix& cm, const std::filesystem::path& path);

/// ROC polyline plus the chance diagonal; the legend text (id auc_label)
/// carries the area value.
void write_roc_svg(const RocCurve& curve, const std::filesystem::path& path);

}  // namespace polypnet

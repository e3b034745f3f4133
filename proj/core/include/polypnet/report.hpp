#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "polypnet/metrics.hpp"
#include "polypnet/train.hpp"

namespace polypnet {

// Everything the report tables need about one finished run. The *-Best
// entries come from the best checkpoint, the plain entries from the final
// weights; both were evaluated on the test split.
struct RunRecord {
  std::string model;        // grid key, e.g. "M1-4"
  std::string description;  // "3CNN", "4CNN", "Augment", "Fine Tune Augment", ""
  std::vector<double> dropout;
  TrainingHistory history;
  ConfusionMatrix cm_final, cm_best;
  double auc_final = 0.0, auc_best = 0.0;
};

// Emits the four result tables plus a combined plain-text summary:
//   table1.csv  model,description,dropout,epoch,elapsed_min
//   table2.csv  model,epoch,loss,acc,val_loss,val_acc
//   table3.csv  model,tn,fp,fn,tp,accuracy,misclassification
//   table4.csv  model,sensitivity,precision,specificity,f1,roc
// Accuracy renders as one-decimal percent, misclassification as integer
// percent, table4 as integer percents. Emission is deterministic.
void emit_report(const std::vector<RunRecord>& runs, const std::filesystem::path& out_dir);

/// "n/a" for unset metrics; otherwise the metric as a percent with the given
/// number of decimals.
std::string render_percent(const std::optional<double>& value, int decimals);

}  // namespace polypnet

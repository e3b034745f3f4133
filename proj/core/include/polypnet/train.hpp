#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "polypnet/augment.hpp"
#include "polypnet/dataset.hpp"
#include "polypnet/network.hpp"
#include "polypnet/optimizer.hpp"
#include "polypnet/weights.hpp"

namespace polypnet {

struct TrainConfig {
  std::size_t max_epochs = 3000;
  std::size_t patience = 200;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  AdamConfig adam{};
  AugmentConfig augment{};  // identity config = augmentation off

  void validate() const;  // patience <= max_epochs, batch_size >= 1, epochs >= 1
};

struct EpochRow {
  std::size_t epoch = 0;  // 1-based
  double loss = 0.0, acc = 0.0, val_loss = 0.0, val_acc = 0.0;
};

enum class StopReason { patience_exhausted, max_epochs };

std::string stop_reason_name(StopReason r);

struct TrainingHistory {
  std::vector<EpochRow> rows;
  std::size_t best_epoch = 0;  // earliest maximizer of val_acc
  StopReason stop_reason = StopReason::max_epochs;
  double elapsed_minutes = 0.0;  // wall clock; lives outside history.csv
  bool overfit_flag = false;
};

// Early stopping on the monitored value: strict improvement refreshes the
// checkpoint, and training stops once (epoch - best_epoch) >= patience.
class StoppingMonitor {
 public:
  explicit StoppingMonitor(std::size_t patience);

  struct Decision {
    bool improved = false;
    bool stop = false;
  };
  Decision observe(std::size_t epoch, double value);

  std::size_t best_epoch() const { return best_epoch_; }
  double best_value() const { return best_value_; }

 private:
  std::size_t patience_;
  std::size_t best_epoch_ = 0;
  double best_value_;
};

struct Evaluation {
  double loss = 0.0;
  double accuracy = 0.0;
};

/// Eval-mode loss/accuracy over a sample list (prediction rule: p >= 0.5).
Evaluation evaluate(Network& net, const std::vector<Sample>& samples,
                    std::size_t batch_size = 64);

/// Eval-mode scores (positive-class probabilities) in sample order.
std::vector<double> predict_scores(Network& net, const std::vector<Sample>& samples,
                                   std::size_t batch_size = 64);

struct TrainResult {
  TrainingHistory history;
  WeightContainer best;    // checkpoint at best_epoch
  WeightContainer final_;  // weights when training stopped
};

/// The full protocol: per epoch, generator batches through forward/loss/
/// backward/adam, then an eval-mode validation pass; best-checkpoint on
/// strict val_acc improvement; stop on patience or the epoch cap.
TrainResult train(Network& net, const LabeledDataset& data, const TrainConfig& cfg);

/// True iff over the trailing `window` epochs the val_loss trend slope is
/// strictly positive while the train-loss slope is non-positive. Requires
/// at least 2*window rows.
bool detect_overfit(const TrainingHistory& history, std::size_t window);

void write_history_csv(const TrainingHistory& history, const std::filesystem::path& path);
TrainingHistory read_history_csv(const std::filesystem::path& path);

}  // namespace polypnet

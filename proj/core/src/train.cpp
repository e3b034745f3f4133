#include "polypnet/train.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>

#include "polypnet/errors.hpp"
#include "polypnet/text.hpp"

namespace polypnet {

void TrainConfig::validate() const {
  if (max_epochs == 0) throw ValueError("max_epochs must be >= 1");
  if (patience == 0 || patience > max_epochs) {
    throw ValueError("patience must be in [1, max_epochs]");
  }
  if (batch_size == 0) throw ValueError("batch_size must be >= 1");
  adam.validate();
  augment.validate();
}

std::string stop_reason_name(StopReason r) {
  return r == StopReason::patience_exhausted ? "patience_exhausted" : "max_epochs";
}

StoppingMonitor::StoppingMonitor(std::size_t patience)
    : patience_(patience), best_value_(-std::numeric_limits<double>::infinity()) {
  if (patience == 0) throw ValueError("patience must be >= 1");
}

StoppingMonitor::Decision StoppingMonitor::observe(std::size_t epoch, double value) {
  Decision d;
  if (value > best_value_) {  // ties do not refresh the checkpoint
    best_value_ = value;
    best_epoch_ = epoch;
    d.improved = true;
  }
  d.stop = epoch - best_epoch_ >= patience_;
  return d;
}

namespace {

Tensor batch_of(const std::vector<Sample>& samples, std::size_t begin, std::size_t count) {
  const auto& shape = samples[begin].image.shape();
  const std::size_t len = shape_product(shape);
  std::vector<double> data(count * len);
  for (std::size_t i = 0; i < count; ++i) {
    const auto& img = samples[begin + i].image;
    std::copy(img.flat().begin(), img.flat().end(), data.begin() + i * len);
  }
  std::vector<std::size_t> bshape{count};
  bshape.insert(bshape.end(), shape.begin(), shape.end());
  return unchecked_tensor(std::move(bshape), std::move(data));
}

}  // namespace

std::vector<double> predict_scores(Network& net, const std::vector<Sample>& samples,
                                   std::size_t batch_size) {
  if (samples.empty()) throw ValueError("cannot score an empty split");
  std::vector<double> scores;
  scores.reserve(samples.size());
  for (std::size_t begin = 0; begin < samples.size(); begin += batch_size) {
    const std::size_t count = std::min(batch_size, samples.size() - begin);
    const Tensor probs = net.forward(batch_of(samples, begin, count), Mode::eval);
    for (std::size_t i = 0; i < count; ++i) scores.push_back(probs[i]);
  }
  return scores;
}

Evaluation evaluate(Network& net, const std::vector<Sample>& samples, std::size_t batch_size) {
  if (samples.empty()) throw ValueError("cannot evaluate an empty split");
  double loss_total = 0.0;
  std::size_t correct = 0;
  for (std::size_t begin = 0; begin < samples.size(); begin += batch_size) {
    const std::size_t count = std::min(batch_size, samples.size() - begin);
    const Tensor probs = net.forward(batch_of(samples, begin, count), Mode::eval);
    std::vector<double> labels(count);
    for (std::size_t i = 0; i < count; ++i) {
      labels[i] = static_cast<double>(samples[begin + i].label);
    }
    const Tensor y = unchecked_tensor({count, 1}, std::move(labels));
    loss_total += net.loss(y) * static_cast<double>(count);
    for (std::size_t i = 0; i < count; ++i) {
      const int predicted = probs[i] >= 0.5 ? 1 : 0;
      if (predicted == samples[begin + i].label) ++correct;
    }
  }
  const double n = static_cast<double>(samples.size());
  return {loss_total / n, static_cast<double>(correct) / n};
}

TrainResult train(Network& net, const LabeledDataset& data, const TrainConfig& cfg) {
  cfg.validate();
  const auto train_samples = data.samples_of(Split::train);
  const auto val_samples = data.samples_of(Split::val);
  if (train_samples.empty() || val_samples.empty()) {
    throw ValueError("train and val splits must be non-empty");
  }

  const auto t0 = std::chrono::steady_clock::now();
  Rng root(cfg.seed);
  Rng dropout_rng = root.child(1);
  DataGenerator generator(train_samples, cfg.augment, cfg.batch_size, root.child(2));

  Adam adam(net.trainable_slots(), cfg.adam);
  StoppingMonitor monitor(cfg.patience);

  TrainingHistory history;
  WeightContainer best = snapshot(net);

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    double loss_total = 0.0;
    std::size_t correct = 0, seen = 0;
    while (true) {
      const Batch batch = generator.next();
      const std::size_t n = batch.labels.size();
      const Tensor probs = net.forward(batch.images, Mode::train, &dropout_rng);
      const double batch_loss = net.loss(batch.labels);
      if (!std::isfinite(batch_loss)) {
        throw ValueError("non-finite training loss at epoch " + std::to_string(epoch) +
                         ", batch " + std::to_string(seen / cfg.batch_size + 1));
      }
      net.backward(batch.labels);
      adam.step();

      loss_total += batch_loss * static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) {
        const int predicted = probs[i] >= 0.5 ? 1 : 0;
        if (predicted == static_cast<int>(batch.labels[i])) ++correct;
      }
      seen += n;
      if (batch.epoch_end) break;
    }

    const Evaluation val = evaluate(net, val_samples, cfg.batch_size);
    EpochRow row;
    row.epoch = epoch;
    row.loss = loss_total / static_cast<double>(seen);
    row.acc = static_cast<double>(correct) / static_cast<double>(seen);
    row.val_loss = val.loss;
    row.val_acc = val.accuracy;
    history.rows.push_back(row);

    const auto decision = monitor.observe(epoch, val.accuracy);
    if (decision.improved) best = snapshot(net);
    if (decision.stop) {
      history.stop_reason = StopReason::patience_exhausted;
      break;
    }
    if (epoch == cfg.max_epochs) {
      history.stop_reason = StopReason::max_epochs;
    }
  }

  history.best_epoch = monitor.best_epoch();
  history.elapsed_minutes =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / 60.0;
  constexpr std::size_t kOverfitWindow = 20;
  history.overfit_flag =
      history.rows.size() >= 2 * kOverfitWindow && detect_overfit(history, kOverfitWindow);

  return {std::move(history), std::move(best), snapshot(net)};
}

bool detect_overfit(const TrainingHistory& history, std::size_t window) {
  if (window == 0) throw ValueError("overfit window must be >= 1");
  if (history.rows.size() < 2 * window) {
    throw ValueError("history too short for overfit detection: need " +
                     std::to_string(2 * window) + " rows, have " +
                     std::to_string(history.rows.size()));
  }
  // Least-squares slope over the trailing window.
  const auto slope = [&](auto pick) {
    const std::size_t n = window;
    const std::size_t start = history.rows.size() - n;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double x = static_cast<double>(i);
      const double y = pick(history.rows[start + i]);
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    const double dn = static_cast<double>(n);
    return (dn * sxy - sx * sy) / (dn * sxx - sx * sx);
  };
  const double val_slope = slope([](const EpochRow& r) { return r.val_loss; });
  const double train_slope = slope([](const EpochRow& r) { return r.loss; });
  return val_slope > 0.0 && train_slope <= 0.0;
}

void write_history_csv(const TrainingHistory& history, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "epoch,loss,acc,val_loss,val_acc\n";
  for (const auto& r : history.rows) {
    out << r.epoch << "," << format_double(r.loss) << "," << format_double(r.acc) << ","
        << format_double(r.val_loss) << "," << format_double(r.val_acc) << "\n";
  }
  out << "# stop_reason=" << stop_reason_name(history.stop_reason)
      << ",best_epoch=" << history.best_epoch << "\n";
  if (!out) throw IoError("failed writing " + path.string());
}

TrainingHistory read_history_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  TrainingHistory h;
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      for (const auto& field : split(trim(line.substr(1)), ',')) {
        const auto eq = field.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = trim(field.substr(0, eq)), val = trim(field.substr(eq + 1));
        if (key == "stop_reason") {
          h.stop_reason = val == "patience_exhausted" ? StopReason::patience_exhausted
                                                      : StopReason::max_epochs;
        } else if (key == "best_epoch") {
          h.best_epoch = static_cast<std::size_t>(std::stoull(val));
        }
      }
      continue;
    }
    if (!header) {
      if (line.rfind("epoch,", 0) != 0) throw FormatError("bad history header: " + line);
      header = true;
      continue;
    }
    const auto f = split(trim(line), ',');
    if (f.size() != 5) throw FormatError("bad history row: " + line);
    h.rows.push_back({static_cast<std::size_t>(std::stoull(f[0])), parse_double(f[1]),
                      parse_double(f[2]), parse_double(f[3]), parse_double(f[4])});
  }
  if (!header) throw FormatError("history file has no header: " + path.string());
  return h;
}

}  // namespace polypnet

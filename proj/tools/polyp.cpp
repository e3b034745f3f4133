// polyp: experiment harness CLI.
//
//   polyp prepare  <data_root> <out_dir>             build crops + manifest
//   polyp train    <config> <dataset> <out_dir>      train one model
//   polyp evaluate <weights> <dataset> <out_dir>     test-split metrics/ROC
//   polyp grid     <config> [out_root]               run every model block
//   polyp report   <runs_dir> <out_dir>              emit tables and plots

#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cstring>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "polypnet/augment.hpp"
#include "polypnet/config.hpp"
#include "polypnet/dataset.hpp"
#include "polypnet/errors.hpp"
#include "polypnet/metrics.hpp"
#include "polypnet/models.hpp"
#include "polypnet/plot.hpp"
#include "polypnet/report.hpp"
#include "polypnet/synthetic.hpp"
#include "polypnet/text.hpp"
#include "polypnet/train.hpp"
#include "polypnet/weights.hpp"

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;
using namespace polypnet;

namespace {

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> batch_size;
  std::optional<std::pair<std::size_t, std::size_t>> input_size;  // (h,w)
  std::size_t parallel = 1;
};

std::pair<std::size_t, std::size_t> parse_hxw(const std::string& s) {
  const auto parts = split(s, 'x');
  if (parts.size() != 2) throw ValueError("expected HxW, got " + s);
  return {static_cast<std::size_t>(std::stoull(parts[0])),
          static_cast<std::size_t>(std::stoull(parts[1]))};
}

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

void apply_overrides(ExperimentConfig& cfg, const Overrides& ov) {
  if (ov.seed) {
    cfg.train.seed = *ov.seed;
    cfg.dataset.seed = *ov.seed;
  }
  if (ov.batch_size) cfg.train.batch_size = *ov.batch_size;
  if (ov.input_size) {
    cfg.dataset.input_h = ov.input_size->first;
    cfg.dataset.input_w = ov.input_size->second;
    cfg.dataset.crop.out_h = ov.input_size->first;
    cfg.dataset.crop.out_w = ov.input_size->second;
    for (auto& m : cfg.models) {
      m.input_shape = {cfg.dataset.channels, ov.input_size->first, ov.input_size->second};
    }
  }
}

// ---------------------------------------------------------------- dataset io

void write_dataset_json(const fs::path& dir, const std::string& root, std::size_t h,
                        std::size_t w, std::uint64_t seed) {
  Json j;
  j["root"] = root;
  j["input_size"] = {h, w};
  j["seed"] = seed;
  std::ofstream out(dir / "dataset.json");
  if (!out) throw IoError("cannot write " + (dir / "dataset.json").string());
  out << j.dump(2) << "\n";
}

// A prepared dataset directory holds manifest.csv plus dataset.json pointing
// back at the raw data root.
LabeledDataset load_prepared_dataset(const fs::path& dataset_dir,
                                     std::optional<std::string> root_override = {}) {
  const fs::path manifest_path = fs::is_directory(dataset_dir)
                                     ? dataset_dir / "manifest.csv"
                                     : dataset_dir;
  const Manifest manifest = read_manifest(manifest_path);
  std::string root;
  if (root_override && !root_override->empty()) {
    root = *root_override;
  } else {
    const fs::path meta = manifest_path.parent_path() / "dataset.json";
    if (!fs::exists(meta)) {
      throw IoError("no dataset.json beside " + manifest_path.string() +
                    " and no dataset root configured");
    }
    std::ifstream in(meta);
    Json j = Json::parse(in);
    root = j.at("root").get<std::string>();
  }
  return regenerate_dataset(manifest, root);
}

// ---------------------------------------------------------------- run output

struct CheckpointEval {
  ConfusionMatrix cm;
  MetricSet metric_set;
  RocCurve curve;
};

CheckpointEval eval_checkpoint(Network& net, const std::vector<Sample>& test) {
  CheckpointEval e;
  const std::vector<double> scores = predict_scores(net, test);
  std::vector<double> labels(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) labels[i] = static_cast<double>(test[i].label);
  e.cm = confusion(scores, labels);
  e.metric_set = metrics(e.cm);
  e.curve = roc(scores, labels);
  return e;
}

void write_metrics_csv(const fs::path& path,
                       const std::vector<std::pair<std::string, const CheckpointEval*>>& rows) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "# positive_class=polyp decision_rule=score>=0.5\n";
  out << "checkpoint,tn,fp,fn,tp,accuracy,misclassification,sensitivity,precision,specificity,"
         "f1,auc\n";
  const auto cell = [](const std::optional<double>& v) {
    return v ? format_double(*v) : std::string("n/a");
  };
  for (const auto& [name, e] : rows) {
    const auto& m = e->metric_set;
    out << name << "," << e->cm.tn << "," << e->cm.fp << "," << e->cm.fn << "," << e->cm.tp << ","
        << cell(m.accuracy) << "," << cell(m.misclassification) << "," << cell(m.sensitivity)
        << "," << cell(m.precision) << "," << cell(m.specificity) << "," << cell(m.f1) << ","
        << format_double(e->curve.auc) << "\n";
  }
}

void write_roc_csv(const fs::path& path, const RocCurve& curve) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "threshold,fpr,tpr\n";
  for (const auto& p : curve.points) {
    out << format_double(p.threshold) << "," << format_double(p.fpr) << ","
        << format_double(p.tpr) << "\n";
  }
}

RocCurve read_roc_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  RocCurve curve;
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (!header) {
      header = true;
      continue;
    }
    const auto f = split(trim(line), ',');
    if (f.size() != 3) throw FormatError("bad roc row: " + line);
    double thr;
    if (f[0] == "inf") {
      thr = std::numeric_limits<double>::infinity();
    } else if (f[0] == "-inf") {
      thr = -std::numeric_limits<double>::infinity();
    } else {
      thr = parse_double(f[0]);
    }
    curve.points.push_back({thr, parse_double(f[1]), parse_double(f[2])});
  }
  for (std::size_t k = 1; k < curve.points.size(); ++k) {
    const auto& a = curve.points[k - 1];
    const auto& b = curve.points[k];
    curve.auc += (b.fpr - a.fpr) * (a.tpr + b.tpr) / 2.0;
  }
  return curve;
}

Json cm_json(const ConfusionMatrix& cm) {
  return Json{{"tn", cm.tn}, {"fp", cm.fp}, {"fn", cm.fn}, {"tp", cm.tp}};
}

ConfusionMatrix cm_from_json(const Json& j) {
  return {j.at("tn").get<std::uint64_t>(), j.at("fp").get<std::uint64_t>(),
          j.at("fn").get<std::uint64_t>(), j.at("tp").get<std::uint64_t>()};
}

// Trains one named model and fills its run directory: history.csv, both
// checkpoints, metrics.csv, roc.csv, plots and run.json.
void run_one_model(const ExperimentConfig& cfg, const ModelSpec& spec, const LabeledDataset& data,
                   const fs::path& out_dir) {
  fs::create_directories(out_dir);

  const std::uint64_t model_seed = Rng(cfg.train.seed).child(fnv1a64(spec.name)).seed();
  Rng init_rng = Rng(model_seed).child(0);

  std::optional<WeightContainer> backbone;
  if (spec.backbone_weights) backbone = WeightContainer::load(*spec.backbone_weights);
  Network net = build_model(spec, init_rng, backbone ? &*backbone : nullptr);

  TrainConfig tcfg = cfg.train;
  tcfg.seed = model_seed;
  if (!spec.augment) tcfg.augment = AugmentConfig{};  // identity: augmentation off

  TrainResult result = train(net, data, tcfg);
  write_history_csv(result.history, out_dir / "history.csv");
  result.best.save(out_dir / (spec.name + ".best.pnw"));
  result.final_.save(out_dir / (spec.name + ".final.pnw"));

  const auto test = data.samples_of(Split::test);
  const CheckpointEval final_eval = eval_checkpoint(net, test);  // net holds final weights
  load_into(net, result.best);
  const CheckpointEval best_eval = eval_checkpoint(net, test);

  write_metrics_csv(out_dir / "metrics.csv", {{"final", &final_eval}, {"best", &best_eval}});
  write_roc_csv(out_dir / "roc.csv", best_eval.curve);
  write_performance_svg(result.history, out_dir / "performance.svg");
  write_confusion_svg(best_eval.cm, out_dir / "confusion.svg");
  write_roc_svg(best_eval.curve, out_dir / "roc.svg");

  Json j;
  j["model"] = spec.name;
  j["description"] = model_description(spec);
  j["dropout"] = spec.dropout;
  j["seed"] = model_seed;
  j["stop_reason"] = stop_reason_name(result.history.stop_reason);
  j["best_epoch"] = result.history.best_epoch;
  j["epochs"] = result.history.rows.size();
  j["elapsed_minutes"] = result.history.elapsed_minutes;
  j["overfit_flag"] = result.history.overfit_flag;
  j["cm_final"] = cm_json(final_eval.cm);
  j["cm_best"] = cm_json(best_eval.cm);
  j["auc_final"] = final_eval.curve.auc;
  j["auc_best"] = best_eval.curve.auc;
  j["config"] = Json{{"batch_size", tcfg.batch_size},
                     {"max_epochs", tcfg.max_epochs},
                     {"patience", tcfg.patience},
                     {"lr", tcfg.adam.lr},
                     {"beta1", tcfg.adam.beta1},
                     {"beta2", tcfg.adam.beta2},
                     {"epsilon", tcfg.adam.epsilon},
                     {"augment", spec.augment},
                     {"init", "glorot-uniform"},
                     {"rng", "xoshiro256++/splitmix64 v1"},
                     {"fingerprint", net.fingerprint()}};
  std::ofstream out(out_dir / "run.json");
  if (!out) throw IoError("cannot write run.json");
  out << j.dump(2) << "\n";
}

// ---------------------------------------------------------------- commands

int cmd_prepare(const std::string& data_root, const std::string& out_dir, const Overrides& ov,
                std::size_t synthetic_count, std::uint64_t seed, std::size_t crop_size,
                std::size_t normals, double margin, bool stratified) {
  if (ov.seed) seed = *ov.seed;
  std::size_t out_h = 64, out_w = 64;
  if (ov.input_size) {
    out_h = ov.input_size->first;
    out_w = ov.input_size->second;
  }
  if (synthetic_count > 0) {
    SyntheticConfig scfg;
    scfg.count = synthetic_count;
    scfg.size = std::max(out_h, out_w);
    write_blob_dataset(scfg, seed, data_root);
  }

  const auto pairs = load_data_root(data_root);
  CropConfig ccfg;
  ccfg.crop_size = crop_size;
  ccfg.out_h = out_h;
  ccfg.out_w = out_w;
  ccfg.normals_per_image = normals;
  ccfg.margin_frac = margin;

  Rng master(seed);
  std::vector<Sample> samples;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    // Per-image child stream: output is independent of processing order.
    Rng child = master.child(i);
    auto crops = generate_labeled_crops(pairs[i], ccfg, child);
    for (auto& s : crops) samples.push_back(std::move(s));
  }
  LabeledDataset ds = split_dataset(std::move(samples), SplitRatios{}, seed, stratified);

  fs::create_directories(out_dir);
  write_manifest(ds, out_h, out_w, fs::path(out_dir) / "manifest.csv");
  write_dataset_json(out_dir, data_root, out_h, out_w, seed);

  std::size_t pos = 0;
  for (const auto& s : ds.samples) pos += s.label == 1 ? 1 : 0;
  std::cout << "prepared " << ds.samples.size() << " samples (" << pos << " polyp, "
            << ds.samples.size() - pos << " normal) from " << pairs.size() << " images\n";
  return 0;
}

int cmd_train(const std::string& config_path, const std::string& dataset_dir,
              const std::string& out_dir, const std::string& model_name, const Overrides& ov) {
  ExperimentConfig cfg = load_config(config_path);
  apply_overrides(cfg, ov);
  if (cfg.models.empty()) throw FormatError("config has no models");

  const ModelSpec* spec = nullptr;
  if (model_name.empty()) {
    if (cfg.models.size() != 1) {
      throw ValueError("config defines " + std::to_string(cfg.models.size()) +
                       " models; pick one with --model");
    }
    spec = &cfg.models.front();
  } else {
    for (const auto& m : cfg.models) {
      if (m.name == model_name) spec = &m;
    }
    if (spec == nullptr) throw ValueError("model " + model_name + " not found in config");
  }

  const LabeledDataset data = load_prepared_dataset(
      dataset_dir, cfg.dataset.root.empty() ? std::optional<std::string>{} : cfg.dataset.root);
  run_one_model(cfg, *spec, data, out_dir);
  std::cout << "run complete: " << out_dir << "\n";
  return 0;
}

int cmd_evaluate(const std::string& weights_path, const std::string& dataset_dir,
                 const std::string& out_dir) {
  const WeightContainer weights = WeightContainer::load(weights_path);
  Network net = restore_network(weights);

  const LabeledDataset data = load_prepared_dataset(dataset_dir);
  const auto test = data.samples_of(Split::test);
  if (test.empty()) throw ValueError("dataset has no test split");

  const CheckpointEval e = eval_checkpoint(net, test);
  fs::create_directories(out_dir);
  const std::string name = fs::path(weights_path).stem().string();
  write_metrics_csv(fs::path(out_dir) / "metrics.csv", {{name, &e}});
  write_roc_csv(fs::path(out_dir) / "roc.csv", e.curve);
  write_confusion_svg(e.cm, fs::path(out_dir) / "confusion.svg");
  write_roc_svg(e.curve, fs::path(out_dir) / "roc.svg");
  std::cout << "evaluated " << test.size() << " test samples: accuracy "
            << render_percent(e.metric_set.accuracy, 1) << ", auc "
            << format_double(e.curve.auc) << "\n";
  return 0;
}

int cmd_grid(const std::string& config_path, std::string out_root, const Overrides& ov) {
  ExperimentConfig cfg = load_config(config_path);
  apply_overrides(cfg, ov);
  if (cfg.models.empty()) throw FormatError("config has no models");
  if (cfg.dataset.manifest.empty()) throw FormatError("grid config needs dataset.manifest");
  if (out_root.empty()) out_root = cfg.output_root;

  const LabeledDataset data = load_prepared_dataset(
      cfg.dataset.manifest, cfg.dataset.root.empty() ? std::optional<std::string>{} : cfg.dataset.root);

  if (ov.parallel <= 1) {
    for (const auto& spec : cfg.models) {
      std::cout << "[grid] " << spec.name << "\n";
      run_one_model(cfg, spec, data, fs::path(out_root) / spec.name);
    }
    std::cout << "grid complete: " << cfg.models.size() << " runs under " << out_root << "\n";
    return 0;
  }

  // Process pool: re-exec this binary once per model; run directories are
  // disjoint so children share nothing.
  std::vector<std::string> pending;
  for (const auto& spec : cfg.models) pending.push_back(spec.name);
  std::map<pid_t, std::string> running;
  bool failed = false;
  std::size_t next = 0;
  char exe[4096];
  const ssize_t n = readlink("/proc/self/exe", exe, sizeof(exe) - 1);
  if (n <= 0) throw IoError("cannot resolve own executable path");
  exe[n] = '\0';

  const auto spawn = [&](const std::string& model) {
    std::vector<std::string> args{exe,
                                  "train",
                                  config_path,
                                  cfg.dataset.manifest,
                                  (fs::path(out_root) / model).string(),
                                  "--model",
                                  model};
    if (ov.seed) {
      args.push_back("--seed");
      args.push_back(std::to_string(*ov.seed));
    }
    if (ov.batch_size) {
      args.push_back("--batch-size");
      args.push_back(std::to_string(*ov.batch_size));
    }
    if (ov.input_size) {
      args.push_back("--input-size");
      args.push_back(std::to_string(ov.input_size->first) + "x" +
                     std::to_string(ov.input_size->second));
    }
    const pid_t pid = fork();
    if (pid < 0) throw IoError("fork failed");
    if (pid == 0) {
      std::vector<char*> argv;
      for (auto& a : args) argv.push_back(a.data());
      argv.push_back(nullptr);
      execv(exe, argv.data());
      std::perror("execv");
      _exit(127);
    }
    running[pid] = model;
  };

  while (next < pending.size() || !running.empty()) {
    while (next < pending.size() && running.size() < ov.parallel) {
      std::cout << "[grid] " << pending[next] << "\n";
      spawn(pending[next++]);
    }
    int status = 0;
    const pid_t done = wait(&status);
    if (done < 0) break;
    const auto it = running.find(done);
    if (it != running.end()) {
      if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
        std::cerr << "grid run failed: " << it->second << "\n";
        failed = true;
      }
      running.erase(it);
    }
  }
  if (failed) return 1;
  std::cout << "grid complete: " << cfg.models.size() << " runs under " << out_root << "\n";
  return 0;
}

int cmd_report(const std::string& runs_dir, const std::string& out_dir) {
  std::vector<fs::path> run_dirs;
  for (const auto& e : fs::directory_iterator(runs_dir)) {
    if (e.is_directory() && fs::exists(e.path() / "run.json")) run_dirs.push_back(e.path());
  }
  if (run_dirs.empty()) throw ValueError("no run directories with run.json under " + runs_dir);

  // Grid-key ordering: family index then row number (M1-2 before M1-10).
  const auto key = [](const fs::path& p) {
    const std::string name = p.filename().string();
    const auto dash = name.find('-');
    std::pair<std::string, long> k{name, 0};
    if (dash != std::string::npos) {
      k.first = name.substr(0, dash);
      try {
        k.second = std::stol(name.substr(dash + 1));
      } catch (...) {
        k.second = 0;
      }
    }
    return k;
  };
  std::sort(run_dirs.begin(), run_dirs.end(),
            [&](const fs::path& a, const fs::path& b) { return key(a) < key(b); });

  std::vector<RunRecord> records;
  for (const auto& dir : run_dirs) {
    std::ifstream in(dir / "run.json");
    Json j = Json::parse(in);
    RunRecord r;
    r.model = j.at("model").get<std::string>();
    r.description = j.at("description").get<std::string>();
    r.dropout = j.at("dropout").get<std::vector<double>>();
    r.history = read_history_csv(dir / "history.csv");
    r.history.elapsed_minutes = j.at("elapsed_minutes").get<double>();
    r.cm_final = cm_from_json(j.at("cm_final"));
    r.cm_best = cm_from_json(j.at("cm_best"));
    r.auc_final = j.at("auc_final").get<double>();
    r.auc_best = j.at("auc_best").get<double>();
    records.push_back(std::move(r));
  }

  emit_report(records, out_dir);
  for (const auto& dir : run_dirs) {
    const fs::path plot_dir = fs::path(out_dir) / "plots" / dir.filename();
    fs::create_directories(plot_dir);
    const TrainingHistory h = read_history_csv(dir / "history.csv");
    write_performance_svg(h, plot_dir / "performance.svg");
    std::ifstream in(dir / "run.json");
    Json j = Json::parse(in);
    write_confusion_svg(cm_from_json(j.at("cm_best")), plot_dir / "confusion.svg");
    if (fs::exists(dir / "roc.csv")) {
      write_roc_svg(read_roc_csv(dir / "roc.csv"), plot_dir / "roc.svg");
    }
  }
  std::cout << "report written to " << out_dir << " (" << records.size() << " runs)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"polyp classification experiment harness"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags are accepted after the subcommand name

  Overrides ov;
  std::string input_size_arg;
  app.add_option("--seed", ov.seed, "Override every configured seed");
  app.add_option("--batch-size", ov.batch_size, "Override the training batch size");
  app.add_option("--input-size", input_size_arg, "Override the sample size, HxW");
  app.add_option("--parallel", ov.parallel, "Grid: number of worker processes")
      ->check(CLI::PositiveNumber);

  std::string data_root, out_dir, config_path, dataset_dir, weights_path, runs_dir, model_name;
  std::size_t synthetic_count = 0, crop_size = 64, normals = 1;
  std::uint64_t prep_seed = 0;
  double margin = 0.10;
  bool stratified = true;

  auto* prepare = app.add_subcommand("prepare", "Generate labeled crops and the split manifest");
  prepare->add_option("data_root", data_root)->required();
  prepare->add_option("out", out_dir)->required();
  prepare->add_option("--synthetic", synthetic_count,
                      "First generate N synthetic blob images into data_root");
  prepare->add_option("--prep-seed", prep_seed, "Master seed for crops and the split");
  prepare->add_option("--crop-size", crop_size, "Normal-window/minimum crop side");
  prepare->add_option("--normals-per-image", normals);
  prepare->add_option("--margin", margin, "Context margin per bounding-box side");
  prepare->add_flag("--stratified,!--no-stratified", stratified, "Stratify the split by class");

  auto* train_cmd = app.add_subcommand("train", "Train one model from the config");
  train_cmd->add_option("config", config_path)->required();
  train_cmd->add_option("dataset", dataset_dir)->required();
  train_cmd->add_option("out", out_dir)->required();
  train_cmd->add_option("--model", model_name, "Model block name (default: the only one)");

  auto* eval_cmd = app.add_subcommand("evaluate", "Evaluate a weight container on the test split");
  eval_cmd->add_option("weights", weights_path)->required();
  eval_cmd->add_option("dataset", dataset_dir)->required();
  eval_cmd->add_option("out", out_dir)->required();

  auto* grid_cmd = app.add_subcommand("grid", "Run every model block in the config");
  grid_cmd->add_option("config", config_path)->required();
  grid_cmd->add_option("out", out_dir, "Output root (default: config output_root)");

  auto* report_cmd = app.add_subcommand("report", "Emit the four result tables and plots");
  report_cmd->add_option("runs", runs_dir)->required();
  report_cmd->add_option("out", out_dir)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (!input_size_arg.empty()) ov.input_size = parse_hxw(input_size_arg);
    if (prepare->parsed()) {
      return cmd_prepare(data_root, out_dir, ov, synthetic_count, prep_seed, crop_size, normals,
                         margin, stratified);
    }
    if (train_cmd->parsed()) return cmd_train(config_path, dataset_dir, out_dir, model_name, ov);
    if (eval_cmd->parsed()) return cmd_evaluate(weights_path, dataset_dir, out_dir);
    if (grid_cmd->parsed()) return cmd_grid(config_path, out_dir, ov);
    if (report_cmd->parsed()) return cmd_report(runs_dir, out_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

#include "polypnet/plot.hpp"

#include <algorithm>
#include <fstream>

#include "polypnet/errors.hpp"
#include "polypnet/text.hpp"

namespace polypnet {

namespace {

constexpr double kPanelW = 720.0, kPanelH = 360.0;
constexpr double kMarginL = 50.0, kMarginR = 20.0, kMarginT = 20.0, kMarginB = 50.0;

struct Frame {
  double x0, y0;       // top-left of the panel in canvas coordinates
  double xmin, xmax;   // data range
  double ymin, ymax;

  double px(double x) const {
    const double w = kPanelW - kMarginL - kMarginR;
    const double t = xmax > xmin ? (x - xmin) / (xmax - xmin) : 0.0;
    return x0 + kMarginL + t * w;
  }
  double py(double y) const {
    const double h = kPanelH - kMarginT - kMarginB;
    const double t = ymax > ymin ? (y - ymin) / (ymax - ymin) : 0.0;
    return y0 + kPanelH - kMarginB - t * h;
  }
};

std::ofstream open_svg(const std::filesystem::path& path, double w, double h) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << format_double(w)
      << "\" height=\"" << format_double(h) << "\" viewBox=\"0 0 " << format_double(w) << " "
      << format_double(h) << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  return out;
}

void axes(std::ofstream& out, const Frame& f, const std::string& title) {
  out << "<rect x=\"" << format_double(f.x0 + kMarginL) << "\" y=\""
      << format_double(f.y0 + kMarginT) << "\" width=\""
      << format_double(kPanelW - kMarginL - kMarginR) << "\" height=\""
      << format_double(kPanelH - kMarginT - kMarginB)
      << "\" fill=\"none\" stroke=\"#888\"/>\n";
  out << "<text x=\"" << format_double(f.x0 + kPanelW / 2) << "\" y=\""
      << format_double(f.y0 + kPanelH - 12.0) << "\" text-anchor=\"middle\">" << title
      << "</text>\n";
}

void polyline(std::ofstream& out, const Frame& f, const std::string& id,
              const std::vector<std::pair<double, double>>& pts, const std::string& color) {
  out << "<polyline id=\"" << id << "\" fill=\"none\" stroke=\"" << color << "\" points=\"";
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (i) out << " ";
    out << format_double(f.px(pts[i].first)) << "," << format_double(f.py(pts[i].second));
  }
  out << "\"/>\n";
}

}  // namespace

void write_performance_svg(const TrainingHistory& history, const std::filesystem::path& path) {
  if (history.rows.empty()) throw ValueError("cannot plot an empty history");
  auto out = open_svg(path, kPanelW, 2 * kPanelH);

  double loss_max = 0.0;
  for (const auto& r : history.rows) loss_max = std::max({loss_max, r.loss, r.val_loss});
  if (loss_max <= 0.0) loss_max = 1.0;
  const double emax = static_cast<double>(history.rows.back().epoch);

  const Frame acc{0.0, 0.0, 1.0, std::max(emax, 1.0 + 1e-12), 0.0, 1.0};
  const Frame loss{0.0, kPanelH, 1.0, std::max(emax, 1.0 + 1e-12), 0.0, loss_max};

  axes(out, acc, "accuracy over epochs (train vs val)");
  axes(out, loss, "loss over epochs (train vs val)");

  std::vector<std::pair<double, double>> ta, va, tl, vl;
  for (const auto& r : history.rows) {
    const double e = static_cast<double>(r.epoch);
    ta.emplace_back(e, r.acc);
    va.emplace_back(e, r.val_acc);
    tl.emplace_back(e, r.loss);
    vl.emplace_back(e, r.val_loss);
  }
  polyline(out, acc, "train_acc", ta, "#1f77b4");
  polyline(out, acc, "val_acc", va, "#d62728");
  polyline(out, loss, "train_loss", tl, "#1f77b4");
  polyline(out, loss, "val_loss", vl, "#d62728");
  out << "</svg>\n";
  if (!out) throw IoError("failed writing " + path.string());
}

void write_confusion_svg(const ConfusionMatrix& cm, const std::filesystem::path& path) {
  auto out = open_svg(path, kPanelH, kPanelH);  // square canvas
  const double cell = (kPanelH - kMarginL - kMarginR) / 2.0;
  const double ox = kMarginL, oy = kMarginT;

  struct Cell {
    const char* id;
    std::uint64_t count;
    int row, col;
    const char* label;
  };
  // Rows: actual (normal, polyp); columns: predicted (normal, polyp).
  const Cell cells[4] = {{"cell_tn", cm.tn, 0, 0, "TN"},
                         {"cell_fp", cm.fp, 0, 1, "FP"},
                         {"cell_fn", cm.fn, 1, 0, "FN"},
                         {"cell_tp", cm.tp, 1, 1, "TP"}};
  const std::uint64_t peak = std::max({cm.tn, cm.fp, cm.fn, cm.tp, std::uint64_t{1}});
  for (const auto& c : cells) {
    const double x = ox + c.col * cell, y = oy + c.row * cell;
    const int shade = 255 - static_cast<int>(160.0 * static_cast<double>(c.count) /
                                             static_cast<double>(peak));
    out << "<rect x=\"" << format_double(x) << "\" y=\"" << format_double(y) << "\" width=\""
        << format_double(cell) << "\" height=\"" << format_double(cell) << "\" fill=\"rgb("
        << shade << "," << shade << ",255)\" stroke=\"#444\"/>\n";
    out << "<text id=\"" << c.id << "\" x=\"" << format_double(x + cell / 2) << "\" y=\""
        << format_double(y + cell / 2) << "\" text-anchor=\"middle\">" << c.count << "</text>\n";
    out << "<text x=\"" << format_double(x + cell / 2) << "\" y=\""
        << format_double(y + cell / 2 + 18.0) << "\" text-anchor=\"middle\" fill=\"#555\">"
        << c.label << "</text>\n";
  }
  out << "<text x=\"" << format_double(ox + cell) << "\" y=\""
      << format_double(oy + 2 * cell + 24.0)
      << "\" text-anchor=\"middle\">predicted: normal | polyp</text>\n";
  out << "</svg>\n";
  if (!out) throw IoError("failed writing " + path.string());
}

void write_roc_svg(const RocCurve& curve, const std::filesystem::path& path) {
  if (curve.points.empty()) throw ValueError("cannot plot an empty roc curve");
  auto out = open_svg(path, kPanelW, kPanelH);
  const Frame f{0.0, 0.0, 0.0, 1.0, 0.0, 1.0};
  axes(out, f, "false positive rate vs true positive rate");

  out << "<line x1=\"" << format_double(f.px(0.0)) << "\" y1=\"" << format_double(f.py(0.0))
      << "\" x2=\"" << format_double(f.px(1.0)) << "\" y2=\"" << format_double(f.py(1.0))
      << "\" stroke=\"#bbb\" stroke-dasharray=\"4 3\"/>\n";

  std::vector<std::pair<double, double>> pts;
  for (const auto& p : curve.points) pts.emplace_back(p.fpr, p.tpr);
  polyline(out, f, "roc", pts, "#d62728");

  out << "<text id=\"auc_label\" x=\"" << format_double(f.px(0.6)) << "\" y=\""
      << format_double(f.py(0.1)) << "\">AUC = " << format_double(curve.auc) << "</text>\n";
  out << "</svg>\n";
  if (!out) throw IoError("failed writing " + path.string());
}

}  // namespace polypnet

#include "polypnet/report.hpp"

#include <fstream>

#include "polypnet/errors.hpp"
#include "polypnet/text.hpp"

namespace polypnet {

std::string render_percent(const std::optional<double>& value, int decimals) {
  if (!value.has_value()) return "n/a";
  return format_fixed(*value * 100.0, decimals) + "%";
}

namespace {

std::string dropout_field(const std::vector<double>& rates) {
  std::vector<std::string> parts;
  for (double p : rates) parts.push_back(format_double(p));
  return join(parts, ' ');
}

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p);
  if (!out) throw IoError("cannot write " + p.string());
  return out;
}

const EpochRow& row_at(const TrainingHistory& h, std::size_t epoch) {
  return h.rows.at(epoch - 1);
}

}  // namespace

void emit_report(const std::vector<RunRecord>& runs, const std::filesystem::path& out_dir) {
  if (runs.empty()) throw ValueError("emit_report: no runs");
  std::filesystem::create_directories(out_dir);

  {
    auto out = open_out(out_dir / "table1.csv");
    out << "model,description,dropout,epoch,elapsed_min\n";
    for (const auto& r : runs) {
      out << r.model << "," << r.description << "," << dropout_field(r.dropout) << ","
          << r.history.rows.back().epoch << "," << format_double(r.history.elapsed_minutes)
          << "\n";
      out << r.model << "-Best," << r.description << "," << dropout_field(r.dropout) << ","
          << r.history.best_epoch << ",\n";
    }
  }
  {
    auto out = open_out(out_dir / "table2.csv");
    out << "model,epoch,loss,acc,val_loss,val_acc\n";
    for (const auto& r : runs) {
      const auto write_row = [&](const std::string& name, const EpochRow& row) {
        out << name << "," << row.epoch << "," << format_double(row.loss) << ","
            << format_double(row.acc) << "," << format_double(row.val_loss) << ","
            << format_double(row.val_acc) << "\n";
      };
      write_row(r.model, r.history.rows.back());
      write_row(r.model + "-Best", row_at(r.history, r.history.best_epoch));
    }
  }
  {
    auto out = open_out(out_dir / "table3.csv");
    out << "# positive_class=polyp decision_rule=score>=0.5\n";
    out << "model,tn,fp,fn,tp,accuracy,misclassification\n";
    for (const auto& r : runs) {
      const auto write_row = [&](const std::string& name, const ConfusionMatrix& cm) {
        const MetricSet m = metrics(cm);
        out << name << "," << cm.tn << "," << cm.fp << "," << cm.fn << "," << cm.tp << ","
            << render_percent(m.accuracy, 1) << "," << render_percent(m.misclassification, 0)
            << "\n";
      };
      write_row(r.model, r.cm_final);
      write_row(r.model + "-Best", r.cm_best);
    }
  }
  {
    auto out = open_out(out_dir / "table4.csv");
    out << "# positive_class=polyp decision_rule=score>=0.5 units=percent\n";
    out << "model,sensitivity,precision,specificity,f1,roc\n";
    for (const auto& r : runs) {
      const auto write_row = [&](const std::string& name, const ConfusionMatrix& cm, double auc) {
        const MetricSet m = metrics(cm);
        const auto cell = [](const std::optional<double>& v) {
          return v ? format_fixed(*v * 100.0, 0) : std::string("n/a");
        };
        out << name << "," << cell(m.sensitivity) << "," << cell(m.precision) << ","
            << cell(m.specificity) << "," << cell(m.f1) << "," << format_fixed(auc * 100.0, 0)
            << "\n";
      };
      write_row(r.model, r.cm_final, r.auc_final);
      write_row(r.model + "-Best", r.cm_best, r.auc_best);
    }
  }
  {
    auto out = open_out(out_dir / "summary.txt");
    out << "runs: " << runs.size() << "\n\n";
    for (const auto& r : runs) {
      const MetricSet mf = metrics(r.cm_final);
      const MetricSet mb = metrics(r.cm_best);
      out << r.model << " (" << (r.description.empty() ? "vgg" : r.description);
      if (!r.dropout.empty()) out << ", dropout " << dropout_field(r.dropout);
      out << ")\n";
      out << "  stopped: " << stop_reason_name(r.history.stop_reason) << " at epoch "
          << r.history.rows.back().epoch << " (best " << r.history.best_epoch << ")"
          << (r.history.overfit_flag ? ", overfit trend" : "") << "\n";
      out << "  final: acc " << render_percent(mf.accuracy, 1) << ", auc "
          << format_fixed(r.auc_final * 100.0, 1) << "%\n";
      out << "  best:  acc " << render_percent(mb.accuracy, 1) << ", auc "
          << format_fixed(r.auc_best * 100.0, 1) << "%\n";
    }
  }
}

}  // namespace polypnet

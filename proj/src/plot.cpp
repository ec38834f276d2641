#include "hardmetric/plot.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "hardmetric/numeric.hpp"

namespace hm {

namespace {

const char* kCellColors[4] = {"#9aa0a6", "#4d90d6", "#67a06a", "#d06048"};
const char* kCellNames[4] = {"baseline", "reweight", "membank", "combined"};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

std::string ablation_bars_svg(const AblationReport& report) {
  const EvalTable* tables[4] = {&report.baseline, &report.reweight, &report.membank,
                                &report.combined};
  const size_t n_groups = report.baseline.conditions.size() + 1;  // + grand mean

  const double width = 640, height = 360;
  const double left = 50, right = 20, top = 40, bottom = 50;
  const double plot_w = width - left - right;
  const double plot_h = height - top - bottom;
  const double group_w = plot_w / n_groups;
  const double bar_w = group_w / 5.0;

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
     << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  os << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
  os << "<text x=\"" << left << "\" y=\"22\" font-family=\"sans-serif\" font-size=\"14\">"
     << "rank-1 accuracy by condition (%)</text>\n";

  // y gridlines at 0, 25, 50, 75, 100
  for (int g = 0; g <= 4; ++g) {
    double val = 25.0 * g;
    double y = top + plot_h * (1.0 - val / 100.0);
    os << "<line x1=\"" << left << "\" y1=\"" << fmt(y) << "\" x2=\"" << (left + plot_w)
       << "\" y2=\"" << fmt(y) << "\" stroke=\"#dddddd\"/>\n";
    os << "<text x=\"" << (left - 8) << "\" y=\"" << fmt(y + 4)
       << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">" << val
       << "</text>\n";
  }

  for (size_t g = 0; g < n_groups; ++g) {
    const bool grand = g + 1 == n_groups;
    std::string label =
        grand ? "mean" : condition_name(report.baseline.conditions[g]);
    double gx = left + g * group_w;
    for (int c = 0; c < 4; ++c) {
      double val = grand ? tables[c]->grand_mean : tables[c]->condition_means[g];
      double h = plot_h * val / 100.0;
      double x = gx + bar_w * (0.5 + c);
      os << "<rect x=\"" << fmt(x) << "\" y=\"" << fmt(top + plot_h - h) << "\" width=\""
         << fmt(bar_w * 0.9) << "\" height=\"" << fmt(h) << "\" fill=\"" << kCellColors[c]
         << "\"/>\n";
    }
    os << "<text x=\"" << fmt(gx + group_w / 2) << "\" y=\"" << fmt(top + plot_h + 18)
       << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">"
       << label << "</text>\n";
  }

  // legend
  for (int c = 0; c < 4; ++c) {
    double x = left + c * 120.0;
    double y = height - 16;
    os << "<rect x=\"" << fmt(x) << "\" y=\"" << fmt(y - 10) << "\" width=\"12\""
       << " height=\"12\" fill=\"" << kCellColors[c] << "\"/>\n";
    os << "<text x=\"" << fmt(x + 18) << "\" y=\"" << fmt(y)
       << "\" font-family=\"sans-serif\" font-size=\"12\">" << kCellNames[c]
       << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

std::string runlog_curves_svg(const RunLog& log) {
  const double width = 720, height = 400;
  const double left = 60, right = 20, top = 40, bottom = 40;
  const double plot_w = width - left - right;
  const double plot_h = height - top - bottom;

  double max_loss = 0.0;
  int64_t max_t = 1;
  for (const LogRecord& r : log.records) {
    max_loss = std::max(max_loss, r.loss_total);
    max_t = std::max(max_t, r.t);
  }
  if (max_loss <= 0.0) max_loss = 1.0;

  auto xpos = [&](int64_t t) { return left + plot_w * (static_cast<double>(t) / max_t); };
  auto ypos = [&](double v, double vmax) {
    return top + plot_h * (1.0 - v / vmax);
  };

  struct Series {
    const char* name;
    const char* color;
    double LogRecord::* field;
    bool scaled_to_loss;  // else on the [0, 1.6] schedule axis
  };
  const Series series[] = {
      {"loss_total", "#d06048", &LogRecord::loss_total, true},
      {"loss_ba", "#4d90d6", &LogRecord::loss_ba, true},
      {"delta_t", "#9aa0a6", &LogRecord::delta_t, false},
      {"s_t", "#67a06a", &LogRecord::s_t, false},
      {"gamma_t", "#b08cc8", &LogRecord::gamma_t, false},
  };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
     << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  os << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
  os << "<text x=\"" << left << "\" y=\"22\" font-family=\"sans-serif\" font-size=\"14\">"
     << "training loss and schedules (max loss " << format_g9(max_loss)
     << ", schedules on [0, 1.6])</text>\n";
  os << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << plot_w
     << "\" height=\"" << plot_h << "\" fill=\"none\" stroke=\"#cccccc\"/>\n";

  for (const Series& s : series) {
    os << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\" points=\"";
    for (const LogRecord& r : log.records) {
      double vmax = s.scaled_to_loss ? max_loss : 1.6;
      os << fmt(xpos(r.t)) << ',' << fmt(ypos(r.*(s.field), vmax)) << ' ';
    }
    os << "\"/>\n";
  }

  double lx = left;
  for (const Series& s : series) {
    os << "<rect x=\"" << fmt(lx) << "\" y=\"" << fmt(height - 24) << "\" width=\"12\""
       << " height=\"12\" fill=\"" << s.color << "\"/>\n";
    os << "<text x=\"" << fmt(lx + 16) << "\" y=\"" << fmt(height - 14)
       << "\" font-family=\"sans-serif\" font-size=\"12\">" << s.name << "</text>\n";
    lx += 130.0;
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace hm

#ifndef HARDMETRIC_PLOT_HPP_
#define HARDMETRIC_PLOT_HPP_

#include <string>

#include "hardmetric/evaluate.hpp"
#include "hardmetric/trainer.hpp"

namespace hm {

/// Grouped bar chart of the four ablation cells' per-condition means.
/// Deterministic text: identical inputs give byte-identical SVG.
std::string ablation_bars_svg(const AblationReport& report);

/// Loss and schedule curves over training iterations.
std::string runlog_curves_svg(const RunLog& log);

}  // namespace hm

#endif  // HARDMETRIC_PLOT_HPP_

#ifndef HARDMETRIC_EVALUATE_HPP_
#define HARDMETRIC_EVALUATE_HPP_

#include <string>
#include <vector>

#include "hardmetric/dataset.hpp"
#include "hardmetric/model.hpp"
#include "hardmetric/trainer.hpp"

namespace hm {

/// Gallery/probe split for cross-view rank-1 evaluation. By default the
/// first gallery-condition sequence of every (id, view) cell forms the
/// gallery and everything else is a probe; gallery entries sharing the
/// probe's view are excluded from its candidate set.
struct EvalProtocol {
  Condition gallery_condition = Condition::Base;
  int gallery_seq_begin = 0;  // [begin, end) over the seq index within a cell
  int gallery_seq_end = 1;
  bool exclude_identical_view = true;
  /// Sanity mode: gallery = probe set = every sequence, exclusion off.
  bool self_retrieval = false;
};

/// Per (probe condition, probe view) rank-1 accuracies in percent, with
/// per-condition, per-view and grand means. Accuracies are canonicalized
/// to 9 significant digits so the CSV round trip is lossless.
struct EvalTable {
  std::vector<int> views;                 // ascending
  std::vector<Condition> conditions;      // conditions that have probes
  Mat accuracy;                           // conditions x views
  std::vector<double> condition_means;
  std::vector<double> view_means;
  double grand_mean = 0.0;

  /// Views as columns, one row block per condition, final mean row.
  std::string to_csv() const;
  static EvalTable from_csv(const std::string& text);

  bool operator==(const EvalTable& o) const;
};

/// Embeds every sequence, ranks each probe's admissible gallery by
/// Euclidean distance (ties to the lowest gallery position) and scores a
/// rank-1 hit when the nearest entry shares the probe's identity.
/// Throws ProtocolError naming the cell if a probe has no admissible
/// gallery entry.
EvalTable evaluate(const ModelParams& params, const LabeledDataset& ds,
                   const EvalProtocol& protocol);

/// The four toggle cells trained from identical seeds.
struct AblationReport {
  EvalTable baseline;  // both extra losses off
  EvalTable reweight;  // + s_t-ramped reweighted batch-hard term
  EvalTable membank;   // + gamma_t-ramped memory supervision
  EvalTable combined;  // both on

  /// Per-condition means (plus grand mean) of the four cells.
  std::string comparison_csv() const;
};

AblationReport ablation_report(const LabeledDataset& ds, const TrainConfig& base_cfg,
                               const EvalProtocol& protocol = {});

}  // namespace hm

#endif  // HARDMETRIC_EVALUATE_HPP_

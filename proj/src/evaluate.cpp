#include "hardmetric/evaluate.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "hardmetric/errors.hpp"
#include "hardmetric/kernels.hpp"
#include "hardmetric/numeric.hpp"

namespace hm {

namespace {

std::string cell_name(Condition c, int view) {
  std::ostringstream os;
  os << "(" << condition_name(c) << ", view " << view << ")";
  return os.str();
}

}  // namespace

bool EvalTable::operator==(const EvalTable& o) const {
  return views == o.views && conditions == o.conditions && accuracy == o.accuracy &&
         condition_means == o.condition_means && view_means == o.view_means &&
         grand_mean == o.grand_mean;
}

std::string EvalTable::to_csv() const {
  std::ostringstream os;
  os << "condition";
  for (int v : views) os << ',' << v;
  os << ",mean\n";
  for (size_t c = 0; c < conditions.size(); ++c) {
    os << condition_name(conditions[c]);
    for (size_t v = 0; v < views.size(); ++v)
      os << ',' << format_g9(accuracy.at(static_cast<int>(c), static_cast<int>(v)));
    os << ',' << format_g9(condition_means[c]) << '\n';
  }
  os << "mean";
  for (size_t v = 0; v < views.size(); ++v) os << ',' << format_g9(view_means[v]);
  os << ',' << format_g9(grand_mean) << '\n';
  return os.str();
}

EvalTable EvalTable::from_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  int line_no = 0;

  if (!std::getline(is, line)) throw ParseError(1, "empty table");
  ++line_no;
  EvalTable t;
  {
    std::istringstream hs(line);
    std::string field;
    if (!std::getline(hs, field, ',') || field != "condition")
      throw ParseError(line_no, "unexpected table header");
    std::vector<std::string> cols;
    while (std::getline(hs, field, ',')) cols.push_back(field);
    if (cols.empty() || cols.back() != "mean")
      throw ParseError(line_no, "table header must end with mean");
    for (size_t i = 0; i + 1 < cols.size(); ++i)
      t.views.push_back(std::atoi(cols[i].c_str()));
  }

  std::vector<std::vector<double>> rows;
  bool saw_mean_row = false;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string name;
    std::getline(ls, name, ',');
    std::vector<double> vals;
    std::string field;
    while (std::getline(ls, field, ',')) {
      char* end = nullptr;
      double v = std::strtod(field.c_str(), &end);
      if (end == field.c_str()) throw ParseError(line_no, "bad number: " + field);
      vals.push_back(v);
    }
    if (vals.size() != t.views.size() + 1)
      throw ParseError(line_no, "wrong number of columns");
    if (name == "mean") {
      t.view_means.assign(vals.begin(), vals.end() - 1);
      t.grand_mean = vals.back();
      saw_mean_row = true;
      break;
    }
    t.conditions.push_back(condition_from_name(name));
    t.condition_means.push_back(vals.back());
    vals.pop_back();
    rows.push_back(std::move(vals));
  }
  if (!saw_mean_row) throw ParseError(line_no, "missing mean row");

  t.accuracy = Mat(static_cast<int>(rows.size()), static_cast<int>(t.views.size()));
  for (size_t c = 0; c < rows.size(); ++c)
    for (size_t v = 0; v < t.views.size(); ++v)
      t.accuracy.at(static_cast<int>(c), static_cast<int>(v)) = rows[c][v];
  return t;
}

EvalTable evaluate(const ModelParams& params, const LabeledDataset& ds,
                   const EvalProtocol& protocol) {
  if (ds.sequences.empty()) throw UsageError("empty dataset");
  if (!protocol.self_retrieval && protocol.gallery_seq_begin >= protocol.gallery_seq_end)
    throw ConfigError("gallery_seq range is empty");

  kernels::ForwardCache fc = kernels::embed_batch_auto(params, ds.sequences);
  const int n = static_cast<int>(ds.sequences.size());

  std::vector<int> gallery_rows, gallery_views, gallery_ids;
  std::vector<char> in_gallery(n, 0);
  for (int i = 0; i < n; ++i) {
    const FeatureSequence& s = ds.sequences[i];
    bool take = protocol.self_retrieval ||
                (s.condition == protocol.gallery_condition &&
                 s.seq >= protocol.gallery_seq_begin && s.seq < protocol.gallery_seq_end);
    if (take) {
      gallery_rows.push_back(i);
      gallery_views.push_back(s.view_deg);
      gallery_ids.push_back(s.id);
      in_gallery[i] = 1;
    }
  }
  {
    std::vector<char> covered(ds.n_ids(), 0);
    for (int id : gallery_ids) covered[id] = 1;
    for (int id = 0; id < ds.n_ids(); ++id)
      if (!covered[id])
        throw ProtocolError("gallery is empty for identity " + std::to_string(id));
  }

  const bool exclude = protocol.exclude_identical_view && !protocol.self_retrieval;
  std::vector<int> probe_rows;
  std::vector<kernels::RankQuery> queries;
  for (int i = 0; i < n; ++i) {
    if (!protocol.self_retrieval && in_gallery[i]) continue;
    kernels::RankQuery q;
    q.probe_row = i;
    q.exclude_view = exclude ? ds.sequences[i].view_deg : -1;
    probe_rows.push_back(i);
    queries.push_back(q);
  }
  if (queries.empty()) throw ProtocolError("protocol leaves no probes");

  std::vector<int> winners;
  kernels::rank_probes_auto(fc.emb.rows, gallery_rows, gallery_views, queries, winners);

  std::map<std::pair<int, int>, std::pair<int, int>> cells;  // (cond, view) -> hits/total
  for (size_t qi = 0; qi < queries.size(); ++qi) {
    const FeatureSequence& probe = ds.sequences[probe_rows[qi]];
    if (winners[qi] < 0)
      throw ProtocolError("probe has an empty admissible gallery in cell " +
                          cell_name(probe.condition, probe.view_deg));
    bool hit = gallery_ids[winners[qi]] == probe.id;
    auto& cell = cells[{static_cast<int>(probe.condition), probe.view_deg}];
    cell.first += hit ? 1 : 0;
    cell.second += 1;
  }

  EvalTable table;
  {
    std::set<int> vset;
    std::set<int> cset;
    for (const auto& [key, val] : cells) {
      cset.insert(key.first);
      vset.insert(key.second);
    }
    table.views.assign(vset.begin(), vset.end());
    for (int c : cset) table.conditions.push_back(static_cast<Condition>(c));
  }
  table.accuracy =
      Mat(static_cast<int>(table.conditions.size()), static_cast<int>(table.views.size()));
  for (size_t c = 0; c < table.conditions.size(); ++c) {
    for (size_t v = 0; v < table.views.size(); ++v) {
      auto it = cells.find({static_cast<int>(table.conditions[c]), table.views[v]});
      if (it == cells.end())
        throw ProtocolError("no probes in cell " +
                            cell_name(table.conditions[c], table.views[v]));
      table.accuracy.at(static_cast<int>(c), static_cast<int>(v)) =
          quantize9(100.0 * it->second.first / it->second.second);
    }
  }
  table.condition_means.resize(table.conditions.size());
  for (size_t c = 0; c < table.conditions.size(); ++c) {
    double acc = 0.0;
    for (size_t v = 0; v < table.views.size(); ++v)
      acc += table.accuracy.at(static_cast<int>(c), static_cast<int>(v));
    table.condition_means[c] = quantize9(acc / table.views.size());
  }
  table.view_means.resize(table.views.size());
  for (size_t v = 0; v < table.views.size(); ++v) {
    double acc = 0.0;
    for (size_t c = 0; c < table.conditions.size(); ++c)
      acc += table.accuracy.at(static_cast<int>(c), static_cast<int>(v));
    table.view_means[v] = quantize9(acc / table.conditions.size());
  }
  {
    double acc = 0.0;
    for (double m : table.condition_means) acc += m;
    table.grand_mean = quantize9(acc / table.condition_means.size());
  }
  return table;
}

std::string AblationReport::comparison_csv() const {
  std::ostringstream os;
  os << "condition,baseline,reweight,membank,combined\n";
  const EvalTable* tables[] = {&baseline, &reweight, &membank, &combined};
  for (size_t c = 0; c < baseline.conditions.size(); ++c) {
    os << condition_name(baseline.conditions[c]);
    for (const EvalTable* t : tables) os << ',' << format_g9(t->condition_means[c]);
    os << '\n';
  }
  os << "mean";
  for (const EvalTable* t : tables) os << ',' << format_g9(t->grand_mean);
  os << '\n';
  return os.str();
}

AblationReport ablation_report(const LabeledDataset& ds, const TrainConfig& base_cfg,
                               const EvalProtocol& protocol) {
  AblationReport report;
  struct CellSpec {
    bool bh;
    bool mem;
    EvalTable AblationReport::* slot;
  };
  const CellSpec cells[] = {
      {false, false, &AblationReport::baseline},
      {true, false, &AblationReport::reweight},
      {false, true, &AblationReport::membank},
      {true, true, &AblationReport::combined},
  };
  for (const CellSpec& cell : cells) {
    TrainConfig cfg = base_cfg;  // identical seeds across cells
    cfg.use_reweighted_bh = cell.bh;
    cfg.use_memory = cell.mem;
    TrainResult result = train(cfg, ds);
    report.*(cell.slot) = evaluate(result.params, ds, protocol);
  }
  return report;
}

}  // namespace hm

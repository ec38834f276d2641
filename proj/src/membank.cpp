#include "hardmetric/membank.hpp"

#include <cmath>
#include <map>

#include "hardmetric/errors.hpp"
#include "hardmetric/kernels.hpp"
#include "hardmetric/numeric.hpp"

namespace hm {

namespace {

constexpr double kNormFloor = 1e-12;
constexpr double kUnitTol = 1e-9;

// Idempotent: rows already unit within tolerance (and zero rows) are left
// bit for bit unchanged, so a no-op update stays a no-op.
void renormalize_row(double* r, int n) {
  double norm_sq = 0.0;
  for (int k = 0; k < n; ++k) norm_sq += r[k] * r[k];
  double norm = std::sqrt(norm_sq);
  if (norm < kNormFloor) return;
  if (std::fabs(norm - 1.0) <= kUnitTol) return;
  double inv = 1.0 / norm;
  for (int k = 0; k < n; ++k) r[k] *= inv;
}

}  // namespace

const char* update_mode_name(UpdateMode m) {
  switch (m) {
    case UpdateMode::None: return "none";
    case UpdateMode::HardReplace: return "hard_replace";
    case UpdateMode::Present: return "present";
    case UpdateMode::PresentAbsent: return "present_absent";
    case UpdateMode::PresentAbsentShift: return "present_absent_shift";
  }
  return "?";
}

UpdateMode update_mode_from_name(const std::string& s) {
  if (s == "none") return UpdateMode::None;
  if (s == "hard_replace") return UpdateMode::HardReplace;
  if (s == "present") return UpdateMode::Present;
  if (s == "present_absent") return UpdateMode::PresentAbsent;
  if (s == "present_absent_shift") return UpdateMode::PresentAbsentShift;
  throw ConfigError("unknown memory update mode: " + s);
}

const char* variance_mode_name(VarianceMode m) {
  return m == VarianceMode::BatchMean ? "batch_mean" : "per_id_mean";
}

VarianceMode variance_mode_from_name(const std::string& s) {
  if (s == "batch_mean") return VarianceMode::BatchMean;
  if (s == "per_id_mean") return VarianceMode::PerIdMean;
  throw ConfigError("unknown variance mode: " + s);
}

void MemoryOptions::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha must be in [0, 1]");
  if (!(beta >= 0.0 && beta <= 1.0)) throw ConfigError("beta must be in [0, 1]");
}

void MemoryLossConfig::validate() const {
  if (!(tau > 0.0)) throw ConfigError("tau must be > 0");
}

MemoryBank init_memory(const LabeledDataset& ds, const ModelParams& params,
                       const MemoryOptions& opts) {
  opts.validate();
  const int n_ids = ds.n_ids();
  const int n_dim = params.dims.n_dim;
  for (int i = 0; i < n_ids; ++i)
    if (i >= static_cast<int>(ds.index.size()) || ds.index[i].empty())
      throw DataError("identity " + std::to_string(i) + " has no sequences");

  kernels::ForwardCache fc = kernels::embed_batch_auto(params, ds.sequences);

  MemoryBank bank;
  bank.opts = opts;
  bank.rows = Mat(n_ids, n_dim);
  for (int i = 0; i < n_ids; ++i) {
    double* row = bank.rows.row(i);
    for (int pos : ds.index[i]) {
      const double* e = fc.emb.rows.row(pos);
      for (int k = 0; k < n_dim; ++k) row[k] += e[k];
    }
    double inv = 1.0 / static_cast<double>(ds.index[i].size());
    for (int k = 0; k < n_dim; ++k) row[k] *= inv;
    if (opts.renormalize) renormalize_row(row, n_dim);
  }
  return bank;
}

void update_memory(MemoryBank& bank, const EmbeddingMatrix& emb) {
  const int n_ids = bank.n_ids();
  const int n_dim = bank.n_dim();
  if (emb.n_dim() != n_dim) throw UsageError("embedding width does not match memory");
  for (int label : emb.labels)
    if (label < 0 || label >= n_ids)
      throw UsageError("label out of memory range: " + std::to_string(label));

  const MemoryOptions& o = bank.opts;
  if (o.mode == UpdateMode::None) return;

  // Batch per-identity means, in batch order.
  std::map<int, std::pair<Vec, int>> present;  // label -> (sum, count)
  for (int r = 0; r < emb.batch(); ++r) {
    auto& slot = present[emb.labels[r]];
    if (slot.second == 0) slot.first.assign(n_dim, 0.0);
    const double* e = emb.rows.row(r);
    for (int k = 0; k < n_dim; ++k) slot.first[k] += e[k];
    slot.second += 1;
  }

  std::vector<char> is_present(n_ids, 0);
  Vec shift_sum(n_dim, 0.0);  // accumulated present movement, id order
  for (auto& [label, slot] : present) {
    is_present[label] = 1;
    double inv = 1.0 / slot.second;
    double* row = bank.rows.row(label);
    if (o.mode == UpdateMode::HardReplace) {
      for (int k = 0; k < n_dim; ++k) row[k] = slot.first[k] * inv;
    } else {
      // Delta form keeps the fixed point exact: mean == row moves nothing,
      // and alpha == 1 is a bitwise no-op.
      for (int k = 0; k < n_dim; ++k) {
        double delta = (1.0 - o.alpha) * (slot.first[k] * inv - row[k]);
        row[k] += delta;
        shift_sum[k] += delta;
      }
    }
  }

  if (o.mode == UpdateMode::PresentAbsent) {
    Vec batch_mean(n_dim, 0.0);
    for (int r = 0; r < emb.batch(); ++r) {
      const double* e = emb.rows.row(r);
      for (int k = 0; k < n_dim; ++k) batch_mean[k] += e[k];
    }
    double inv = 1.0 / emb.batch();
    for (int k = 0; k < n_dim; ++k) batch_mean[k] *= inv;
    for (int i = 0; i < n_ids; ++i) {
      if (is_present[i]) continue;
      double* row = bank.rows.row(i);
      for (int k = 0; k < n_dim; ++k)
        row[k] = (1.0 - o.beta) * (batch_mean[k] - row[k]) + o.beta * row[k];
    }
  } else if (o.mode == UpdateMode::PresentAbsentShift) {
    // One shared shift, the mean present movement; adding the same vector
    // to every absent row preserves their pairwise differences.
    double inv = 1.0 / static_cast<double>(present.size());
    for (int k = 0; k < n_dim; ++k) shift_sum[k] *= inv;
    for (int i = 0; i < n_ids; ++i) {
      if (is_present[i]) continue;
      double* row = bank.rows.row(i);
      for (int k = 0; k < n_dim; ++k) row[k] += shift_sum[k];
    }
  }

  if (o.renormalize)
    for (int i = 0; i < n_ids; ++i) renormalize_row(bank.rows.row(i), n_dim);
}

namespace {

struct CeWork {
  Mat probs;  // batch x n_ids softmax probabilities (for the gradient)
  double ce = 0.0;
};

CeWork cross_entropy(const EmbeddingMatrix& emb, const MemoryBank& bank, double tau,
                     bool keep_probs) {
  const int n = emb.batch();
  const int n_ids = bank.n_ids();
  const int n_dim = bank.n_dim();

  CeWork work;
  if (keep_probs) work.probs = Mat(n, n_ids);
  ExactSum total;
  Vec logits(n_ids);
  for (int r = 0; r < n; ++r) {
    const double* e = emb.rows.row(r);
    double max_logit = -HUGE_VAL;
    for (int c = 0; c < n_ids; ++c) {
      const double* m = bank.rows.row(c);
      double dot = 0.0;
      for (int k = 0; k < n_dim; ++k) dot += e[k] * m[k];
      logits[c] = dot / tau;
      if (logits[c] > max_logit) max_logit = logits[c];
    }
    double denom = 0.0;
    for (int c = 0; c < n_ids; ++c) denom += std::exp(logits[c] - max_logit);
    double lse = max_logit + std::log(denom);
    total.add(lse - logits[emb.labels[r]]);
    if (keep_probs) {
      double* p = work.probs.row(r);
      for (int c = 0; c < n_ids; ++c) p[c] = std::exp(logits[c] - lse);
    }
  }
  work.ce = total.total() / n;
  return work;
}

// Reference mean per row: the batch mean, or the per-identity batch mean.
Mat reference_means(const EmbeddingMatrix& emb, VarianceMode mode) {
  const int n = emb.batch();
  const int dim = emb.n_dim();
  Mat mu(n, dim);
  if (mode == VarianceMode::BatchMean) {
    Vec mean(dim);
    for (int k = 0; k < dim; ++k) {
      ExactSum s;
      for (int r = 0; r < n; ++r) s.add(emb.rows.at(r, k));
      mean[k] = s.total() / n;
    }
    for (int r = 0; r < n; ++r)
      for (int k = 0; k < dim; ++k) mu.at(r, k) = mean[k];
  } else {
    std::map<int, std::vector<int>> groups;
    for (int r = 0; r < n; ++r) groups[emb.labels[r]].push_back(r);
    for (auto& [label, members] : groups) {
      Vec mean(dim);
      for (int k = 0; k < dim; ++k) {
        ExactSum s;
        for (int r : members) s.add(emb.rows.at(r, k));
        mean[k] = s.total() / static_cast<double>(members.size());
      }
      for (int r : members)
        for (int k = 0; k < dim; ++k) mu.at(r, k) = mean[k];
    }
  }
  return mu;
}

double variance_term(const EmbeddingMatrix& emb, const Mat& mu) {
  ExactSum s;
  for (size_t i = 0; i < emb.rows.data.size(); ++i) {
    double d = emb.rows.data[i] - mu.data[i];
    s.add(d * d);
  }
  return s.total() / static_cast<double>(emb.rows.data.size());
}

void check_loss_args(const EmbeddingMatrix& emb, const MemoryBank& bank,
                     const MemoryLossConfig& cfg) {
  cfg.validate();
  if (emb.batch() < 1) throw UsageError("empty embedding matrix");
  if (emb.n_dim() != bank.n_dim())
    throw UsageError("embedding width does not match memory");
  for (int label : emb.labels)
    if (label < 0 || label >= bank.n_ids())
      throw UsageError("label out of memory range: " + std::to_string(label));
}

}  // namespace

MemoryLossBreakdown memory_loss(const EmbeddingMatrix& emb, const MemoryBank& bank,
                                const MemoryLossConfig& cfg) {
  check_loss_args(emb, bank, cfg);
  MemoryLossBreakdown b;
  b.ce = cross_entropy(emb, bank, cfg.tau, false).ce;
  b.variance = variance_term(emb, reference_means(emb, cfg.variance_mode));
  b.total = b.ce + b.variance;
  return b;
}

MemoryLossBreakdown memory_loss_grad(const EmbeddingMatrix& emb,
                                     const MemoryBank& bank,
                                     const MemoryLossConfig& cfg, Mat& grad_rows) {
  check_loss_args(emb, bank, cfg);
  const int n = emb.batch();
  const int dim = emb.n_dim();
  const int n_ids = bank.n_ids();

  MemoryLossBreakdown b;
  CeWork work = cross_entropy(emb, bank, cfg.tau, true);
  b.ce = work.ce;
  // d ce / d e_r = (1/(n tau)) * sum_c (p_c - [c == label]) M[c]
  const double ce_scale = 1.0 / (static_cast<double>(n) * cfg.tau);
  for (int r = 0; r < n; ++r) {
    const double* p = work.probs.row(r);
    double* g = grad_rows.row(r);
    for (int c = 0; c < n_ids; ++c) {
      double coeff = (p[c] - (c == emb.labels[r] ? 1.0 : 0.0)) * ce_scale;
      if (coeff == 0.0) continue;
      const double* m = bank.rows.row(c);
      for (int k = 0; k < dim; ++k) g[k] += coeff * m[k];
    }
  }

  Mat mu = reference_means(emb, cfg.variance_mode);
  b.variance = variance_term(emb, mu);
  // Deviations from a group mean sum to zero, so d var / d e = 2(e - mu)/N.
  const double var_scale = 2.0 / static_cast<double>(emb.rows.data.size());
  for (size_t i = 0; i < emb.rows.data.size(); ++i)
    grad_rows.data[i] += var_scale * (emb.rows.data[i] - mu.data[i]);

  b.total = b.ce + b.variance;
  return b;
}

double fusion_factor(int64_t t, int64_t total_iters) {
  if (total_iters < 1) throw UsageError("total_iters must be >= 1");
  if (t < 0 || t > total_iters) throw UsageError("iteration out of [0, total_iters]");
  return std::sin(M_PI * static_cast<double>(t) / (2.0 * total_iters));
}

}  // namespace hm

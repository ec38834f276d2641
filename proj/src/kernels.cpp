#include "hardmetric/kernels.hpp"

#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "hardmetric/errors.hpp"
#include "hardmetric/parallel.hpp"

namespace hm::kernels {

namespace {

constexpr double kNormFloor = 1e-12;

}  // namespace

void embed_one(const ModelParams& params, const FeatureSequence& seq, Mat& out,
               int r, ItemCache* cache) {
  const int d_in = params.dims.d_in;
  const int d_hid = params.dims.d_hid;
  const int n_dim = params.dims.n_dim;
  const int n_frames = seq.frames.rows;

  Vec pooled(d_hid, 0.0);
  std::vector<int> argmax(d_hid, 0);
  Vec act(d_hid);

  for (int t = 0; t < n_frames; ++t) {
    const double* x = seq.frames.row(t);
    for (int j = 0; j < d_hid; ++j) act[j] = params.frame_bias[j];
    for (int i = 0; i < d_in; ++i) {
      double xi = x[i];
      const double* w = params.frame_weights.row(i);
      for (int j = 0; j < d_hid; ++j) act[j] += xi * w[j];
    }
    if (t == 0) {
      for (int j = 0; j < d_hid; ++j) pooled[j] = std::tanh(act[j]);
    } else {
      // Strict > keeps the earliest frame on ties.
      for (int j = 0; j < d_hid; ++j) {
        double h = std::tanh(act[j]);
        if (h > pooled[j]) {
          pooled[j] = h;
          argmax[j] = t;
        }
      }
    }
  }

  Vec raw(n_dim);
  for (int k = 0; k < n_dim; ++k) raw[k] = params.head_bias[k];
  for (int j = 0; j < d_hid; ++j) {
    double pj = pooled[j];
    const double* w = params.head_weights.row(j);
    for (int k = 0; k < n_dim; ++k) raw[k] += pj * w[k];
  }

  double norm_sq = 0.0;
  for (int k = 0; k < n_dim; ++k) norm_sq += raw[k] * raw[k];
  double norm = std::sqrt(norm_sq);
  double inv = 1.0 / std::max(norm, kNormFloor);
  double* e = out.row(r);
  for (int k = 0; k < n_dim; ++k) e[k] = raw[k] * inv;

  if (cache) {
    cache->pooled = std::move(pooled);
    cache->argmax = std::move(argmax);
    cache->raw = std::move(raw);
    cache->raw_norm = norm;
  }
}

ForwardCache embed_batch_serial(const ModelParams& params,
                                const std::vector<FeatureSequence>& batch) {
  const int n = static_cast<int>(batch.size());
  ForwardCache fc;
  fc.emb.rows = Mat(n, params.dims.n_dim);
  fc.emb.labels.resize(n);
  fc.items.resize(n);
  for (int r = 0; r < n; ++r) {
    embed_one(params, batch[r], fc.emb.rows, r, &fc.items[r]);
    fc.emb.labels[r] = batch[r].id;
  }
  return fc;
}

ForwardCache embed_batch_omp(const ModelParams& params,
                             const std::vector<FeatureSequence>& batch, int threads) {
  const int n = static_cast<int>(batch.size());
  ForwardCache fc;
  fc.emb.rows = Mat(n, params.dims.n_dim);
  fc.emb.labels.resize(n);
  fc.items.resize(n);
#pragma omp parallel for schedule(static) num_threads(threads)
  for (int r = 0; r < n; ++r) {
    embed_one(params, batch[r], fc.emb.rows, r, &fc.items[r]);
    fc.emb.labels[r] = batch[r].id;
  }
  return fc;
}

ForwardCache embed_batch_auto(const ModelParams& params,
                              const std::vector<FeatureSequence>& batch) {
  int nt = parallel::threads();
  if (nt > 1 && batch.size() > 1) return embed_batch_omp(params, batch, nt);
  return embed_batch_serial(params, batch);
}

namespace {

void backward_one(const ModelParams& params, const FeatureSequence& seq,
                  const ItemCache& item, const double* e_row, const double* g_row,
                  ParamGrads& g) {
  const int d_in = params.dims.d_in;
  const int d_hid = params.dims.d_hid;
  const int n_dim = params.dims.n_dim;

  // Through the normalization: e = raw / max(|raw|, floor).
  Vec g_raw(n_dim);
  if (item.raw_norm >= kNormFloor) {
    double dot = 0.0;
    for (int k = 0; k < n_dim; ++k) dot += g_row[k] * e_row[k];
    double inv = 1.0 / item.raw_norm;
    for (int k = 0; k < n_dim; ++k) g_raw[k] = (g_row[k] - dot * e_row[k]) * inv;
  } else {
    double inv = 1.0 / kNormFloor;
    for (int k = 0; k < n_dim; ++k) g_raw[k] = g_row[k] * inv;
  }

  // Head affine map.
  Vec g_pooled(d_hid, 0.0);
  for (int k = 0; k < n_dim; ++k) g.head_bias[k] += g_raw[k];
  for (int j = 0; j < d_hid; ++j) {
    double pj = item.pooled[j];
    double* gw = g.head_weights.row(j);
    const double* w = params.head_weights.row(j);
    double acc = 0.0;
    for (int k = 0; k < n_dim; ++k) {
      gw[k] += pj * g_raw[k];
      acc += w[k] * g_raw[k];
    }
    g_pooled[j] = acc;
  }

  // Max pooling routes each unit's gradient to its argmax frame; tanh
  // gradient uses the pooled activation itself.
  for (int j = 0; j < d_hid; ++j) {
    double ga = (1.0 - item.pooled[j] * item.pooled[j]) * g_pooled[j];
    if (ga == 0.0) continue;
    g.frame_bias[j] += ga;
    const double* x = seq.frames.row(item.argmax[j]);
    for (int i = 0; i < d_in; ++i) g.frame_weights.at(i, j) += x[i] * ga;
  }
}

}  // namespace

ParamGrads backward_batch_serial(const ModelParams& params,
                                 const std::vector<FeatureSequence>& batch,
                                 const ForwardCache& cache, const Mat& grad_rows) {
  const int n = static_cast<int>(batch.size());
  std::vector<ParamGrads> per_item(n);
  for (int r = 0; r < n; ++r) {
    per_item[r] = ParamGrads::zeros(params.dims);
    backward_one(params, batch[r], cache.items[r], cache.emb.rows.row(r),
                 grad_rows.row(r), per_item[r]);
  }
  ParamGrads g = ParamGrads::zeros(params.dims);
  for (int r = 0; r < n; ++r) g.add_scaled(per_item[r], 1.0);
  return g;
}

ParamGrads backward_batch_omp(const ModelParams& params,
                              const std::vector<FeatureSequence>& batch,
                              const ForwardCache& cache, const Mat& grad_rows,
                              int threads) {
  const int n = static_cast<int>(batch.size());
  std::vector<ParamGrads> per_item(n);
#pragma omp parallel for schedule(static) num_threads(threads)
  for (int r = 0; r < n; ++r) {
    per_item[r] = ParamGrads::zeros(params.dims);
    backward_one(params, batch[r], cache.items[r], cache.emb.rows.row(r),
                 grad_rows.row(r), per_item[r]);
  }
  // Fixed batch-order reduction keeps the result thread-count independent.
  ParamGrads g = ParamGrads::zeros(params.dims);
  for (int r = 0; r < n; ++r) g.add_scaled(per_item[r], 1.0);
  return g;
}

ParamGrads backward_batch_auto(const ModelParams& params,
                               const std::vector<FeatureSequence>& batch,
                               const ForwardCache& cache, const Mat& grad_rows) {
  int nt = parallel::threads();
  if (nt > 1 && batch.size() > 1)
    return backward_batch_omp(params, batch, cache, grad_rows, nt);
  return backward_batch_serial(params, batch, cache, grad_rows);
}

namespace {

inline double row_distance(const Mat& rows, int i, int j) {
  const double* a = rows.row(i);
  const double* b = rows.row(j);
  double acc = 0.0;
  for (int k = 0; k < rows.cols; ++k) {
    double d = a[k] - b[k];
    acc += d * d;
  }
  return std::sqrt(acc);
}

}  // namespace

void pairwise_distances_serial(const Mat& rows, Mat& out) {
  const int n = rows.rows;
  for (int i = 0; i < n; ++i) {
    out.at(i, i) = 0.0;
    for (int j = i + 1; j < n; ++j) {
      double d = row_distance(rows, i, j);
      out.at(i, j) = d;
      out.at(j, i) = d;
    }
  }
}

void pairwise_distances_omp(const Mat& rows, Mat& out, int threads) {
  const int n = rows.rows;
#pragma omp parallel for schedule(static) num_threads(threads)
  for (int i = 0; i < n; ++i) {
    out.at(i, i) = 0.0;
    for (int j = i + 1; j < n; ++j) {
      double d = row_distance(rows, i, j);
      out.at(i, j) = d;
      out.at(j, i) = d;
    }
  }
}

void pairwise_distances_auto(const Mat& rows, Mat& out) {
  int nt = parallel::threads();
  if (nt > 1 && rows.rows > 1) {
    pairwise_distances_omp(rows, out, nt);
  } else {
    pairwise_distances_serial(rows, out);
  }
}

namespace {

// Flat view over the four parameter blocks.
double* param_entry(ModelParams& p, size_t idx) {
  size_t a = p.frame_weights.data.size();
  if (idx < a) return &p.frame_weights.data[idx];
  idx -= a;
  size_t b = p.frame_bias.size();
  if (idx < b) return &p.frame_bias[idx];
  idx -= b;
  size_t c = p.head_weights.data.size();
  if (idx < c) return &p.head_weights.data[idx];
  idx -= c;
  return &p.head_bias[idx];
}

double* grad_entry(ParamGrads& g, size_t idx) {
  size_t a = g.frame_weights.data.size();
  if (idx < a) return &g.frame_weights.data[idx];
  idx -= a;
  size_t b = g.frame_bias.size();
  if (idx < b) return &g.frame_bias[idx];
  idx -= b;
  size_t c = g.head_weights.data.size();
  if (idx < c) return &g.head_weights.data[idx];
  idx -= c;
  return &g.head_bias[idx];
}

double central_diff_at(ModelParams& local, size_t idx,
                       const std::vector<FeatureSequence>& batch,
                       const EmbeddingLoss& loss, double step) {
  double* p = param_entry(local, idx);
  double saved = *p;
  *p = saved + step;
  double up = loss.value(embed_batch_serial(local, batch).emb);
  *p = saved - step;
  double down = loss.value(embed_batch_serial(local, batch).emb);
  *p = saved;
  return (up - down) / (2.0 * step);
}

}  // namespace

ParamGrads numerical_gradient_serial(const ModelParams& params,
                                     const std::vector<FeatureSequence>& batch,
                                     const EmbeddingLoss& loss, double step) {
  ParamGrads g = ParamGrads::zeros(params.dims);
  ModelParams local = params;
  const size_t n = params.n_entries();
  for (size_t idx = 0; idx < n; ++idx)
    *grad_entry(g, idx) = central_diff_at(local, idx, batch, loss, step);
  return g;
}

ParamGrads numerical_gradient_omp(const ModelParams& params,
                                  const std::vector<FeatureSequence>& batch,
                                  const EmbeddingLoss& loss, double step, int threads) {
  ParamGrads g = ParamGrads::zeros(params.dims);
  const long n = static_cast<long>(params.n_entries());
#pragma omp parallel num_threads(threads)
  {
    ModelParams local = params;  // each thread perturbs its own copy
#pragma omp for schedule(static)
    for (long idx = 0; idx < n; ++idx)
      *grad_entry(g, static_cast<size_t>(idx)) =
          central_diff_at(local, static_cast<size_t>(idx), batch, loss, step);
  }
  return g;
}

ParamGrads numerical_gradient_auto(const ModelParams& params,
                                   const std::vector<FeatureSequence>& batch,
                                   const EmbeddingLoss& loss, double step) {
  int nt = parallel::threads();
  if (nt > 1) return numerical_gradient_omp(params, batch, loss, step, nt);
  return numerical_gradient_serial(params, batch, loss, step);
}

namespace {

int rank_one(const Mat& rows, const std::vector<int>& gallery_rows,
             const std::vector<int>& gallery_views, const RankQuery& q) {
  int best = -1;
  double best_d = 0.0;
  for (size_t gi = 0; gi < gallery_rows.size(); ++gi) {
    if (q.exclude_view >= 0 && gallery_views[gi] == q.exclude_view) continue;
    double d = row_distance(rows, q.probe_row, gallery_rows[gi]);
    if (best < 0 || d < best_d) {  // strict <: lowest gallery position wins ties
      best = static_cast<int>(gi);
      best_d = d;
    }
  }
  return best;
}

}  // namespace

void rank_probes_serial(const Mat& rows, const std::vector<int>& gallery_rows,
                        const std::vector<int>& gallery_views,
                        const std::vector<RankQuery>& queries, std::vector<int>& out) {
  out.resize(queries.size());
  for (size_t i = 0; i < queries.size(); ++i)
    out[i] = rank_one(rows, gallery_rows, gallery_views, queries[i]);
}

void rank_probes_omp(const Mat& rows, const std::vector<int>& gallery_rows,
                     const std::vector<int>& gallery_views,
                     const std::vector<RankQuery>& queries, std::vector<int>& out,
                     int threads) {
  out.resize(queries.size());
  const long n = static_cast<long>(queries.size());
#pragma omp parallel for schedule(static) num_threads(threads)
  for (long i = 0; i < n; ++i)
    out[i] = rank_one(rows, gallery_rows, gallery_views, queries[i]);
}

void rank_probes_auto(const Mat& rows, const std::vector<int>& gallery_rows,
                      const std::vector<int>& gallery_views,
                      const std::vector<RankQuery>& queries, std::vector<int>& out) {
  int nt = parallel::threads();
  if (nt > 1 && queries.size() > 1) {
    rank_probes_omp(rows, gallery_rows, gallery_views, queries, out, nt);
  } else {
    rank_probes_serial(rows, gallery_rows, gallery_views, queries, out);
  }
}

}  // namespace hm::kernels

#ifndef HARDMETRIC_KERNELS_HPP_
#define HARDMETRIC_KERNELS_HPP_

#include <vector>

#include "hardmetric/mat.hpp"
#include "hardmetric/model.hpp"

// Data-parallel inner loops. Each kernel comes as a serial reference and
// an OpenMP variant over independent output slots; outputs are bitwise
// identical for any thread count. The *_auto entry points dispatch on
// hm::parallel::threads().
namespace hm::kernels {

/// Per-item forward state kept for the backward pass.
struct ItemCache {
  Vec pooled;               // d_hid, post-tanh pooled activations
  std::vector<int> argmax;  // d_hid, frame index that produced each pooled unit
  Vec raw;                  // n_dim, pre-normalization output
  double raw_norm = 0.0;
};

struct ForwardCache {
  EmbeddingMatrix emb;
  std::vector<ItemCache> items;
};

/// Embeds one sequence into row `r` of out (and cache if non-null).
void embed_one(const ModelParams& params, const FeatureSequence& seq, Mat& out,
               int r, ItemCache* cache);

ForwardCache embed_batch_serial(const ModelParams& params,
                                const std::vector<FeatureSequence>& batch);
ForwardCache embed_batch_omp(const ModelParams& params,
                             const std::vector<FeatureSequence>& batch, int threads);
ForwardCache embed_batch_auto(const ModelParams& params,
                              const std::vector<FeatureSequence>& batch);

/// Backprop of d(loss)/d(rows) through normalization, head, pooling and the
/// frame map. Per-item gradients are reduced in fixed batch order.
ParamGrads backward_batch_serial(const ModelParams& params,
                                 const std::vector<FeatureSequence>& batch,
                                 const ForwardCache& cache, const Mat& grad_rows);
ParamGrads backward_batch_omp(const ModelParams& params,
                              const std::vector<FeatureSequence>& batch,
                              const ForwardCache& cache, const Mat& grad_rows,
                              int threads);
ParamGrads backward_batch_auto(const ModelParams& params,
                               const std::vector<FeatureSequence>& batch,
                               const ForwardCache& cache, const Mat& grad_rows);

/// Pairwise Euclidean distances between rows; exact zero diagonal.
void pairwise_distances_serial(const Mat& rows, Mat& out);
void pairwise_distances_omp(const Mat& rows, Mat& out, int threads);
void pairwise_distances_auto(const Mat& rows, Mat& out);

/// Central differences of loss(forward(params, batch)) per parameter entry.
ParamGrads numerical_gradient_serial(const ModelParams& params,
                                     const std::vector<FeatureSequence>& batch,
                                     const EmbeddingLoss& loss, double step);
ParamGrads numerical_gradient_omp(const ModelParams& params,
                                  const std::vector<FeatureSequence>& batch,
                                  const EmbeddingLoss& loss, double step, int threads);
ParamGrads numerical_gradient_auto(const ModelParams& params,
                                   const std::vector<FeatureSequence>& batch,
                                   const EmbeddingLoss& loss, double step);

/// Nearest admissible gallery entry per probe. gallery_rows indexes into
/// `rows`; a probe may exclude gallery entries by view. Ties go to the
/// lowest gallery position. Returns the winning gallery position per probe,
/// or -1 when no entry is admissible.
struct RankQuery {
  int probe_row = 0;
  int exclude_view = -1;  // -1: nothing excluded
};
void rank_probes_serial(const Mat& rows, const std::vector<int>& gallery_rows,
                        const std::vector<int>& gallery_views,
                        const std::vector<RankQuery>& queries, std::vector<int>& out);
void rank_probes_omp(const Mat& rows, const std::vector<int>& gallery_rows,
                     const std::vector<int>& gallery_views,
                     const std::vector<RankQuery>& queries, std::vector<int>& out,
                     int threads);
void rank_probes_auto(const Mat& rows, const std::vector<int>& gallery_rows,
                      const std::vector<int>& gallery_views,
                      const std::vector<RankQuery>& queries, std::vector<int>& out);

}  // namespace hm::kernels

#endif  // HARDMETRIC_KERNELS_HPP_

#ifndef HARDMETRIC_REWEIGHT_HPP_
#define HARDMETRIC_REWEIGHT_HPP_

#include <cstdint>
#include <vector>

#include "hardmetric/mat.hpp"
#include "hardmetric/model.hpp"

// Hardness-based reweighting of pairwise distances with an easy-to-hard
// progressive schedule, and the triplet losses built on them.
namespace hm {

struct DistanceMatrix {
  Mat entries;              // batch x batch, symmetric, zero diagonal
  std::vector<int> labels;  // batch identity indices

  int batch() const { return entries.rows; }
};

/// Per-anchor attention weights. Row i holds softmax weights over anchor
/// i's positive set and (separately normalized) over its negative set;
/// the self pair is excluded from both and carries weight 0.
struct WeightMatrix {
  Mat entries;
  std::vector<int> labels;
};

/// Progressive reweighting schedule.
struct Schedule {
  double delta_min = 0.1;   // softness floor, keeps exp(d/delta) bounded
  double epsilon = 1.4;     // schedule amplitude
  int64_t total_iters = 2000;
  double margin = 0.2;

  void validate() const;  // throws ConfigError
};

DistanceMatrix pairwise_distances(const EmbeddingMatrix& emb);

/// delta_t = delta_min + (1 + cos(pi*t/(2T)))/2 * epsilon; strictly
/// decreasing in t for epsilon > 0.
double progressive_factor(int64_t t, const Schedule& sched);

/// s_t = sin(pi*t/(2T)), ramping the reweighted term in over training.
double smoothness_factor(int64_t t, int64_t total_iters);

/// Softmax over exp(+d/delta) within each anchor's positive set and over
/// exp(-d/delta) within its negative set: hard positives are far, hard
/// negatives are near, and both get the larger weights. Computed in log
/// space with max subtraction.
WeightMatrix attention_weights(const DistanceMatrix& dist, double delta);

/// Elementwise d' = w * d; self pairs are 0.
DistanceMatrix weighted_distances(const DistanceMatrix& dist, const WeightMatrix& w);

/// Per-anchor hinge on aggregate weighted distances:
/// [margin + sum_pos d' - sum_neg d']_+ , averaged over all anchors.
/// Expects the weighted matrix from weighted_distances.
double reweighted_bh_loss(const DistanceMatrix& weighted, double margin);

/// Batch-all triplet loss: hinge over every (anchor, positive != anchor,
/// negative) triplet, averaged over the enumerated triplets.
double triplet_ba_loss(const DistanceMatrix& dist, double margin);

struct ReweightBreakdown {
  double ba = 0.0;
  double bh = 0.0;
  double s_t = 0.0;
  double delta_t = 0.0;
  double total = 0.0;  // ba + s_t * bh
};

/// Composite metric loss: batch-all term plus the smoothness-ramped
/// reweighted batch-hard term at iteration t.
ReweightBreakdown reweight_loss(const DistanceMatrix& dist, int64_t t,
                                const Schedule& sched);

/// Same value, plus d(total)/d(entries) accumulated into grad_dist
/// (batch x batch, must be pre-sized and zeroed by the caller). The chain
/// through the attention weights is included.
ReweightBreakdown reweight_loss_grad(const DistanceMatrix& dist, int64_t t,
                                     const Schedule& sched, Mat& grad_dist);

/// d(ba)/d(entries) only, for ablation cells without the reweighted term.
double triplet_ba_loss_grad(const DistanceMatrix& dist, double margin, Mat& grad_dist);

/// Chains a distance-space gradient back to embedding rows:
/// d d(i,j)/d e_i = (e_i - e_j)/d(i,j). Accumulates into grad_rows.
void distances_backward(const EmbeddingMatrix& emb, const DistanceMatrix& dist,
                        const Mat& grad_dist, Mat& grad_rows);

}  // namespace hm

#endif  // HARDMETRIC_REWEIGHT_HPP_

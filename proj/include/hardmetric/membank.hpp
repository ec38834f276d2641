#ifndef HARDMETRIC_MEMBANK_HPP_
#define HARDMETRIC_MEMBANK_HPP_

#include <cstdint>
#include <string>

#include "hardmetric/dataset.hpp"
#include "hardmetric/mat.hpp"
#include "hardmetric/model.hpp"

// Class-centroid memory bank: one feature row per identity, updated with
// momentum for identities present in a batch and, optionally, aligned
// updates for absent identities so the relative structure of the rows is
// preserved. Supervises training as an auxiliary classifier.
namespace hm {

enum class UpdateMode {
  None,               // memory frozen after initialization
  HardReplace,        // present rows <- batch per-identity means
  Present,            // momentum update of present rows only
  PresentAbsent,      // + absent rows blended toward the batch mean
  PresentAbsentShift  // + absent rows shifted by the mean present movement
};

const char* update_mode_name(UpdateMode m);
UpdateMode update_mode_from_name(const std::string& s);

struct MemoryOptions {
  UpdateMode mode = UpdateMode::PresentAbsent;
  double alpha = 0.9;       // momentum for present rows
  double beta = 0.9;        // momentum for absent rows
  bool renormalize = true;  // keep nonzero rows unit-norm after updates

  void validate() const;
};

struct MemoryBank {
  Mat rows;  // n_ids x n_dim
  MemoryOptions opts;

  int n_ids() const { return rows.rows; }
  int n_dim() const { return rows.cols; }
};

enum class VarianceMode { BatchMean, PerIdMean };

const char* variance_mode_name(VarianceMode m);
VarianceMode variance_mode_from_name(const std::string& s);

struct MemoryLossConfig {
  double tau = 0.1;  // temperature on the centroid logits
  VarianceMode variance_mode = VarianceMode::BatchMean;

  void validate() const;
};

/// Row i = mean embedding over all of identity i's sequences (full pass
/// over the dataset), renormalized when the option is set.
MemoryBank init_memory(const LabeledDataset& ds, const ModelParams& params,
                       const MemoryOptions& opts);

/// One update step from a batch's embeddings, according to bank.opts.
/// Present rows move toward their batch per-identity mean with momentum
/// alpha; absent rows follow the configured mode. Renormalization, when
/// enabled, runs after the branch logic.
void update_memory(MemoryBank& bank, const EmbeddingMatrix& emb);

struct MemoryLossBreakdown {
  double ce = 0.0;        // temperature-scaled cross entropy on centroid logits
  double variance = 0.0;  // mean squared deviation from the reference mean
  double total = 0.0;
};

/// logits = emb * rows^T / tau; loss = mean CE against the labels plus the
/// mean over batch and dimensions of (e - mu)^2, where mu is the batch
/// mean (BatchMean) or the per-identity batch mean (PerIdMean).
MemoryLossBreakdown memory_loss(const EmbeddingMatrix& emb, const MemoryBank& bank,
                                const MemoryLossConfig& cfg);

/// Same value; accumulates d(total)/d(rows of emb) into grad_rows. Memory
/// rows are constants: gradients flow through embeddings only.
MemoryLossBreakdown memory_loss_grad(const EmbeddingMatrix& emb,
                                     const MemoryBank& bank,
                                     const MemoryLossConfig& cfg, Mat& grad_rows);

/// gamma_t = sin(pi*t/(2T)); ramps the memory supervision in as the
/// embedder (and hence the bank) becomes reliable.
double fusion_factor(int64_t t, int64_t total_iters);

}  // namespace hm

#endif  // HARDMETRIC_MEMBANK_HPP_

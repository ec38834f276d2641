#ifndef HARDMETRIC_TRAINER_HPP_
#define HARDMETRIC_TRAINER_HPP_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "hardmetric/membank.hpp"
#include "hardmetric/model.hpp"
#include "hardmetric/reweight.hpp"
#include "hardmetric/rng.hpp"
#include "hardmetric/sampler.hpp"

namespace hm {

struct OptimConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const;
};

struct TrainConfig {
  ModelDims dims;
  int p = 8;
  int k = 4;
  Schedule schedule;  // schedule.total_iters mirrors total_iters below
  MemoryOptions memory;
  MemoryLossConfig memory_loss;
  OptimConfig optim;
  int64_t total_iters = 2000;
  uint64_t seed = 1;
  bool use_reweighted_bh = true;  // off: drop the s_t-ramped batch-hard term
  bool use_memory = true;         // off: drop the gamma_t-ramped memory loss
  int64_t log_every = 1;          // CSV row thinning; every record is kept in memory
  int64_t checkpoint_every = 0;   // 0: only the final checkpoint

  void validate() const;
  std::string to_json() const;
  static TrainConfig from_json(const std::string& text);
};

struct TotalBreakdown {
  double total = 0.0;
  double ba = 0.0;
  double bh = 0.0;
  double s_t = 0.0;
  double delta_t = 0.0;
  double ce = 0.0;
  double variance = 0.0;
  double gamma_t = 0.0;
};

/// Composite training objective at iteration t:
///   total = ba + s_t * bh + gamma_t * (ce + variance)
/// with disabled terms contributing exactly 0. The memory bank is a
/// constant with respect to the gradient.
class TotalLoss : public EmbeddingLoss {
 public:
  TotalLoss(const MemoryBank& bank, int64_t t, const TrainConfig& cfg)
      : bank_(&bank), t_(t), cfg_(&cfg) {}

  double value(const EmbeddingMatrix& emb) const override;
  double value_and_grad(const EmbeddingMatrix& emb, Mat& grad) const override;
  TotalBreakdown breakdown(const EmbeddingMatrix& emb) const;
  TotalBreakdown breakdown_and_grad(const EmbeddingMatrix& emb, Mat& grad) const;

 private:
  TotalBreakdown breakdown_impl(const EmbeddingMatrix& emb, Mat* grad) const;

  const MemoryBank* bank_;
  int64_t t_;
  const TrainConfig* cfg_;
};

TotalBreakdown total_loss(const EmbeddingMatrix& emb, const MemoryBank& bank,
                          int64_t t, const TrainConfig& cfg);

struct LogRecord {
  int64_t t = 0;
  double loss_total = 0, loss_ba = 0, loss_bh = 0, loss_ce = 0, loss_var = 0;
  double delta_t = 0, s_t = 0, gamma_t = 0;

  bool operator==(const LogRecord& o) const;
};

struct RunLog {
  std::vector<LogRecord> records;

  /// One header row; one row per logged iteration (t % log_every == 0 or
  /// the final iteration). Doubles written with 17 significant digits.
  void to_csv(std::ostream& os, int64_t log_every = 1) const;
  std::string to_csv_string(int64_t log_every = 1) const;
  static RunLog from_csv(std::istream& is);

  bool operator==(const RunLog& o) const { return records == o.records; }
};

struct AdamState {
  ParamGrads m;
  ParamGrads v;
  int64_t step = 0;
};

/// Training loop. Iterations run t = 1..total_iters; each step samples a
/// P x K batch, embeds it, updates the memory bank, evaluates the
/// composite loss on the updated bank, backpropagates and applies one
/// optimizer step. Bitwise deterministic for a fixed config.
class Trainer {
 public:
  Trainer(const TrainConfig& cfg, const LabeledDataset& ds);

  /// Runs one iteration; throws NumericError (with iteration index and
  /// loss breakdown) if the loss goes non-finite.
  void step();

  int64_t iteration() const { return t_; }
  bool done() const { return t_ >= cfg_.total_iters; }

  const TrainConfig& config() const { return cfg_; }
  const ModelParams& params() const { return params_; }
  const MemoryBank& memory() const { return memory_; }
  const RunLog& log() const { return log_; }

  void save_checkpoint(const std::string& path) const;
  /// Restores params, memory, optimizer state, sampler rng and the
  /// iteration counter; the log restarts empty at the restored iteration.
  void restore(const std::string& path);

 private:
  TrainConfig cfg_;
  const LabeledDataset* data_;
  ModelParams params_;
  MemoryBank memory_;
  AdamState adam_;
  Rng rng_;
  RunLog log_;
  int64_t t_ = 0;
};

struct TrainResult {
  ModelParams params;
  MemoryBank memory;
  RunLog log;
};

/// Convenience wrapper: full run of Trainer.
TrainResult train(const TrainConfig& cfg, const LabeledDataset& ds);

/// Self-describing binary checkpoint, magic "HMCK1": a section table over
/// {meta, config, params, memory, optim, rng} with little-endian 64-bit
/// floats. The optimizer and rng sections make resume bitwise exact.
struct Checkpoint {
  int64_t t = 0;
  TrainConfig cfg;
  ModelParams params;
  MemoryBank memory;
  AdamState adam;
  std::string rng_state;
};

void save_checkpoint(const Checkpoint& ck, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace hm

#endif  // HARDMETRIC_TRAINER_HPP_

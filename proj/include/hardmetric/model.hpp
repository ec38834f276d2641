#ifndef HARDMETRIC_MODEL_HPP_
#define HARDMETRIC_MODEL_HPP_

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "hardmetric/dataset.hpp"
#include "hardmetric/mat.hpp"

namespace hm {

struct ModelDims {
  int d_in = 16;
  int d_hid = 64;
  int n_dim = 32;

  void validate() const;  // throws ConfigError
  bool operator==(const ModelDims& o) const {
    return d_in == o.d_in && d_hid == o.d_hid && n_dim == o.n_dim;
  }
};

/// Sequence embedder: per-frame affine map + tanh, temporal max pooling,
/// output affine map, L2 normalization.
struct ModelParams {
  ModelDims dims;
  Mat frame_weights;  // d_in x d_hid
  Vec frame_bias;     // d_hid
  Mat head_weights;   // d_hid x n_dim
  Vec head_bias;      // n_dim

  size_t n_entries() const;

  bool operator==(const ModelParams& o) const {
    return dims == o.dims && frame_weights == o.frame_weights &&
           frame_bias == o.frame_bias && head_weights == o.head_weights &&
           head_bias == o.head_bias;
  }
};

/// Gradient (or any per-parameter buffer) with the same layout as ModelParams.
struct ParamGrads {
  Mat frame_weights;
  Vec frame_bias;
  Mat head_weights;
  Vec head_bias;

  static ParamGrads zeros(const ModelDims& dims);
  void add_scaled(const ParamGrads& o, double scale);
};

/// Batch embeddings; every nonzero row has unit L2 norm.
struct EmbeddingMatrix {
  Mat rows;                 // batch x n_dim
  std::vector<int> labels;  // batch identity indices

  int batch() const { return rows.rows; }
  int n_dim() const { return rows.cols; }
};

/// A scalar functional of a batch embedding with an analytic gradient with
/// respect to the embedding rows. `value` alone is enough for the
/// finite-difference oracle; `value_and_grad` is what training uses.
class EmbeddingLoss {
 public:
  virtual ~EmbeddingLoss() = default;
  virtual double value(const EmbeddingMatrix& emb) const = 0;
  /// Fills grad (batch x n_dim, overwritten) and returns the loss value.
  virtual double value_and_grad(const EmbeddingMatrix& emb, Mat& grad) const = 0;
};

/// Glorot-uniform weights in [-sqrt(6/(fan_in+fan_out)), +...], zero
/// biases; deterministic for a fixed seed.
ModelParams init_params(const ModelDims& dims, uint64_t seed);

/// Embeds a batch. Per frame t: h_t = tanh(W_f^T x_t + b_f); pooled =
/// elementwise max over t (ties resolved toward the lowest frame index);
/// raw = W_h^T pooled + b_h; row = raw / max(|raw|_2, 1e-12).
EmbeddingMatrix forward(const ModelParams& params,
                        const std::vector<FeatureSequence>& batch);

/// Exact reverse-mode gradient of loss(forward(params, batch)) with
/// respect to every parameter entry.
std::pair<double, ParamGrads> loss_and_grad(const ModelParams& params,
                                            const std::vector<FeatureSequence>& batch,
                                            const EmbeddingLoss& loss);

/// Central-difference gradient oracle, (L(p+h) - L(p-h)) / 2h per entry.
ParamGrads numerical_gradient(const ModelParams& params,
                              const std::vector<FeatureSequence>& batch,
                              const EmbeddingLoss& loss, double step);

/// One-dimensional central difference of f at x.
double central_difference(const std::function<double(double)>& f, double x,
                          double step);

/// |a - b|_2 / max(|a|_2 + |b|_2, floor); the usual gradient-check metric.
double relative_error(const ParamGrads& a, const ParamGrads& b,
                      double floor = 1e-12);

}  // namespace hm

#endif  // HARDMETRIC_MODEL_HPP_

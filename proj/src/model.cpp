#include "hardmetric/model.hpp"

#include <cmath>

#include "hardmetric/errors.hpp"
#include "hardmetric/kernels.hpp"
#include "hardmetric/numeric.hpp"
#include "hardmetric/rng.hpp"

namespace hm {

void ModelDims::validate() const {
  if (d_in < 1) throw ConfigError("d_in must be >= 1");
  if (d_hid < 1) throw ConfigError("d_hid must be >= 1");
  if (n_dim < 1) throw ConfigError("n_dim must be >= 1");
}

size_t ModelParams::n_entries() const {
  return frame_weights.data.size() + frame_bias.size() + head_weights.data.size() +
         head_bias.size();
}

ParamGrads ParamGrads::zeros(const ModelDims& dims) {
  ParamGrads g;
  g.frame_weights = Mat(dims.d_in, dims.d_hid);
  g.frame_bias.assign(dims.d_hid, 0.0);
  g.head_weights = Mat(dims.d_hid, dims.n_dim);
  g.head_bias.assign(dims.n_dim, 0.0);
  return g;
}

void ParamGrads::add_scaled(const ParamGrads& o, double scale) {
  for (size_t i = 0; i < frame_weights.data.size(); ++i)
    frame_weights.data[i] += scale * o.frame_weights.data[i];
  for (size_t i = 0; i < frame_bias.size(); ++i) frame_bias[i] += scale * o.frame_bias[i];
  for (size_t i = 0; i < head_weights.data.size(); ++i)
    head_weights.data[i] += scale * o.head_weights.data[i];
  for (size_t i = 0; i < head_bias.size(); ++i) head_bias[i] += scale * o.head_bias[i];
}

ModelParams init_params(const ModelDims& dims, uint64_t seed) {
  dims.validate();
  ModelParams p;
  p.dims = dims;
  p.frame_weights = Mat(dims.d_in, dims.d_hid);
  p.frame_bias.assign(dims.d_hid, 0.0);
  p.head_weights = Mat(dims.d_hid, dims.n_dim);
  p.head_bias.assign(dims.n_dim, 0.0);

  Rng rng(Rng::derive(seed, 0x10));
  double a1 = std::sqrt(6.0 / (dims.d_in + dims.d_hid));
  for (double& w : p.frame_weights.data) w = rng.uniform(-a1, a1);
  double a2 = std::sqrt(6.0 / (dims.d_hid + dims.n_dim));
  for (double& w : p.head_weights.data) w = rng.uniform(-a2, a2);
  return p;
}

namespace {

void check_batch(const ModelParams& params, const std::vector<FeatureSequence>& batch) {
  if (batch.empty()) throw UsageError("empty batch");
  for (const FeatureSequence& s : batch) {
    if (s.frames.rows < 1) throw DataError("sequence with no frames");
    if (s.frames.cols != params.dims.d_in)
      throw UsageError("frame width " + std::to_string(s.frames.cols) +
                       " does not match d_in " + std::to_string(params.dims.d_in));
    if (!all_finite(s.frames.data.data(), s.frames.data.size()))
      throw DataError("non-finite frame value in batch");
  }
}

}  // namespace

EmbeddingMatrix forward(const ModelParams& params,
                        const std::vector<FeatureSequence>& batch) {
  check_batch(params, batch);
  return kernels::embed_batch_auto(params, batch).emb;
}

std::pair<double, ParamGrads> loss_and_grad(const ModelParams& params,
                                            const std::vector<FeatureSequence>& batch,
                                            const EmbeddingLoss& loss) {
  check_batch(params, batch);
  kernels::ForwardCache cache = kernels::embed_batch_auto(params, batch);
  Mat grad_rows(cache.emb.batch(), cache.emb.n_dim());
  double value = loss.value_and_grad(cache.emb, grad_rows);
  if (!std::isfinite(value))
    throw NumericError("non-finite loss value: " + format_g17(value));
  ParamGrads g = kernels::backward_batch_auto(params, batch, cache, grad_rows);
  return {value, g};
}

ParamGrads numerical_gradient(const ModelParams& params,
                              const std::vector<FeatureSequence>& batch,
                              const EmbeddingLoss& loss, double step) {
  check_batch(params, batch);
  if (!(step > 0.0)) throw UsageError("step must be > 0");
  return kernels::numerical_gradient_auto(params, batch, loss, step);
}

double central_difference(const std::function<double(double)>& f, double x,
                          double step) {
  return (f(x + step) - f(x - step)) / (2.0 * step);
}

namespace {

void accumulate_sq(const Mat& a, const Mat& b, double& diff_sq, double& a_sq,
                   double& b_sq) {
  for (size_t i = 0; i < a.data.size(); ++i) {
    double d = a.data[i] - b.data[i];
    diff_sq += d * d;
    a_sq += a.data[i] * a.data[i];
    b_sq += b.data[i] * b.data[i];
  }
}

void accumulate_sq(const Vec& a, const Vec& b, double& diff_sq, double& a_sq,
                   double& b_sq) {
  for (size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    diff_sq += d * d;
    a_sq += a[i] * a[i];
    b_sq += b[i] * b[i];
  }
}

}  // namespace

double relative_error(const ParamGrads& a, const ParamGrads& b, double floor) {
  double diff_sq = 0.0, a_sq = 0.0, b_sq = 0.0;
  accumulate_sq(a.frame_weights, b.frame_weights, diff_sq, a_sq, b_sq);
  accumulate_sq(a.frame_bias, b.frame_bias, diff_sq, a_sq, b_sq);
  accumulate_sq(a.head_weights, b.head_weights, diff_sq, a_sq, b_sq);
  accumulate_sq(a.head_bias, b.head_bias, diff_sq, a_sq, b_sq);
  double denom = std::sqrt(a_sq) + std::sqrt(b_sq);
  return std::sqrt(diff_sq) / std::max(denom, floor);
}

}  // namespace hm

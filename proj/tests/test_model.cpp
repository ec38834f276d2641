#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "hardmetric/errors.hpp"
#include "hardmetric/kernels.hpp"
#include "hardmetric/membank.hpp"
#include "hardmetric/model.hpp"
#include "hardmetric/parallel.hpp"
#include "hardmetric/trainer.hpp"
#include "oracles.hpp"

using namespace hm;

namespace {

ModelParams zero_params(const ModelDims& dims) {
  ModelParams p;
  p.dims = dims;
  p.frame_weights = Mat(dims.d_in, dims.d_hid);
  p.frame_bias.assign(dims.d_hid, 0.0);
  p.head_weights = Mat(dims.d_hid, dims.n_dim);
  p.head_bias.assign(dims.n_dim, 0.0);
  return p;
}

FeatureSequence make_seq(int id, std::vector<std::vector<double>> frames) {
  FeatureSequence s;
  s.id = id;
  s.frames = Mat(static_cast<int>(frames.size()), static_cast<int>(frames[0].size()));
  for (size_t t = 0; t < frames.size(); ++t)
    for (size_t i = 0; i < frames[t].size(); ++i)
      s.frames.at(static_cast<int>(t), static_cast<int>(i)) = frames[t][i];
  return s;
}

// Smallest gap between the winning and runner-up pooled activation over
// frames, per (item, hidden unit); the gradient check needs it > 1e-6.
double min_pool_gap(const ModelParams& params, const std::vector<FeatureSequence>& batch) {
  double min_gap = HUGE_VAL;
  for (const FeatureSequence& s : batch) {
    if (s.frames.rows < 2) continue;
    for (int j = 0; j < params.dims.d_hid; ++j) {
      double best = -HUGE_VAL, second = -HUGE_VAL;
      for (int t = 0; t < s.frames.rows; ++t) {
        double a = params.frame_bias[j];
        for (int i = 0; i < params.dims.d_in; ++i)
          a += s.frames.at(t, i) * params.frame_weights.at(i, j);
        double h = std::tanh(a);
        if (h > best) {
          second = best;
          best = h;
        } else if (h > second) {
          second = h;
        }
      }
      min_gap = std::min(min_gap, best - second);
    }
  }
  return min_gap;
}

}  // namespace

TEST_CASE("init_params is deterministic with zero biases and bounded weights") {
  ModelDims dims{4, 8, 16};
  ModelParams a = init_params(dims, 7);
  ModelParams b = init_params(dims, 7);
  CHECK(a == b);
  ModelParams c = init_params(dims, 8);
  CHECK_FALSE(a == c);

  for (double v : a.frame_bias) CHECK(v == 0.0);
  for (double v : a.head_bias) CHECK(v == 0.0);
  double bound1 = std::sqrt(6.0 / (dims.d_in + dims.d_hid));
  for (double v : a.frame_weights.data) CHECK(std::fabs(v) <= bound1);
  double bound2 = std::sqrt(6.0 / (dims.d_hid + dims.n_dim));
  for (double v : a.head_weights.data) CHECK(std::fabs(v) <= bound2);

  CHECK_THROWS_AS(init_params(ModelDims{0, 8, 16}, 1), ConfigError);
}

TEST_CASE("forward zero case and determinism") {
  ModelDims dims{3, 5, 4};
  ModelParams p = zero_params(dims);
  FeatureSequence s = make_seq(0, {{0, 0, 0}, {0, 0, 0}});
  EmbeddingMatrix emb = forward(p, {s, s});
  for (double v : emb.rows.data) CHECK(v == 0.0);  // degenerate normalization
  for (int k = 0; k < dims.n_dim; ++k)
    CHECK(emb.rows.at(0, k) == emb.rows.at(1, k));
}

TEST_CASE("forward one-dimensional hand evaluation") {
  // d_in = 1, two frames [1], [-1]; pooled = tanh(1); head passes through.
  ModelDims dims{1, 1, 1};
  ModelParams p = zero_params(dims);
  p.frame_weights.at(0, 0) = 1.0;
  p.head_weights.at(0, 0) = 1.0;
  FeatureSequence s = make_seq(0, {{1.0}, {-1.0}});
  EmbeddingMatrix emb = forward(p, {s});
  // raw = tanh(1) = 0.76159415595576485; normalized to +1 in one dimension
  kernels::ForwardCache fc = kernels::embed_batch_serial(p, {s});
  CHECK(fc.items[0].raw[0] == doctest::Approx(0.76159415595576485).epsilon(1e-15));
  CHECK(emb.rows.at(0, 0) == doctest::Approx(1.0).epsilon(1e-12));

  p.head_weights.at(0, 0) = -1.0;
  emb = forward(p, {s});
  CHECK(emb.rows.at(0, 0) == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("embedding rows are unit norm unless degenerate") {
  Rng rng(3);
  ModelParams p = init_params(ModelDims{6, 12, 8}, 3);
  auto batch = oracle::random_batch(rng, 3, 2, 5, 6);
  EmbeddingMatrix emb = forward(p, batch);
  for (int r = 0; r < emb.batch(); ++r) {
    double norm = 0.0;
    for (int k = 0; k < emb.n_dim(); ++k) norm += emb.rows.at(r, k) * emb.rows.at(r, k);
    CHECK(std::fabs(std::sqrt(norm) - 1.0) <= 1e-9);
  }
}

TEST_CASE("forward is frame-order invariant and batch-order equivariant") {
  Rng rng(9);
  ModelParams p = init_params(ModelDims{5, 9, 6}, 17);
  auto batch = oracle::random_batch(rng, 2, 2, 6, 5);

  EmbeddingMatrix base = forward(p, batch);

  // Shuffle frames of item 0: its row must not change a bit.
  std::vector<FeatureSequence> shuffled = batch;
  Mat& frames = shuffled[0].frames;
  std::vector<int> order = {3, 0, 5, 1, 4, 2};
  Mat rearranged(frames.rows, frames.cols);
  for (int t = 0; t < frames.rows; ++t)
    for (int i = 0; i < frames.cols; ++i) rearranged.at(t, i) = frames.at(order[t], i);
  shuffled[0].frames = rearranged;
  EmbeddingMatrix out = forward(p, shuffled);
  for (int k = 0; k < base.n_dim(); ++k)
    CHECK(out.rows.at(0, k) == base.rows.at(0, k));

  // Reversing the batch permutes rows with it.
  std::vector<FeatureSequence> reversed(batch.rbegin(), batch.rend());
  EmbeddingMatrix rev = forward(p, reversed);
  const int n = base.batch();
  for (int r = 0; r < n; ++r)
    for (int k = 0; k < base.n_dim(); ++k)
      CHECK(rev.rows.at(n - 1 - r, k) == base.rows.at(r, k));
}

TEST_CASE("forward input validation") {
  ModelParams p = init_params(ModelDims{3, 4, 2}, 1);
  CHECK_THROWS_AS(forward(p, {}), UsageError);
  FeatureSequence bad = make_seq(0, {{1.0, 2.0, HUGE_VAL}});
  CHECK_THROWS_AS(forward(p, {bad}), DataError);
  FeatureSequence wrong = make_seq(0, {{1.0, 2.0}});
  CHECK_THROWS_AS(forward(p, {wrong}), UsageError);
}

TEST_CASE("loss_and_grad trivial cases") {
  ModelDims dims{3, 4, 2};
  Rng rng(21);
  auto batch = oracle::random_batch(rng, 2, 2, 3, 3);

  ModelParams zero = zero_params(dims);
  auto [v0, g0] = loss_and_grad(zero, batch, oracle::SumSquaresLoss{});
  CHECK(v0 == 0.0);
  for (double v : g0.frame_weights.data) CHECK(v == 0.0);

  ModelParams p = init_params(dims, 2);
  auto [vc, gc] = loss_and_grad(p, batch, oracle::ConstantLoss{});
  CHECK(vc == 0.0);
  CHECK(oracle::max_abs(gc) == 0.0);
}

TEST_CASE("central difference of w^2 at 3") {
  double d = central_difference([](double w) { return w * w; }, 3.0, 1e-5);
  CHECK(std::fabs(d - 6.0) <= 1e-8);
}

TEST_CASE("numerical gradient of a constant loss is zero") {
  Rng rng(4);
  ModelParams p = init_params(ModelDims{3, 4, 2}, 5);
  auto batch = oracle::random_batch(rng, 2, 2, 3, 3);
  ParamGrads g = numerical_gradient(p, batch, oracle::ConstantLoss{}, 1e-5);
  CHECK(oracle::max_abs(g) == 0.0);
}

TEST_CASE("reverse-mode gradients match central differences on the composite loss") {
  // Metric part only (memory off): the schedule-ramped reweighted term plus
  // the batch-all term, mid-schedule so every piece is active.
  TrainConfig cfg;
  cfg.dims = ModelDims{4, 6, 5};
  cfg.p = 2;
  cfg.k = 2;
  cfg.total_iters = 100;
  cfg.use_memory = false;
  cfg.schedule.total_iters = cfg.total_iters;

  MemoryBank bank;  // unused but required by the composite loss
  bank.rows = Mat(2, cfg.dims.n_dim);
  for (int i = 0; i < 2; ++i) bank.rows.at(i, i) = 1.0;

  for (uint64_t seed : {7ull, 8ull, 9ull}) {
    Rng rng(seed);
    ModelParams p = init_params(cfg.dims, seed);
    auto batch = oracle::random_batch(rng, cfg.p, cfg.k, 4, cfg.dims.d_in);
    CHECK(min_pool_gap(p, batch) > 1e-6);

    TotalLoss loss(bank, 50, cfg);
    auto [value, analytic] = loss_and_grad(p, batch, loss);
    CHECK(std::isfinite(value));
    ParamGrads numeric = numerical_gradient(p, batch, loss, 1e-5);
    CHECK(relative_error(analytic, numeric) <= 1e-5);
  }
}

TEST_CASE("reverse-mode gradients match central differences on the full objective") {
  TrainConfig cfg;
  cfg.dims = ModelDims{4, 6, 5};
  cfg.p = 2;
  cfg.k = 2;
  cfg.total_iters = 100;
  cfg.schedule.total_iters = cfg.total_iters;

  for (uint64_t seed : {11ull, 12ull, 13ull}) {
    Rng rng(seed);
    ModelParams p = init_params(cfg.dims, seed);
    auto batch = oracle::random_batch(rng, cfg.p, cfg.k, 4, cfg.dims.d_in);
    CHECK(min_pool_gap(p, batch) > 1e-6);

    MemoryBank bank;
    bank.rows = Mat(2, cfg.dims.n_dim);
    for (int i = 0; i < 2; ++i) {
      double norm_sq = 0.0;
      for (int k = 0; k < cfg.dims.n_dim; ++k) {
        bank.rows.at(i, k) = rng.gaussian();
        norm_sq += bank.rows.at(i, k) * bank.rows.at(i, k);
      }
      for (int k = 0; k < cfg.dims.n_dim; ++k)
        bank.rows.at(i, k) /= std::sqrt(norm_sq);
    }

    TotalLoss loss(bank, 50, cfg);
    auto [value, analytic] = loss_and_grad(p, batch, loss);
    CHECK(std::isfinite(value));
    ParamGrads numeric = numerical_gradient(p, batch, loss, 1e-5);
    CHECK(relative_error(analytic, numeric) <= 1e-5);
  }
}

TEST_CASE("serial and OpenMP kernels agree bit for bit") {
  Rng rng(31);
  ModelParams p = init_params(ModelDims{6, 10, 8}, 31);
  auto batch = oracle::random_batch(rng, 4, 3, 5, 6);

  kernels::ForwardCache serial = kernels::embed_batch_serial(p, batch);
  kernels::ForwardCache omp = kernels::embed_batch_omp(p, batch, 2);
  CHECK(serial.emb.rows == omp.emb.rows);

  Mat grad_rows(serial.emb.batch(), serial.emb.n_dim());
  for (double& v : grad_rows.data) v = rng.uniform(-1.0, 1.0);
  ParamGrads gs = kernels::backward_batch_serial(p, batch, serial, grad_rows);
  ParamGrads go = kernels::backward_batch_omp(p, batch, omp, grad_rows, 2);
  CHECK(gs.frame_weights == go.frame_weights);
  CHECK(gs.frame_bias == go.frame_bias);
  CHECK(gs.head_weights == go.head_weights);
  CHECK(gs.head_bias == go.head_bias);

  Mat ds(serial.emb.batch(), serial.emb.batch());
  Mat dp(serial.emb.batch(), serial.emb.batch());
  kernels::pairwise_distances_serial(serial.emb.rows, ds);
  kernels::pairwise_distances_omp(serial.emb.rows, dp, 2);
  CHECK(ds == dp);

  ParamGrads ns = kernels::numerical_gradient_serial(p, batch, oracle::SumSquaresLoss{}, 1e-5);
  ParamGrads no = kernels::numerical_gradient_omp(p, batch, oracle::SumSquaresLoss{}, 1e-5, 2);
  CHECK(ns.frame_weights == no.frame_weights);
  CHECK(ns.head_weights == no.head_weights);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hardmetric/errors.hpp"
#include "hardmetric/reweight.hpp"
#include "hardmetric/rng.hpp"
#include "oracles.hpp"

using namespace hm;

namespace {

EmbeddingMatrix identical_embeddings(int p, int k, int n_dim) {
  EmbeddingMatrix emb;
  emb.rows = Mat(p * k, n_dim);
  for (int r = 0; r < p * k; ++r) {
    emb.rows.at(r, 0) = 1.0;
    emb.labels.push_back(r / k);
  }
  return emb;
}

Schedule test_schedule(int64_t total_iters = 1000) {
  Schedule s;
  s.total_iters = total_iters;
  return s;
}

EmbeddingMatrix permuted(const EmbeddingMatrix& emb, const std::vector<int>& perm) {
  EmbeddingMatrix out;
  out.rows = Mat(emb.batch(), emb.n_dim());
  out.labels.resize(emb.batch());
  for (int r = 0; r < emb.batch(); ++r) {
    out.labels[r] = emb.labels[perm[r]];
    for (int k = 0; k < emb.n_dim(); ++k) out.rows.at(r, k) = emb.rows.at(perm[r], k);
  }
  return out;
}

}  // namespace

TEST_CASE("pairwise distances: zero case, 3-4-5 triangle, naive oracle") {
  EmbeddingMatrix same = identical_embeddings(2, 2, 3);
  DistanceMatrix d0 = pairwise_distances(same);
  for (double v : d0.entries.data) CHECK(v == 0.0);

  EmbeddingMatrix tri;
  tri.rows = Mat(2, 2);
  tri.rows.at(0, 0) = 3.0;
  tri.rows.at(0, 1) = 4.0;
  tri.labels = {0, 1};
  DistanceMatrix d = pairwise_distances(tri);
  CHECK(d.entries.at(0, 1) == 5.0);
  CHECK(d.entries.at(1, 0) == 5.0);
  CHECK(d.entries.at(0, 0) == 0.0);

  Rng rng(5);
  EmbeddingMatrix emb = oracle::random_embeddings(rng, 8, 4, 16);
  DistanceMatrix dist = pairwise_distances(emb);
  Mat naive = oracle::naive_pairwise(emb.rows);
  CHECK(dist.entries == naive);
  for (int i = 0; i < dist.batch(); ++i)
    for (int j = 0; j < dist.batch(); ++j)
      CHECK(dist.entries.at(i, j) == dist.entries.at(j, i));
}

TEST_CASE("progressive factor endpoints and monotonicity") {
  Schedule s = test_schedule(1000);  // delta_min 0.1, epsilon 1.4
  CHECK(progressive_factor(0, s) == 1.5);
  CHECK(std::fabs(progressive_factor(1000, s) - 0.8) <= 1e-12);
  CHECK(std::fabs(progressive_factor(0, s) - (s.delta_min + s.epsilon)) <= 1e-12);
  CHECK(std::fabs(progressive_factor(1000, s) - (s.delta_min + s.epsilon / 2.0)) <= 1e-12);

  double prev = HUGE_VAL;
  for (int64_t t = 0; t <= 1000; ++t) {
    double v = progressive_factor(t, s);
    CHECK(v < prev);
    prev = v;
  }

  Schedule flat = s;
  flat.epsilon = 0.0;
  for (int64_t t : {0, 250, 1000})
    CHECK(progressive_factor(t, flat) == flat.delta_min);

  CHECK_THROWS_AS(progressive_factor(-1, s), UsageError);
  CHECK_THROWS_AS(progressive_factor(1001, s), UsageError);
}

TEST_CASE("smoothness factor endpoints") {
  CHECK(smoothness_factor(0, 300) == 0.0);
  CHECK(smoothness_factor(300, 300) == 1.0);
  CHECK(std::fabs(smoothness_factor(100, 300) - 0.5) <= 1e-12);  // sin(pi/6)
  double prev = -1.0;
  for (int64_t t = 0; t <= 300; ++t) {
    double v = smoothness_factor(t, 300);
    CHECK(v >= prev);
    prev = v;
  }
}

TEST_CASE("attention weights: symmetry, frozen values, scalar oracle") {
  // Anchor 0 with two positives at equal distance -> 0.5 each.
  EmbeddingMatrix emb;
  emb.rows = Mat(5, 2);
  emb.rows.at(0, 0) = 0.0;
  emb.rows.at(1, 0) = 1.0;
  emb.rows.at(2, 0) = -1.0;
  emb.rows.at(3, 1) = 5.0;
  emb.rows.at(4, 1) = 6.0;
  emb.labels = {0, 0, 0, 1, 1};
  WeightMatrix w = attention_weights(pairwise_distances(emb), 1.0);
  CHECK(w.entries.at(0, 1) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(w.entries.at(0, 2) == doctest::Approx(0.5).epsilon(1e-12));

  // Anchor 0's positives at d = 1 and d = 2 with delta = 1: softmax of exp(d).
  DistanceMatrix d;
  d.entries = Mat(5, 5);
  d.labels = {0, 0, 0, 1, 1};
  auto set = [&](int i, int j, double v) {
    d.entries.at(i, j) = v;
    d.entries.at(j, i) = v;
  };
  set(0, 1, 1.0);
  set(0, 2, 2.0);
  set(0, 3, 0.7);
  set(0, 4, 1.6);
  set(1, 2, 1.3);
  set(1, 3, 0.9);
  set(1, 4, 1.2);
  set(2, 3, 1.1);
  set(2, 4, 0.8);
  set(3, 4, 0.6);
  WeightMatrix w2 = attention_weights(d, 1.0);
  // Frozen from the scalar oracle below.
  CHECK(w2.entries.at(0, 1) == doctest::Approx(0.0092781258699426803).epsilon(1e-12));
  CHECK(w2.entries.at(0, 2) == doctest::Approx(0.9907218741300573).epsilon(1e-12));
  std::vector<double> expect = oracle::softmax_of_exp({1.0, 2.0}, +1.0, 1.0);
  CHECK(w2.entries.at(0, 1) == doctest::Approx(expect[0]).epsilon(1e-14));
  CHECK(w2.entries.at(0, 2) == doctest::Approx(expect[1]).epsilon(1e-14));
}

TEST_CASE("attention weights normalize, order by hardness, sharpen as delta falls") {
  Rng rng(77);
  for (int trial = 0; trial < 25; ++trial) {
    int p = 2 + static_cast<int>(rng.bounded(3));
    int k = 2 + static_cast<int>(rng.bounded(3));
    EmbeddingMatrix emb = oracle::random_embeddings(rng, p, k, 8);
    DistanceMatrix dist = pairwise_distances(emb);
    const int n = dist.batch();

    // The schedule keeps delta in [delta_min + eps/2, delta_min + eps]; below
    // ~0.3 the softmax mass of easy pairs underflows to exactly 0 in double
    // precision, so strict ordering is only checkable on the schedule range.
    double deltas[] = {1.5, 0.8, 0.3, 0.1};
    std::vector<WeightMatrix> ws;
    for (double delta : deltas) ws.push_back(attention_weights(dist, delta));

    for (int i = 0; i < n; ++i) {
      for (size_t wi = 0; wi < ws.size(); ++wi) {
        const WeightMatrix& w = ws[wi];
        const bool schedule_range = deltas[wi] >= 0.8;
        double pos_sum = 0.0, neg_sum = 0.0, pos_max = 0.0;
        for (int j = 0; j < n; ++j) {
          if (j == i) continue;
          double wj = w.entries.at(i, j);
          CHECK(wj >= 0.0);
          CHECK(wj <= 1.0);
          if (dist.labels[j] == dist.labels[i]) {
            pos_sum += wj;
            pos_max = std::max(pos_max, wj);
          } else {
            neg_sum += wj;
          }
        }
        CHECK(std::fabs(pos_sum - 1.0) <= 1e-9);
        CHECK(std::fabs(neg_sum - 1.0) <= 1e-9);

        // Hardness monotonicity: farther positive, nearer negative get more.
        // Strict on the schedule range, weak below it (underflow ties).
        for (int a = 0; a < n; ++a) {
          if (a == i) continue;
          for (int b = 0; b < n; ++b) {
            if (b == i || b == a) continue;
            if (dist.labels[a] != dist.labels[i] || dist.labels[b] != dist.labels[i])
              continue;
            if (dist.entries.at(i, a) > dist.entries.at(i, b)) {
              if (schedule_range)
                CHECK(w.entries.at(i, a) > w.entries.at(i, b));
              else
                CHECK(w.entries.at(i, a) >= w.entries.at(i, b));
            }
          }
        }
        for (int a = 0; a < n; ++a) {
          if (dist.labels[a] == dist.labels[i]) continue;
          for (int b = 0; b < n; ++b) {
            if (b == a || dist.labels[b] == dist.labels[i]) continue;
            if (dist.entries.at(i, a) < dist.entries.at(i, b)) {
              if (schedule_range)
                CHECK(w.entries.at(i, a) > w.entries.at(i, b));
              else
                CHECK(w.entries.at(i, a) >= w.entries.at(i, b));
            }
          }
        }

        // Sharpening. The positive-set max weight grows monotonically as
        // delta falls (x exp(x/delta) is increasing, so every logit gap to
        // the hardest positive widens). The negative side is not monotone
        // under the double exponential: exp(-d/delta) collapses toward 0 as
        // delta -> 0, flattening the weights back to uniform. There the
        // checkable form is argmax stability: the nearest negative always
        // carries the max weight, which the monotonicity block above covers.
        if (wi > 0) {
          double prev_pos = 0.0;
          for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            if (dist.labels[j] == dist.labels[i])
              prev_pos = std::max(prev_pos, ws[wi - 1].entries.at(i, j));
          }
          CHECK(pos_max >= prev_pos - 1e-12);
        }
      }
    }
  }
}

TEST_CASE("attention weights: huge delta gives uniform weights") {
  Rng rng(13);
  EmbeddingMatrix emb = oracle::random_embeddings(rng, 3, 3, 8);
  DistanceMatrix dist = pairwise_distances(emb);
  WeightMatrix w = attention_weights(dist, 1e6);
  const int n = dist.batch();
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      double uniform = dist.labels[j] == dist.labels[i] ? 1.0 / 2.0 : 1.0 / 6.0;
      CHECK(std::fabs(w.entries.at(i, j) - uniform) <= 1e-6);
    }
}

TEST_CASE("attention weights errors") {
  EmbeddingMatrix emb;
  emb.rows = Mat(3, 2);
  emb.rows.at(0, 0) = 1.0;
  emb.rows.at(1, 1) = 1.0;
  emb.rows.at(2, 0) = -1.0;
  emb.labels = {0, 1, 1};  // anchor 0 has no positives (K = 1)
  DistanceMatrix dist = pairwise_distances(emb);
  CHECK_THROWS_AS(attention_weights(dist, 1.0), UsageError);
  emb.labels = {0, 0, 0};  // no negatives anywhere
  DistanceMatrix dist2 = pairwise_distances(emb);
  CHECK_THROWS_AS(attention_weights(dist2, 1.0), UsageError);
  emb.labels = {0, 0, 1};
  DistanceMatrix dist3 = pairwise_distances(emb);
  CHECK_THROWS_AS(attention_weights(dist3, 0.0), UsageError);
}

TEST_CASE("weighted distances: uniform case and per-entry oracle") {
  Rng rng(19);
  EmbeddingMatrix emb = oracle::random_embeddings(rng, 2, 3, 6);
  DistanceMatrix dist = pairwise_distances(emb);
  WeightMatrix w = attention_weights(dist, 1e6);  // near-uniform
  DistanceMatrix dw = weighted_distances(dist, w);
  for (int i = 0; i < dist.batch(); ++i) {
    CHECK(dw.entries.at(i, i) == 0.0);
    for (int j = 0; j < dist.batch(); ++j) {
      if (j == i) continue;
      CHECK(dw.entries.at(i, j) == w.entries.at(i, j) * dist.entries.at(i, j));
      // p = 2, k = 3: 2 positives and 3 negatives per anchor
      double n_set = dist.labels[j] == dist.labels[i] ? 2.0 : 3.0;
      CHECK(std::fabs(dw.entries.at(i, j) - dist.entries.at(i, j) / n_set) <= 1e-5);
    }
  }
}

TEST_CASE("reweighted batch-hard loss: hinge cases and enumeration oracle") {
  const double m = 0.2;
  // All embeddings identical: every weighted distance 0, loss = margin.
  EmbeddingMatrix same = identical_embeddings(2, 2, 4);
  DistanceMatrix d0 = pairwise_distances(same);
  WeightMatrix w0 = attention_weights(d0, 1.0);
  CHECK(reweighted_bh_loss(weighted_distances(d0, w0), m) == m);

  // Positives collapsed, negatives pushed past the margin: loss 0.
  EmbeddingMatrix split;
  split.rows = Mat(4, 2);
  split.rows.at(0, 0) = 1.0;
  split.rows.at(1, 0) = 1.0;
  split.rows.at(2, 0) = -1.0;
  split.rows.at(3, 0) = -1.0;
  split.labels = {0, 0, 1, 1};
  DistanceMatrix dsplit = pairwise_distances(split);
  WeightMatrix wsplit = attention_weights(dsplit, 1.0);
  CHECK(reweighted_bh_loss(weighted_distances(dsplit, wsplit), m) == 0.0);

  Rng rng(23);
  for (int trial = 0; trial < 10; ++trial) {
    EmbeddingMatrix emb = oracle::random_embeddings(rng, 2, 2, 5);
    DistanceMatrix dist = pairwise_distances(emb);
    WeightMatrix w = attention_weights(dist, 0.7);
    DistanceMatrix dw = weighted_distances(dist, w);
    double got = reweighted_bh_loss(dw, m);
    double want = oracle::naive_bh(dw.entries, dw.labels, m);
    CHECK(std::fabs(got - want) <= 1e-12);
    CHECK(got >= 0.0);
    CHECK(got <= m + 2.0);  // unit rows keep every distance <= 2
  }
}

TEST_CASE("uniform-limit reduction to the class-mean triplet") {
  Rng rng(29);
  for (int trial = 0; trial < 10; ++trial) {
    EmbeddingMatrix emb = oracle::random_embeddings(rng, 3, 3, 8);
    DistanceMatrix dist = pairwise_distances(emb);
    WeightMatrix w = attention_weights(dist, 1e6);
    double got = reweighted_bh_loss(weighted_distances(dist, w), 0.2);
    double want = oracle::class_mean_triplet(dist.entries, dist.labels, 0.2);
    CHECK(std::fabs(got - want) <= 1e-6);
  }
}

TEST_CASE("batch-all triplet loss: margin case, zero case, triple-loop oracle") {
  const double m = 0.2;
  EmbeddingMatrix same = identical_embeddings(2, 2, 4);
  CHECK(triplet_ba_loss(pairwise_distances(same), m) == m);

  EmbeddingMatrix split;
  split.rows = Mat(4, 2);
  split.rows.at(0, 0) = 1.0;
  split.rows.at(1, 0) = 1.0;
  split.rows.at(2, 0) = -1.0;
  split.rows.at(3, 0) = -1.0;
  split.labels = {0, 0, 1, 1};
  CHECK(triplet_ba_loss(pairwise_distances(split), m) == 0.0);

  Rng rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    int p = 2 + static_cast<int>(rng.bounded(3));
    int k = 2 + static_cast<int>(rng.bounded(3));
    EmbeddingMatrix emb = oracle::random_embeddings(rng, p, k, 6);
    DistanceMatrix dist = pairwise_distances(emb);
    double got = triplet_ba_loss(dist, m);
    double want = oracle::naive_triplet_ba(dist.entries, dist.labels, m);
    CHECK(std::fabs(got - want) <= 1e-12);
  }
}

TEST_CASE("composite loss: endpoints and recomposition") {
  Schedule sched = test_schedule(400);
  Rng rng(37);
  EmbeddingMatrix emb = oracle::random_embeddings(rng, 2, 3, 6);
  DistanceMatrix dist = pairwise_distances(emb);

  // t = 0: the smoothness factor vanishes, only the batch-all term remains.
  ReweightBreakdown b0 = reweight_loss(dist, 0, sched);
  CHECK(b0.s_t == 0.0);
  CHECK(b0.total == b0.ba);
  CHECK(b0.ba == triplet_ba_loss(dist, sched.margin));

  // All-identical embeddings at t = T: margin from both terms.
  EmbeddingMatrix same = identical_embeddings(2, 2, 4);
  ReweightBreakdown bT = reweight_loss(pairwise_distances(same), 400, sched);
  CHECK(bT.total == doctest::Approx(2.0 * sched.margin).epsilon(1e-15));

  // Random point: total recomposes from independently computed parts.
  ReweightBreakdown b = reweight_loss(dist, 123, sched);
  double delta = progressive_factor(123, sched);
  double s = smoothness_factor(123, sched.total_iters);
  WeightMatrix w = attention_weights(dist, delta);
  double bh = reweighted_bh_loss(weighted_distances(dist, w), sched.margin);
  double ba = triplet_ba_loss(dist, sched.margin);
  CHECK(b.delta_t == delta);
  CHECK(b.s_t == s);
  CHECK(b.bh == bh);
  CHECK(b.ba == ba);
  CHECK(b.total == ba + s * bh);
}

TEST_CASE("scalar losses are bitwise invariant under batch permutation") {
  Schedule sched = test_schedule(500);
  Rng rng(41);
  for (int trial = 0; trial < 5; ++trial) {
    EmbeddingMatrix emb = oracle::random_embeddings(rng, 3, 3, 8);
    ReweightBreakdown base = reweight_loss(pairwise_distances(emb), 200, sched);

    std::vector<int> perm(emb.batch());
    std::iota(perm.begin(), perm.end(), 0);
    for (size_t i = perm.size(); i > 1; --i)
      std::swap(perm[i - 1], perm[rng.bounded(i)]);
    EmbeddingMatrix shuf = permuted(emb, perm);
    ReweightBreakdown out = reweight_loss(pairwise_distances(shuf), 200, sched);

    CHECK(out.ba == base.ba);
    CHECK(out.bh == base.bh);
    CHECK(out.total == base.total);
  }
}

TEST_CASE("gradient of the composite loss matches finite differences over embeddings") {
  Schedule sched = test_schedule(400);
  Rng rng(43);
  EmbeddingMatrix emb = oracle::random_embeddings(rng, 2, 3, 5);

  DistanceMatrix dist = pairwise_distances(emb);
  Mat grad_dist(dist.batch(), dist.batch());
  ReweightBreakdown b = reweight_loss_grad(dist, 150, sched, grad_dist);
  CHECK(b.total == reweight_loss(dist, 150, sched).total);

  Mat analytic(emb.batch(), emb.n_dim());
  distances_backward(emb, dist, grad_dist, analytic);

  const double h = 1e-6;
  double num_sq = 0.0, diff_sq = 0.0;
  for (int r = 0; r < emb.batch(); ++r) {
    for (int k = 0; k < emb.n_dim(); ++k) {
      EmbeddingMatrix e2 = emb;
      e2.rows.at(r, k) += h;
      double up = reweight_loss(pairwise_distances(e2), 150, sched).total;
      e2.rows.at(r, k) -= 2.0 * h;
      double down = reweight_loss(pairwise_distances(e2), 150, sched).total;
      double numeric = (up - down) / (2.0 * h);
      double diff = numeric - analytic.at(r, k);
      num_sq += numeric * numeric;
      diff_sq += diff * diff;
    }
  }
  CHECK(std::sqrt(diff_sq) / std::max(std::sqrt(num_sq), 1e-12) <= 1e-5);
}

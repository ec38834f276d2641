#include "hardmetric/reweight.hpp"

#include <cmath>

#include "hardmetric/errors.hpp"
#include "hardmetric/kernels.hpp"
#include "hardmetric/numeric.hpp"

namespace hm {

namespace {

struct AnchorSets {
  std::vector<int> pos;
  std::vector<int> neg;
};

std::vector<AnchorSets> build_sets(const std::vector<int>& labels) {
  const int n = static_cast<int>(labels.size());
  std::vector<AnchorSets> sets(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;  // self pair carries no signal
      if (labels[j] == labels[i]) {
        sets[i].pos.push_back(j);
      } else {
        sets[i].neg.push_back(j);
      }
    }
    if (sets[i].pos.empty())
      throw UsageError("anchor " + std::to_string(i) + " has an empty positive set");
    if (sets[i].neg.empty())
      throw UsageError("anchor " + std::to_string(i) + " has an empty negative set");
  }
  return sets;
}

// Softmax over logits z_j = exp(sign * d_j / delta), computed with max
// subtraction; exp(u_max)*expm1(u_j - u_max) = z_j - z_max stays usable
// even when exp(u_max) itself would overflow.
void softmax_of_exp(const Mat& dist, int anchor, const std::vector<int>& set,
                    double sign, double delta, std::vector<double>& weights) {
  const size_t n = set.size();
  std::vector<double> u(n);
  double u_max = -HUGE_VAL;
  for (size_t j = 0; j < n; ++j) {
    u[j] = sign * dist.at(anchor, set[j]) / delta;
    if (u[j] > u_max) u_max = u[j];
  }
  std::vector<double> terms(n);
  ExactSum den;
  for (size_t j = 0; j < n; ++j) {
    double t = (u[j] == u_max) ? 1.0 : std::exp(std::exp(u_max) * std::expm1(u[j] - u_max));
    terms[j] = t;
    den.add(t);
  }
  double inv = 1.0 / den.total();
  weights.resize(n);
  for (size_t j = 0; j < n; ++j) weights[j] = terms[j] * inv;
}

void check_dist(const DistanceMatrix& dist) {
  if (dist.entries.rows != dist.entries.cols)
    throw UsageError("distance matrix must be square");
  if (static_cast<int>(dist.labels.size()) != dist.entries.rows)
    throw UsageError("labels size does not match distance matrix");
  if (dist.entries.rows < 2) throw UsageError("batch of size < 2");
}

}  // namespace

void Schedule::validate() const {
  if (!(delta_min > 0.0)) throw ConfigError("delta_min must be > 0");
  if (!(epsilon >= 0.0)) throw ConfigError("epsilon must be >= 0");
  if (total_iters < 1) throw ConfigError("total_iters must be >= 1");
  if (!(margin >= 0.0)) throw ConfigError("margin must be >= 0");
}

DistanceMatrix pairwise_distances(const EmbeddingMatrix& emb) {
  if (emb.batch() < 1) throw UsageError("empty embedding matrix");
  if (static_cast<int>(emb.labels.size()) != emb.batch())
    throw UsageError("labels size does not match embedding matrix");
  DistanceMatrix d;
  d.entries = Mat(emb.batch(), emb.batch());
  d.labels = emb.labels;
  kernels::pairwise_distances_auto(emb.rows, d.entries);
  return d;
}

double progressive_factor(int64_t t, const Schedule& sched) {
  sched.validate();
  if (t < 0 || t > sched.total_iters)
    throw UsageError("iteration out of [0, total_iters]");
  double phase = M_PI * static_cast<double>(t) / (2.0 * sched.total_iters);
  return sched.delta_min + 0.5 * (1.0 + std::cos(phase)) * sched.epsilon;
}

double smoothness_factor(int64_t t, int64_t total_iters) {
  if (total_iters < 1) throw UsageError("total_iters must be >= 1");
  if (t < 0 || t > total_iters) throw UsageError("iteration out of [0, total_iters]");
  return std::sin(M_PI * static_cast<double>(t) / (2.0 * total_iters));
}

WeightMatrix attention_weights(const DistanceMatrix& dist, double delta) {
  check_dist(dist);
  if (!(delta > 0.0)) throw UsageError("delta must be > 0");
  const int n = dist.batch();
  std::vector<AnchorSets> sets = build_sets(dist.labels);

  WeightMatrix w;
  w.entries = Mat(n, n);
  w.labels = dist.labels;
  std::vector<double> buf;
  for (int i = 0; i < n; ++i) {
    softmax_of_exp(dist.entries, i, sets[i].pos, +1.0, delta, buf);
    for (size_t j = 0; j < sets[i].pos.size(); ++j)
      w.entries.at(i, sets[i].pos[j]) = buf[j];
    softmax_of_exp(dist.entries, i, sets[i].neg, -1.0, delta, buf);
    for (size_t j = 0; j < sets[i].neg.size(); ++j)
      w.entries.at(i, sets[i].neg[j]) = buf[j];
  }
  return w;
}

DistanceMatrix weighted_distances(const DistanceMatrix& dist, const WeightMatrix& w) {
  check_dist(dist);
  if (w.entries.rows != dist.entries.rows || w.entries.cols != dist.entries.cols)
    throw UsageError("weight matrix shape does not match distance matrix");
  DistanceMatrix out;
  out.labels = dist.labels;
  out.entries = Mat(dist.entries.rows, dist.entries.cols);
  for (size_t i = 0; i < dist.entries.data.size(); ++i)
    out.entries.data[i] = w.entries.data[i] * dist.entries.data[i];
  for (int i = 0; i < out.entries.rows; ++i) out.entries.at(i, i) = 0.0;
  return out;
}

double reweighted_bh_loss(const DistanceMatrix& weighted, double margin) {
  check_dist(weighted);
  if (!(margin >= 0.0)) throw UsageError("margin must be >= 0");
  const int n = weighted.batch();
  std::vector<AnchorSets> sets = build_sets(weighted.labels);

  ExactSum anchors;
  for (int i = 0; i < n; ++i) {
    ExactSum pos, neg;
    for (int j : sets[i].pos) pos.add(weighted.entries.at(i, j));
    for (int j : sets[i].neg) neg.add(weighted.entries.at(i, j));
    double arg = margin + pos.total() - neg.total();
    anchors.add(arg > 0.0 ? arg : 0.0);
  }
  return anchors.total() / n;
}

double triplet_ba_loss(const DistanceMatrix& dist, double margin) {
  check_dist(dist);
  if (!(margin >= 0.0)) throw UsageError("margin must be >= 0");
  const int n = dist.batch();
  std::vector<AnchorSets> sets = build_sets(dist.labels);

  ExactSum sum;
  int64_t count = 0;
  for (int a = 0; a < n; ++a) {
    for (int p : sets[a].pos) {
      double dp = dist.entries.at(a, p);
      for (int nn : sets[a].neg) {
        double arg = margin + dp - dist.entries.at(a, nn);
        sum.add(arg > 0.0 ? arg : 0.0);
        ++count;
      }
    }
  }
  return sum.total() / static_cast<double>(count);
}

ReweightBreakdown reweight_loss(const DistanceMatrix& dist, int64_t t,
                                const Schedule& sched) {
  ReweightBreakdown b;
  b.delta_t = progressive_factor(t, sched);
  b.s_t = smoothness_factor(t, sched.total_iters);
  b.ba = triplet_ba_loss(dist, sched.margin);
  WeightMatrix w = attention_weights(dist, b.delta_t);
  b.bh = reweighted_bh_loss(weighted_distances(dist, w), sched.margin);
  b.total = b.ba + b.s_t * b.bh;
  return b;
}

double triplet_ba_loss_grad(const DistanceMatrix& dist, double margin, Mat& grad_dist) {
  check_dist(dist);
  const int n = dist.batch();
  std::vector<AnchorSets> sets = build_sets(dist.labels);

  ExactSum sum;
  int64_t count = 0;
  for (const AnchorSets& s : sets)
    count += static_cast<int64_t>(s.pos.size()) * static_cast<int64_t>(s.neg.size());
  const double inv = 1.0 / static_cast<double>(count);

  for (int a = 0; a < n; ++a) {
    for (int p : sets[a].pos) {
      double dp = dist.entries.at(a, p);
      for (int nn : sets[a].neg) {
        double arg = margin + dp - dist.entries.at(a, nn);
        if (arg > 0.0) {
          sum.add(arg);
          grad_dist.at(a, p) += inv;
          grad_dist.at(a, nn) -= inv;
        }
      }
    }
  }
  return sum.total() * inv;
}

ReweightBreakdown reweight_loss_grad(const DistanceMatrix& dist, int64_t t,
                                     const Schedule& sched, Mat& grad_dist) {
  ReweightBreakdown b;
  b.delta_t = progressive_factor(t, sched);
  b.s_t = smoothness_factor(t, sched.total_iters);
  b.ba = triplet_ba_loss_grad(dist, sched.margin, grad_dist);

  const int n = dist.batch();
  std::vector<AnchorSets> sets = build_sets(dist.labels);
  const double delta = b.delta_t;
  const double anchor_scale = b.s_t / n;

  ExactSum anchors;
  std::vector<double> wp, wn;
  for (int i = 0; i < n; ++i) {
    softmax_of_exp(dist.entries, i, sets[i].pos, +1.0, delta, wp);
    softmax_of_exp(dist.entries, i, sets[i].neg, -1.0, delta, wn);

    ExactSum pos_sum, neg_sum;
    for (size_t j = 0; j < sets[i].pos.size(); ++j)
      pos_sum.add(wp[j] * dist.entries.at(i, sets[i].pos[j]));
    for (size_t j = 0; j < sets[i].neg.size(); ++j)
      neg_sum.add(wn[j] * dist.entries.at(i, sets[i].neg[j]));
    double term_pos = pos_sum.total();
    double term_neg = neg_sum.total();
    double arg = sched.margin + term_pos - term_neg;
    if (arg <= 0.0) {
      anchors.add(0.0);
      continue;
    }
    anchors.add(arg);

    // d term_pos / d d(i,q) = w_q + (z_q/delta) w_q (d(i,q) - term_pos),
    // z_q = exp(+d/delta); the weights shift as the distance moves.
    for (size_t j = 0; j < sets[i].pos.size(); ++j) {
      double d = dist.entries.at(i, sets[i].pos[j]);
      double z = std::exp(d / delta);
      double dterm = wp[j] + (z / delta) * wp[j] * (d - term_pos);
      grad_dist.at(i, sets[i].pos[j]) += anchor_scale * dterm;
    }
    // d term_neg / d d(i,q) = w_q - (z_q/delta) w_q (d(i,q) - term_neg),
    // z_q = exp(-d/delta); enters the hinge with a minus sign.
    for (size_t j = 0; j < sets[i].neg.size(); ++j) {
      double d = dist.entries.at(i, sets[i].neg[j]);
      double z = std::exp(-d / delta);
      double dterm = wn[j] - (z / delta) * wn[j] * (d - term_neg);
      grad_dist.at(i, sets[i].neg[j]) -= anchor_scale * dterm;
    }
  }
  b.bh = anchors.total() / n;
  b.total = b.ba + b.s_t * b.bh;
  return b;
}

void distances_backward(const EmbeddingMatrix& emb, const DistanceMatrix& dist,
                        const Mat& grad_dist, Mat& grad_rows) {
  const int n = emb.batch();
  const int dim = emb.n_dim();
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      double g = grad_dist.at(i, j);
      if (g == 0.0) continue;
      double d = dist.entries.at(i, j);
      if (d <= 0.0) continue;  // kink at coincident rows: subgradient 0
      double scale = g / d;
      const double* ei = emb.rows.row(i);
      const double* ej = emb.rows.row(j);
      double* gi = grad_rows.row(i);
      double* gj = grad_rows.row(j);
      for (int k = 0; k < dim; ++k) {
        double diff = scale * (ei[k] - ej[k]);
        gi[k] += diff;
        gj[k] -= diff;
      }
    }
  }
}

}  // namespace hm

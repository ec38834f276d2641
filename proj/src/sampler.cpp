#include "hardmetric/sampler.hpp"

#include <numeric>

#include "hardmetric/errors.hpp"

namespace hm {

Batch sample_batch(const LabeledDataset& ds, int p, int k, Rng& rng) {
  if (p < 2) throw UsageError("p must be >= 2");
  if (k < 2) throw UsageError("k must be >= 2");
  const int n_ids = ds.n_ids();
  if (p > n_ids)
    throw UsageError("p=" + std::to_string(p) + " exceeds identity count " +
                     std::to_string(n_ids));

  Batch batch;
  batch.p = p;
  batch.k = k;
  batch.sequences.reserve(static_cast<size_t>(p) * k);
  batch.labels.reserve(static_cast<size_t>(p) * k);

  // Partial Fisher-Yates over the identity pool.
  std::vector<int> pool(n_ids);
  std::iota(pool.begin(), pool.end(), 0);
  for (int i = 0; i < p; ++i) {
    int j = i + static_cast<int>(rng.bounded(static_cast<uint64_t>(n_ids - i)));
    std::swap(pool[i], pool[j]);
  }

  for (int i = 0; i < p; ++i) {
    int id = pool[i];
    const std::vector<int>& positions = ds.index[id];
    const int avail = static_cast<int>(positions.size());
    if (avail >= k) {
      std::vector<int> seqs(positions);
      for (int s = 0; s < k; ++s) {
        int j = s + static_cast<int>(rng.bounded(static_cast<uint64_t>(avail - s)));
        std::swap(seqs[s], seqs[j]);
        batch.sequences.push_back(ds.sequences[seqs[s]]);
        batch.labels.push_back(id);
      }
    } else {
      for (int s = 0; s < k; ++s) {
        int j = static_cast<int>(rng.bounded(static_cast<uint64_t>(avail)));
        batch.sequences.push_back(ds.sequences[positions[j]]);
        batch.labels.push_back(id);
      }
    }
  }
  return batch;
}

}  // namespace hm

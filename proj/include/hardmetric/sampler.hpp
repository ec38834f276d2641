#ifndef HARDMETRIC_SAMPLER_HPP_
#define HARDMETRIC_SAMPLER_HPP_

#include <vector>

#include "hardmetric/dataset.hpp"
#include "hardmetric/rng.hpp"

namespace hm {

/// P identities x K sequences, identities contiguous.
struct Batch {
  std::vector<FeatureSequence> sequences;  // p*k entries
  std::vector<int> labels;                 // p*k identity indices
  int p = 0;
  int k = 0;
};

/// Draws P identities without replacement, then K sequences per identity
/// (without replacement when the identity has >= K sequences, with
/// replacement otherwise). Deterministic given the rng state, which is
/// advanced in place.
Batch sample_batch(const LabeledDataset& ds, int p, int k, Rng& rng);

}  // namespace hm

#endif  // HARDMETRIC_SAMPLER_HPP_

#ifndef HARDMETRIC_DATASET_HPP_
#define HARDMETRIC_DATASET_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "hardmetric/mat.hpp"

namespace hm {

/// Covariate under which a sequence was captured.
enum class Condition { Base, Occl, Deform };

const char* condition_name(Condition c);
Condition condition_from_name(const std::string& s);

/// One labeled sample: a sequence of per-frame feature vectors.
struct FeatureSequence {
  int id = 0;            // identity index, >= 0
  int view_deg = 0;      // viewpoint in [0, 360)
  Condition condition = Condition::Base;
  int seq = 0;           // sequence index within its (id, view, condition) cell
  Mat frames;            // n_frames x d_in

  bool operator==(const FeatureSequence& o) const {
    return id == o.id && view_deg == o.view_deg && condition == o.condition &&
           seq == o.seq && frames == o.frames;
  }
};

/// Generator parameters for the synthetic hard-sample benchmark.
///
/// Every identity gets a unit signature vector; `confusion_pairs` pairs of
/// identities share a signature up to a perturbation of norm
/// `signature_noise` (near-duplicate identities). Views rotate the
/// signature in a fixed 2-D subspace; Occl zeroes a per-sequence random
/// 30% of coordinates; Deform adds a perturbation of norm
/// `condition_strength` drawn from a fixed rank-2 subspace.
struct DatasetSpec {
  int n_ids = 32;
  std::vector<int> views = {0, 45, 90, 135};
  std::vector<Condition> conditions = {Condition::Base, Condition::Occl,
                                       Condition::Deform};
  int seqs_per_cell = 2;
  int n_frames = 12;
  int d_in = 16;
  double signature_noise = 0.1;
  double condition_strength = 0.9;
  int confusion_pairs = 8;
  uint64_t seed = 1;

  /// Throws ConfigError naming the offending field.
  void validate() const;

  bool operator==(const DatasetSpec& o) const;
};

struct LabeledDataset {
  DatasetSpec spec;
  std::vector<FeatureSequence> sequences;
  std::vector<std::vector<int>> index;  // identity -> positions in `sequences`

  int n_ids() const { return spec.n_ids; }
  void rebuild_index();

  bool operator==(const LabeledDataset& o) const {
    return spec == o.spec && sequences == o.sequences && index == o.index;
  }
};

/// Deterministic generation; a pure function of the spec (seed included).
/// Frame values are canonicalized to 9-significant-digit decimals so the
/// file round trip below is lossless.
LabeledDataset generate(const DatasetSpec& spec);

/// hmds-1 file format: one JSON object per line. The first line carries
/// {"format":"hmds-1","spec":{...}}; each following line is a record
/// {"id","view_deg","condition","seq","frames"} with floats written with
/// 9 significant digits.
void save(const LabeledDataset& ds, const std::string& path);
LabeledDataset load(const std::string& path);

/// Spec as a standalone JSON object (the gen-data input format). Absent
/// fields keep their defaults; unknown fields are configuration errors.
std::string spec_to_json(const DatasetSpec& spec);
DatasetSpec spec_from_json_text(const std::string& text);

}  // namespace hm

#endif  // HARDMETRIC_DATASET_HPP_

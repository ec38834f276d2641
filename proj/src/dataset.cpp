#include "hardmetric/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <tuple>

#include <json.hpp>

#include "hardmetric/errors.hpp"
#include "hardmetric/numeric.hpp"
#include "hardmetric/rng.hpp"

namespace hm {

namespace {

constexpr double kPhaseAmplitude = 0.1;
constexpr double kFrameNoiseSigma = 0.05;
constexpr double kOcclMaskRatio = 0.3;

Vec random_unit_vector(Rng& rng, int d) {
  Vec v(d);
  double norm_sq = 0.0;
  do {
    norm_sq = 0.0;
    for (int i = 0; i < d; ++i) {
      v[i] = rng.gaussian();
      norm_sq += v[i] * v[i];
    }
  } while (norm_sq < 1e-12);
  double inv = 1.0 / std::sqrt(norm_sq);
  for (int i = 0; i < d; ++i) v[i] *= inv;
  return v;
}

// Rotation by `deg` degrees in the subspace of coordinates 0 and 1.
void rotate_view(Vec& v, int deg) {
  double rad = deg * M_PI / 180.0;
  double c = std::cos(rad), s = std::sin(rad);
  double x0 = v[0], x1 = v[1];
  v[0] = c * x0 - s * x1;
  v[1] = s * x0 + c * x1;
}

}  // namespace

const char* condition_name(Condition c) {
  switch (c) {
    case Condition::Base: return "Base";
    case Condition::Occl: return "Occl";
    case Condition::Deform: return "Deform";
  }
  return "?";
}

Condition condition_from_name(const std::string& s) {
  if (s == "Base") return Condition::Base;
  if (s == "Occl") return Condition::Occl;
  if (s == "Deform") return Condition::Deform;
  throw ConfigError("unknown condition: " + s);
}

void DatasetSpec::validate() const {
  if (n_ids < 2) throw ConfigError("n_ids must be >= 2");
  if (views.empty()) throw ConfigError("views must be non-empty");
  std::set<int> seen;
  for (int v : views) {
    if (v < 0 || v >= 360) throw ConfigError("views entries must be in [0, 360)");
    if (!seen.insert(v).second) throw ConfigError("views entries must be distinct");
  }
  if (conditions.empty()) throw ConfigError("conditions must be non-empty");
  std::set<Condition> cseen;
  for (Condition c : conditions)
    if (!cseen.insert(c).second) throw ConfigError("conditions entries must be distinct");
  if (seqs_per_cell < 1) throw ConfigError("seqs_per_cell must be >= 1");
  if (n_frames < 1) throw ConfigError("n_frames must be >= 1");
  if (d_in < 2) throw ConfigError("d_in must be >= 2");
  if (!(signature_noise >= 0.0)) throw ConfigError("signature_noise must be >= 0");
  if (!(condition_strength >= 0.0)) throw ConfigError("condition_strength must be >= 0");
  if (confusion_pairs < 0) throw ConfigError("confusion_pairs must be >= 0");
  if (2 * confusion_pairs > n_ids)
    throw ConfigError("confusion_pairs must be <= n_ids/2");
}

bool DatasetSpec::operator==(const DatasetSpec& o) const {
  return n_ids == o.n_ids && views == o.views && conditions == o.conditions &&
         seqs_per_cell == o.seqs_per_cell && n_frames == o.n_frames &&
         d_in == o.d_in && signature_noise == o.signature_noise &&
         condition_strength == o.condition_strength &&
         confusion_pairs == o.confusion_pairs && seed == o.seed;
}

void LabeledDataset::rebuild_index() {
  index.assign(spec.n_ids, {});
  for (size_t i = 0; i < sequences.size(); ++i) {
    const FeatureSequence& s = sequences[i];
    if (s.id < 0 || s.id >= spec.n_ids)
      throw DataError("sequence id out of range: " + std::to_string(s.id));
    index[s.id].push_back(static_cast<int>(i));
  }
  for (int i = 0; i < spec.n_ids; ++i)
    if (index[i].empty())
      throw DataError("identity " + std::to_string(i) + " has no sequences");
}

LabeledDataset generate(const DatasetSpec& spec_in) {
  spec_in.validate();
  DatasetSpec spec = spec_in;
  spec.signature_noise = quantize9(spec.signature_noise);
  spec.condition_strength = quantize9(spec.condition_strength);

  const int d = spec.d_in;
  Rng master(Rng::derive(spec.seed, 0x01));

  // Unit signatures; confusion pair (2k, 2k+1) shares one up to a
  // perturbation of norm signature_noise.
  std::vector<Vec> signatures(spec.n_ids);
  for (int i = 0; i < spec.n_ids; ++i) signatures[i] = random_unit_vector(master, d);
  for (int k = 0; k < spec.confusion_pairs; ++k) {
    int a = 2 * k, b = 2 * k + 1;
    if (spec.signature_noise == 0.0) {
      signatures[b] = signatures[a];
    } else {
      Vec dir = random_unit_vector(master, d);
      Vec v(d);
      double norm_sq = 0.0;
      for (int i = 0; i < d; ++i) {
        v[i] = signatures[a][i] + spec.signature_noise * dir[i];
        norm_sq += v[i] * v[i];
      }
      double inv = 1.0 / std::sqrt(std::max(norm_sq, 1e-24));
      for (int i = 0; i < d; ++i) v[i] = v[i] * inv;
      signatures[b] = v;
    }
  }

  // Fixed rank-2 subspace for the Deform offsets (Gram-Schmidt pair).
  Vec q1 = random_unit_vector(master, d);
  Vec q2(d);
  {
    Vec g = random_unit_vector(master, d);
    double dot = 0.0;
    for (int i = 0; i < d; ++i) dot += g[i] * q1[i];
    double norm_sq = 0.0;
    for (int i = 0; i < d; ++i) {
      q2[i] = g[i] - dot * q1[i];
      norm_sq += q2[i] * q2[i];
    }
    double inv = 1.0 / std::sqrt(std::max(norm_sq, 1e-24));
    for (int i = 0; i < d; ++i) q2[i] *= inv;
  }

  // Shared direction of the sinusoidal gait-phase term.
  Vec phase_dir = random_unit_vector(master, d);

  const int n_mask = static_cast<int>(std::lround(kOcclMaskRatio * d));

  LabeledDataset ds;
  ds.spec = spec;
  ds.sequences.reserve(static_cast<size_t>(spec.n_ids) * spec.views.size() *
                       spec.conditions.size() * spec.seqs_per_cell);

  for (int id = 0; id < spec.n_ids; ++id) {
    for (size_t vi = 0; vi < spec.views.size(); ++vi) {
      for (size_t ci = 0; ci < spec.conditions.size(); ++ci) {
        Condition cond = spec.conditions[ci];
        for (int k = 0; k < spec.seqs_per_cell; ++k) {
          // Per-sequence stream: generation order never matters.
          Rng rng(Rng::derive(spec.seed, 0x02 + static_cast<uint64_t>(id),
                              vi, ci, static_cast<uint64_t>(k)));

          Vec base = signatures[id];
          rotate_view(base, spec.views[vi]);

          if (cond == Condition::Occl && n_mask > 0) {
            // One mask per sequence, constant across its frames.
            std::vector<int> coords(d);
            for (int i = 0; i < d; ++i) coords[i] = i;
            for (int i = 0; i < n_mask; ++i) {
              int j = i + static_cast<int>(rng.bounded(static_cast<uint64_t>(d - i)));
              std::swap(coords[i], coords[j]);
            }
            for (int i = 0; i < n_mask; ++i) base[coords[i]] = 0.0;
          } else if (cond == Condition::Deform) {
            double theta = rng.uniform(0.0, 2.0 * M_PI);
            double c = std::cos(theta), s = std::sin(theta);
            for (int i = 0; i < d; ++i)
              base[i] += spec.condition_strength * (c * q1[i] + s * q2[i]);
          }

          double phase = rng.uniform(0.0, 2.0 * M_PI);

          FeatureSequence seq;
          seq.id = id;
          seq.view_deg = spec.views[vi];
          seq.condition = cond;
          seq.seq = k;
          seq.frames = Mat(spec.n_frames, d);
          for (int t = 0; t < spec.n_frames; ++t) {
            double wave = kPhaseAmplitude *
                          std::sin(2.0 * M_PI * t / spec.n_frames + phase);
            double* f = seq.frames.row(t);
            for (int i = 0; i < d; ++i) {
              double v = base[i] + wave * phase_dir[i] +
                         kFrameNoiseSigma * rng.gaussian();
              f[i] = quantize9(v);
            }
          }
          ds.sequences.push_back(std::move(seq));
        }
      }
    }
  }

  ds.rebuild_index();
  return ds;
}

// ---------------------------------------------------------------------------
// hmds-1 file format

namespace {

using json = nlohmann::json;

void write_spec_json(std::ostream& os, const DatasetSpec& spec) {
  os << "{\"n_ids\":" << spec.n_ids << ",\"views\":[";
  for (size_t i = 0; i < spec.views.size(); ++i)
    os << (i ? "," : "") << spec.views[i];
  os << "],\"conditions\":[";
  for (size_t i = 0; i < spec.conditions.size(); ++i)
    os << (i ? "," : "") << '"' << condition_name(spec.conditions[i]) << '"';
  os << "],\"seqs_per_cell\":" << spec.seqs_per_cell
     << ",\"n_frames\":" << spec.n_frames << ",\"d_in\":" << spec.d_in
     << ",\"signature_noise\":" << format_g9(spec.signature_noise)
     << ",\"condition_strength\":" << format_g9(spec.condition_strength)
     << ",\"confusion_pairs\":" << spec.confusion_pairs
     << ",\"seed\":" << spec.seed << "}";
}

DatasetSpec spec_from_json(const json& j) {
  static const char* known[] = {"n_ids",           "views",
                                "conditions",      "seqs_per_cell",
                                "n_frames",        "d_in",
                                "signature_noise", "condition_strength",
                                "confusion_pairs", "seed"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : known)
      if (it.key() == k) {
        ok = true;
        break;
      }
    if (!ok) throw ConfigError("unknown spec field \"" + it.key() + "\"");
  }
  DatasetSpec spec;
  spec.n_ids = j.value("n_ids", spec.n_ids);
  if (j.contains("views")) spec.views = j["views"].get<std::vector<int>>();
  if (j.contains("conditions")) {
    spec.conditions.clear();
    for (const auto& c : j["conditions"])
      spec.conditions.push_back(condition_from_name(c.get<std::string>()));
  }
  spec.seqs_per_cell = j.value("seqs_per_cell", spec.seqs_per_cell);
  spec.n_frames = j.value("n_frames", spec.n_frames);
  spec.d_in = j.value("d_in", spec.d_in);
  spec.signature_noise = j.value("signature_noise", spec.signature_noise);
  spec.condition_strength = j.value("condition_strength", spec.condition_strength);
  spec.confusion_pairs = j.value("confusion_pairs", spec.confusion_pairs);
  spec.seed = j.value("seed", spec.seed);
  return spec;
}

}  // namespace

std::string spec_to_json(const DatasetSpec& spec) {
  std::ostringstream os;
  write_spec_json(os, spec);
  return os.str();
}

DatasetSpec spec_from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad spec JSON: ") + e.what());
  }
  try {
    return spec_from_json(j);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad spec value: ") + e.what());
  }
}

void save(const LabeledDataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "{\"format\":\"hmds-1\",\"spec\":";
  write_spec_json(out, ds.spec);
  out << "}\n";
  for (const FeatureSequence& s : ds.sequences) {
    out << "{\"id\":" << s.id << ",\"view_deg\":" << s.view_deg
        << ",\"condition\":\"" << condition_name(s.condition) << "\",\"seq\":" << s.seq
        << ",\"frames\":[";
    for (int t = 0; t < s.frames.rows; ++t) {
      out << (t ? ",[" : "[");
      const double* f = s.frames.row(t);
      for (int i = 0; i < s.frames.cols; ++i)
        out << (i ? "," : "") << format_g9(f[i]);
      out << "]";
    }
    out << "]}\n";
  }
  if (!out) throw IoError("write failed: " + path);
}

LabeledDataset load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);

  LabeledDataset ds;
  std::string line;
  int line_no = 0;

  if (!std::getline(in, line)) throw ParseError(1, "empty file");
  ++line_no;
  try {
    json header = json::parse(line);
    if (header.at("format").get<std::string>() != "hmds-1")
      throw ParseError(line_no, "unsupported format version");
    ds.spec = spec_from_json(header.at("spec"));
  } catch (const json::exception& e) {
    throw ParseError(line_no, std::string("bad header: ") + e.what());
  }
  try {
    ds.spec.validate();
  } catch (const ConfigError& e) {
    throw ParseError(line_no, std::string("bad spec echo: ") + e.what());
  }

  std::set<std::tuple<int, int, int, int>> keys;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    FeatureSequence s;
    try {
      json rec = json::parse(line);
      s.id = rec.at("id").get<int>();
      s.view_deg = rec.at("view_deg").get<int>();
      s.condition = condition_from_name(rec.at("condition").get<std::string>());
      s.seq = rec.at("seq").get<int>();
      const auto& frames = rec.at("frames");
      if (!frames.is_array() || frames.empty())
        throw ParseError(line_no, "frames must be a non-empty array");
      s.frames = Mat(static_cast<int>(frames.size()), ds.spec.d_in);
      for (size_t t = 0; t < frames.size(); ++t) {
        const auto& fr = frames[t];
        if (!fr.is_array() || static_cast<int>(fr.size()) != ds.spec.d_in)
          throw ParseError(line_no, "frame width does not match spec d_in");
        for (int i = 0; i < ds.spec.d_in; ++i) {
          double v = fr[i].get<double>();
          if (!std::isfinite(v)) throw ParseError(line_no, "non-finite frame value");
          s.frames.at(static_cast<int>(t), i) = v;
        }
      }
    } catch (const json::exception& e) {
      throw ParseError(line_no, std::string("bad record: ") + e.what());
    } catch (const ConfigError& e) {
      throw ParseError(line_no, e.what());
    }
    if (s.frames.rows != ds.spec.n_frames)
      throw ParseError(line_no, "frame count does not match spec n_frames");
    if (s.id < 0 || s.id >= ds.spec.n_ids)
      throw ParseError(line_no, "id out of range: " + std::to_string(s.id));
    auto key = std::make_tuple(s.id, s.view_deg, static_cast<int>(s.condition), s.seq);
    if (!keys.insert(key).second) {
      std::ostringstream msg;
      msg << "duplicate record key (id=" << s.id << ", view=" << s.view_deg
          << ", condition=" << condition_name(s.condition) << ", seq=" << s.seq << ")";
      throw ParseError(line_no, msg.str());
    }
    ds.sequences.push_back(std::move(s));
  }

  size_t expected = static_cast<size_t>(ds.spec.n_ids) * ds.spec.views.size() *
                    ds.spec.conditions.size() * ds.spec.seqs_per_cell;
  if (ds.sequences.size() != expected)
    throw ParseError(line_no, "truncated file: expected " + std::to_string(expected) +
                                  " records, got " + std::to_string(ds.sequences.size()));

  try {
    ds.rebuild_index();
  } catch (const DataError& e) {
    throw ParseError(line_no, e.what());
  }
  return ds;
}

}  // namespace hm

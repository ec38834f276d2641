#include "hardmetric/trainer.hpp"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "hardmetric/errors.hpp"
#include "hardmetric/kernels.hpp"
#include "hardmetric/numeric.hpp"

namespace hm {

namespace {

using ordered_json = nlohmann::ordered_json;
using json = nlohmann::json;

Schedule effective_schedule(const TrainConfig& cfg) {
  Schedule s = cfg.schedule;
  s.total_iters = cfg.total_iters;
  return s;
}

void check_known_keys(const json& j, std::initializer_list<const char*> known,
                      const std::string& section) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : known)
      if (it.key() == k) {
        ok = true;
        break;
      }
    if (!ok) throw ConfigError("unknown key \"" + it.key() + "\" in " + section);
  }
}

}  // namespace

void OptimConfig::validate() const {
  if (!(learning_rate >= 0.0)) throw ConfigError("learning_rate must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("beta1 must be in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("beta2 must be in [0, 1)");
  if (!(eps > 0.0)) throw ConfigError("eps must be > 0");
}

void TrainConfig::validate() const {
  dims.validate();
  if (p < 2) throw ConfigError("p must be >= 2");
  if (k < 2) throw ConfigError("k must be >= 2");
  Schedule s = schedule;
  s.total_iters = total_iters;
  s.validate();
  memory.validate();
  memory_loss.validate();
  optim.validate();
  if (total_iters < 1) throw ConfigError("total_iters must be >= 1");
  if (log_every < 1) throw ConfigError("log_every must be >= 1");
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be >= 0");
}

std::string TrainConfig::to_json() const {
  ordered_json j;
  j["model"] = {{"d_in", dims.d_in}, {"d_hid", dims.d_hid}, {"n_dim", dims.n_dim}};
  j["sampler"] = {{"p", p}, {"k", k}};
  j["schedule"] = {{"delta_min", schedule.delta_min},
                   {"epsilon", schedule.epsilon},
                   {"margin", schedule.margin}};
  j["memory"] = {{"mode", update_mode_name(memory.mode)},
                 {"alpha", memory.alpha},
                 {"beta", memory.beta},
                 {"renormalize", memory.renormalize},
                 {"tau", memory_loss.tau},
                 {"variance_mode", variance_mode_name(memory_loss.variance_mode)}};
  j["optim"] = {{"learning_rate", optim.learning_rate},
                {"beta1", optim.beta1},
                {"beta2", optim.beta2},
                {"eps", optim.eps}};
  j["train"] = {{"total_iters", total_iters},
                {"seed", seed},
                {"use_reweighted_bh", use_reweighted_bh},
                {"use_memory", use_memory},
                {"log_every", log_every},
                {"checkpoint_every", checkpoint_every}};
  return j.dump();
}

TrainConfig TrainConfig::from_json(const std::string& text) {
  TrainConfig cfg;
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config JSON: ") + e.what());
  }
  try {
    check_known_keys(j, {"model", "sampler", "schedule", "memory", "optim", "train"},
                     "config");
    if (j.contains("model")) {
      const json& m = j["model"];
      check_known_keys(m, {"d_in", "d_hid", "n_dim"}, "model");
      cfg.dims.d_in = m.value("d_in", cfg.dims.d_in);
      cfg.dims.d_hid = m.value("d_hid", cfg.dims.d_hid);
      cfg.dims.n_dim = m.value("n_dim", cfg.dims.n_dim);
    }
    if (j.contains("sampler")) {
      const json& s = j["sampler"];
      check_known_keys(s, {"p", "k"}, "sampler");
      cfg.p = s.value("p", cfg.p);
      cfg.k = s.value("k", cfg.k);
    }
    if (j.contains("schedule")) {
      const json& s = j["schedule"];
      check_known_keys(s, {"delta_min", "epsilon", "margin"}, "schedule");
      cfg.schedule.delta_min = s.value("delta_min", cfg.schedule.delta_min);
      cfg.schedule.epsilon = s.value("epsilon", cfg.schedule.epsilon);
      cfg.schedule.margin = s.value("margin", cfg.schedule.margin);
    }
    if (j.contains("memory")) {
      const json& m = j["memory"];
      check_known_keys(m, {"mode", "alpha", "beta", "renormalize", "tau", "variance_mode"},
                       "memory");
      if (m.contains("mode"))
        cfg.memory.mode = update_mode_from_name(m["mode"].get<std::string>());
      cfg.memory.alpha = m.value("alpha", cfg.memory.alpha);
      cfg.memory.beta = m.value("beta", cfg.memory.beta);
      cfg.memory.renormalize = m.value("renormalize", cfg.memory.renormalize);
      cfg.memory_loss.tau = m.value("tau", cfg.memory_loss.tau);
      if (m.contains("variance_mode"))
        cfg.memory_loss.variance_mode =
            variance_mode_from_name(m["variance_mode"].get<std::string>());
    }
    if (j.contains("optim")) {
      const json& o = j["optim"];
      check_known_keys(o, {"learning_rate", "beta1", "beta2", "eps"}, "optim");
      cfg.optim.learning_rate = o.value("learning_rate", cfg.optim.learning_rate);
      cfg.optim.beta1 = o.value("beta1", cfg.optim.beta1);
      cfg.optim.beta2 = o.value("beta2", cfg.optim.beta2);
      cfg.optim.eps = o.value("eps", cfg.optim.eps);
    }
    if (j.contains("train")) {
      const json& t = j["train"];
      check_known_keys(t,
                       {"total_iters", "seed", "use_reweighted_bh", "use_memory",
                        "log_every", "checkpoint_every"},
                       "train");
      cfg.total_iters = t.value("total_iters", cfg.total_iters);
      cfg.seed = t.value("seed", cfg.seed);
      cfg.use_reweighted_bh = t.value("use_reweighted_bh", cfg.use_reweighted_bh);
      cfg.use_memory = t.value("use_memory", cfg.use_memory);
      cfg.log_every = t.value("log_every", cfg.log_every);
      cfg.checkpoint_every = t.value("checkpoint_every", cfg.checkpoint_every);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  cfg.schedule.total_iters = cfg.total_iters;
  cfg.validate();
  return cfg;
}

// ---------------------------------------------------------------------------
// Composite loss

TotalBreakdown TotalLoss::breakdown_and_grad(const EmbeddingMatrix& emb,
                                             Mat& grad) const {
  grad = Mat(emb.batch(), emb.n_dim());
  return breakdown_impl(emb, &grad);
}

TotalBreakdown TotalLoss::breakdown(const EmbeddingMatrix& emb) const {
  return breakdown_impl(emb, nullptr);
}

double TotalLoss::value(const EmbeddingMatrix& emb) const {
  return breakdown_impl(emb, nullptr).total;
}

double TotalLoss::value_and_grad(const EmbeddingMatrix& emb, Mat& grad) const {
  return breakdown_and_grad(emb, grad).total;
}

TotalBreakdown TotalLoss::breakdown_impl(const EmbeddingMatrix& emb, Mat* grad) const {
  const TrainConfig& cfg = *cfg_;
  Schedule sched = effective_schedule(cfg);

  TotalBreakdown b;
  b.delta_t = progressive_factor(t_, sched);
  b.s_t = smoothness_factor(t_, sched.total_iters);
  b.gamma_t = fusion_factor(t_, cfg.total_iters);

  DistanceMatrix dist = pairwise_distances(emb);
  if (grad) {
    Mat grad_dist(dist.batch(), dist.batch());
    if (cfg.use_reweighted_bh) {
      ReweightBreakdown rb = reweight_loss_grad(dist, t_, sched, grad_dist);
      b.ba = rb.ba;
      b.bh = rb.bh;
    } else {
      b.ba = triplet_ba_loss_grad(dist, sched.margin, grad_dist);
    }
    distances_backward(emb, dist, grad_dist, *grad);
    if (cfg.use_memory) {
      Mat grad_mem(emb.batch(), emb.n_dim());
      MemoryLossBreakdown mb = memory_loss_grad(emb, *bank_, cfg.memory_loss, grad_mem);
      b.ce = mb.ce;
      b.variance = mb.variance;
      for (size_t i = 0; i < grad->data.size(); ++i)
        grad->data[i] += b.gamma_t * grad_mem.data[i];
    }
  } else {
    if (cfg.use_reweighted_bh) {
      ReweightBreakdown rb = reweight_loss(dist, t_, sched);
      b.ba = rb.ba;
      b.bh = rb.bh;
    } else {
      b.ba = triplet_ba_loss(dist, sched.margin);
    }
    if (cfg.use_memory) {
      MemoryLossBreakdown mb = memory_loss(emb, *bank_, cfg.memory_loss);
      b.ce = mb.ce;
      b.variance = mb.variance;
    }
  }
  // Disabled terms are exact zeros above.
  b.total = b.ba + b.s_t * b.bh + b.gamma_t * (b.ce + b.variance);
  return b;
}

TotalBreakdown total_loss(const EmbeddingMatrix& emb, const MemoryBank& bank,
                          int64_t t, const TrainConfig& cfg) {
  return TotalLoss(bank, t, cfg).breakdown(emb);
}

// ---------------------------------------------------------------------------
// Run log

bool LogRecord::operator==(const LogRecord& o) const {
  return t == o.t && loss_total == o.loss_total && loss_ba == o.loss_ba &&
         loss_bh == o.loss_bh && loss_ce == o.loss_ce && loss_var == o.loss_var &&
         delta_t == o.delta_t && s_t == o.s_t && gamma_t == o.gamma_t;
}

void RunLog::to_csv(std::ostream& os, int64_t log_every) const {
  os << "t,loss_total,loss_ba,loss_bh,loss_ce,loss_var,delta_t,s_t,gamma_t\n";
  for (size_t i = 0; i < records.size(); ++i) {
    const LogRecord& r = records[i];
    if (r.t % log_every != 0 && i + 1 != records.size()) continue;
    os << r.t << ',' << format_g17(r.loss_total) << ',' << format_g17(r.loss_ba) << ','
       << format_g17(r.loss_bh) << ',' << format_g17(r.loss_ce) << ','
       << format_g17(r.loss_var) << ',' << format_g17(r.delta_t) << ','
       << format_g17(r.s_t) << ',' << format_g17(r.gamma_t) << '\n';
  }
}

std::string RunLog::to_csv_string(int64_t log_every) const {
  std::ostringstream os;
  to_csv(os, log_every);
  return os.str();
}

RunLog RunLog::from_csv(std::istream& is) {
  RunLog log;
  std::string line;
  if (!std::getline(is, line)) throw ParseError(1, "empty run log");
  if (line != "t,loss_total,loss_ba,loss_bh,loss_ce,loss_var,delta_t,s_t,gamma_t")
    throw ParseError(1, "unexpected run log header");
  int line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    LogRecord r;
    std::istringstream ls(line);
    std::string field;
    double* fields[] = {&r.loss_total, &r.loss_ba, &r.loss_bh, &r.loss_ce,
                        &r.loss_var,   &r.delta_t, &r.s_t,     &r.gamma_t};
    if (!std::getline(ls, field, ',')) throw ParseError(line_no, "missing t");
    r.t = std::strtoll(field.c_str(), nullptr, 10);
    for (double* f : fields) {
      if (!std::getline(ls, field, ',')) throw ParseError(line_no, "missing field");
      char* end = nullptr;
      *f = std::strtod(field.c_str(), &end);
      if (end == field.c_str()) throw ParseError(line_no, "bad number: " + field);
    }
    log.records.push_back(r);
  }
  return log;
}

// ---------------------------------------------------------------------------
// Optimizer

namespace {

void adam_block(double* p, double* m, double* v, const double* g, size_t n,
                const OptimConfig& o, double bc1, double bc2) {
  for (size_t i = 0; i < n; ++i) {
    m[i] = o.beta1 * m[i] + (1.0 - o.beta1) * g[i];
    v[i] = o.beta2 * v[i] + (1.0 - o.beta2) * g[i] * g[i];
    double m_hat = m[i] / bc1;
    double v_hat = v[i] / bc2;
    p[i] -= o.learning_rate * m_hat / (std::sqrt(v_hat) + o.eps);
  }
}

void adam_step(ModelParams& params, AdamState& st, const ParamGrads& g,
               const OptimConfig& o) {
  st.step += 1;
  double bc1 = 1.0 - std::pow(o.beta1, static_cast<double>(st.step));
  double bc2 = 1.0 - std::pow(o.beta2, static_cast<double>(st.step));
  adam_block(params.frame_weights.data.data(), st.m.frame_weights.data.data(),
             st.v.frame_weights.data.data(), g.frame_weights.data.data(),
             g.frame_weights.data.size(), o, bc1, bc2);
  adam_block(params.frame_bias.data(), st.m.frame_bias.data(), st.v.frame_bias.data(),
             g.frame_bias.data(), g.frame_bias.size(), o, bc1, bc2);
  adam_block(params.head_weights.data.data(), st.m.head_weights.data.data(),
             st.v.head_weights.data.data(), g.head_weights.data.data(),
             g.head_weights.data.size(), o, bc1, bc2);
  adam_block(params.head_bias.data(), st.m.head_bias.data(), st.v.head_bias.data(),
             g.head_bias.data(), g.head_bias.size(), o, bc1, bc2);
}

}  // namespace

// ---------------------------------------------------------------------------
// Trainer

Trainer::Trainer(const TrainConfig& cfg, const LabeledDataset& ds)
    : cfg_(cfg), data_(&ds), rng_(Rng::derive(cfg.seed, 0x5A)) {
  cfg_.validate();
  cfg_.schedule.total_iters = cfg_.total_iters;
  if (ds.n_ids() < cfg_.p)
    throw UsageError("dataset has fewer identities than sampler p");
  params_ = init_params(cfg_.dims, cfg_.seed);
  memory_ = init_memory(ds, params_, cfg_.memory);
  adam_.m = ParamGrads::zeros(cfg_.dims);
  adam_.v = ParamGrads::zeros(cfg_.dims);
  adam_.step = 0;
}

void Trainer::step() {
  if (done()) throw UsageError("training already complete");
  const int64_t titer = t_ + 1;

  Batch batch = sample_batch(*data_, cfg_.p, cfg_.k, rng_);
  kernels::ForwardCache cache = kernels::embed_batch_auto(params_, batch.sequences);

  // Memory moves first, then the loss sees the updated bank.
  update_memory(memory_, cache.emb);

  TotalLoss loss(memory_, titer, cfg_);
  Mat grad_rows;
  TotalBreakdown bd = loss.breakdown_and_grad(cache.emb, grad_rows);

  if (!std::isfinite(bd.total) || !std::isfinite(bd.ba) || !std::isfinite(bd.bh) ||
      !std::isfinite(bd.ce) || !std::isfinite(bd.variance)) {
    std::ostringstream msg;
    msg << "non-finite loss at iteration " << titer << " (total=" << bd.total
        << ", ba=" << bd.ba << ", bh=" << bd.bh << ", ce=" << bd.ce
        << ", var=" << bd.variance << ")";
    throw NumericError(msg.str());
  }

  ParamGrads grads =
      kernels::backward_batch_auto(params_, batch.sequences, cache, grad_rows);
  adam_step(params_, adam_, grads, cfg_.optim);

  log_.records.push_back({titer, bd.total, bd.ba, bd.bh, bd.ce, bd.variance,
                          bd.delta_t, bd.s_t, bd.gamma_t});
  t_ = titer;
}

void Trainer::save_checkpoint(const std::string& path) const {
  Checkpoint ck;
  ck.t = t_;
  ck.cfg = cfg_;
  ck.params = params_;
  ck.memory = memory_;
  ck.adam = adam_;
  ck.rng_state = rng_.save_state();
  hm::save_checkpoint(ck, path);
}

void Trainer::restore(const std::string& path) {
  Checkpoint ck = load_checkpoint(path);
  if (ck.cfg.to_json() != cfg_.to_json())
    throw UsageError("checkpoint config does not match trainer config");
  params_ = std::move(ck.params);
  memory_ = std::move(ck.memory);
  adam_ = std::move(ck.adam);
  rng_.load_state(ck.rng_state);
  t_ = ck.t;
  log_.records.clear();
}

TrainResult train(const TrainConfig& cfg, const LabeledDataset& ds) {
  Trainer tr(cfg, ds);
  while (!tr.done()) tr.step();
  return {tr.params(), tr.memory(), tr.log()};
}

// ---------------------------------------------------------------------------
// Checkpoint container

namespace {

constexpr char kMagic[5] = {'H', 'M', 'C', 'K', '1'};
constexpr uint32_t kVersion = 1;

void put_bytes(std::string& out, const void* p, size_t n) {
  out.append(static_cast<const char*>(p), n);
}

void put_doubles(std::string& out, const double* p, size_t n) {
  put_bytes(out, p, n * sizeof(double));
}

struct Reader {
  const std::string& buf;
  size_t pos = 0;

  void read_bytes(void* p, size_t n) {
    if (pos + n > buf.size()) throw IoError("truncated checkpoint");
    std::memcpy(p, buf.data() + pos, n);
    pos += n;
  }
  template <typename T>
  T get() {
    T v;
    read_bytes(&v, sizeof v);
    return v;
  }
  std::string get_string(size_t n) {
    if (pos + n > buf.size()) throw IoError("truncated checkpoint");
    std::string s = buf.substr(pos, n);
    pos += n;
    return s;
  }
};

void add_section(std::string& out, const std::string& name, const std::string& payload) {
  uint32_t name_len = static_cast<uint32_t>(name.size());
  put_bytes(out, &name_len, sizeof name_len);
  put_bytes(out, name.data(), name.size());
  uint64_t payload_len = payload.size();
  put_bytes(out, &payload_len, sizeof payload_len);
  out += payload;
}

}  // namespace

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  std::string params;
  {
    int32_t d[3] = {ck.params.dims.d_in, ck.params.dims.d_hid, ck.params.dims.n_dim};
    put_bytes(params, d, sizeof d);
    put_doubles(params, ck.params.frame_weights.data.data(),
                ck.params.frame_weights.data.size());
    put_doubles(params, ck.params.frame_bias.data(), ck.params.frame_bias.size());
    put_doubles(params, ck.params.head_weights.data.data(),
                ck.params.head_weights.data.size());
    put_doubles(params, ck.params.head_bias.data(), ck.params.head_bias.size());
  }
  std::string memory;
  {
    int32_t hdr[3] = {ck.memory.rows.rows, ck.memory.rows.cols,
                      static_cast<int32_t>(ck.memory.opts.mode)};
    put_bytes(memory, hdr, sizeof hdr);
    double ab[2] = {ck.memory.opts.alpha, ck.memory.opts.beta};
    put_bytes(memory, ab, sizeof ab);
    uint8_t renorm = ck.memory.opts.renormalize ? 1 : 0;
    put_bytes(memory, &renorm, sizeof renorm);
    put_doubles(memory, ck.memory.rows.data.data(), ck.memory.rows.data.size());
  }
  std::string optim;
  {
    int64_t step = ck.adam.step;
    put_bytes(optim, &step, sizeof step);
    for (const ParamGrads* g : {&ck.adam.m, &ck.adam.v}) {
      put_doubles(optim, g->frame_weights.data.data(), g->frame_weights.data.size());
      put_doubles(optim, g->frame_bias.data(), g->frame_bias.size());
      put_doubles(optim, g->head_weights.data.data(), g->head_weights.data.size());
      put_doubles(optim, g->head_bias.data(), g->head_bias.size());
    }
  }
  std::string meta;
  {
    int64_t t = ck.t;
    put_bytes(meta, &t, sizeof t);
  }

  std::string out;
  put_bytes(out, kMagic, sizeof kMagic);
  uint32_t version = kVersion;
  put_bytes(out, &version, sizeof version);
  uint32_t n_sections = 6;
  put_bytes(out, &n_sections, sizeof n_sections);
  add_section(out, "meta", meta);
  add_section(out, "config", ck.cfg.to_json());
  add_section(out, "params", params);
  add_section(out, "memory", memory);
  add_section(out, "optim", optim);
  add_section(out, "rng", ck.rng_state);

  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open for writing: " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("write failed: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  std::string buf = ss.str();

  Reader r{buf};
  char magic[5];
  r.read_bytes(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw IoError("not a checkpoint file (bad magic): " + path);
  uint32_t version = r.get<uint32_t>();
  if (version != kVersion)
    throw IoError("checkpoint version mismatch: got " + std::to_string(version));
  uint32_t n_sections = r.get<uint32_t>();

  Checkpoint ck;
  bool have_meta = false, have_config = false, have_params = false,
       have_memory = false, have_optim = false, have_rng = false;

  for (uint32_t s = 0; s < n_sections; ++s) {
    uint32_t name_len = r.get<uint32_t>();
    std::string name = r.get_string(name_len);
    uint64_t payload_len = r.get<uint64_t>();
    std::string payload = r.get_string(payload_len);
    Reader pr{payload};

    if (name == "meta") {
      ck.t = pr.get<int64_t>();
      have_meta = true;
    } else if (name == "config") {
      ck.cfg = TrainConfig::from_json(payload);
      have_config = true;
    } else if (name == "params") {
      int32_t d[3];
      pr.read_bytes(d, sizeof d);
      ck.params.dims = {d[0], d[1], d[2]};
      ck.params.dims.validate();
      ck.params.frame_weights = Mat(d[0], d[1]);
      pr.read_bytes(ck.params.frame_weights.data.data(),
                    ck.params.frame_weights.data.size() * sizeof(double));
      ck.params.frame_bias.resize(d[1]);
      pr.read_bytes(ck.params.frame_bias.data(), d[1] * sizeof(double));
      ck.params.head_weights = Mat(d[1], d[2]);
      pr.read_bytes(ck.params.head_weights.data.data(),
                    ck.params.head_weights.data.size() * sizeof(double));
      ck.params.head_bias.resize(d[2]);
      pr.read_bytes(ck.params.head_bias.data(), d[2] * sizeof(double));
      have_params = true;
    } else if (name == "memory") {
      int32_t hdr[3];
      pr.read_bytes(hdr, sizeof hdr);
      if (hdr[0] < 1 || hdr[1] < 1) throw IoError("bad memory section");
      if (hdr[2] < 0 || hdr[2] > static_cast<int32_t>(UpdateMode::PresentAbsentShift))
        throw IoError("bad memory update mode in checkpoint");
      ck.memory.opts.mode = static_cast<UpdateMode>(hdr[2]);
      double ab[2];
      pr.read_bytes(ab, sizeof ab);
      ck.memory.opts.alpha = ab[0];
      ck.memory.opts.beta = ab[1];
      uint8_t renorm;
      pr.read_bytes(&renorm, sizeof renorm);
      ck.memory.opts.renormalize = renorm != 0;
      ck.memory.rows = Mat(hdr[0], hdr[1]);
      pr.read_bytes(ck.memory.rows.data.data(),
                    ck.memory.rows.data.size() * sizeof(double));
      have_memory = true;
    } else if (name == "optim") {
      if (!have_params) throw IoError("optim section before params section");
      ck.adam.step = pr.get<int64_t>();
      ck.adam.m = ParamGrads::zeros(ck.params.dims);
      ck.adam.v = ParamGrads::zeros(ck.params.dims);
      for (ParamGrads* g : {&ck.adam.m, &ck.adam.v}) {
        pr.read_bytes(g->frame_weights.data.data(),
                      g->frame_weights.data.size() * sizeof(double));
        pr.read_bytes(g->frame_bias.data(), g->frame_bias.size() * sizeof(double));
        pr.read_bytes(g->head_weights.data.data(),
                      g->head_weights.data.size() * sizeof(double));
        pr.read_bytes(g->head_bias.data(), g->head_bias.size() * sizeof(double));
      }
      have_optim = true;
    } else if (name == "rng") {
      ck.rng_state = payload;
      have_rng = true;
    } else {
      throw IoError("unknown checkpoint section: " + name);
    }
  }
  if (!(have_meta && have_config && have_params && have_memory && have_optim &&
        have_rng))
    throw IoError("checkpoint is missing sections");
  return ck;
}

}  // namespace hm

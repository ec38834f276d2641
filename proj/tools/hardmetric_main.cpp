// Command-line front end: dataset generation, training, evaluation,
// ablation and report emission. Exit codes: 0 success, 2 usage or
// configuration, 3 numeric failure, 4 I/O.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "hardmetric/dataset.hpp"
#include "hardmetric/errors.hpp"
#include "hardmetric/evaluate.hpp"
#include "hardmetric/manifest.hpp"
#include "hardmetric/numeric.hpp"
#include "hardmetric/plot.hpp"
#include "hardmetric/trainer.hpp"

namespace fs = std::filesystem;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw hm::IoError("cannot open: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw hm::IoError("cannot open for writing: " + path);
  out << text;
  if (!out) throw hm::IoError("write failed: " + path);
}

void require_file(const std::string& path, const std::string& what) {
  if (!fs::exists(path)) throw hm::UsageError("missing " + what + ": " + path);
}

struct Stopwatch {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
        .count();
  }
};

struct TrainCliOptions {
  std::string config_path;
  std::string dataset_path;
  std::string out_dir;
  std::string resume_path;
  // flag overrides; CLI11 count() decides whether they apply
  int64_t total_iters = 0;
  uint64_t seed = 0;
  int p = 0, k = 0;
  double learning_rate = 0.0;
  bool use_reweighted_bh = true;
  bool use_memory = true;
  int64_t log_every = 0;
  int64_t checkpoint_every = -1;
};

hm::TrainConfig load_train_config(const CLI::App* cmd, const TrainCliOptions& opt) {
  hm::TrainConfig cfg;  // defaults
  if (!opt.config_path.empty()) {
    require_file(opt.config_path, "config file");
    cfg = hm::TrainConfig::from_json(read_file(opt.config_path));
  }
  // Flags beat the file, which beats the defaults.
  if (cmd->count("--total-iters")) cfg.total_iters = opt.total_iters;
  if (cmd->count("--seed")) cfg.seed = opt.seed;
  if (cmd->count("--p")) cfg.p = opt.p;
  if (cmd->count("--k")) cfg.k = opt.k;
  if (cmd->count("--lr")) cfg.optim.learning_rate = opt.learning_rate;
  if (cmd->count("--use-reweighted-bh")) cfg.use_reweighted_bh = opt.use_reweighted_bh;
  if (cmd->count("--use-memory")) cfg.use_memory = opt.use_memory;
  if (cmd->count("--log-every")) cfg.log_every = opt.log_every;
  if (cmd->count("--checkpoint-every")) cfg.checkpoint_every = opt.checkpoint_every;
  cfg.schedule.total_iters = cfg.total_iters;
  cfg.validate();
  return cfg;
}

int run_gen_data(const std::string& spec_path, const std::string& out_path) {
  Stopwatch watch;
  require_file(spec_path, "spec file");
  hm::DatasetSpec spec = hm::spec_from_json_text(read_file(spec_path));
  spec.validate();
  hm::LabeledDataset ds = hm::generate(spec);
  hm::save(ds, out_path);
  std::string digest = hm::digest_file(out_path);
  std::cout << "wrote " << out_path << " (" << ds.sequences.size()
            << " sequences)\ndigest: " << digest << "\n";

  hm::RunManifest manifest;
  manifest.command = "gen-data";
  manifest.config_json = hm::spec_to_json(ds.spec);
  manifest.dataset_path = out_path;
  manifest.dataset_digest = digest;
  manifest.artifacts = {out_path};
  manifest.wall_clock_seconds = watch.seconds();
  manifest.git_describe = hm::git_describe_string();
  manifest.write(out_path + ".manifest.json");
  return 0;
}

int run_train(const CLI::App* cmd, const TrainCliOptions& opt) {
  Stopwatch watch;
  require_file(opt.dataset_path, "dataset file");
  hm::LabeledDataset ds = hm::load(opt.dataset_path);
  hm::TrainConfig cfg = load_train_config(cmd, opt);
  fs::create_directories(opt.out_dir);

  hm::Trainer trainer(cfg, ds);
  if (!opt.resume_path.empty()) {
    require_file(opt.resume_path, "checkpoint");
    trainer.restore(opt.resume_path);
    std::cout << "resumed at iteration " << trainer.iteration() << "\n";
  }

  std::vector<std::string> artifacts;
  while (!trainer.done()) {
    trainer.step();
    int64_t t = trainer.iteration();
    if (t % cfg.log_every == 0 || trainer.done()) {
      const hm::LogRecord& r = trainer.log().records.back();
      std::printf("iter %6lld  loss %.6f  ba %.6f  bh %.6f  ce %.6f  var %.6f\n",
                  static_cast<long long>(t), r.loss_total, r.loss_ba, r.loss_bh,
                  r.loss_ce, r.loss_var);
    }
    if (cfg.checkpoint_every > 0 && t % cfg.checkpoint_every == 0 && !trainer.done()) {
      std::string path =
          (fs::path(opt.out_dir) / ("checkpoint_" + std::to_string(t) + ".hmck"))
              .string();
      trainer.save_checkpoint(path);
      artifacts.push_back(path);
    }
  }

  std::string ckpt_path = (fs::path(opt.out_dir) / "checkpoint.hmck").string();
  trainer.save_checkpoint(ckpt_path);
  artifacts.push_back(ckpt_path);

  std::string runlog_path = (fs::path(opt.out_dir) / "runlog.csv").string();
  write_file(runlog_path, trainer.log().to_csv_string(cfg.log_every));
  artifacts.push_back(runlog_path);

  hm::RunManifest manifest;
  manifest.command = "train";
  manifest.config_json = cfg.to_json();
  manifest.dataset_path = opt.dataset_path;
  manifest.dataset_digest = hm::digest_file(opt.dataset_path);
  manifest.artifacts = artifacts;
  manifest.wall_clock_seconds = watch.seconds();
  manifest.git_describe = hm::git_describe_string();
  manifest.write((fs::path(opt.out_dir) / "manifest.json").string());
  return 0;
}

int run_eval(const std::string& ckpt_path, const std::string& dataset_path,
             const std::string& out_path, bool include_identical_view,
             bool self_retrieval, const std::string& gallery_condition) {
  Stopwatch watch;
  require_file(ckpt_path, "checkpoint");
  require_file(dataset_path, "dataset file");
  hm::Checkpoint ck = hm::load_checkpoint(ckpt_path);
  hm::LabeledDataset ds = hm::load(dataset_path);

  hm::EvalProtocol protocol;
  protocol.gallery_condition = hm::condition_from_name(gallery_condition);
  protocol.exclude_identical_view = !include_identical_view;
  protocol.self_retrieval = self_retrieval;

  hm::EvalTable table = hm::evaluate(ck.params, ds, protocol);
  write_file(out_path, table.to_csv());
  std::cout << table.to_csv();
  std::printf("rank-1 grand mean: %.1f\n", table.grand_mean);

  hm::RunManifest manifest;
  manifest.command = "eval";
  manifest.config_json = ck.cfg.to_json();
  manifest.dataset_path = dataset_path;
  manifest.dataset_digest = hm::digest_file(dataset_path);
  manifest.artifacts = {out_path};
  manifest.wall_clock_seconds = watch.seconds();
  manifest.git_describe = hm::git_describe_string();
  manifest.write(out_path + ".manifest.json");
  return 0;
}

int run_ablate(const CLI::App* cmd, const TrainCliOptions& opt) {
  Stopwatch watch;
  require_file(opt.dataset_path, "dataset file");
  hm::LabeledDataset ds = hm::load(opt.dataset_path);
  hm::TrainConfig cfg = load_train_config(cmd, opt);
  fs::create_directories(opt.out_dir);

  hm::AblationReport report = hm::ablation_report(ds, cfg);

  std::vector<std::string> artifacts;
  struct Cell {
    const char* name;
    const hm::EvalTable* table;
  };
  const Cell cells[] = {{"baseline", &report.baseline},
                        {"reweight", &report.reweight},
                        {"membank", &report.membank},
                        {"combined", &report.combined}};
  for (const Cell& c : cells) {
    std::string path =
        (fs::path(opt.out_dir) / ("table_" + std::string(c.name) + ".csv")).string();
    write_file(path, c.table->to_csv());
    artifacts.push_back(path);
  }
  std::string cmp_path = (fs::path(opt.out_dir) / "comparison.csv").string();
  write_file(cmp_path, report.comparison_csv());
  artifacts.push_back(cmp_path);
  std::string svg_path = (fs::path(opt.out_dir) / "accuracy.svg").string();
  write_file(svg_path, hm::ablation_bars_svg(report));
  artifacts.push_back(svg_path);

  std::cout << report.comparison_csv();

  hm::RunManifest manifest;
  manifest.command = "ablate";
  manifest.config_json = cfg.to_json();
  manifest.dataset_path = opt.dataset_path;
  manifest.dataset_digest = hm::digest_file(opt.dataset_path);
  manifest.artifacts = artifacts;
  manifest.wall_clock_seconds = watch.seconds();
  manifest.git_describe = hm::git_describe_string();
  manifest.write((fs::path(opt.out_dir) / "manifest.json").string());
  return 0;
}

int run_report(const std::string& runlog_path, const std::string& out_dir) {
  Stopwatch watch;
  require_file(runlog_path, "run log");
  std::ifstream in(runlog_path);
  hm::RunLog log = hm::RunLog::from_csv(in);
  if (log.records.empty()) throw hm::UsageError("run log has no records");
  fs::create_directories(out_dir);

  std::string svg_path = (fs::path(out_dir) / "loss_curves.svg").string();
  write_file(svg_path, hm::runlog_curves_svg(log));

  const hm::LogRecord& first = log.records.front();
  const hm::LogRecord& last = log.records.back();
  double min_loss = first.loss_total;
  for (const hm::LogRecord& r : log.records) min_loss = std::min(min_loss, r.loss_total);
  std::ostringstream summary;
  summary << "iterations: " << first.t << ".." << last.t << " (" << log.records.size()
          << " rows)\n"
          << "loss_total: first " << hm::format_g9(first.loss_total) << ", last "
          << hm::format_g9(last.loss_total) << ", min " << hm::format_g9(min_loss)
          << "\n"
          << "schedules at end: delta_t " << hm::format_g9(last.delta_t) << ", s_t "
          << hm::format_g9(last.s_t) << ", gamma_t " << hm::format_g9(last.gamma_t)
          << "\n";
  std::string summary_path = (fs::path(out_dir) / "summary.txt").string();
  write_file(summary_path, summary.str());
  std::cout << summary.str();

  hm::RunManifest manifest;
  manifest.command = "report";
  manifest.artifacts = {svg_path, summary_path};
  manifest.wall_clock_seconds = watch.seconds();
  manifest.git_describe = hm::git_describe_string();
  manifest.write((fs::path(out_dir) / "manifest.json").string());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hardmetric: hardness-reweighted metric learning on synthetic benchmarks"};
  app.require_subcommand(1);

  // gen-data
  std::string spec_path, gen_out;
  CLI::App* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
  gen->add_option("--spec", spec_path, "dataset spec JSON file")->required();
  gen->add_option("--out", gen_out, "output dataset path (hmds-1)")->required();

  // train
  TrainCliOptions train_opt;
  CLI::App* train_cmd = app.add_subcommand("train", "train on a dataset");
  train_cmd->add_option("--config", train_opt.config_path, "training config JSON");
  train_cmd->add_option("--dataset", train_opt.dataset_path, "dataset file")->required();
  train_cmd->add_option("--out-dir", train_opt.out_dir, "output directory")->required();
  train_cmd->add_option("--resume", train_opt.resume_path, "checkpoint to resume from");
  train_cmd->add_option("--total-iters", train_opt.total_iters, "override total iterations");
  train_cmd->add_option("--seed", train_opt.seed, "override seed");
  train_cmd->add_option("--p", train_opt.p, "override identities per batch");
  train_cmd->add_option("--k", train_opt.k, "override sequences per identity");
  train_cmd->add_option("--lr", train_opt.learning_rate, "override learning rate");
  train_cmd->add_flag("--use-reweighted-bh,!--no-reweighted-bh",
                      train_opt.use_reweighted_bh, "toggle the reweighted batch-hard term");
  train_cmd->add_flag("--use-memory,!--no-memory", train_opt.use_memory,
                      "toggle the memory supervision term");
  train_cmd->add_option("--log-every", train_opt.log_every, "override log thinning");
  train_cmd->add_option("--checkpoint-every", train_opt.checkpoint_every,
                        "override periodic checkpointing");

  // eval
  std::string eval_ckpt, eval_dataset, eval_out, eval_gallery = "Base";
  bool include_identical_view = false, self_retrieval = false;
  CLI::App* eval_cmd = app.add_subcommand("eval", "rank-1 gallery/probe evaluation");
  eval_cmd->add_option("--checkpoint", eval_ckpt, "trained checkpoint")->required();
  eval_cmd->add_option("--dataset", eval_dataset, "dataset file")->required();
  eval_cmd->add_option("--out", eval_out, "output CSV path")->required();
  eval_cmd->add_flag("--include-identical-view", include_identical_view,
                     "keep same-view gallery entries in each probe's candidates");
  eval_cmd->add_flag("--self-retrieval", self_retrieval,
                     "sanity mode: gallery = probe set, exclusion off");
  eval_cmd->add_option("--gallery-condition", eval_gallery,
                       "condition forming the gallery (default Base)");

  // ablate
  TrainCliOptions ablate_opt;
  CLI::App* ablate_cmd =
      app.add_subcommand("ablate", "train and evaluate the four loss-toggle cells");
  ablate_cmd->add_option("--config", ablate_opt.config_path, "training config JSON");
  ablate_cmd->add_option("--dataset", ablate_opt.dataset_path, "dataset file")->required();
  ablate_cmd->add_option("--out-dir", ablate_opt.out_dir, "output directory")->required();
  ablate_cmd->add_option("--total-iters", ablate_opt.total_iters, "override total iterations");
  ablate_cmd->add_option("--seed", ablate_opt.seed, "override seed");

  // report
  std::string report_runlog, report_out;
  CLI::App* report_cmd = app.add_subcommand("report", "plots and summary from a run log");
  report_cmd->add_option("--runlog", report_runlog, "runlog.csv from train")->required();
  report_cmd->add_option("--out-dir", report_out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) return run_gen_data(spec_path, gen_out);
    if (train_cmd->parsed()) return run_train(train_cmd, train_opt);
    if (eval_cmd->parsed())
      return run_eval(eval_ckpt, eval_dataset, eval_out, include_identical_view,
                      self_retrieval, eval_gallery);
    if (ablate_cmd->parsed()) return run_ablate(ablate_cmd, ablate_opt);
    if (report_cmd->parsed()) return run_report(report_runlog, report_out);
  } catch (const hm::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const hm::ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return 4;
  } catch (const hm::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 4;
  } catch (const hm::Error& e) {  // usage, config, data, protocol
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 4;
  }
  return 0;
}

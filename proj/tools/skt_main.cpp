// skt: knowledge-tracing pipeline driver.
// Subcommands: synth, prep, stats, train, eval, multistep, trace, ablate.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <map>
#include <string>

#include "skt/checkpoint.hpp"
#include "skt/data.hpp"
#include "skt/eval.hpp"
#include "skt/kernels.hpp"
#include "skt/model.hpp"
#include "skt/synth.hpp"
#include "skt/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct CommonOpts {
  std::string data;
  std::string out;
  std::string variant = "full";
  int d = 64;
  double lr = 1e-3;
  double dropout = 0.05;
  int blocks = 1;
  int heads = 4;
  std::uint64_t seed = 42;
  int folds = 5;
  int jobs = 1;
  int patience = 10;
  int max_epochs = 200;
  int batch_size = 64;
  double clip = 5.0;
  bool no_clip = false;
  int max_len = 200;
  int min_len = 3;
};

void add_model_flags(CLI::App* cmd, CommonOpts& o) {
  cmd->add_option("--variant", o.variant, "model variant: full|scalardiff|nodiff")
      ->check(CLI::IsMember({"full", "scalardiff", "nodiff"}));
  cmd->add_option("--d", o.d, "embedding dimension");
  cmd->add_option("--lr", o.lr, "learning rate");
  cmd->add_option("--dropout", o.dropout, "dropout rate");
  cmd->add_option("--blocks", o.blocks, "attention blocks");
  cmd->add_option("--heads", o.heads, "attention heads");
  cmd->add_option("--seed", o.seed, "random seed");
  cmd->add_option("--patience", o.patience, "early-stopping patience (epochs)");
  cmd->add_option("--max-epochs", o.max_epochs, "training epoch cap");
  cmd->add_option("--batch-size", o.batch_size, "chunks per batch");
  cmd->add_option("--clip", o.clip, "gradient clip norm (0 disables)");
  cmd->add_flag("--no-clip", o.no_clip, "disable gradient clipping");
  cmd->add_option("--folds", o.folds, "number of folds to train (1..5)")
      ->check(CLI::Range(1, 5));
  cmd->add_option("--jobs", o.jobs, "parallel fold workers");
  cmd->add_option("--max-len", o.max_len, "chunk length cap");
  cmd->add_option("--min-len", o.min_len, "minimum steps per chunk");
}

skt::model::ModelConfig model_config_of(const CommonOpts& o,
                                        const skt::data::Dataset& ds) {
  skt::model::ModelConfig mc;
  mc.d = o.d;
  mc.n_kcs = ds.n_kcs();
  mc.n_questions = ds.n_questions();
  mc.n_blocks = o.blocks;
  mc.n_heads = o.heads;
  mc.dropout = o.dropout;
  const auto v = skt::model::parse_variant(o.variant);
  if (!v) throw skt::ConfigError("unknown variant: " + o.variant);
  mc.variant = *v;
  mc.seed = o.seed;
  mc.validate();
  return mc;
}

skt::train::TrainConfig train_config_of(const CommonOpts& o) {
  skt::train::TrainConfig tc;
  tc.lr = o.lr;
  tc.batch_size = o.batch_size;
  tc.max_epochs = o.max_epochs;
  tc.patience = o.patience;
  tc.clip_norm = o.no_clip ? 0.0 : o.clip;
  tc.validate();
  return tc;
}

skt::data::Dataset load_dataset(const CommonOpts& o) {
  if (o.data.empty()) throw skt::ConfigError("--data is required");
  return skt::data::prepare(skt::data::ingest(o.data), o.max_len, o.min_len);
}

std::map<std::string, std::string> config_map(const CommonOpts& o) {
  std::map<std::string, std::string> kv;
  kv["data"] = fs::absolute(o.data).string();
  kv["variant"] = o.variant;
  kv["d"] = std::to_string(o.d);
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", o.lr);
  kv["lr"] = buf;
  std::snprintf(buf, sizeof(buf), "%g", o.dropout);
  kv["dropout"] = buf;
  kv["blocks"] = std::to_string(o.blocks);
  kv["heads"] = std::to_string(o.heads);
  kv["folds"] = std::to_string(o.folds);
  kv["patience"] = std::to_string(o.patience);
  kv["max_epochs"] = std::to_string(o.max_epochs);
  kv["batch_size"] = std::to_string(o.batch_size);
  std::snprintf(buf, sizeof(buf), "%g", o.no_clip ? 0.0 : o.clip);
  kv["clip"] = buf;
  kv["max_len"] = std::to_string(o.max_len);
  kv["min_len"] = std::to_string(o.min_len);
  return kv;
}

std::string config_hash(const std::map<std::string, std::string>& kv) {
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  auto mix = [&h](const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ULL;
    }
  };
  for (const auto& [k, v] : kv) {
    mix(k);
    mix("=");
    mix(v);
    mix("\n");
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%08x", static_cast<unsigned>(h ^ (h >> 32)));
  return buf;
}

fs::path run_dir_for(const CommonOpts& o) {
  if (o.out.empty()) throw skt::ConfigError("--out is required");
  const auto kv = config_map(o);
  return fs::path(o.out) /
         ("run_" + config_hash(kv) + "_s" + std::to_string(o.seed));
}

void write_config(const fs::path& dir, const CommonOpts& o) {
  std::ofstream out(dir / "config.txt");
  for (const auto& [k, v] : config_map(o)) out << k << "=" << v << "\n";
  out << "seed=" << o.seed << "\n";
}

std::string dataset_name(const std::string& path) {
  return fs::path(path).stem().string();
}

void append_metric(const fs::path& run_dir, const json& record) {
  std::ofstream out(run_dir / "metrics.jsonl", std::ios::app);
  out << record.dump() << "\n";
}

void print_stats(const skt::data::DataStats& st) {
  std::printf("%-14s %-10s %-10s %-6s %-8s\n", "interactions", "sequences",
              "questions", "KCs", "avg KCs");
  std::printf("%-14lld %-10lld %-10d %-6d ", st.interactions, st.sequences,
              st.questions, st.kcs);
  if (st.avg_kcs) {
    std::printf("%-8.4f\n", *st.avg_kcs);
  } else {
    std::printf("%-8s\n", "-");
  }
}

skt::data::DatasetSplit split_for_run(const fs::path& run_dir,
                                      const skt::data::Dataset& ds,
                                      std::uint64_t seed) {
  const auto path = run_dir / "split.tsv";
  if (fs::exists(path)) return skt::data::load_split(path.string());
  auto split = skt::data::split(static_cast<int>(ds.students.size()), seed);
  skt::data::save_split(path.string(), split);
  return split;
}

// Trains one fold inside the run directory layout, or loads it when a
// completed checkpoint is already there.
skt::model::ModelParams ensure_fold_model(const fs::path& run_dir, int fold,
                                          const skt::data::Dataset& ds,
                                          const skt::data::DatasetSplit& split,
                                          const skt::model::ModelConfig& mc,
                                          const skt::train::TrainConfig& tc,
                                          bool quiet = false) {
  const fs::path fold_dir = run_dir / ("fold" + std::to_string(fold));
  fs::create_directories(fold_dir);
  const fs::path ckpt = fold_dir / "checkpoint.bin";
  const fs::path done = fold_dir / "done";
  if (fs::exists(done) && fs::exists(ckpt)) {
    if (!quiet) std::printf("fold %d: resumed from %s\n", fold, ckpt.string().c_str());
    return skt::model::load_checkpoint(ckpt.string());
  }

  std::ofstream log(fold_dir / "epochs.tsv", std::ios::trunc);
  log << "epoch\ttrain_loss\tvalid_auc\tvalid_acc\telapsed_s\n";
  auto outcome = skt::train::train_fold(
      ds, split.train_students(fold), split.folds[static_cast<std::size_t>(fold)],
      mc, tc, [&log, quiet, fold](const skt::train::EpochLog& e) {
        char line[160];
        std::snprintf(line, sizeof(line), "%d\t%.6f\t%.6f\t%.6f\t%.3f", e.epoch,
                      e.train_loss, e.valid_auc, e.valid_acc, e.elapsed_s);
        log << line << "\n";
        log.flush();
        if (!quiet) std::printf("fold %d %s\n", fold, line);
      });
  skt::model::save_checkpoint(ckpt.string(), outcome.best_params);
  std::ofstream summary(fold_dir / "summary.txt");
  summary << "best_epoch=" << outcome.best_epoch << "\n"
          << "best_valid_auc=" << outcome.best_valid_auc << "\n";
  std::ofstream(done.string()) << "ok\n";
  return std::move(outcome.best_params);
}

struct TrainResult {
  double auc_mean = 0.0, auc_std = 0.0;
  double acc_mean = 0.0, acc_std = 0.0;
  std::size_t n_predictions = 0;
};

TrainResult train_run(const CommonOpts& o, bool quiet = false) {
  auto ds = load_dataset(o);
  const auto mc = model_config_of(o, ds);
  const auto tc = train_config_of(o);
  const auto run_dir = run_dir_for(o);
  fs::create_directories(run_dir);
  write_config(run_dir, o);
  const auto split = split_for_run(run_dir, ds, o.seed);
  skt::data::save_vocab((run_dir / "question.vocab").string(), ds.vocab.questions);
  skt::data::save_vocab((run_dir / "kc.vocab").string(), ds.vocab.kcs);

  std::vector<double> aucs, accs;
  TrainResult result;
  auto eval_fold = [&](int fold, skt::model::ModelParams& params) {
    const auto m = skt::eval::metrics_of(
        skt::eval::evaluate_one_step(ds, split.test, params, tc.batch_size));
    aucs.push_back(m.auc);
    accs.push_back(m.accuracy);
    result.n_predictions = m.n;
    append_metric(run_dir, json{{"dataset", dataset_name(o.data)},
                                {"variant", o.variant},
                                {"fold", fold},
                                {"protocol", "one_step"},
                                {"auc", m.auc},
                                {"accuracy", m.accuracy},
                                {"n_predictions", m.n}});
    if (!quiet) {
      std::printf("fold %d test: auc=%.4f acc=%.4f (n=%zu)\n", fold, m.auc,
                  m.accuracy, m.n);
    }
  };

  if (o.jobs > 1) {
    std::vector<skt::model::ModelParams> models(static_cast<std::size_t>(o.folds));
    for (int base = 0; base < o.folds; base += o.jobs) {
      std::vector<std::future<void>> wave;
      for (int f = base; f < std::min(base + o.jobs, o.folds); ++f) {
        wave.push_back(std::async(std::launch::async, [&, f]() {
          models[static_cast<std::size_t>(f)] =
              ensure_fold_model(run_dir, f, ds, split, mc, tc, true);
        }));
      }
      for (auto& w : wave) w.get();
    }
    for (int f = 0; f < o.folds; ++f) {
      eval_fold(f, models[static_cast<std::size_t>(f)]);
    }
  } else {
    for (int f = 0; f < o.folds; ++f) {
      auto params = ensure_fold_model(run_dir, f, ds, split, mc, tc, quiet);
      eval_fold(f, params);
    }
  }

  result.auc_mean = skt::train::mean_of(aucs);
  result.auc_std = skt::train::std_of(aucs);
  result.acc_mean = skt::train::mean_of(accs);
  result.acc_std = skt::train::std_of(accs);
  append_metric(run_dir, json{{"dataset", dataset_name(o.data)},
                              {"variant", o.variant},
                              {"protocol", "cv_summary"},
                              {"folds", o.folds},
                              {"auc_mean", result.auc_mean},
                              {"auc_std", result.auc_std},
                              {"accuracy_mean", result.acc_mean},
                              {"accuracy_std", result.acc_std}});
  if (!quiet) {
    std::printf("test over %d fold(s): auc=%.4f±%.4f acc=%.4f±%.4f\n", o.folds,
                result.auc_mean, result.auc_std, result.acc_mean, result.acc_std);
    std::printf("run directory: %s\n", run_dir.string().c_str());
  }
  return result;
}

skt::model::ModelParams load_run_model(const fs::path& run, int fold,
                                       const skt::data::Dataset& ds) {
  const auto ckpt = run / ("fold" + std::to_string(fold)) / "checkpoint.bin";
  if (!fs::exists(ckpt)) {
    throw skt::DataError("missing checkpoint " + ckpt.string() +
                         "; run `skt train` first");
  }
  auto params = skt::model::load_checkpoint(ckpt.string());
  if (params.config.n_kcs != ds.n_kcs() ||
      params.config.n_questions != ds.n_questions()) {
    throw skt::DataError(
        "checkpoint vocabulary does not match the dataset (checkpoint has " +
        std::to_string(params.config.n_kcs) + " KCs / " +
        std::to_string(params.config.n_questions) + " questions)");
  }
  return params;
}

int grid_train(const CommonOpts& o, const skt::train::GridConfig& grid) {
  auto ds = load_dataset(o);
  const auto base_mc = model_config_of(o, ds);
  const auto base_tc = train_config_of(o);
  const auto run_dir = run_dir_for(o);
  fs::create_directories(run_dir);
  write_config(run_dir, o);
  const auto split = split_for_run(run_dir, ds, o.seed);

  const auto configs = skt::train::expand_grid(base_mc, base_tc, grid);
  std::printf("grid search over %zu configs x %d folds\n", configs.size(), o.folds);
  auto report = skt::train::cross_validate(ds, split, configs, o.jobs, o.folds);

  for (std::size_t f = 0; f < report.checkpoints.size(); ++f) {
    const fs::path fold_dir = run_dir / ("fold" + std::to_string(f));
    fs::create_directories(fold_dir);
    skt::model::save_checkpoint((fold_dir / "checkpoint.bin").string(),
                                report.checkpoints[f]);
    std::ofstream(fold_dir / "done") << "ok\n";
  }
  for (const auto& fsc : report.folds) {
    append_metric(run_dir, json{{"dataset", dataset_name(o.data)},
                                {"variant", o.variant},
                                {"fold", fsc.fold},
                                {"protocol", "one_step"},
                                {"auc", fsc.test_auc},
                                {"accuracy", fsc.test_acc},
                                {"n_predictions", fsc.n_predictions}});
  }
  std::printf("chosen: d=%d lr=%g dropout=%g blocks=%d heads=%d\n",
              report.chosen_model.d, report.chosen_train.lr,
              report.chosen_model.dropout, report.chosen_model.n_blocks,
              report.chosen_model.n_heads);
  std::printf("test: auc=%.4f±%.4f acc=%.4f±%.4f\n", report.test_auc_mean,
              report.test_auc_std, report.test_acc_mean, report.test_acc_std);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"attention-based knowledge tracing with Rasch-style question "
               "difficulty: preprocessing, training, evaluation, synthetic "
               "benchmarks"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key=value config file; flags override it");

  int threads = 0;
  std::string backend = skt::kernels::openmp_compiled() ? "omp" : "serial";
  app.add_option("--threads", threads, "OpenMP thread count (0 = runtime default)");
  app.add_option("--backend", backend, "kernel backend")
      ->check(CLI::IsMember({"serial", "omp"}));

  CommonOpts o;

  auto* synth_cmd = app.add_subcommand("synth", "generate a 1PL synthetic dataset");
  skt::synth::SynthConfig sc;
  std::string synth_base = "synth";
  synth_cmd->add_option("--out", o.out, "output directory")->required();
  synth_cmd->add_option("--base", synth_base, "output file stem");
  synth_cmd->add_option("--students", sc.n_students);
  synth_cmd->add_option("--questions", sc.n_questions);
  synth_cmd->add_option("--kcs", sc.n_kcs);
  synth_cmd->add_option("--kcs-min", sc.kcs_min);
  synth_cmd->add_option("--kcs-max", sc.kcs_max);
  synth_cmd->add_option("--ability-std", sc.ability_std);
  synth_cmd->add_option("--difficulty-std", sc.difficulty_std);
  synth_cmd->add_option("--drift", sc.drift);
  synth_cmd->add_option("--len-min", sc.len_min);
  synth_cmd->add_option("--len-max", sc.len_max);
  synth_cmd->add_option("--seed", sc.seed);

  auto* prep_cmd =
      app.add_subcommand("prep", "normalize a raw log into the canonical format");
  std::string adapter = "canonical";
  prep_cmd->add_option("--data", o.data, "raw input file")->required();
  prep_cmd->add_option("--adapter", adapter, "input adapter name");
  prep_cmd->add_option("--out", o.out, "output directory")->required();
  prep_cmd->add_option("--max-len", o.max_len);
  prep_cmd->add_option("--min-len", o.min_len);

  auto* stats_cmd =
      app.add_subcommand("stats", "print preprocessed dataset statistics");
  stats_cmd->add_option("--data", o.data, "canonical interaction file")->required();
  stats_cmd->add_option("--max-len", o.max_len);
  stats_cmd->add_option("--min-len", o.min_len);

  auto* train_cmd = app.add_subcommand("train", "cross-validated training");
  train_cmd->add_option("--data", o.data)->required();
  train_cmd->add_option("--out", o.out)->required();
  add_model_flags(train_cmd, o);
  bool use_grid = false;
  std::vector<int> grid_d, grid_blocks, grid_heads;
  std::vector<double> grid_lr, grid_dropout;
  train_cmd->add_flag("--grid", use_grid, "tune over the hyperparameter grid");
  train_cmd->add_option("--grid-d", grid_d, "override grid: dimensions");
  train_cmd->add_option("--grid-lr", grid_lr, "override grid: learning rates");
  train_cmd->add_option("--grid-dropout", grid_dropout, "override grid: dropout rates");
  train_cmd->add_option("--grid-blocks", grid_blocks, "override grid: block counts");
  train_cmd->add_option("--grid-heads", grid_heads, "override grid: head counts");

  auto* eval_cmd = app.add_subcommand("eval", "one-step evaluation of a trained run");
  std::string run_path;
  int fold = 0;
  eval_cmd->add_option("--data", o.data)->required();
  eval_cmd->add_option("--run", run_path, "run directory from `skt train`")->required();
  eval_cmd->add_option("--fold", fold, "fold checkpoint to evaluate");
  eval_cmd->add_option("--max-len", o.max_len);
  eval_cmd->add_option("--min-len", o.min_len);

  auto* ms_cmd =
      app.add_subcommand("multistep", "non-accumulative multi-step evaluation");
  ms_cmd->add_option("--data", o.data)->required();
  ms_cmd->add_option("--run", run_path)->required();
  ms_cmd->add_option("--fold", fold);
  ms_cmd->add_option("--max-len", o.max_len);
  ms_cmd->add_option("--min-len", o.min_len);

  auto* trace_cmd =
      app.add_subcommand("trace", "per-step prediction trace for one student");
  std::string student_id;
  std::string trace_out;
  trace_cmd->add_option("--data", o.data)->required();
  trace_cmd->add_option("--run", run_path)->required();
  trace_cmd->add_option("--student", student_id, "student id")->required();
  trace_cmd->add_option("--fold", fold);
  trace_cmd->add_option("--out", trace_out, "trace output file");
  trace_cmd->add_option("--max-len", o.max_len);
  trace_cmd->add_option("--min-len", o.min_len);

  auto* ablate_cmd =
      app.add_subcommand("ablate", "compare full/scalardiff/nodiff variants");
  ablate_cmd->add_option("--data", o.data)->required();
  ablate_cmd->add_option("--out", o.out)->required();
  add_model_flags(ablate_cmd, o);

  for (auto* sub : app.get_subcommands(
           [](const CLI::App*) { return true; })) {
    sub->fallthrough();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    skt::kernels::set_backend(backend == "omp" ? skt::kernels::Backend::OpenMP
                                               : skt::kernels::Backend::Serial);
    if (threads > 0) skt::kernels::set_threads(threads);

    if (*synth_cmd) {
      fs::create_directories(o.out);
      auto g = skt::synth::generate(sc);
      const auto base = (fs::path(o.out) / synth_base).string();
      skt::synth::write_files(base, g);
      auto ds = skt::data::prepare(g.records);
      std::printf("wrote %s.csv (+ truth files)\n", base.c_str());
      print_stats(skt::data::stats(ds));
      return 0;
    }

    if (*prep_cmd) {
      const auto* ad = skt::data::find_adapter(adapter);
      if (!ad) {
        std::string names;
        for (const auto& n : skt::data::adapter_names()) names += " " + n;
        throw skt::ConfigError("unknown adapter '" + adapter +
                               "'; available:" + names);
      }
      fs::create_directories(o.out);
      auto students = ad->read(o.data);
      auto ds = skt::data::prepare(students, o.max_len, o.min_len);
      const auto dir = fs::path(o.out);
      skt::data::write_canonical((dir / "canonical.csv").string(), students);
      skt::data::save_vocab((dir / "question.vocab").string(), ds.vocab.questions);
      skt::data::save_vocab((dir / "kc.vocab").string(), ds.vocab.kcs);
      print_stats(skt::data::stats(ds));
      std::printf("wrote %s\n", (dir / "canonical.csv").string().c_str());
      return 0;
    }

    if (*stats_cmd) {
      print_stats(skt::data::stats(load_dataset(o)));
      return 0;
    }

    if (*train_cmd) {
      if (use_grid) {
        skt::train::GridConfig grid;
        if (!grid_d.empty()) grid.d = grid_d;
        if (!grid_lr.empty()) grid.lr = grid_lr;
        if (!grid_dropout.empty()) grid.dropout = grid_dropout;
        if (!grid_blocks.empty()) grid.blocks = grid_blocks;
        if (!grid_heads.empty()) grid.heads = grid_heads;
        return grid_train(o, grid);
      }
      train_run(o);
      return 0;
    }

    if (*eval_cmd) {
      auto ds = load_dataset(o);
      const fs::path run(run_path);
      auto params = load_run_model(run, fold, ds);
      const auto split = skt::data::load_split((run / "split.tsv").string());
      const auto m = skt::eval::metrics_of(
          skt::eval::evaluate_one_step(ds, split.test, params));
      append_metric(run,
                    json{{"dataset", dataset_name(o.data)},
                         {"variant", skt::model::variant_name(params.config.variant)},
                         {"fold", fold},
                         {"protocol", "one_step"},
                         {"auc", m.auc},
                         {"accuracy", m.accuracy},
                         {"n_predictions", m.n}});
      std::printf("one_step: auc=%.6f acc=%.6f n=%zu\n", m.auc, m.accuracy, m.n);
      return 0;
    }

    if (*ms_cmd) {
      auto ds = load_dataset(o);
      const fs::path run(run_path);
      auto params = load_run_model(run, fold, ds);
      const auto split = skt::data::load_split((run / "split.tsv").string());
      const auto points = skt::eval::evaluate_multistep(ds, split.test, params,
                                                        skt::eval::default_ratios());
      for (const auto& pt : points) {
        append_metric(
            run, json{{"dataset", dataset_name(o.data)},
                      {"variant", skt::model::variant_name(params.config.variant)},
                      {"fold", fold},
                      {"protocol", "multi_step"},
                      {"ratio", pt.ratio},
                      {"auc", pt.metrics.auc},
                      {"accuracy", pt.metrics.accuracy},
                      {"n_predictions", pt.metrics.n},
                      {"skipped_chunks", pt.skipped_chunks}});
        std::printf("multi_step ratio=%.1f: auc=%.6f acc=%.6f n=%zu skipped=%zu\n",
                    pt.ratio, pt.metrics.auc, pt.metrics.accuracy, pt.metrics.n,
                    pt.skipped_chunks);
      }
      return 0;
    }

    if (*trace_cmd) {
      auto ds = load_dataset(o);
      const fs::path run(run_path);
      auto params = load_run_model(run, fold, ds);
      const auto split = skt::data::load_split((run / "split.tsv").string());
      const int idx = ds.student_index(student_id);
      if (idx < 0) throw skt::DataError("student not found: " + student_id);
      std::vector<int> train_students;
      for (const auto& f : split.folds) {
        train_students.insert(train_students.end(), f.begin(), f.end());
      }
      const auto her = skt::data::her(ds, train_students);
      const auto rows = skt::eval::trace(ds, idx, params, her);
      const auto out_path = trace_out.empty()
                                ? (run / ("trace_" + student_id + ".tsv")).string()
                                : trace_out;
      skt::eval::write_trace(out_path, ds, rows);
      std::printf("wrote %zu trace records to %s\n", rows.size(), out_path.c_str());
      return 0;
    }

    if (*ablate_cmd) {
      {
        auto ds = load_dataset(o);
        if (!ds.has_native_questions_and_kcs()) {
          throw skt::DataError(
              "ablation needs data with both question and KC ids; with only "
              "one of the two the difficulty variants are unidentifiable");
        }
      }
      struct Row {
        std::string variant;
        TrainResult r;
      };
      std::vector<Row> rows;
      for (const std::string v : {"full", "scalardiff", "nodiff"}) {
        CommonOpts vo = o;
        vo.variant = v;
        std::printf("== training variant %s ==\n", v.c_str());
        rows.push_back({v, train_run(vo, true)});
      }
      std::printf("%-12s %-16s %-16s\n", "variant", "auc", "accuracy");
      for (const auto& row : rows) {
        std::printf("%-12s %.4f±%.4f    %.4f±%.4f\n", row.variant.c_str(),
                    row.r.auc_mean, row.r.auc_std, row.r.acc_mean, row.r.acc_std);
      }
      return 0;
    }
  } catch (const skt::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const skt::DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 3;
  } catch (const skt::NumericError& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}

#include "skt/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>

#include "skt/ops.hpp"

namespace skt::train {

void TrainConfig::validate() const {
  if (lr <= 0.0) throw ConfigError("train: lr must be positive");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (max_epochs < 1) throw ConfigError("train: max_epochs must be >= 1");
  if (patience < 1) throw ConfigError("train: patience must be >= 1");
}

std::vector<std::pair<model::ModelConfig, TrainConfig>> expand_grid(
    const model::ModelConfig& base_model, const TrainConfig& base_train,
    const GridConfig& grid) {
  if (grid.d.empty() || grid.lr.empty() || grid.dropout.empty() ||
      grid.blocks.empty() || grid.heads.empty()) {
    throw ConfigError("grid: every list must be non-empty");
  }
  std::vector<std::pair<model::ModelConfig, TrainConfig>> out;
  for (int d : grid.d) {
    for (double lr : grid.lr) {
      for (double p : grid.dropout) {
        for (int blocks : grid.blocks) {
          for (int heads : grid.heads) {
            model::ModelConfig mc = base_model;
            mc.d = d;
            mc.dropout = p;
            mc.n_blocks = blocks;
            mc.n_heads = heads;
            TrainConfig tc = base_train;
            tc.lr = lr;
            out.emplace_back(mc, tc);
          }
        }
      }
    }
  }
  return out;
}

AdamState AdamState::init_like(model::ModelParams& params) {
  AdamState st;
  for (auto& [name, t] : params.named()) {
    st.m.emplace_back(t->numel(), 0.0);
    st.v.emplace_back(t->numel(), 0.0);
  }
  return st;
}

void adam_step(model::ModelParams& params, AdamState& state,
               const TrainConfig& tc) {
  auto named = params.named();
  if (named.size() != state.m.size()) {
    throw DimensionError("adam_step: state does not match parameter list");
  }
  for (auto& [name, t] : named) {
    const double* g = t->gptr();
    if (!g) throw NumericError("adam_step: missing gradient for " + name);
    for (std::size_t i = 0; i < t->numel(); ++i) {
      if (!std::isfinite(g[i])) {
        throw NumericError("non-finite gradient in parameter group '" + name +
                           "'");
      }
    }
  }

  if (tc.clip_norm > 0.0) {
    double sq = 0.0;
    for (auto& [name, t] : named) {
      const double* g = t->gptr();
      for (std::size_t i = 0; i < t->numel(); ++i) sq += g[i] * g[i];
    }
    const double norm = std::sqrt(sq);
    if (norm > tc.clip_norm) {
      const double factor = tc.clip_norm / norm;
      for (auto& [name, t] : named) {
        double* g = t->gptr();
        for (std::size_t i = 0; i < t->numel(); ++i) g[i] *= factor;
      }
    }
  }

  ++state.step;
  const double bc1 = 1.0 - std::pow(tc.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(tc.beta2, static_cast<double>(state.step));
  for (std::size_t p = 0; p < named.size(); ++p) {
    Tensor* t = named[p].second;
    const double* g = t->gptr();
    double* m = state.m[p].data();
    double* v = state.v[p].data();
    double* w = t->ptr();
    for (std::size_t i = 0; i < t->numel(); ++i) {
      m[i] = tc.beta1 * m[i] + (1.0 - tc.beta1) * g[i];
      v[i] = tc.beta2 * v[i] + (1.0 - tc.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      w[i] -= tc.lr * mhat / (std::sqrt(vhat) + tc.epsilon);
    }
    check_finite(w, t->numel(), named[p].first.c_str());
  }
}

namespace {

eval::Metrics validation_metrics(const data::Dataset& ds,
                                 const std::vector<int>& valid_students,
                                 model::ModelParams& params, int batch_size) {
  try {
    return eval::metrics_of(
        eval::evaluate_one_step(ds, valid_students, params, batch_size));
  } catch (const NumericError&) {
    throw DataError(
        "validation AUC is undefined (single-class validation set); use a "
        "larger validation split");
  }
}

}  // namespace

FoldOutcome train_fold(const data::Dataset& ds,
                       const std::vector<int>& train_students,
                       const std::vector<int>& valid_students,
                       const model::ModelConfig& mc, const TrainConfig& tc,
                       const EpochCallback& on_epoch) {
  mc.validate();
  tc.validate();
  if (train_students.empty() || valid_students.empty()) {
    throw DataError("train_fold: empty train or validation student set");
  }

  model::ModelParams params = model::init_params(mc);
  AdamState adam = AdamState::init_like(params);
  Rng rng = Rng(mc.seed).split(1);

  auto refs = data::chunk_refs(ds, train_students);
  if (refs.empty()) throw DataError("train_fold: no training chunks");

  FoldOutcome out;
  EarlyStopper stopper(tc.patience);
  Tape tape;
  for (int epoch = 1; epoch <= tc.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    rng.shuffle(refs);
    double loss_sum = 0.0;
    std::size_t n_preds = 0;
    for (const auto& batch : data::make_batches(ds, refs, tc.batch_size)) {
      tape.clear();
      params.zero_grad();
      auto fw = model::forward_sequence(&tape, batch, params, true, &rng);
      const std::size_t total = static_cast<std::size_t>(batch.B) * batch.L;
      Tensor logits_flat = reshape(fw.logits, {static_cast<int>(total)});
      Tensor targets = Tensor::zeros({static_cast<int>(total)});
      Tensor mask = Tensor::zeros({static_cast<int>(total)});
      std::size_t count = 0;
      for (std::size_t i = 0; i < total; ++i) {
        (*targets.data)[i] = batch.response[i];
        if (fw.pred_mask[i]) {
          (*mask.data)[i] = 1.0;
          ++count;
        }
      }
      if (count == 0) continue;
      Tensor loss = ops::bce_with_logits(&tape, logits_flat, targets, mask);
      loss_sum += loss.value();
      n_preds += count;
      Tensor mean_loss =
          ops::scale(&tape, loss, 1.0 / static_cast<double>(count));
      tape.backward(mean_loss);
      adam_step(params, adam, tc);
    }
    if (n_preds == 0) throw DataError("train_fold: no valid predictions");

    const auto vm =
        validation_metrics(ds, valid_students, params, tc.batch_size);
    EpochLog log;
    log.epoch = epoch;
    log.train_loss = loss_sum / static_cast<double>(n_preds);
    log.valid_auc = vm.auc;
    log.valid_acc = vm.accuracy;
    log.elapsed_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    out.log.push_back(log);
    if (on_epoch) on_epoch(log);

    const bool stop = stopper.observe(epoch, vm.auc);
    if (stopper.improved(epoch)) {
      out.best_valid_auc = vm.auc;
      out.best_epoch = epoch;
      out.best_params = model::clone_params(params);
    }
    if (stop) break;
  }
  return out;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

CrossValReport cross_validate(
    const data::Dataset& ds, const data::DatasetSplit& split,
    const std::vector<std::pair<model::ModelConfig, TrainConfig>>& configs,
    int jobs, int folds_to_train) {
  if (configs.empty()) throw ConfigError("cross_validate: no configs");
  if (folds_to_train < 1 || folds_to_train > 5) {
    throw ConfigError("cross_validate: folds_to_train must be in 1..5");
  }

  auto run_config = [&](const model::ModelConfig& mc, const TrainConfig& tc) {
    std::vector<FoldOutcome> outcomes(static_cast<std::size_t>(folds_to_train));
    auto run_fold = [&](int f) {
      try {
        outcomes[static_cast<std::size_t>(f)] =
            train_fold(ds, split.train_students(f),
                       split.folds[static_cast<std::size_t>(f)], mc, tc);
      } catch (const std::exception& e) {
        throw DataError("fold " + std::to_string(f) + ": " + e.what());
      }
    };
    if (jobs <= 1) {
      for (int f = 0; f < folds_to_train; ++f) run_fold(f);
    } else {
      for (int base = 0; base < folds_to_train; base += jobs) {
        std::vector<std::future<void>> wave;
        for (int f = base; f < std::min(base + jobs, folds_to_train); ++f) {
          wave.push_back(std::async(std::launch::async, run_fold, f));
        }
        for (auto& fut : wave) fut.get();
      }
    }
    return outcomes;
  };

  std::vector<FoldOutcome> best_outcomes;
  double best_mean_valid = -1.0;
  std::size_t best_index = 0;
  for (std::size_t c = 0; c < configs.size(); ++c) {
    auto outcomes = run_config(configs[c].first, configs[c].second);
    std::vector<double> vaucs;
    for (const auto& o : outcomes) vaucs.push_back(o.best_valid_auc);
    const double mean_valid = mean_of(vaucs);
    if (mean_valid > best_mean_valid) {
      best_mean_valid = mean_valid;
      best_index = c;
      best_outcomes = std::move(outcomes);
    }
  }

  CrossValReport report;
  report.chosen_model = configs[best_index].first;
  report.chosen_train = configs[best_index].second;
  std::vector<double> aucs, accs;
  for (int f = 0; f < folds_to_train; ++f) {
    auto& outcome = best_outcomes[static_cast<std::size_t>(f)];
    const auto tm = eval::metrics_of(eval::evaluate_one_step(
        ds, split.test, outcome.best_params, configs[best_index].second.batch_size));
    FoldScore fs;
    fs.fold = f;
    fs.valid_auc = outcome.best_valid_auc;
    fs.test_auc = tm.auc;
    fs.test_acc = tm.accuracy;
    fs.n_predictions = tm.n;
    fs.best_epoch = outcome.best_epoch;
    report.folds.push_back(fs);
    report.checkpoints.push_back(std::move(outcome.best_params));
    aucs.push_back(tm.auc);
    accs.push_back(tm.accuracy);
  }
  report.test_auc_mean = mean_of(aucs);
  report.test_auc_std = std_of(aucs);
  report.test_acc_mean = mean_of(accs);
  report.test_acc_std = std_of(accs);
  return report;
}

}  // namespace skt::train

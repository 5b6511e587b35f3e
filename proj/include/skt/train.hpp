#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "skt/data.hpp"
#include "skt/eval.hpp"
#include "skt/model.hpp"

namespace skt::train {

struct TrainConfig {
  double lr = 1e-3;
  int batch_size = 64;
  int max_epochs = 200;
  int patience = 10;
  double clip_norm = 5.0;  // <= 0 disables gradient clipping
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const;
};

// Hyperparameter search space; defaults follow the tuning grid this model
// family is trained with.
struct GridConfig {
  std::vector<int> d{64, 128};
  std::vector<double> lr{1e-3, 1e-4, 1e-5};
  std::vector<double> dropout{0.05, 0.1, 0.3, 0.5};
  std::vector<int> blocks{1, 2, 4};
  std::vector<int> heads{4, 8};
};

std::vector<std::pair<model::ModelConfig, TrainConfig>> expand_grid(
    const model::ModelConfig& base_model, const TrainConfig& base_train,
    const GridConfig& grid);

struct AdamState {
  std::vector<std::vector<double>> m, v;
  long long step = 0;

  static AdamState init_like(model::ModelParams& params);
};

// Standard bias-corrected update; throws NumericError naming the parameter
// group when a gradient is non-finite. Applies the global-norm clip first.
void adam_step(model::ModelParams& params, AdamState& state,
               const TrainConfig& tc);

struct EpochLog {
  int epoch = 0;            // 1-based
  double train_loss = 0.0;  // mean BCE per prediction over the epoch
  double valid_auc = 0.0;
  double valid_acc = 0.0;
  double elapsed_s = 0.0;
};

// Keeps the best validation AUC seen so far; only a strict improvement
// resets the patience counter.
struct EarlyStopper {
  explicit EarlyStopper(int patience) : patience_(patience) {}

  // Returns true when training should stop after this epoch.
  bool observe(int epoch, double auc) {
    if (best_epoch_ == 0 || auc > best_auc_) {
      best_auc_ = auc;
      best_epoch_ = epoch;
      bad_epochs_ = 0;
      return false;
    }
    return ++bad_epochs_ >= patience_;
  }

  bool improved(int epoch) const { return best_epoch_ == epoch; }
  double best_auc() const { return best_auc_; }
  int best_epoch() const { return best_epoch_; }

 private:
  int patience_;
  double best_auc_ = 0.0;
  int best_epoch_ = 0;
  int bad_epochs_ = 0;
};

struct FoldOutcome {
  model::ModelParams best_params;
  std::vector<EpochLog> log;
  double best_valid_auc = 0.0;
  int best_epoch = 0;
};

using EpochCallback = std::function<void(const EpochLog&)>;

// Trains one fold with per-epoch shuffling, early stopping on validation AUC
// (strict improvement resets the patience counter) and returns the best
// checkpoint seen.
FoldOutcome train_fold(const data::Dataset& ds,
                       const std::vector<int>& train_students,
                       const std::vector<int>& valid_students,
                       const model::ModelConfig& mc, const TrainConfig& tc,
                       const EpochCallback& on_epoch = nullptr);

struct FoldScore {
  int fold = 0;
  double valid_auc = 0.0;
  double test_auc = 0.0;
  double test_acc = 0.0;
  std::size_t n_predictions = 0;
  int best_epoch = 0;
};

struct CrossValReport {
  model::ModelConfig chosen_model;
  TrainConfig chosen_train;
  std::vector<FoldScore> folds;
  std::vector<model::ModelParams> checkpoints;  // per fold, chosen config
  double test_auc_mean = 0.0, test_auc_std = 0.0;
  double test_acc_mean = 0.0, test_acc_std = 0.0;
};

// 5-fold cross validation: for each candidate config trains one model per
// fold (training on the other four), selects the config with the best mean
// validation AUC, then scores that config's per-fold checkpoints on the
// held-out test students. std is the population standard deviation.
CrossValReport cross_validate(
    const data::Dataset& ds, const data::DatasetSplit& split,
    const std::vector<std::pair<model::ModelConfig, TrainConfig>>& configs,
    int jobs = 1, int folds_to_train = 5);

double mean_of(const std::vector<double>& v);
double std_of(const std::vector<double>& v);

}  // namespace skt::train

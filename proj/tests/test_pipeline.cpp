// Slow integration checks that need trained models.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "skt/synth.hpp"
#include "skt/train.hpp"

namespace train = skt::train;
namespace model = skt::model;
namespace data = skt::data;
namespace eval = skt::eval;
namespace synth = skt::synth;

namespace {

model::ModelConfig desk_model(const data::Dataset& ds, int d = 16,
                              model::Variant v = model::Variant::Full) {
  model::ModelConfig mc;
  mc.d = d;
  mc.n_kcs = ds.n_kcs();
  mc.n_questions = ds.n_questions();
  mc.n_heads = 2;
  mc.n_blocks = 1;
  mc.dropout = 0.05;
  mc.variant = v;
  mc.seed = 42;
  return mc;
}

}  // namespace

TEST_CASE("cross-validation agrees with a directly trained single split") {
  synth::SynthConfig sc;
  sc.n_students = 200;
  sc.n_questions = 60;
  sc.n_kcs = 12;
  sc.difficulty_std = 1.5;
  sc.len_min = 10;
  sc.len_max = 25;
  sc.seed = 17;
  auto ds = data::prepare(synth::generate(sc).records);
  auto split = data::split(static_cast<int>(ds.students.size()), 42);

  auto mc = desk_model(ds);
  train::TrainConfig tc;
  tc.max_epochs = 8;
  tc.patience = 8;
  tc.batch_size = 32;

  auto report = train::cross_validate(ds, split, {{mc, tc}}, 1, 5);
  REQUIRE(report.folds.size() == 5);
  CHECK(report.test_auc_std >= 0.0);

  auto single = train::train_fold(ds, split.train_students(0), split.folds[0], mc, tc);
  const auto single_metrics = eval::metrics_of(
      eval::evaluate_one_step(ds, split.test, single.best_params, tc.batch_size));

  CHECK(std::abs(report.test_auc_mean - single_metrics.auc) <= 0.02);

  // identical fold scores would give zero std; here they differ but stay close
  for (const auto& fold : report.folds) {
    CHECK(std::abs(fold.test_auc - report.test_auc_mean) <= 0.05);
  }
}

TEST_CASE("trace: HER anti-correlates with predicted success at first encounters") {
  synth::SynthConfig sc;
  sc.n_students = 150;
  sc.n_questions = 50;
  sc.n_kcs = 10;
  sc.ability_std = 0.4;
  sc.difficulty_std = 2.0;
  sc.len_min = 12;
  sc.len_max = 28;
  sc.seed = 23;
  auto g = synth::generate(sc);
  auto ds = data::prepare(g.records);
  auto split = data::split(static_cast<int>(ds.students.size()), 42);

  auto mc = desk_model(ds);
  train::TrainConfig tc;
  tc.max_epochs = 12;
  tc.patience = 12;
  tc.batch_size = 32;
  auto outcome = train::train_fold(ds, split.train_students(0), split.folds[0], mc, tc);

  std::vector<int> train_students;
  for (const auto& f : split.folds) {
    train_students.insert(train_students.end(), f.begin(), f.end());
  }
  const auto her = data::her(ds, train_students);

  std::vector<double> her_values, miss_prob;
  for (int s : split.test) {
    const auto rows = eval::trace(ds, s, outcome.best_params, her);
    for (const auto& r : rows) {
      if (!r.first_encounter || !r.her) continue;
      her_values.push_back(*r.her);
      miss_prob.push_back(1.0 - r.prob);
    }
  }
  REQUIRE(her_values.size() >= 50);
  CHECK(testutil::pearson(her_values, miss_prob) > 0.5);

  // a step on an unseen question still yields a probability, just no HER
  const auto rows = eval::trace(ds, split.test[0], outcome.best_params, {});
  for (const auto& r : rows) {
    CHECK_FALSE(r.her.has_value());
    CHECK(r.prob > 0.0);
    CHECK(r.prob < 1.0);
  }
}

TEST_CASE("no difficulty signal: all variants score within 0.01 AUC") {
  synth::SynthConfig sc;
  sc.n_students = 150;
  sc.n_questions = 40;
  sc.n_kcs = 8;
  sc.difficulty_std = 0.0;  // every question equally hard
  sc.ability_std = 1.0;
  sc.len_min = 10;
  sc.len_max = 24;
  sc.seed = 29;
  auto ds = data::prepare(synth::generate(sc).records);
  auto split = data::split(static_cast<int>(ds.students.size()), 42);

  train::TrainConfig tc;
  tc.max_epochs = 8;
  tc.patience = 8;
  tc.batch_size = 32;

  std::vector<double> aucs;
  for (auto v : {model::Variant::Full, model::Variant::ScalarDiff,
                 model::Variant::NoDiff}) {
    auto mc = desk_model(ds, 16, v);
    auto outcome =
        train::train_fold(ds, split.train_students(0), split.folds[0], mc, tc);
    const auto m = eval::metrics_of(
        eval::evaluate_one_step(ds, split.test, outcome.best_params, tc.batch_size));
    aucs.push_back(m.auc);
  }
  CHECK(std::abs(aucs[0] - aucs[1]) <= 0.01);
  CHECK(std::abs(aucs[0] - aucs[2]) <= 0.01);
  CHECK(std::abs(aucs[1] - aucs[2]) <= 0.01);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "helpers.hpp"
#include "skt/synth.hpp"
#include "skt/train.hpp"

namespace train = skt::train;
namespace model = skt::model;
namespace data = skt::data;

namespace {

data::Dataset small_synth_dataset(int students = 30, std::uint64_t seed = 5) {
  skt::synth::SynthConfig sc;
  sc.n_students = students;
  sc.n_questions = 20;
  sc.n_kcs = 6;
  sc.len_min = 8;
  sc.len_max = 16;
  sc.seed = seed;
  return data::prepare(skt::synth::generate(sc).records);
}

model::ModelConfig tiny_model(const data::Dataset& ds) {
  model::ModelConfig mc;
  mc.d = 8;
  mc.n_kcs = ds.n_kcs();
  mc.n_questions = ds.n_questions();
  mc.n_heads = 2;
  mc.n_blocks = 1;
  mc.dropout = 0.05;
  mc.seed = 42;
  return mc;
}

}  // namespace

TEST_CASE("adam first step has the closed form") {
  model::ModelConfig mc;
  mc.d = 2;
  mc.n_kcs = 2;
  mc.n_questions = 2;
  mc.n_heads = 1;
  mc.dropout = 0.0;
  auto params = model::init_params(mc);
  auto state = train::AdamState::init_like(params);
  train::TrainConfig tc;
  tc.lr = 0.01;
  tc.clip_norm = 0.0;  // keep the closed form exact

  std::vector<double> before;
  for (auto& [name, t] : params.named()) {
    t->ensure_grad();
    for (std::size_t i = 0; i < t->numel(); ++i) {
      (*t->grad)[i] = 1.0;
      before.push_back((*t->data)[i]);
    }
  }
  train::adam_step(params, state, tc);
  std::size_t i = 0;
  const double expected = tc.lr / (1.0 + tc.epsilon);
  for (auto& [name, t] : params.named()) {
    for (std::size_t j = 0; j < t->numel(); ++j, ++i) {
      CHECK(before[i] - (*t->data)[j] == doctest::Approx(expected).epsilon(1e-12));
    }
  }
}

TEST_CASE("zero gradients leave parameters unchanged") {
  model::ModelConfig mc;
  mc.d = 2;
  mc.n_kcs = 2;
  mc.n_questions = 2;
  mc.n_heads = 1;
  auto params = model::init_params(mc);
  auto state = train::AdamState::init_like(params);
  train::TrainConfig tc;
  for (auto& [name, t] : params.named()) t->ensure_grad();

  std::vector<double> before;
  for (auto& [name, t] : params.named()) {
    for (std::size_t i = 0; i < t->numel(); ++i) before.push_back((*t->data)[i]);
  }
  for (int step = 0; step < 5; ++step) {
    for (auto& [name, t] : params.named()) t->zero_grad();
    train::adam_step(params, state, tc);
  }
  std::size_t i = 0;
  for (auto& [name, t] : params.named()) {
    for (std::size_t j = 0; j < t->numel(); ++j, ++i) {
      CHECK((*t->data)[j] == before[i]);
    }
  }
}

TEST_CASE("non-finite gradients abort naming the parameter group") {
  model::ModelConfig mc;
  mc.d = 2;
  mc.n_kcs = 2;
  mc.n_questions = 2;
  mc.n_heads = 1;
  auto params = model::init_params(mc);
  auto state = train::AdamState::init_like(params);
  train::TrainConfig tc;
  for (auto& [name, t] : params.named()) t->ensure_grad();
  (*params.resp_embed.grad)[0] = std::nan("");
  CHECK_THROWS_WITH_AS(train::adam_step(params, state, tc),
                       doctest::Contains("resp_embed"), skt::NumericError);
}

TEST_CASE("gradient clipping bounds the global norm") {
  model::ModelConfig mc;
  mc.d = 2;
  mc.n_kcs = 2;
  mc.n_questions = 2;
  mc.n_heads = 1;
  auto params = model::init_params(mc);
  auto state = train::AdamState::init_like(params);
  train::TrainConfig tc;
  tc.clip_norm = 1.0;
  tc.lr = 1.0;
  std::size_t count = 0;
  for (auto& [name, t] : params.named()) {
    t->ensure_grad();
    for (std::size_t i = 0; i < t->numel(); ++i) {
      (*t->grad)[i] = 100.0;
      ++count;
    }
  }
  // after clipping, each grad is 100 * (1 / (100*sqrt(count))) = 1/sqrt(count)
  std::vector<double> before;
  for (auto& [name, t] : params.named()) {
    for (std::size_t i = 0; i < t->numel(); ++i) before.push_back((*t->data)[i]);
  }
  train::adam_step(params, state, tc);
  // first adam step moves by lr/(1+eps) regardless of magnitude; verify the
  // clip happened by inspecting the stored first moment instead.
  const double clipped = 1.0 / std::sqrt(static_cast<double>(count));
  CHECK(state.m[0][0] == doctest::Approx(0.1 * clipped).epsilon(1e-9));
}

TEST_CASE("early stopper follows the patience rule") {
  // patience=1, AUC strictly decreasing: stop after epoch 2, keep epoch 1.
  train::EarlyStopper stop(1);
  CHECK_FALSE(stop.observe(1, 0.9));
  CHECK(stop.improved(1));
  CHECK(stop.observe(2, 0.8));
  CHECK(stop.best_epoch() == 1);
  CHECK(stop.best_auc() == 0.9);

  // plateaus do not count as improvement
  train::EarlyStopper s2(2);
  CHECK_FALSE(s2.observe(1, 0.7));
  CHECK_FALSE(s2.observe(2, 0.7));
  CHECK(s2.observe(3, 0.7));
  CHECK(s2.best_epoch() == 1);

  // recovery resets the counter and the kept checkpoint is never worse than
  // an earlier epoch's
  train::EarlyStopper s3(2);
  std::vector<double> sequence{0.6, 0.55, 0.7, 0.65, 0.72};
  double best_seen = 0.0;
  for (std::size_t i = 0; i < sequence.size(); ++i) {
    s3.observe(static_cast<int>(i + 1), sequence[i]);
    best_seen = std::max(best_seen, sequence[i]);
    CHECK(s3.best_auc() == best_seen);
  }
}

TEST_CASE("train_fold is reproducible bit-for-bit") {
  auto ds = small_synth_dataset();
  auto split = data::split(static_cast<int>(ds.students.size()), 42);
  auto mc = tiny_model(ds);
  train::TrainConfig tc;
  tc.max_epochs = 3;
  tc.batch_size = 16;

  auto a = train::train_fold(ds, split.train_students(0), split.folds[0], mc, tc);
  auto b = train::train_fold(ds, split.train_students(0), split.folds[0], mc, tc);
  REQUIRE(a.log.size() == b.log.size());
  for (std::size_t e = 0; e < a.log.size(); ++e) {
    CHECK(a.log[e].train_loss == b.log[e].train_loss);
    CHECK(a.log[e].valid_auc == b.log[e].valid_auc);
    CHECK(a.log[e].valid_acc == b.log[e].valid_acc);
  }
  auto pa = a.best_params.named();
  auto pb = b.best_params.named();
  for (std::size_t i = 0; i < pa.size(); ++i) {
    for (std::size_t j = 0; j < pa[i].second->numel(); ++j) {
      CHECK((*pa[i].second->data)[j] == (*pb[i].second->data)[j]);
    }
  }
}

TEST_CASE("training reduces the loss on a small dataset") {
  auto ds = small_synth_dataset(40, 9);
  auto split = data::split(static_cast<int>(ds.students.size()), 7);
  auto mc = tiny_model(ds);
  mc.dropout = 0.0;
  train::TrainConfig tc;
  tc.max_epochs = 15;
  tc.batch_size = 16;
  auto out = train::train_fold(ds, split.train_students(0), split.folds[0], mc, tc);
  REQUIRE(out.log.size() >= 2);
  CHECK(out.log.back().train_loss < out.log.front().train_loss);
  CHECK(out.best_valid_auc > 0.0);
  CHECK(out.best_epoch >= 1);
}

TEST_CASE("single-class validation raises an instructive error") {
  // one validation student whose every response is 1
  std::string csv = "student_id,question_id,kc_ids,response,order_key\n";
  for (int t = 0; t < 6; ++t) {
    csv += "train0,q" + std::to_string(t % 3) + ",c0," +
           (t % 2 == 0 ? "1" : "0") + "," + std::to_string(t) + "\n";
    csv += "valid0,q" + std::to_string(t % 3) + ",c0,1," + std::to_string(t) + "\n";
  }
  const auto path =
      (std::filesystem::temp_directory_path() / "skt_train_singleclass.csv").string();
  {
    std::ofstream out(path);
    out << csv;
  }
  auto ds = data::prepare(data::ingest(path));
  REQUIRE(ds.students.size() == 2);
  auto mc = tiny_model(ds);
  train::TrainConfig tc;
  tc.max_epochs = 1;
  const std::vector<int> train_students{0};
  const std::vector<int> valid_students{1};
  CHECK_THROWS_WITH_AS(
      train::train_fold(ds, train_students, valid_students, mc, tc),
      doctest::Contains("larger validation split"), skt::DataError);
}

TEST_CASE("expand_grid covers the full cartesian space") {
  model::ModelConfig mc;
  mc.n_kcs = 3;
  mc.n_questions = 3;
  train::TrainConfig tc;
  train::GridConfig grid;
  auto configs = train::expand_grid(mc, tc, grid);
  CHECK(configs.size() == 2 * 3 * 4 * 3 * 2);
  grid.d = {16};
  grid.lr = {1e-3};
  grid.dropout = {0.1};
  grid.blocks = {1};
  grid.heads = {2};
  configs = train::expand_grid(mc, tc, grid);
  REQUIRE(configs.size() == 1);
  CHECK(configs[0].first.d == 16);
  CHECK(configs[0].second.lr == 1e-3);
  grid.heads = {};
  CHECK_THROWS_AS(train::expand_grid(mc, tc, grid), skt::ConfigError);
}

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "skt/data.hpp"
#include "skt/eval.hpp"

namespace skt::synth {

// 1PL generator: P(correct) = sigmoid(theta_student_step - b_question), with
// ability drifting upward per step to model learning.
struct SynthConfig {
  int n_students = 500;
  int n_questions = 300;
  int n_kcs = 40;
  int kcs_min = 1;
  int kcs_max = 2;
  double ability_std = 0.75;
  double difficulty_std = 1.0;
  double drift = 0.01;
  int len_min = 20;
  int len_max = 60;
  std::uint64_t seed = 42;

  void validate() const;
};

struct Truth {
  std::vector<std::string> students;
  std::vector<std::vector<double>> theta;  // per student, per step
  std::vector<std::string> questions;
  std::vector<double> difficulty;
};

struct Generated {
  std::vector<data::StudentRaw> records;
  Truth truth;
};

Generated generate(const SynthConfig& config);

// Writes <base>.csv (canonical interactions), <base>.theta.tsv
// (student_id, step, theta) and <base>.difficulty.tsv (question_id, b).
// Deterministic bytes for a given config.
void write_files(const std::string& base, const Generated& g);
Truth load_truth(const std::string& theta_path, const std::string& diff_path);

// Metrics of the generative predictor sigmoid(theta - b), scored on exactly
// the prediction positions the model is scored on.
eval::Metrics oracle_metrics(const data::Dataset& ds,
                             const std::vector<int>& students,
                             const Truth& truth);

}  // namespace skt::synth

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "skt/data.hpp"
#include "skt/model.hpp"

namespace skt::eval {

// Rank-sum AUC with average ranks for ties (ties count one half). Throws
// NumericError when only one class is present.
double auc(const std::vector<double>& probs, const std::vector<int>& labels);

// Fraction of (prob >= threshold) == label; a prediction exactly at the
// threshold counts as positive. Throws on empty input.
double accuracy(const std::vector<double>& probs, const std::vector<int>& labels,
                double threshold = 0.5);

struct Metrics {
  double auc = 0.0;
  double accuracy = 0.0;
  std::size_t n = 0;
};

// Question-level predictions: KC-expanded steps of one interaction are
// aggregated to a single probability by arithmetic mean.
struct PredictionSet {
  std::vector<double> prob;
  std::vector<int> label;
  std::vector<int> question;  // dense question index
  std::vector<int> student;   // dataset student index
  std::vector<int> position;  // first predicted step position in the chunk
  std::vector<std::uint8_t> first_encounter;  // any KC first met here

  std::size_t size() const { return prob.size(); }
};

Metrics metrics_of(const PredictionSet& ps);

// One prediction target: the valid (position > 0) steps of one interaction
// within one chunk. Shared between model evaluation and generative oracles
// so both score the exact same positions.
struct PredGroup {
  int student = 0;
  int chunk = 0;
  int interaction = 0;
  int question = 0;
  int response = 0;
  std::vector<int> positions;
  bool first_encounter = false;
};

std::vector<PredGroup> prediction_groups(const data::Dataset& ds,
                                         const std::vector<int>& students);

// Full-history one-step protocol over every valid position.
PredictionSet evaluate_one_step(const data::Dataset& ds,
                                const std::vector<int>& students,
                                model::ModelParams& params, int batch_size = 64);

// Non-accumulative multi-step protocol: per ratio, the observed prefix has
// length max(1, floor(ratio*T)) and every later position is predicted at
// once, attending only to the prefix.
struct MultiStepPoint {
  double ratio = 0.0;
  Metrics metrics;
  std::size_t skipped_chunks = 0;
};

std::vector<double> default_ratios();  // 0.2 .. 0.9 step 0.1

std::vector<MultiStepPoint> evaluate_multistep(
    const data::Dataset& ds, const std::vector<int>& students,
    model::ModelParams& params, const std::vector<double>& ratios,
    int batch_size = 64);

struct TraceRow {
  int position = 0;
  int question = 0;
  std::vector<int> kcs;
  int response = 0;
  double prob = 0.0;
  std::optional<double> her;
  bool first_encounter = false;
};

std::vector<TraceRow> trace(const data::Dataset& ds, int student_index,
                            model::ModelParams& params,
                            const std::unordered_map<int, double>& her_map);

void write_trace(const std::string& path, const data::Dataset& ds,
                 const std::vector<TraceRow>& rows);

}  // namespace skt::eval

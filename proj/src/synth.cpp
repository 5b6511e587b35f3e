#include "skt/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <unordered_map>

#include "skt/rng.hpp"

namespace skt::synth {

namespace {

double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                  : std::exp(x) / (1.0 + std::exp(x));
}

std::string padded_id(char prefix, int i) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%c%05d", prefix, i);
  return buf;
}

}  // namespace

void SynthConfig::validate() const {
  if (n_students < 1 || n_questions < 1 || n_kcs < 1) {
    throw ConfigError("synth: counts must be positive");
  }
  if (kcs_min < 1 || kcs_max < kcs_min || kcs_max > n_kcs) {
    throw ConfigError("synth: need 1 <= kcs_min <= kcs_max <= n_kcs");
  }
  if (ability_std < 0.0 || difficulty_std < 0.0 || drift < 0.0) {
    throw ConfigError("synth: std-devs and drift must be non-negative");
  }
  if (len_min < 1 || len_max < len_min) {
    throw ConfigError("synth: need 1 <= len_min <= len_max");
  }
}

Generated generate(const SynthConfig& config) {
  config.validate();
  Rng rng(config.seed);

  Generated g;
  g.truth.questions.reserve(static_cast<std::size_t>(config.n_questions));
  g.truth.difficulty.reserve(static_cast<std::size_t>(config.n_questions));
  std::vector<std::vector<int>> question_kcs(
      static_cast<std::size_t>(config.n_questions));
  std::vector<int> kc_pool(static_cast<std::size_t>(config.n_kcs));
  for (int i = 0; i < config.n_kcs; ++i) kc_pool[static_cast<std::size_t>(i)] = i;
  for (int q = 0; q < config.n_questions; ++q) {
    g.truth.questions.push_back(padded_id('q', q));
    g.truth.difficulty.push_back(rng.normal(0.0, config.difficulty_std));
    const int k = rng.uniform_int(config.kcs_min, config.kcs_max);
    for (int i = 0; i < k; ++i) {
      const int j = i + static_cast<int>(rng.bounded(
                            static_cast<std::uint64_t>(config.n_kcs - i)));
      std::swap(kc_pool[static_cast<std::size_t>(i)],
                kc_pool[static_cast<std::size_t>(j)]);
    }
    auto& kcs = question_kcs[static_cast<std::size_t>(q)];
    kcs.assign(kc_pool.begin(), kc_pool.begin() + k);
    std::sort(kcs.begin(), kcs.end());
  }

  for (int s = 0; s < config.n_students; ++s) {
    data::StudentRaw stu;
    stu.student_id = padded_id('s', s);
    const double theta0 = rng.normal(0.0, config.ability_std);
    const int length = rng.uniform_int(config.len_min, config.len_max);
    std::vector<double> thetas;
    thetas.reserve(static_cast<std::size_t>(length));
    for (int t = 0; t < length; ++t) {
      const double theta = theta0 + config.drift * t;
      thetas.push_back(theta);
      const int q = rng.uniform_int(0, config.n_questions - 1);
      data::RawRecord rec;
      rec.student_id = stu.student_id;
      rec.question_id = g.truth.questions[static_cast<std::size_t>(q)];
      for (int kc : question_kcs[static_cast<std::size_t>(q)]) {
        rec.kc_ids.push_back(padded_id('c', kc));
      }
      rec.response = rng.bernoulli(sigmoid(
                         theta - g.truth.difficulty[static_cast<std::size_t>(q)]))
                         ? 1
                         : 0;
      rec.order_key = t;
      stu.records.push_back(std::move(rec));
    }
    g.truth.students.push_back(stu.student_id);
    g.truth.theta.push_back(std::move(thetas));
    g.records.push_back(std::move(stu));
  }
  return g;
}

void write_files(const std::string& base, const Generated& g) {
  data::write_canonical(base + ".csv", g.records);

  std::ofstream theta(base + ".theta.tsv");
  if (!theta) throw DataError("cannot write: " + base + ".theta.tsv");
  theta << "student_id\tstep\ttheta\n";
  char buf[64];
  for (std::size_t s = 0; s < g.truth.students.size(); ++s) {
    for (std::size_t t = 0; t < g.truth.theta[s].size(); ++t) {
      std::snprintf(buf, sizeof(buf), "%.17g", g.truth.theta[s][t]);
      theta << g.truth.students[s] << '\t' << t << '\t' << buf << "\n";
    }
  }

  std::ofstream diff(base + ".difficulty.tsv");
  if (!diff) throw DataError("cannot write: " + base + ".difficulty.tsv");
  diff << "question_id\tb\n";
  for (std::size_t q = 0; q < g.truth.questions.size(); ++q) {
    std::snprintf(buf, sizeof(buf), "%.17g", g.truth.difficulty[q]);
    diff << g.truth.questions[q] << '\t' << buf << "\n";
  }
}

Truth load_truth(const std::string& theta_path, const std::string& diff_path) {
  Truth truth;
  std::ifstream theta(theta_path);
  if (!theta) throw DataError("cannot open: " + theta_path);
  std::string line;
  std::getline(theta, line);  // header
  std::unordered_map<std::string, std::size_t> index;
  while (std::getline(theta, line)) {
    if (line.empty()) continue;
    const auto t1 = line.find('\t');
    const auto t2 = line.find('\t', t1 + 1);
    if (t1 == std::string::npos || t2 == std::string::npos) {
      throw DataError("theta file: malformed line");
    }
    const std::string sid = line.substr(0, t1);
    const std::size_t step = std::stoull(line.substr(t1 + 1, t2 - t1 - 1));
    const double value = std::stod(line.substr(t2 + 1));
    auto it = index.find(sid);
    if (it == index.end()) {
      index.emplace(sid, truth.students.size());
      truth.students.push_back(sid);
      truth.theta.emplace_back();
      it = index.find(sid);
    }
    auto& vec = truth.theta[it->second];
    if (vec.size() != step) throw DataError("theta file: steps out of order");
    vec.push_back(value);
  }

  std::ifstream diff(diff_path);
  if (!diff) throw DataError("cannot open: " + diff_path);
  std::getline(diff, line);  // header
  while (std::getline(diff, line)) {
    if (line.empty()) continue;
    const auto t1 = line.find('\t');
    if (t1 == std::string::npos) throw DataError("difficulty file: malformed line");
    truth.questions.push_back(line.substr(0, t1));
    truth.difficulty.push_back(std::stod(line.substr(t1 + 1)));
  }
  return truth;
}

eval::Metrics oracle_metrics(const data::Dataset& ds,
                             const std::vector<int>& students,
                             const Truth& truth) {
  std::unordered_map<std::string, std::size_t> student_index;
  for (std::size_t i = 0; i < truth.students.size(); ++i) {
    student_index.emplace(truth.students[i], i);
  }
  std::unordered_map<std::string, double> difficulty;
  for (std::size_t i = 0; i < truth.questions.size(); ++i) {
    difficulty.emplace(truth.questions[i], truth.difficulty[i]);
  }

  std::vector<double> probs;
  std::vector<int> labels;
  for (const auto& g : eval::prediction_groups(ds, students)) {
    const auto& stu = ds.students[static_cast<std::size_t>(g.student)];
    const auto si = student_index.find(stu.student_id);
    if (si == student_index.end()) {
      throw DataError("oracle: student " + stu.student_id + " missing from truth");
    }
    const auto& thetas = truth.theta[si->second];
    if (static_cast<std::size_t>(g.interaction) >= thetas.size()) {
      throw DataError("oracle: truth has too few steps for " + stu.student_id);
    }
    const std::string& qid =
        ds.vocab.questions.to_id[static_cast<std::size_t>(g.question)];
    const auto bi = difficulty.find(qid);
    if (bi == difficulty.end()) {
      throw DataError("oracle: question " + qid + " missing from truth");
    }
    probs.push_back(
        sigmoid(thetas[static_cast<std::size_t>(g.interaction)] - bi->second));
    labels.push_back(g.response);
  }
  eval::Metrics m;
  m.n = probs.size();
  m.auc = eval::auc(probs, labels);
  m.accuracy = eval::accuracy(probs, labels);
  return m;
}

}  // namespace skt::synth

#include "skt/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <set>

#include "skt/kernels.hpp"

namespace skt::eval {

double auc(const std::vector<double>& probs, const std::vector<int>& labels) {
  if (probs.size() != labels.size()) {
    throw DimensionError("auc: probs and labels differ in length");
  }
  const std::size_t n = probs.size();
  std::size_t n_pos = 0;
  for (int l : labels) {
    if (l != 0 && l != 1) throw NumericError("auc: labels must be 0 or 1");
    n_pos += static_cast<std::size_t>(l);
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) {
    throw NumericError("auc undefined: input contains a single class");
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&probs](std::size_t a, std::size_t b) {
    return probs[a] < probs[b];
  });

  // Average rank over each tie bucket, summed over positives.
  double pos_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && probs[order[j + 1]] == probs[order[i]]) ++j;
    const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
    for (std::size_t k = i; k <= j; ++k) {
      if (labels[order[k]] == 1) pos_rank_sum += avg_rank;
    }
    i = j + 1;
  }
  const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
  return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

double accuracy(const std::vector<double>& probs, const std::vector<int>& labels,
                double threshold) {
  if (probs.size() != labels.size()) {
    throw DimensionError("accuracy: probs and labels differ in length");
  }
  if (probs.empty()) throw NumericError("accuracy undefined on empty input");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    const int pred = probs[i] >= threshold ? 1 : 0;
    if (pred == labels[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(probs.size());
}

Metrics metrics_of(const PredictionSet& ps) {
  Metrics m;
  m.n = ps.size();
  m.auc = auc(ps.prob, ps.label);
  m.accuracy = accuracy(ps.prob, ps.label);
  return m;
}

namespace {

// first-encounter flags per interaction of one student, over the student's
// whole chronological history.
std::vector<std::uint8_t> first_encounter_flags(const data::StudentSequence& stu) {
  std::vector<std::uint8_t> flags(stu.interactions.size(), 0);
  std::set<int> seen;
  for (std::size_t i = 0; i < stu.interactions.size(); ++i) {
    bool fresh = false;
    for (int kc : stu.interactions[i].kcs) {
      if (seen.insert(kc).second) fresh = true;
    }
    flags[i] = fresh;
  }
  return flags;
}

// prob[position] per chunk from batched forward passes.
std::map<std::pair<int, int>, std::vector<double>> chunk_probabilities(
    const data::Dataset& ds, const std::vector<int>& students,
    model::ModelParams& params, int batch_size,
    const std::function<int(int chunk_len)>& prefix_of) {
  std::map<std::pair<int, int>, std::vector<double>> out;
  auto refs = data::chunk_refs(ds, students);
  if (prefix_of) {
    std::erase_if(refs, [&](const std::pair<int, int>& rc) {
      const int len = static_cast<int>(
          ds.students[static_cast<std::size_t>(rc.first)]
              .chunks[static_cast<std::size_t>(rc.second)]
              .size());
      return prefix_of(len) >= len;
    });
  }
  for (const auto& batch : data::make_batches(ds, refs, batch_size)) {
    std::vector<int> limits;
    std::vector<int>* limits_ptr = nullptr;
    if (prefix_of) {
      limits.assign(static_cast<std::size_t>(batch.B) * batch.L, 0);
      for (int b = 0; b < batch.B; ++b) {
        const int len = static_cast<int>(
            ds.students[static_cast<std::size_t>(batch.refs[static_cast<std::size_t>(b)].first)]
                .chunks[static_cast<std::size_t>(batch.refs[static_cast<std::size_t>(b)].second)]
                .size());
        const int prefix = prefix_of(len);
        for (int t = 0; t < batch.L; ++t) {
          limits[static_cast<std::size_t>(b) * batch.L + t] = prefix;
        }
      }
      limits_ptr = &limits;
    }
    auto fw = model::forward_sequence(nullptr, batch, params, false, nullptr,
                                      limits_ptr);
    std::vector<double> probs(fw.logits.numel());
    kernels::sigmoid(probs.data(), fw.logits.ptr(), probs.size());
    for (int b = 0; b < batch.B; ++b) {
      const auto& chunk =
          ds.students[static_cast<std::size_t>(batch.refs[static_cast<std::size_t>(b)].first)]
              .chunks[static_cast<std::size_t>(batch.refs[static_cast<std::size_t>(b)].second)];
      std::vector<double> row(chunk.size());
      for (std::size_t t = 0; t < chunk.size(); ++t) {
        row[t] = probs[static_cast<std::size_t>(b) * batch.L + t];
      }
      out.emplace(batch.refs[static_cast<std::size_t>(b)], std::move(row));
    }
  }
  return out;
}

}  // namespace

std::vector<PredGroup> prediction_groups(const data::Dataset& ds,
                                         const std::vector<int>& students) {
  std::vector<PredGroup> groups;
  for (int s : students) {
    const auto& stu = ds.students[static_cast<std::size_t>(s)];
    const auto fresh = first_encounter_flags(stu);
    for (std::size_t c = 0; c < stu.chunks.size(); ++c) {
      const auto& chunk = stu.chunks[c];
      for (std::size_t t = 1; t < chunk.size(); ++t) {
        const auto& step = chunk[t];
        if (!groups.empty() && groups.back().student == s &&
            groups.back().chunk == static_cast<int>(c) &&
            groups.back().interaction == step.interaction) {
          groups.back().positions.push_back(step.position);
          continue;
        }
        PredGroup g;
        g.student = s;
        g.chunk = static_cast<int>(c);
        g.interaction = step.interaction;
        g.question = step.question;
        g.response = step.response;
        g.positions.push_back(step.position);
        g.first_encounter = fresh[static_cast<std::size_t>(step.interaction)];
        groups.push_back(std::move(g));
      }
    }
  }
  return groups;
}

PredictionSet evaluate_one_step(const data::Dataset& ds,
                                const std::vector<int>& students,
                                model::ModelParams& params, int batch_size) {
  const auto probs =
      chunk_probabilities(ds, students, params, batch_size, nullptr);
  PredictionSet ps;
  for (const auto& g : prediction_groups(ds, students)) {
    const auto& row = probs.at({g.student, g.chunk});
    double sum = 0.0;
    for (int pos : g.positions) sum += row[static_cast<std::size_t>(pos)];
    ps.prob.push_back(sum / static_cast<double>(g.positions.size()));
    ps.label.push_back(g.response);
    ps.question.push_back(g.question);
    ps.student.push_back(g.student);
    ps.position.push_back(g.positions.front());
    ps.first_encounter.push_back(g.first_encounter);
  }
  return ps;
}

std::vector<double> default_ratios() {
  return {0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
}

std::vector<MultiStepPoint> evaluate_multistep(
    const data::Dataset& ds, const std::vector<int>& students,
    model::ModelParams& params, const std::vector<double>& ratios,
    int batch_size) {
  std::vector<MultiStepPoint> points;
  for (double ratio : ratios) {
    if (ratio <= 0.0 || ratio >= 1.0) {
      throw ConfigError("multistep: ratios must lie in (0,1)");
    }
    auto prefix_of = [ratio](int len) {
      return std::max(1, static_cast<int>(std::floor(ratio * len + 1e-9)));
    };

    MultiStepPoint pt;
    pt.ratio = ratio;
    for (const auto& [s, c] : data::chunk_refs(ds, students)) {
      const int len = static_cast<int>(ds.students[static_cast<std::size_t>(s)]
                                           .chunks[static_cast<std::size_t>(c)]
                                           .size());
      if (prefix_of(len) >= len) ++pt.skipped_chunks;
    }

    const auto probs =
        chunk_probabilities(ds, students, params, batch_size, prefix_of);
    PredictionSet ps;
    for (const auto& g : prediction_groups(ds, students)) {
      const auto it = probs.find({g.student, g.chunk});
      if (it == probs.end()) continue;  // chunk skipped for this ratio
      const int prefix = prefix_of(static_cast<int>(it->second.size()));
      double sum = 0.0;
      int count = 0;
      for (int pos : g.positions) {
        if (pos < prefix) continue;  // observed part of the chunk
        sum += it->second[static_cast<std::size_t>(pos)];
        ++count;
      }
      if (count == 0) continue;
      ps.prob.push_back(sum / count);
      ps.label.push_back(g.response);
      ps.question.push_back(g.question);
      ps.student.push_back(g.student);
      ps.position.push_back(g.positions.front());
      ps.first_encounter.push_back(g.first_encounter);
    }
    pt.metrics = metrics_of(ps);
    points.push_back(std::move(pt));
  }
  return points;
}

std::vector<TraceRow> trace(const data::Dataset& ds, int student_index,
                            model::ModelParams& params,
                            const std::unordered_map<int, double>& her_map) {
  const std::vector<int> students{student_index};
  const auto ps = evaluate_one_step(ds, students, params);
  const auto groups = prediction_groups(ds, students);
  const auto& stu = ds.students[static_cast<std::size_t>(student_index)];

  std::vector<TraceRow> rows;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    TraceRow r;
    r.position = ps.position[i];
    r.question = ps.question[i];
    r.kcs = stu.interactions[static_cast<std::size_t>(groups[i].interaction)].kcs;
    r.response = ps.label[i];
    r.prob = ps.prob[i];
    const auto it = her_map.find(r.question);
    if (it != her_map.end()) r.her = it->second;
    r.first_encounter = ps.first_encounter[i] != 0;
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_trace(const std::string& path, const data::Dataset& ds,
                 const std::vector<TraceRow>& rows) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write trace file: " + path);
  out << "position\tquestion\tkcs\tresponse\tprob\ther\tfirst_encounter\n";
  for (const auto& r : rows) {
    out << r.position << '\t'
        << ds.vocab.questions.to_id[static_cast<std::size_t>(r.question)] << '\t';
    for (std::size_t i = 0; i < r.kcs.size(); ++i) {
      if (i) out << ';';
      out << ds.vocab.kcs.to_id[static_cast<std::size_t>(r.kcs[i])];
    }
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", r.prob);
    out << '\t' << r.response << '\t' << buf << '\t';
    if (r.her) {
      std::snprintf(buf, sizeof(buf), "%.6f", *r.her);
      out << buf;
    }
    out << '\t' << (r.first_encounter ? 1 : 0) << "\n";
  }
}

}  // namespace skt::eval

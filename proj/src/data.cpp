#include "skt/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "skt/rng.hpp"

namespace skt::data {

namespace {

std::vector<std::string> split_field(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

[[noreturn]] void row_error(int line_no, const std::string& what) {
  throw DataError("line " + std::to_string(line_no) + ": " + what);
}

constexpr const char* kHeader = "student_id,question_id,kc_ids,response,order_key";

}  // namespace

int VocabMap::add_or_get(const std::string& id) {
  auto it = to_index.find(id);
  if (it != to_index.end()) return it->second;
  const int idx = size();
  to_index.emplace(id, idx);
  to_id.push_back(id);
  return idx;
}

int VocabMap::lookup(const std::string& id) const {
  auto it = to_index.find(id);
  return it == to_index.end() ? unk() : it->second;
}

std::vector<StudentRaw> ingest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open interaction file: " + path);

  std::vector<RawRecord> records;
  std::string line;
  int line_no = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!saw_header) {
      if (line != kHeader) {
        row_error(line_no, "expected header '" + std::string(kHeader) + "'");
      }
      saw_header = true;
      continue;
    }
    auto fields = split_field(line, ',');
    if (fields.size() != 5) {
      row_error(line_no, "expected 5 comma-separated fields, got " +
                             std::to_string(fields.size()));
    }
    RawRecord rec;
    rec.line_no = line_no;
    rec.student_id = fields[0];
    if (rec.student_id.empty()) row_error(line_no, "empty student_id");
    rec.question_id = fields[1];
    if (!fields[2].empty()) {
      for (auto& kc : split_field(fields[2], ';')) {
        if (kc.empty()) row_error(line_no, "empty kc id in kc_ids");
        rec.kc_ids.push_back(kc);
      }
    }
    if (rec.question_id.empty() && rec.kc_ids.empty()) {
      row_error(line_no, "row carries neither question_id nor kc_ids");
    }
    if (fields[3] == "0") {
      rec.response = 0;
    } else if (fields[3] == "1") {
      rec.response = 1;
    } else {
      row_error(line_no, "response must be 0 or 1, got '" + fields[3] + "'");
    }
    try {
      std::size_t used = 0;
      rec.order_key = std::stoll(fields[4], &used);
      if (used != fields[4].size()) throw std::invalid_argument("");
    } catch (const std::exception&) {
      row_error(line_no, "order_key must be an integer, got '" + fields[4] + "'");
    }
    records.push_back(std::move(rec));
  }
  return group_records(std::move(records));
}

std::vector<StudentRaw> group_records(std::vector<RawRecord> records) {
  std::map<std::string, std::vector<RawRecord>> by_student;
  for (auto& r : records) by_student[r.student_id].push_back(std::move(r));
  std::vector<StudentRaw> out;
  out.reserve(by_student.size());
  for (auto& [sid, recs] : by_student) {
    std::stable_sort(recs.begin(), recs.end(),
                     [](const RawRecord& a, const RawRecord& b) {
                       return a.order_key < b.order_key;
                     });
    out.push_back(StudentRaw{sid, std::move(recs)});
  }
  return out;
}

namespace {

// Fallback ids for rows missing one side (D2-style data): a question with no
// KCs acts as its own singleton KC; a KC-only row gets a per-KC question id.
std::string kc_id_for_question(const std::string& qid) { return "q|" + qid; }
std::string question_id_for_kc(const std::string& kc) { return "c|" + kc; }

}  // namespace

VocabMaps build_vocab(const std::vector<StudentRaw>& students) {
  VocabMaps vocab;
  for (const auto& s : students) {
    for (const auto& r : s.records) {
      if (!r.question_id.empty()) vocab.questions.add_or_get(r.question_id);
      if (!r.kc_ids.empty()) {
        for (const auto& kc : r.kc_ids) vocab.kcs.add_or_get(kc);
        if (r.question_id.empty()) {
          for (const auto& kc : r.kc_ids) {
            vocab.questions.add_or_get(question_id_for_kc(kc));
          }
        }
      } else {
        vocab.kcs.add_or_get(kc_id_for_question(r.question_id));
      }
    }
  }
  return vocab;
}

std::vector<Interaction> map_interactions(const StudentRaw& student,
                                          const VocabMaps& vocab) {
  std::vector<Interaction> out;
  out.reserve(student.records.size());
  for (const auto& r : student.records) {
    Interaction it;
    it.response = r.response;
    it.order_key = r.order_key;
    it.question =
        r.question_id.empty() ? -1 : vocab.questions.lookup(r.question_id);
    if (!r.kc_ids.empty()) {
      for (const auto& kc : r.kc_ids) it.kcs.push_back(vocab.kcs.lookup(kc));
    } else {
      it.kcs.push_back(vocab.kcs.lookup(kc_id_for_question(r.question_id)));
    }
    std::sort(it.kcs.begin(), it.kcs.end());
    it.kcs.erase(std::unique(it.kcs.begin(), it.kcs.end()), it.kcs.end());
    out.push_back(std::move(it));
  }
  return out;
}

std::vector<ExpandedStep> expand_kc(const std::vector<Interaction>& interactions,
                                    const std::vector<int>& question_for_kc) {
  std::vector<ExpandedStep> steps;
  for (std::size_t i = 0; i < interactions.size(); ++i) {
    const auto& it = interactions[i];
    for (int kc : it.kcs) {
      ExpandedStep st;
      st.kc = kc;
      st.question =
          it.question >= 0
              ? it.question
              : (kc < static_cast<int>(question_for_kc.size())
                     ? question_for_kc[static_cast<std::size_t>(kc)]
                     : -1);
      st.response = it.response;
      st.interaction = static_cast<int>(i);
      steps.push_back(st);
    }
  }
  return steps;
}

std::vector<std::vector<ExpandedStep>> chunk_and_filter(
    std::vector<ExpandedStep> steps, int max_len, int min_len) {
  std::vector<std::vector<ExpandedStep>> chunks;
  std::size_t i = 0;
  while (i < steps.size()) {
    const std::size_t take =
        std::min<std::size_t>(static_cast<std::size_t>(max_len), steps.size() - i);
    if (take < static_cast<std::size_t>(min_len)) break;  // tail discarded
    std::vector<ExpandedStep> chunk(steps.begin() + static_cast<long>(i),
                                    steps.begin() + static_cast<long>(i + take));
    for (std::size_t p = 0; p < chunk.size(); ++p) {
      chunk[p].position = static_cast<int>(p);
    }
    chunks.push_back(std::move(chunk));
    i += take;
  }
  return chunks;
}

Dataset prepare(const std::vector<StudentRaw>& students, int max_len,
                int min_len) {
  if (max_len < min_len || min_len < 1) {
    throw ConfigError("prepare: need 1 <= min_len <= max_len");
  }
  Dataset ds;
  ds.max_len = max_len;
  ds.min_len = min_len;
  ds.vocab = build_vocab(students);

  ds.question_for_kc.assign(static_cast<std::size_t>(ds.vocab.kcs.size()), -1);
  for (int kc = 0; kc < ds.vocab.kcs.size(); ++kc) {
    const auto qid = question_id_for_kc(ds.vocab.kcs.to_id[static_cast<std::size_t>(kc)]);
    auto it = ds.vocab.questions.to_index.find(qid);
    if (it != ds.vocab.questions.to_index.end()) {
      ds.question_for_kc[static_cast<std::size_t>(kc)] = it->second;
    }
  }

  for (const auto& s : students) {
    for (const auto& r : s.records) {
      if (r.question_id.empty()) ++ds.rows_without_question;
      if (r.kc_ids.empty()) ++ds.rows_without_kcs;
    }
    StudentSequence seq;
    seq.student_id = s.student_id;
    seq.interactions = map_interactions(s, ds.vocab);
    seq.chunks = chunk_and_filter(expand_kc(seq.interactions, ds.question_for_kc),
                                  max_len, min_len);
    if (!seq.chunks.empty()) ds.students.push_back(std::move(seq));
  }
  return ds;
}

int Dataset::student_index(const std::string& id) const {
  for (std::size_t i = 0; i < students.size(); ++i) {
    if (students[i].student_id == id) return static_cast<int>(i);
  }
  return -1;
}

std::vector<int> DatasetSplit::train_students(int valid_fold) const {
  std::vector<int> out;
  for (int f = 0; f < 5; ++f) {
    if (f == valid_fold) continue;
    out.insert(out.end(), folds[static_cast<std::size_t>(f)].begin(),
               folds[static_cast<std::size_t>(f)].end());
  }
  return out;
}

DatasetSplit split(int n_students, std::uint64_t seed) {
  if (n_students < 5) {
    throw DataError("split: need at least 5 students, got " +
                    std::to_string(n_students));
  }
  std::vector<int> order(static_cast<std::size_t>(n_students));
  for (int i = 0; i < n_students; ++i) order[static_cast<std::size_t>(i)] = i;
  Rng rng(seed);
  rng.shuffle(order);

  const int n_test = std::max(1, static_cast<int>(std::llround(0.2 * n_students)));
  DatasetSplit sp;
  sp.test.assign(order.begin(), order.begin() + n_test);

  const int rest = n_students - n_test;
  const int base = rest / 5;
  const int extra = rest % 5;
  int pos = n_test;
  for (int f = 0; f < 5; ++f) {
    const int size = base + (f < extra ? 1 : 0);
    if (size == 0) {
      throw DataError("split: too few students for 5 non-empty folds");
    }
    sp.folds[static_cast<std::size_t>(f)].assign(order.begin() + pos,
                                                 order.begin() + pos + size);
    pos += size;
  }
  return sp;
}

std::vector<std::pair<int, int>> chunk_refs(const Dataset& ds,
                                            const std::vector<int>& students) {
  std::vector<std::pair<int, int>> refs;
  for (int s : students) {
    const auto& stu = ds.students[static_cast<std::size_t>(s)];
    for (std::size_t c = 0; c < stu.chunks.size(); ++c) {
      refs.emplace_back(s, static_cast<int>(c));
    }
  }
  return refs;
}

Batch make_batch(const Dataset& ds,
                 const std::vector<std::pair<int, int>>& refs) {
  Batch b;
  b.B = static_cast<int>(refs.size());
  b.refs = refs;
  int max_len = 1;
  for (const auto& [s, c] : refs) {
    max_len = std::max(max_len,
                       static_cast<int>(ds.students[static_cast<std::size_t>(s)]
                                            .chunks[static_cast<std::size_t>(c)]
                                            .size()));
  }
  b.L = max_len;
  const std::size_t total = static_cast<std::size_t>(b.B) * b.L;
  b.kc.assign(total, 0);
  b.question.assign(total, 0);
  b.response.assign(total, 0);
  b.interaction.assign(total, 0);
  b.valid.assign(total, 0);
  for (int row = 0; row < b.B; ++row) {
    const auto& chunk = ds.students[static_cast<std::size_t>(refs[row].first)]
                            .chunks[static_cast<std::size_t>(refs[row].second)];
    for (std::size_t t = 0; t < chunk.size(); ++t) {
      const std::size_t idx = static_cast<std::size_t>(row) * b.L + t;
      b.kc[idx] = chunk[t].kc;
      b.question[idx] = chunk[t].question;
      b.response[idx] = chunk[t].response;
      b.interaction[idx] = chunk[t].interaction;
      b.valid[idx] = 1;
    }
  }
  return b;
}

std::vector<Batch> make_batches(const Dataset& ds,
                                const std::vector<std::pair<int, int>>& refs,
                                int batch_size) {
  if (batch_size < 1) throw ConfigError("batch_size must be positive");
  std::vector<Batch> out;
  for (std::size_t i = 0; i < refs.size(); i += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(refs.size(), i + static_cast<std::size_t>(batch_size));
    out.push_back(make_batch(
        ds, std::vector<std::pair<int, int>>(refs.begin() + static_cast<long>(i),
                                             refs.begin() + static_cast<long>(end))));
  }
  return out;
}

DataStats stats(const Dataset& ds) {
  DataStats st;
  std::set<int> questions, kcs;
  std::map<int, std::set<int>> kcs_per_question;
  for (const auto& stu : ds.students) {
    st.sequences += static_cast<long long>(stu.chunks.size());
    for (const auto& chunk : stu.chunks) {
      int prev_interaction = -1;
      for (const auto& step : chunk) {
        kcs.insert(step.kc);
        if (step.question >= 0) questions.insert(step.question);
        if (step.interaction != prev_interaction) {
          ++st.interactions;
          prev_interaction = step.interaction;
        }
        if (step.question >= 0) kcs_per_question[step.question].insert(step.kc);
      }
    }
  }
  st.questions = static_cast<int>(questions.size());
  st.kcs = static_cast<int>(kcs.size());
  if (!kcs_per_question.empty()) {
    double total = 0.0;
    for (const auto& [q, set] : kcs_per_question) {
      total += static_cast<double>(set.size());
    }
    st.avg_kcs = total / static_cast<double>(kcs_per_question.size());
  }
  return st;
}

std::unordered_map<int, double> her(const Dataset& ds,
                                    const std::vector<int>& students) {
  std::unordered_map<int, long long> attempts, wrong;
  for (int s : students) {
    const auto& stu = ds.students[static_cast<std::size_t>(s)];
    for (const auto& it : stu.interactions) {
      std::set<int> qs;
      if (it.question >= 0) {
        qs.insert(it.question);
      } else {
        for (int kc : it.kcs) {
          const int q = ds.question_for_kc[static_cast<std::size_t>(kc)];
          if (q >= 0) qs.insert(q);
        }
      }
      for (int q : qs) {
        ++attempts[q];
        if (it.response == 0) ++wrong[q];
      }
    }
  }
  std::unordered_map<int, double> out;
  for (const auto& [q, n] : attempts) {
    const auto w = wrong.find(q);
    out[q] = n == 0 ? 0.0
                    : static_cast<double>(w == wrong.end() ? 0 : w->second) /
                          static_cast<double>(n);
  }
  return out;
}

void write_canonical(const std::string& path,
                     const std::vector<StudentRaw>& students) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write: " + path);
  out << kHeader << "\n";
  for (const auto& s : students) {
    for (const auto& r : s.records) {
      out << r.student_id << ',' << r.question_id << ',';
      for (std::size_t i = 0; i < r.kc_ids.size(); ++i) {
        if (i) out << ';';
        out << r.kc_ids[i];
      }
      out << ',' << r.response << ',' << r.order_key << "\n";
    }
  }
  if (!out) throw DataError("write failed: " + path);
}

void save_vocab(const std::string& path, const VocabMap& vocab) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write: " + path);
  for (int i = 0; i < vocab.size(); ++i) {
    out << vocab.to_id[static_cast<std::size_t>(i)] << '\t' << i << "\n";
  }
}

VocabMap load_vocab(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open vocab file: " + path);
  VocabMap v;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw DataError("vocab line " + std::to_string(line_no) + ": missing tab");
    }
    const std::string id = line.substr(0, tab);
    const int idx = std::stoi(line.substr(tab + 1));
    if (idx != v.size()) {
      throw DataError("vocab line " + std::to_string(line_no) +
                      ": indices must be dense and ascending");
    }
    v.add_or_get(id);
  }
  return v;
}

void save_split(const std::string& path, const DatasetSplit& sp) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write: " + path);
  auto dump = [&out](const std::string& tag, const std::vector<int>& v) {
    out << tag;
    for (int x : v) out << '\t' << x;
    out << "\n";
  };
  dump("test", sp.test);
  for (int f = 0; f < 5; ++f) {
    dump("fold" + std::to_string(f), sp.folds[static_cast<std::size_t>(f)]);
  }
}

DatasetSplit load_split(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open split file: " + path);
  DatasetSplit sp;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    std::vector<int> v;
    int x;
    while (ss >> x) v.push_back(x);
    if (tag == "test") {
      sp.test = std::move(v);
    } else if (tag.rfind("fold", 0) == 0) {
      const int f = std::stoi(tag.substr(4));
      if (f < 0 || f > 4) throw DataError("split file: bad fold tag " + tag);
      sp.folds[static_cast<std::size_t>(f)] = std::move(v);
    } else {
      throw DataError("split file: unknown tag " + tag);
    }
  }
  return sp;
}

namespace {

struct CanonicalAdapter final : Adapter {
  std::string name() const override { return "canonical"; }
  std::vector<StudentRaw> read(const std::string& path) const override {
    return ingest(path);
  }
};

const CanonicalAdapter kCanonical;
const Adapter* const kAdapters[] = {&kCanonical};

}  // namespace

const Adapter* find_adapter(const std::string& name) {
  for (const Adapter* a : kAdapters) {
    if (a->name() == name) return a;
  }
  return nullptr;
}

std::vector<std::string> adapter_names() {
  std::vector<std::string> names;
  for (const Adapter* a : kAdapters) names.push_back(a->name());
  return names;
}

}  // namespace skt::data

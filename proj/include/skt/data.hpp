#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "skt/common.hpp"

namespace skt::data {

// One parsed row of the canonical interaction file. question_id and kc_ids
// may individually be empty, never both.
struct RawRecord {
  std::string student_id;
  std::string question_id;
  std::vector<std::string> kc_ids;
  int response = 0;
  long long order_key = 0;
  int line_no = 0;
};

struct StudentRaw {
  std::string student_id;
  std::vector<RawRecord> records;  // sorted by order_key (stable)
};

// Dense id mapping. Index `size()` is reserved for ids unseen at build time.
struct VocabMap {
  std::unordered_map<std::string, int> to_index;
  std::vector<std::string> to_id;

  int add_or_get(const std::string& id);
  int lookup(const std::string& id) const;  // unseen -> unk()
  int size() const { return static_cast<int>(to_id.size()); }
  int unk() const { return size(); }
};

struct VocabMaps {
  VocabMap questions;
  VocabMap kcs;
};

// Question-level interaction after vocab mapping.
struct Interaction {
  int question = -1;  // -1 when the source row had no question id
  std::vector<int> kcs;
  int response = 0;
  long long order_key = 0;
};

// One KC-level step after question expansion.
struct ExpandedStep {
  int kc = 0;
  int question = 0;
  int response = 0;
  int position = 0;     // index within its chunk
  int interaction = 0;  // ordinal of the source interaction within the student
};

struct StudentSequence {
  std::string student_id;
  std::vector<Interaction> interactions;
  std::vector<std::vector<ExpandedStep>> chunks;
};

struct Dataset {
  VocabMaps vocab;
  std::vector<StudentSequence> students;
  // Question index assigned to each KC when a row carries no question id.
  std::vector<int> question_for_kc;
  int max_len = 200;
  int min_len = 3;
  // D2-style rows seen during preparation (either side missing).
  long long rows_without_question = 0;
  long long rows_without_kcs = 0;

  int n_kcs() const { return vocab.kcs.size(); }
  int n_questions() const { return vocab.questions.size(); }
  bool has_native_questions_and_kcs() const {
    return rows_without_question == 0 && rows_without_kcs == 0;
  }
  int student_index(const std::string& id) const;  // -1 when absent
};

struct DatasetSplit {
  std::vector<int> test;                  // student indices
  std::array<std::vector<int>, 5> folds;  // disjoint cover of the rest
  std::vector<int> train_students(int valid_fold) const;
};

struct DataStats {
  long long interactions = 0;  // question-level, after filtering/chunking
  long long sequences = 0;     // chunk count
  int questions = 0;
  int kcs = 0;
  std::optional<double> avg_kcs;  // mean KC-set size per distinct question
};

// Padded model input built from a set of chunks; row-major [B x L] arrays,
// right-padded with zeros where valid is false.
struct Batch {
  int B = 0;
  int L = 0;
  std::vector<int> kc, question, response, interaction;
  std::vector<std::uint8_t> valid;
  std::vector<std::pair<int, int>> refs;  // (student index, chunk index)
};

// --- pipeline ---------------------------------------------------------

// Reads the canonical CSV (header `student_id,question_id,kc_ids,response,
// order_key`, kc_ids semicolon-joined), validates every row, groups by
// student and stable-sorts each group by order_key.
std::vector<StudentRaw> ingest(const std::string& path);
std::vector<StudentRaw> group_records(std::vector<RawRecord> records);

VocabMaps build_vocab(const std::vector<StudentRaw>& students);

// KC expansion of one student's interactions: an interaction with k KCs
// becomes k consecutive steps (ascending KC index) sharing question and
// response. Rows without KCs fall back to a per-question singleton KC; rows
// without a question take a per-KC question id.
std::vector<Interaction> map_interactions(const StudentRaw& student,
                                          const VocabMaps& vocab);
std::vector<ExpandedStep> expand_kc(const std::vector<Interaction>& interactions,
                                    const std::vector<int>& question_for_kc);

// Consecutive non-overlapping windows of at most max_len steps; windows
// shorter than min_len are discarded.
std::vector<std::vector<ExpandedStep>> chunk_and_filter(
    std::vector<ExpandedStep> steps, int max_len, int min_len);

// Full preprocessing; students left with zero chunks are dropped.
Dataset prepare(const std::vector<StudentRaw>& students, int max_len = 200,
                int min_len = 3);

// Deterministic partition by student: ~20% test, remainder split into 5
// folds of equal size +-1.
DatasetSplit split(int n_students, std::uint64_t seed);

std::vector<std::pair<int, int>> chunk_refs(const Dataset& ds,
                                            const std::vector<int>& students);
Batch make_batch(const Dataset& ds,
                 const std::vector<std::pair<int, int>>& refs);
std::vector<Batch> make_batches(const Dataset& ds,
                                const std::vector<std::pair<int, int>>& refs,
                                int batch_size);

DataStats stats(const Dataset& ds);

// Historical error rate per question over the given students' interactions.
std::unordered_map<int, double> her(const Dataset& ds,
                                    const std::vector<int>& students);

// --- persistence ------------------------------------------------------

void write_canonical(const std::string& path,
                     const std::vector<StudentRaw>& students);
void save_vocab(const std::string& path, const VocabMap& vocab);
VocabMap load_vocab(const std::string& path);
void save_split(const std::string& path, const DatasetSplit& split);
DatasetSplit load_split(const std::string& path);

// --- adapters ---------------------------------------------------------

// A named reader turning a raw platform dump into canonical records. Only
// the canonical format ships here; dataset-specific adapters register the
// same way.
struct Adapter {
  virtual ~Adapter() = default;
  virtual std::string name() const = 0;
  virtual std::vector<StudentRaw> read(const std::string& path) const = 0;
};

const Adapter* find_adapter(const std::string& name);  // nullptr if unknown
std::vector<std::string> adapter_names();

}  // namespace skt::data

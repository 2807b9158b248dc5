#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace cclc {

// One labeled candidate answer.
struct Candidate {
  std::vector<std::string> tokens;
  int label = 0;  // 0 or 1
};

// A question with its ordered candidate answers; the unit of listwise
// training and of evaluation. Candidate order is the order in the file and
// defines ranking tie-breaks downstream.
struct QuestionGroup {
  std::string question_id;
  std::vector<std::string> question;
  std::vector<Candidate> candidates;
};

// A single (question, answer, label) instance; the unit of pointwise
// training.
struct QAPair {
  std::string question_id;
  std::vector<std::string> question;
  std::vector<std::string> answer;
  int label = 0;
};

struct CorpusStats {
  std::size_t question_count = 0;
  std::size_t pair_count = 0;  // sum of candidate-list lengths
};

enum class CorpusFormat { tsv };

enum class FilterMode {
  at_least_one_positive,  // drop groups with no positive candidate
  clean,                  // additionally drop all-positive groups
};

// Lowercases, splits on whitespace, and peels trailing .,?!;: characters
// into their own tokens. Deterministic; empty text yields the UNK token.
std::vector<std::string> tokenize(const std::string& text);

// Reads a 4-column TSV (qid, question, answer, label). Lines sharing a qid
// must be contiguous; an optional header is detected by a literal first
// field `qid`. Groups come back in first-appearance order with candidate
// order preserved.
std::vector<QuestionGroup> load_corpus(const std::string& path,
                                       CorpusFormat format = CorpusFormat::tsv);

// Writes groups back out in the same TSV schema.
void save_corpus(const std::vector<QuestionGroup>& groups, const std::string& path);

std::vector<QuestionGroup> filter_groups(std::vector<QuestionGroup> groups, FilterMode mode);

// Flattens every candidate into an independent training pair.
std::vector<QAPair> to_pointwise(const std::vector<QuestionGroup>& groups);

// Listwise training consumes groups as they are.
std::vector<QuestionGroup> to_listwise(std::vector<QuestionGroup> groups);

CorpusStats corpus_stats(const std::vector<QuestionGroup>& groups);

}  // namespace cclc

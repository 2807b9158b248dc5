#pragma once

#include <string>
#include <vector>

#include "cclc/data.hpp"
#include "cclc/model.hpp"

namespace cclc {

// One question's candidates reordered by descending score, ties resolved by
// original file order.
struct RankedQuestion {
  std::string question_id;
  std::vector<int> ranked_indices;   // permutation of the candidate list
  std::vector<double> ranked_scores;
  std::vector<int> relevance;        // binary labels in ranked order
  double average_precision = 0.0;
  double reciprocal_rank = 0.0;
};

struct EvalReport {
  double map = 0.0;
  double mrr = 0.0;
  std::size_t question_count = 0;
  std::vector<RankedQuestion> per_question;

  // `qid<TAB>AP<TAB>RR` per question, then MAP / MRR footer lines.
  std::string to_text() const;
  std::string to_json() const;
};

// Mean over relevant positions r of (relevant in top r) / r. Requires at
// least one relevant item.
double average_precision(const std::vector<int>& relevance);

// 1 / rank of the first relevant item, ranks starting at 1.
double reciprocal_rank(const std::vector<int>& relevance);

// Scores every candidate with the model in eval mode and aggregates MAP and
// MRR. Questions are scored in parallel; the reduction is a fixed-order
// pass over the group list, so results do not depend on thread count.
EvalReport evaluate(const Model& model, const std::vector<QuestionGroup>& groups);

// Same ranking and aggregation applied to precomputed scores; evaluate()
// delegates here and tests exercise it directly.
EvalReport evaluate_scores(const std::vector<QuestionGroup>& groups,
                           const std::vector<std::vector<double>>& scores);

}  // namespace cclc

#include "cclc/evaluation.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "cclc/error.hpp"

#include <json.hpp>

namespace cclc {

double average_precision(const std::vector<int>& relevance) {
  double relevant_seen = 0.0;
  double precision_sum = 0.0;
  for (std::size_t r = 0; r < relevance.size(); ++r) {
    if (relevance[r] != 0) {
      relevant_seen += 1.0;
      precision_sum += relevant_seen / static_cast<double>(r + 1);
    }
  }
  if (relevant_seen == 0.0) {
    throw value_error("average_precision: no relevant item in ranking");
  }
  return precision_sum / relevant_seen;
}

double reciprocal_rank(const std::vector<int>& relevance) {
  for (std::size_t r = 0; r < relevance.size(); ++r) {
    if (relevance[r] != 0) return 1.0 / static_cast<double>(r + 1);
  }
  throw value_error("reciprocal_rank: no relevant item in ranking");
}

static RankedQuestion rank_question(const QuestionGroup& group, const std::vector<double>& scores) {
  RankedQuestion ranked;
  ranked.question_id = group.question_id;

  std::vector<int> order(group.candidates.size());
  std::iota(order.begin(), order.end(), 0);
  // stable: equal scores keep file order
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return scores[static_cast<std::size_t>(a)] > scores[static_cast<std::size_t>(b)];
  });

  ranked.ranked_indices = order;
  for (int idx : order) {
    ranked.ranked_scores.push_back(scores[static_cast<std::size_t>(idx)]);
    ranked.relevance.push_back(group.candidates[static_cast<std::size_t>(idx)].label);
  }
  ranked.average_precision = average_precision(ranked.relevance);
  ranked.reciprocal_rank = reciprocal_rank(ranked.relevance);
  return ranked;
}

EvalReport evaluate_scores(const std::vector<QuestionGroup>& groups,
                           const std::vector<std::vector<double>>& scores) {
  if (groups.empty()) throw value_error("evaluate: no question groups");
  if (groups.size() != scores.size()) {
    throw value_error("evaluate: got scores for " + std::to_string(scores.size()) + " of " +
                      std::to_string(groups.size()) + " groups");
  }

  EvalReport report;
  report.per_question.resize(groups.size());
  const int n = static_cast<int>(groups.size());
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i) {
    report.per_question[static_cast<std::size_t>(i)] =
        rank_question(groups[static_cast<std::size_t>(i)], scores[static_cast<std::size_t>(i)]);
  }

  for (const RankedQuestion& q : report.per_question) {
    report.map += q.average_precision;
    report.mrr += q.reciprocal_rank;
  }
  report.question_count = groups.size();
  report.map /= static_cast<double>(groups.size());
  report.mrr /= static_cast<double>(groups.size());
  return report;
}

EvalReport evaluate(const Model& model, const std::vector<QuestionGroup>& groups) {
  if (groups.empty()) throw value_error("evaluate: no question groups");

  std::vector<std::vector<double>> scores(groups.size());
  const int n = static_cast<int>(groups.size());
  // read-only model access; each question is independent
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i) {
    const QuestionGroup& group = groups[static_cast<std::size_t>(i)];
    std::vector<double>& row = scores[static_cast<std::size_t>(i)];
    row.reserve(group.candidates.size());
    for (const Candidate& candidate : group.candidates) {
      row.push_back(model.score_pair(group.question, candidate.tokens));
    }
  }
  return evaluate_scores(groups, scores);
}

std::string EvalReport::to_text() const {
  std::ostringstream out;
  out.precision(6);
  out << std::fixed;
  for (const RankedQuestion& q : per_question) {
    out << q.question_id << '\t' << q.average_precision << '\t' << q.reciprocal_rank << '\n';
  }
  out << "MAP\t" << map << '\n';
  out << "MRR\t" << mrr << '\n';
  return out.str();
}

std::string EvalReport::to_json() const {
  nlohmann::json doc;
  doc["map"] = map;
  doc["mrr"] = mrr;
  doc["questions"] = question_count;
  nlohmann::json entries = nlohmann::json::array();
  for (const RankedQuestion& q : per_question) {
    entries.push_back({{"qid", q.question_id},
                       {"ap", q.average_precision},
                       {"rr", q.reciprocal_rank},
                       {"ranking", q.ranked_indices}});
  }
  doc["per_question"] = entries;
  return doc.dump(2);
}

}  // namespace cclc

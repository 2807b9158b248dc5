#include "cclc/data.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "cclc/encoder.hpp"
#include "cclc/error.hpp"

namespace cclc {

static bool is_peel_punct(char c) {
  return c == '.' || c == ',' || c == '?' || c == '!' || c == ';' || c == ':';
}

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> tokens;
  std::istringstream stream(text);
  std::string chunk;
  while (stream >> chunk) {
    std::transform(chunk.begin(), chunk.end(), chunk.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    // peel trailing punctuation into standalone tokens, preserving order
    std::string peeled;
    while (!chunk.empty() && is_peel_punct(chunk.back())) {
      peeled.push_back(chunk.back());
      chunk.pop_back();
    }
    if (!chunk.empty()) tokens.push_back(chunk);
    for (auto it = peeled.rbegin(); it != peeled.rend(); ++it) {
      tokens.push_back(std::string(1, *it));
    }
  }
  if (tokens.empty()) tokens.push_back(Vocabulary::unk_token());
  return tokens;
}

static std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  return fields;
}

std::vector<QuestionGroup> load_corpus(const std::string& path, CorpusFormat format) {
  if (format != CorpusFormat::tsv) throw data_error("load_corpus: unsupported corpus format");
  std::ifstream in(path);
  if (!in) throw data_error("load_corpus: cannot open " + path);

  std::vector<QuestionGroup> groups;
  std::unordered_set<std::string> seen_ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    const std::vector<std::string> fields = split_tabs(line);
    if (line_no == 1 && !fields.empty() && fields[0] == "qid") continue;  // optional header
    if (fields.size() != 4) {
      throw data_error(path + ":" + std::to_string(line_no) + ": expected 4 tab-separated fields, got " +
                       std::to_string(fields.size()));
    }
    const std::string& qid = fields[0];
    if (qid.empty()) {
      throw data_error(path + ":" + std::to_string(line_no) + ": empty question id");
    }
    int label = 0;
    if (fields[3] == "0") {
      label = 0;
    } else if (fields[3] == "1") {
      label = 1;
    } else {
      throw data_error(path + ":" + std::to_string(line_no) + ": unknown label token '" +
                       fields[3] + "'");
    }

    if (groups.empty() || groups.back().question_id != qid) {
      if (seen_ids.count(qid) > 0) {
        throw data_error(path + ":" + std::to_string(line_no) + ": lines for question id '" + qid +
                         "' are not contiguous");
      }
      seen_ids.insert(qid);
      QuestionGroup group;
      group.question_id = qid;
      group.question = tokenize(fields[1]);
      groups.push_back(std::move(group));
    }
    Candidate candidate;
    candidate.tokens = tokenize(fields[2]);
    candidate.label = label;
    groups.back().candidates.push_back(std::move(candidate));
  }
  return groups;
}

static std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

void save_corpus(const std::vector<QuestionGroup>& groups, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw data_error("save_corpus: cannot open " + path + " for writing");
  for (const QuestionGroup& group : groups) {
    const std::string question = join_tokens(group.question);
    for (const Candidate& candidate : group.candidates) {
      out << group.question_id << '\t' << question << '\t' << join_tokens(candidate.tokens)
          << '\t' << candidate.label << '\n';
    }
  }
  if (!out) throw data_error("save_corpus: write to " + path + " failed");
}

std::vector<QuestionGroup> filter_groups(std::vector<QuestionGroup> groups, FilterMode mode) {
  auto dropped = [mode](const QuestionGroup& group) {
    bool any_positive = false;
    bool any_negative = false;
    for (const Candidate& candidate : group.candidates) {
      if (candidate.label == 1) {
        any_positive = true;
      } else {
        any_negative = true;
      }
    }
    if (!any_positive) return true;
    return mode == FilterMode::clean && !any_negative;
  };
  groups.erase(std::remove_if(groups.begin(), groups.end(), dropped), groups.end());
  return groups;
}

std::vector<QAPair> to_pointwise(const std::vector<QuestionGroup>& groups) {
  std::vector<QAPair> pairs;
  for (const QuestionGroup& group : groups) {
    for (const Candidate& candidate : group.candidates) {
      QAPair pair;
      pair.question_id = group.question_id;
      pair.question = group.question;
      pair.answer = candidate.tokens;
      pair.label = candidate.label;
      pairs.push_back(std::move(pair));
    }
  }
  return pairs;
}

std::vector<QuestionGroup> to_listwise(std::vector<QuestionGroup> groups) { return groups; }

CorpusStats corpus_stats(const std::vector<QuestionGroup>& groups) {
  CorpusStats stats;
  stats.question_count = groups.size();
  for (const QuestionGroup& group : groups) stats.pair_count += group.candidates.size();
  return stats;
}

}  // namespace cclc

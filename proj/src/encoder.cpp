#include "cclc/encoder.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "cclc/error.hpp"
#include "cclc/rng.hpp"
#include "cclc/tape.hpp"

namespace cclc {

const std::string& Vocabulary::pad_token() {
  static const std::string token = "<pad>";
  return token;
}

const std::string& Vocabulary::unk_token() {
  static const std::string token = "<unk>";
  return token;
}

Vocabulary::Vocabulary() {
  tokens_ = {pad_token(), unk_token()};
  index_ = {{pad_token(), pad_index}, {unk_token(), unk_index}};
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  if (tokens.size() < 2 || tokens[0] != pad_token() || tokens[1] != unk_token()) {
    throw value_error("Vocabulary::from_tokens: reserved tokens missing or misplaced");
  }
  Vocabulary vocab;
  vocab.tokens_ = std::move(tokens);
  vocab.index_.clear();
  for (std::size_t i = 0; i < vocab.tokens_.size(); ++i) {
    vocab.index_.emplace(vocab.tokens_[i], static_cast<int>(i));
  }
  if (vocab.index_.size() != vocab.tokens_.size()) {
    throw value_error("Vocabulary::from_tokens: duplicate token in list");
  }
  return vocab;
}

int Vocabulary::lookup(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? unk_index : it->second;
}

bool Vocabulary::contains(const std::string& token) const { return index_.count(token) > 0; }

Vocabulary build_vocab(const std::vector<QuestionGroup>& groups, int min_count) {
  if (min_count < 1) throw value_error("build_vocab: min_count must be >= 1");

  std::unordered_map<std::string, std::size_t> frequency;
  auto count = [&](const std::vector<std::string>& tokens) {
    for (const std::string& token : tokens) ++frequency[token];
  };
  for (const QuestionGroup& group : groups) {
    count(group.question);
    for (const Candidate& candidate : group.candidates) count(candidate.tokens);
  }
  frequency.erase(Vocabulary::pad_token());
  frequency.erase(Vocabulary::unk_token());

  std::vector<std::pair<std::string, std::size_t>> kept(frequency.begin(), frequency.end());
  kept.erase(std::remove_if(kept.begin(), kept.end(),
                            [&](const auto& e) { return e.second < static_cast<std::size_t>(min_count); }),
             kept.end());
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  std::vector<std::string> tokens = {Vocabulary::pad_token(), Vocabulary::unk_token()};
  tokens.reserve(tokens.size() + kept.size());
  for (auto& [token, freq] : kept) tokens.push_back(std::move(token));
  return Vocabulary::from_tokens(std::move(tokens));
}

EmbeddingMatrix EmbeddingMatrix::random(const Vocabulary& vocab, int dim, Rng& rng) {
  if (dim < 1) throw value_error("EmbeddingMatrix::random: dim must be positive");
  EmbeddingMatrix embedding;
  embedding.table = Tensor::uniform({vocab.size(), dim}, rng, -0.1, 0.1);
  for (int j = 0; j < dim; ++j) embedding.table.at(Vocabulary::pad_index, j) = 0.0;
  return embedding;
}

std::vector<int> token_indices(const std::vector<std::string>& tokens, const Vocabulary& vocab) {
  std::vector<int> indices;
  indices.reserve(tokens.size());
  for (const std::string& token : tokens) indices.push_back(vocab.lookup(token));
  return indices;
}

Tensor embed(const std::vector<std::string>& tokens, const Vocabulary& vocab, const Tensor& table) {
  if (table.rank() != 2 || table.dim(0) != vocab.size()) {
    throw shape_error("embed: table shape " + shape_string(table.shape()) +
                      " does not match vocabulary size " + std::to_string(vocab.size()));
  }
  return embed_columns(table, token_indices(tokens, vocab), Vocabulary::pad_index);
}

EmbeddingMatrix load_pretrained_vectors(const std::string& path, const Vocabulary& vocab, int dim,
                                        Rng& rng) {
  std::ifstream in(path);
  if (!in) throw data_error("load_pretrained_vectors: cannot open " + path);

  EmbeddingMatrix embedding = EmbeddingMatrix::random(vocab, dim, rng);
  std::vector<bool> loaded(static_cast<std::size_t>(vocab.size()), false);

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string token;
    fields >> token;
    std::vector<double> values;
    double v = 0.0;
    while (fields >> v) values.push_back(v);
    if (static_cast<int>(values.size()) != dim) {
      throw data_error(path + ":" + std::to_string(line_no) + ": expected " + std::to_string(dim) +
                       " values for token '" + token + "', got " + std::to_string(values.size()));
    }
    if (!vocab.contains(token)) continue;
    const int row = vocab.lookup(token);
    if (row == Vocabulary::pad_index) continue;  // PAD row stays zero
    if (loaded[static_cast<std::size_t>(row)]) {
      std::cerr << "load_pretrained_vectors: duplicate entry for '" << token
                << "', keeping the last one\n";
    }
    loaded[static_cast<std::size_t>(row)] = true;
    for (int j = 0; j < dim; ++j) embedding.table.at(row, j) = values[static_cast<std::size_t>(j)];
  }
  return embedding;
}

std::string ContextualStore::key_for(const std::vector<std::string>& tokens) {
  std::string key;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i > 0) key.push_back(' ');
    key += tokens[i];
  }
  return key;
}

const Tensor* ContextualStore::find(const std::vector<std::string>& tokens) const {
  auto it = sentences_.find(key_for(tokens));
  return it == sentences_.end() ? nullptr : &it->second;
}

ContextualStore load_contextual(const std::string& path, int dim) {
  std::ifstream in(path);
  if (!in) throw data_error("load_contextual: cannot open " + path);
  if (dim < 1) throw value_error("load_contextual: dim must be positive");

  ContextualStore store;
  store.dim_ = dim;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    const std::size_t tab1 = line.find('\t');
    const std::size_t tab2 = tab1 == std::string::npos ? std::string::npos : line.find('\t', tab1 + 1);
    if (tab2 == std::string::npos) {
      throw data_error(path + ":" + std::to_string(line_no) + ": expected key<TAB>T<TAB>values");
    }
    const std::string key = line.substr(0, tab1);
    int time = 0;
    try {
      time = std::stoi(line.substr(tab1 + 1, tab2 - tab1 - 1));
    } catch (const std::exception&) {
      throw data_error(path + ":" + std::to_string(line_no) + ": malformed token count");
    }
    if (time < 1) {
      throw data_error(path + ":" + std::to_string(line_no) + ": token count must be positive");
    }

    std::istringstream payload(line.substr(tab2 + 1));
    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(time) * static_cast<std::size_t>(dim));
    double v = 0.0;
    while (payload >> v) values.push_back(v);
    if (values.size() != static_cast<std::size_t>(time) * static_cast<std::size_t>(dim)) {
      throw data_error(path + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(static_cast<std::size_t>(time) * dim) + " values, got " +
                       std::to_string(values.size()));
    }

    // stored flat as T vectors of length dim; kept as the d x T matrix the
    // model consumes
    Tensor matrix({dim, time});
    for (int t = 0; t < time; ++t) {
      for (int i = 0; i < dim; ++i) {
        matrix.at(i, t) = values[static_cast<std::size_t>(t) * dim + static_cast<std::size_t>(i)];
      }
    }
    if (store.sentences_.count(key) > 0) {
      std::cerr << "load_contextual: duplicate key '" << key << "', keeping the last one\n";
    }
    store.sentences_[key] = std::move(matrix);
  }
  return store;
}

}  // namespace cclc

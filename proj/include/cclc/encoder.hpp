#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "cclc/data.hpp"
#include "cclc/tensor.hpp"

namespace cclc {

class Rng;

// Token-to-index map with dense indices. PAD and UNK are always present at
// fixed positions; immutable after construction.
class Vocabulary {
 public:
  static constexpr int pad_index = 0;
  static constexpr int unk_index = 1;
  static const std::string& pad_token();
  static const std::string& unk_token();

  Vocabulary();  // reserved tokens only

  // Rebuilds the map from an index-ordered token list (checkpoint load).
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  int lookup(const std::string& token) const;  // unk_index for OOV
  bool contains(const std::string& token) const;
  int size() const { return static_cast<int>(tokens_.size()); }
  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

// Tokens with frequency >= min_count across questions and answers, indexed
// by frequency (descending) then lexicographically. Deterministic.
Vocabulary build_vocab(const std::vector<QuestionGroup>& groups, int min_count);

// V x d lookup table. Row 0 (PAD) is all zeros and never receives gradient
// mass.
struct EmbeddingMatrix {
  Tensor table;
  bool trainable = true;

  int dim() const { return table.defined() ? table.dim(1) : 0; }

  // Uniform [-0.1, 0.1] rows, PAD row zeroed.
  static EmbeddingMatrix random(const Vocabulary& vocab, int dim, Rng& rng);
};

// Column t is the embedding row of token t (UNK row for OOV), giving d x T.
Tensor embed(const std::vector<std::string>& tokens, const Vocabulary& vocab, const Tensor& table);

// Token indices used by embed(); exposed for tape-tracked lookups.
std::vector<int> token_indices(const std::vector<std::string>& tokens, const Vocabulary& vocab);

// Text format: one `token v1 v2 ... vd` line per token. Tokens absent from
// the file get a uniform [-0.1, 0.1] row from rng; duplicate entries keep
// the last occurrence (with a warning on stderr).
EmbeddingMatrix load_pretrained_vectors(const std::string& path, const Vocabulary& vocab, int dim,
                                        Rng& rng);

// Precomputed per-token vector sequences standing in for a pretrained
// language model, keyed by the exact token sequence joined by single
// spaces. Immutable after load.
class ContextualStore {
 public:
  ContextualStore() = default;

  static std::string key_for(const std::vector<std::string>& tokens);

  // Returns the stored d x T matrix, or nullptr so callers fall back to the
  // static embedding path.
  const Tensor* find(const std::vector<std::string>& tokens) const;

  std::size_t size() const { return sentences_.size(); }
  int dim() const { return dim_; }

 private:
  std::unordered_map<std::string, Tensor> sentences_;
  int dim_ = 0;

  friend ContextualStore load_contextual(const std::string& path, int dim);
};

// File format, one sentence per line: `key<TAB>T<TAB>v11 ... vTd` where the
// flat payload holds T vectors of length dim.
ContextualStore load_contextual(const std::string& path, int dim);

}  // namespace cclc

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "cclc/encoder.hpp"
#include "cclc/tape.hpp"
#include "cclc/tensor.hpp"

namespace cclc {

struct ModelConfig {
  int embed_dim = 100;                          // d, width of the input vectors
  int proj_dim = 100;                           // l, context projection size
  std::vector<int> filter_widths = {1, 2, 3, 4, 5};
  int filters_per_width = 100;
  bool lc_enabled = true;
  int n_clusters = 8;
  int k_pool = 6;
  int mem_dim = 0;                              // latent memory size; 0 means proj_dim
  double dropout = 0.5;

  int resolved_mem_dim() const { return mem_dim > 0 ? mem_dim : proj_dim; }
  // feature rows entering the CNN: proj_dim plus the appended cluster block
  int comparison_dim() const { return proj_dim + (lc_enabled ? resolved_mem_dim() : 0); }
  int aggregate_dim() const {
    return static_cast<int>(filter_widths.size()) * filters_per_width;
  }
  int max_filter_width() const;

  void validate() const;
};

// Every learned matrix of the scoring network. Tensors here are plain
// values; watch_on() produces tape-tracked handles for a training step.
struct ModelParams {
  Tensor w_gate;                     // proj_dim x embed_dim, sigmoid path
  Tensor w_value;                    // proj_dim x embed_dim, tanh path
  Tensor w_att_q;                    // proj_dim x proj_dim
  Tensor w_att_a;                    // proj_dim x proj_dim
  std::vector<Tensor> conv_filters;  // per width: width x comparison_dim x filters_per_width
  Tensor memory;                     // mem_dim x n_clusters (lc only)
  Tensor w_lc;                       // proj_dim x mem_dim  (lc only)
  Tensor w_out;                      // 2 * aggregate_dim

  static ModelParams init(const ModelConfig& config, Rng& rng);

  // Stable iteration order shared by the optimizer and the checkpoint.
  std::vector<std::pair<std::string, Tensor*>> named();
  std::vector<std::pair<std::string, const Tensor*>> named() const;

  ModelParams watch_on(Tape& tape) const;
  ModelParams clone() const;
};

// Intermediates of one scoring pass.
struct ForwardTrace {
  Tensor q_proj, a_proj;  // projected question / answer
  Tensor h_q, h_a;        // attention-aligned counterparts
  Tensor c_q, c_a;        // comparison matrices (post augmentation when lc is on)
  Tensor lc_q, lc_a;      // appended cluster vectors (undefined when lc is off)
  Tensor r_q, r_a;        // aggregated CNN features
  Tensor score;           // scalar in (0, 1)
};

// --- building blocks, exposed for tests ---

// sigmoid(w_gate * x) ⊙ tanh(w_value * x); weights shared between sides.
Tensor context_projection(const Tensor& x, const Tensor& w_gate, const Tensor& w_value);

// Soft alignment between the projected sentences. Softmax normalizes over
// the source-sentence positions, so every aligned column is a convex
// combination of source columns.
std::pair<Tensor, Tensor> attention(const Tensor& q_proj, const Tensor& a_proj,
                                    const Tensor& w_att_q, const Tensor& w_att_a);

// Elementwise match of each sentence against its aligned counterpart.
std::pair<Tensor, Tensor> compare(const Tensor& q_proj, const Tensor& a_proj, const Tensor& h_q,
                                  const Tensor& h_a);

// Similarity-weighted sum over the k closest latent memory vectors.
Tensor latent_cluster(const Tensor& sentence, const Tensor& w_lc, const Tensor& memory,
                      int k_pool);

// Appends each side's cluster vector (tiled over time) to the comparison
// features. Pass-through when lc is disabled. Returns (c_q_new, c_a_new) and
// fills trace.lc_q / trace.lc_a.
std::pair<Tensor, Tensor> cluster_augment(const Tensor& q_proj, const Tensor& a_proj, Tensor c_q,
                                          Tensor c_a, const ModelParams& params,
                                          const ModelConfig& config, ForwardTrace* trace);

// CNN over each comparison matrix (max-over-time per filter, all widths
// concatenated) followed by the sigmoid output layer.
Tensor aggregate(const Tensor& c_q, const Tensor& c_a, const ModelParams& params,
                 const ModelConfig& config, ForwardTrace* trace, Rng* dropout_rng);

enum class Mode { train, eval };

// Tracked views of everything trainable, plus the dropout source, for one
// training step. Several forwards may share one binding (listwise groups).
struct TapeBinding {
  Tape* tape = nullptr;
  ModelParams params;
  Tensor embedding_table;  // tracked iff the embedding is trainable
  Rng* rng = nullptr;
};

// The full scoring model: configuration, vocabulary, embeddings, and
// parameters. Read-only during evaluation and shareable across workers.
struct Model {
  ModelConfig config;
  Vocabulary vocab;
  EmbeddingMatrix embedding;
  ModelParams params;
  const ContextualStore* contextual = nullptr;  // optional, not owned

  static Model init(ModelConfig config, Vocabulary vocab, Rng& rng);

  TapeBinding bind(Tape& tape, Rng& rng) const;

  // Full pass through projection, attention, comparison, cluster
  // augmentation, and aggregation. Train mode requires a binding and
  // applies dropout; eval mode is a pure function of tokens and params.
  ForwardTrace forward(const std::vector<std::string>& question_tokens,
                       const std::vector<std::string>& answer_tokens, Mode mode,
                       const TapeBinding* binding = nullptr) const;

  double score_pair(const std::vector<std::string>& question_tokens,
                    const std::vector<std::string>& answer_tokens) const;

  // Optimizer / checkpoint ordering: model params, then the embedding table
  // when it is trainable.
  std::vector<std::pair<std::string, Tensor*>> trainable();
};

}  // namespace cclc

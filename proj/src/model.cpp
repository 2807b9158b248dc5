#include "cclc/model.hpp"

#include <algorithm>
#include <cmath>

#include "cclc/error.hpp"
#include "cclc/rng.hpp"

namespace cclc {

int ModelConfig::max_filter_width() const {
  int widest = 1;
  for (int w : filter_widths) widest = std::max(widest, w);
  return widest;
}

void ModelConfig::validate() const {
  if (embed_dim < 1) throw config_error("model config: embed_dim must be positive");
  if (proj_dim < 1) throw config_error("model config: proj_dim must be positive");
  if (filter_widths.empty()) throw config_error("model config: at least one filter width");
  for (int w : filter_widths) {
    if (w < 1) throw config_error("model config: filter widths must be positive");
  }
  if (filters_per_width < 1) throw config_error("model config: filters_per_width must be positive");
  if (dropout < 0.0 || dropout >= 1.0) throw config_error("model config: dropout must lie in [0, 1)");
  if (lc_enabled) {
    if (n_clusters < 1) throw config_error("model config: n_clusters must be positive");
    if (k_pool < 1) throw config_error("model config: k_pool must be positive");
    if (k_pool > n_clusters) {
      throw config_error("model config: k_pool = " + std::to_string(k_pool) +
                         " exceeds n_clusters = " + std::to_string(n_clusters));
    }
    if (mem_dim < 0) throw config_error("model config: mem_dim must be nonnegative");
  }
}

ModelParams ModelParams::init(const ModelConfig& config, Rng& rng) {
  config.validate();
  ModelParams params;
  params.w_gate = Tensor::uniform({config.proj_dim, config.embed_dim}, rng, -0.1, 0.1);
  params.w_value = Tensor::uniform({config.proj_dim, config.embed_dim}, rng, -0.1, 0.1);
  params.w_att_q = Tensor::uniform({config.proj_dim, config.proj_dim}, rng, -0.1, 0.1);
  params.w_att_a = Tensor::uniform({config.proj_dim, config.proj_dim}, rng, -0.1, 0.1);
  for (int width : config.filter_widths) {
    params.conv_filters.push_back(
        Tensor::uniform({width, config.comparison_dim(), config.filters_per_width}, rng, -0.1, 0.1));
  }
  if (config.lc_enabled) {
    const int mem = config.resolved_mem_dim();
    // unit-norm memory columns so the clusters start distinguishable
    params.memory = Tensor::uniform({mem, config.n_clusters}, rng, -0.1, 0.1);
    for (int j = 0; j < config.n_clusters; ++j) {
      double norm = 0.0;
      for (int i = 0; i < mem; ++i) norm += params.memory.at(i, j) * params.memory.at(i, j);
      norm = std::sqrt(norm);
      if (norm == 0.0) {
        params.memory.at(0, j) = 1.0;
      } else {
        for (int i = 0; i < mem; ++i) params.memory.at(i, j) /= norm;
      }
    }
    params.w_lc = Tensor::uniform({config.proj_dim, mem}, rng, -0.1, 0.1);
  }
  params.w_out = Tensor::uniform({2 * config.aggregate_dim()}, rng, -0.1, 0.1);
  return params;
}

std::vector<std::pair<std::string, Tensor*>> ModelParams::named() {
  std::vector<std::pair<std::string, Tensor*>> out = {
      {"w_gate", &w_gate}, {"w_value", &w_value}, {"w_att_q", &w_att_q}, {"w_att_a", &w_att_a}};
  for (std::size_t i = 0; i < conv_filters.size(); ++i) {
    out.emplace_back("conv_filters_" + std::to_string(i), &conv_filters[i]);
  }
  if (memory.defined()) out.emplace_back("memory", &memory);
  if (w_lc.defined()) out.emplace_back("w_lc", &w_lc);
  out.emplace_back("w_out", &w_out);
  return out;
}

std::vector<std::pair<std::string, const Tensor*>> ModelParams::named() const {
  std::vector<std::pair<std::string, const Tensor*>> out;
  for (auto& [name, tensor] : const_cast<ModelParams*>(this)->named()) {
    out.emplace_back(name, tensor);
  }
  return out;
}

ModelParams ModelParams::watch_on(Tape& tape) const {
  ModelParams tracked = *this;
  for (auto& [name, tensor] : tracked.named()) *tensor = tape.watch(*tensor);
  return tracked;
}

ModelParams ModelParams::clone() const {
  ModelParams copy;
  copy.w_gate = w_gate.clone();
  copy.w_value = w_value.clone();
  copy.w_att_q = w_att_q.clone();
  copy.w_att_a = w_att_a.clone();
  for (const Tensor& f : conv_filters) copy.conv_filters.push_back(f.clone());
  copy.memory = memory.clone();
  copy.w_lc = w_lc.clone();
  copy.w_out = w_out.clone();
  return copy;
}

// ---------------------------------------------------------------------------
// Building blocks
// ---------------------------------------------------------------------------

Tensor context_projection(const Tensor& x, const Tensor& w_gate, const Tensor& w_value) {
  return elementwise_mul(sigmoid(matmul(w_gate, x)), tanh(matmul(w_value, x)));
}

std::pair<Tensor, Tensor> attention(const Tensor& q_proj, const Tensor& a_proj,
                                    const Tensor& w_att_q, const Tensor& w_att_a) {
  // scores are (source x target); softmax over axis 0 makes each target
  // column a distribution over source positions
  Tensor q_scores = softmax(matmul(transpose(matmul(w_att_q, q_proj)), a_proj), 0);
  Tensor a_scores = softmax(matmul(transpose(matmul(w_att_a, a_proj)), q_proj), 0);
  Tensor h_q = matmul(q_proj, q_scores);
  Tensor h_a = matmul(a_proj, a_scores);
  return {h_q, h_a};
}

std::pair<Tensor, Tensor> compare(const Tensor& q_proj, const Tensor& a_proj, const Tensor& h_q,
                                  const Tensor& h_a) {
  return {elementwise_mul(a_proj, h_q), elementwise_mul(q_proj, h_a)};
}

Tensor latent_cluster(const Tensor& sentence, const Tensor& w_lc, const Tensor& memory,
                      int k_pool) {
  const int n_clusters = memory.dim(1);
  if (k_pool > n_clusters) {
    throw config_error("latent_cluster: k_pool = " + std::to_string(k_pool) +
                       " exceeds n_clusters = " + std::to_string(n_clusters));
  }
  Tensor similarity = vecmat(vecmat(sentence, w_lc), memory);
  KMaxResult top = k_max_pool(similarity, k_pool);
  Tensor weights = softmax(top.values, 0);
  return matvec(select_columns(memory, top.indices), weights);
}

std::pair<Tensor, Tensor> cluster_augment(const Tensor& q_proj, const Tensor& a_proj, Tensor c_q,
                                          Tensor c_a, const ModelParams& params,
                                          const ModelConfig& config, ForwardTrace* trace) {
  if (!config.lc_enabled) return {std::move(c_q), std::move(c_a)};

  Tensor lc_q = latent_cluster(mean(q_proj, 1), params.w_lc, params.memory, config.k_pool);
  Tensor lc_a = latent_cluster(mean(a_proj, 1), params.w_lc, params.memory, config.k_pool);
  if (trace != nullptr) {
    trace->lc_q = lc_q;
    trace->lc_a = lc_a;
  }
  Tensor c_q_new = concat(c_q, tile_columns(lc_q, c_q.dim(1)), 0);
  Tensor c_a_new = concat(c_a, tile_columns(lc_a, c_a.dim(1)), 0);
  return {c_q_new, c_a_new};
}

Tensor aggregate(const Tensor& c_q, const Tensor& c_a, const ModelParams& params,
                 const ModelConfig& config, ForwardTrace* trace, Rng* dropout_rng) {
  const int widest = config.max_filter_width();
  Tensor q_in = pad_columns(c_q, widest);
  Tensor a_in = pad_columns(c_a, widest);

  auto cnn = [&](const Tensor& input) {
    Tensor features;
    for (std::size_t i = 0; i < params.conv_filters.size(); ++i) {
      Tensor pooled = conv1d_max(input, params.conv_filters[i]);
      features = features.defined() ? concat(features, pooled, 0) : pooled;
    }
    return features;
  };

  Tensor r_q = cnn(q_in);
  Tensor r_a = cnn(a_in);
  if (trace != nullptr) {
    trace->r_q = r_q;
    trace->r_a = r_a;
  }

  Tensor joint = concat(r_q, r_a, 0);
  if (dropout_rng != nullptr) {
    joint = dropout(joint, config.dropout, *dropout_rng, true);
  }
  return sigmoid(dot(joint, params.w_out));
}

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

Model Model::init(ModelConfig config, Vocabulary vocab, Rng& rng) {
  config.validate();
  Model model;
  model.config = std::move(config);
  model.embedding = EmbeddingMatrix::random(vocab, model.config.embed_dim, rng);
  model.vocab = std::move(vocab);
  model.params = ModelParams::init(model.config, rng);
  return model;
}

TapeBinding Model::bind(Tape& tape, Rng& rng) const {
  TapeBinding binding;
  binding.tape = &tape;
  binding.params = params.watch_on(tape);
  binding.embedding_table = embedding.trainable ? tape.watch(embedding.table) : embedding.table;
  binding.rng = &rng;
  return binding;
}

ForwardTrace Model::forward(const std::vector<std::string>& question_tokens,
                            const std::vector<std::string>& answer_tokens, Mode mode,
                            const TapeBinding* binding) const {
  if (mode == Mode::train && binding == nullptr) {
    throw value_error("Model::forward: train mode requires a tape binding");
  }
  const ModelParams& p = binding != nullptr ? binding->params : params;
  const bool train = mode == Mode::train;
  Rng* rng = train ? binding->rng : nullptr;

  auto lookup = [&](const std::vector<std::string>& tokens) -> Tensor {
    if (contextual != nullptr) {
      const Tensor* stored = contextual->find(tokens);
      if (stored != nullptr) return *stored;  // frozen vectors, no gradient
    }
    const Tensor& table = binding != nullptr ? binding->embedding_table : embedding.table;
    return embed(tokens, vocab, table);
  };

  ForwardTrace trace;
  Tensor x_q = lookup(question_tokens);
  Tensor x_a = lookup(answer_tokens);
  if (train && config.dropout > 0.0) {
    x_q = dropout(x_q, config.dropout, *rng, true);
    x_a = dropout(x_a, config.dropout, *rng, true);
  }

  trace.q_proj = context_projection(x_q, p.w_gate, p.w_value);
  trace.a_proj = context_projection(x_a, p.w_gate, p.w_value);

  auto [h_q, h_a] = attention(trace.q_proj, trace.a_proj, p.w_att_q, p.w_att_a);
  trace.h_q = h_q;
  trace.h_a = h_a;

  auto [c_q, c_a] = compare(trace.q_proj, trace.a_proj, trace.h_q, trace.h_a);
  auto [c_q_new, c_a_new] =
      cluster_augment(trace.q_proj, trace.a_proj, std::move(c_q), std::move(c_a), p, config, &trace);
  trace.c_q = c_q_new;
  trace.c_a = c_a_new;

  Rng* agg_rng = (train && config.dropout > 0.0) ? rng : nullptr;
  trace.score = aggregate(trace.c_q, trace.c_a, p, config, &trace, agg_rng);
  return trace;
}

double Model::score_pair(const std::vector<std::string>& question_tokens,
                         const std::vector<std::string>& answer_tokens) const {
  return forward(question_tokens, answer_tokens, Mode::eval).score.item();
}

std::vector<std::pair<std::string, Tensor*>> Model::trainable() {
  std::vector<std::pair<std::string, Tensor*>> out = params.named();
  if (embedding.trainable) out.emplace_back("embedding", &embedding.table);
  return out;
}

}  // namespace cclc

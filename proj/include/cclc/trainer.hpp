#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "cclc/data.hpp"
#include "cclc/model.hpp"
#include "cclc/objectives.hpp"
#include "cclc/tape.hpp"

namespace cclc {

// Adam moments plus the shared training knobs. Moment tensors are parallel
// to the trainable-parameter order of the model they were initialized for.
struct OptimizerState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_norm = 5.0;
  std::int64_t step = 0;
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;

  static OptimizerState init(const std::vector<std::pair<std::string, Tensor*>>& params,
                             double learning_rate);
};

struct TrainConfig {
  Objective objective = Objective::pointwise;
  int batch_size = 64;     // pointwise only; listwise takes one group per step
  int max_epochs = 20;
  int patience = 5;        // dev evaluations without MAP improvement before stopping
  int eval_every = 0;      // steps between dev evaluations; 0 means once per epoch
  std::uint64_t seed = 42;
  double learning_rate = 1e-3;

  void validate() const;
};

// Everything needed to resume or transfer: model, optimizer, bookkeeping.
struct Checkpoint {
  static constexpr std::uint32_t current_version = 1;

  std::uint32_t version = current_version;
  ModelConfig config;
  ModelParams params;
  Tensor embedding_table;
  bool embedding_trainable = true;
  Vocabulary vocab;
  OptimizerState optimizer;
  double best_dev_map = 0.0;
  std::string rng_state;
};

struct EvalPoint {
  std::int64_t step = 0;
  double map = 0.0;
  double mrr = 0.0;
};

struct TrainResult {
  Checkpoint checkpoint;          // best dev-MAP state seen
  std::vector<EvalPoint> evals;   // every dev evaluation, in order
  std::vector<double> step_losses;
  std::int64_t steps = 0;
};

// Scales every gradient by threshold / norm when the global L2 norm exceeds
// the threshold; otherwise a no-op.
GradientMap clip_by_global_norm(GradientMap grads, double threshold);

// One bias-corrected Adam update over `params` (clipping already applied).
// Moments live in `state` at matching positions.
void adam_step(const std::vector<std::pair<std::string, Tensor*>>& params,
               const std::vector<const Tensor*>& grads, OptimizerState& state);

// Optimizes the model in place: shuffled pointwise batches or one question
// group per listwise step, dev-MAP early stopping, best-checkpoint
// bookkeeping. The model ends up holding the best parameters found.
TrainResult train(Model& model, const std::vector<QuestionGroup>& train_groups,
                  const std::vector<QuestionGroup>& dev_groups, const TrainConfig& config);

// Trains on the source corpus, then fine-tunes on the target corpus from
// the pretrained parameters with a fresh optimizer. The vocabulary is fixed
// at pretraining time; target tokens outside it map to UNK. Shape-bearing
// config fields must match between the two stages.
TrainResult pretrain_finetune(const std::vector<QuestionGroup>& source_train,
                              const std::vector<QuestionGroup>& source_dev,
                              const std::vector<QuestionGroup>& target_train,
                              const std::vector<QuestionGroup>& target_dev,
                              const ModelConfig& source_config, const ModelConfig& target_config,
                              const TrainConfig& source_train_config,
                              const TrainConfig& target_train_config);

// Checkpoint file: magic `CCLC`, little-endian u32 version, length-prefixed
// sections (config text, vocabulary, parameter tensors, optimizer state,
// trailer). Writes are atomic: a temp file is renamed into place.
void save_checkpoint(const Checkpoint& checkpoint, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

Checkpoint make_checkpoint(const Model& model, const OptimizerState& optimizer,
                           double best_dev_map, const std::string& rng_state);
Model model_from_checkpoint(const Checkpoint& checkpoint);

}  // namespace cclc

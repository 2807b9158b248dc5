#include "cclc/trainer.hpp"

#include <algorithm>
#include <cmath>

#include "cclc/error.hpp"
#include "cclc/evaluation.hpp"
#include "cclc/objectives.hpp"
#include "cclc/rng.hpp"

namespace cclc {

OptimizerState OptimizerState::init(const std::vector<std::pair<std::string, Tensor*>>& params,
                                    double learning_rate) {
  OptimizerState state;
  state.learning_rate = learning_rate;
  for (const auto& [name, tensor] : params) {
    state.first_moment.emplace_back(tensor->shape());
    state.second_moment.emplace_back(tensor->shape());
  }
  return state;
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw config_error("train config: batch_size must be positive");
  if (max_epochs < 0) throw config_error("train config: max_epochs must be nonnegative");
  if (patience < 1) throw config_error("train config: patience must be >= 1");
  if (eval_every < 0) throw config_error("train config: eval_every must be nonnegative");
  if (learning_rate <= 0.0) throw config_error("train config: learning rate must be positive");
}

GradientMap clip_by_global_norm(GradientMap grads, double threshold) {
  if (threshold <= 0.0) throw value_error("clip_by_global_norm: threshold must be positive");
  const double norm = grads.global_norm();
  if (norm > threshold) grads.scale_all(threshold / norm);
  return grads;
}

void adam_step(const std::vector<std::pair<std::string, Tensor*>>& params,
               const std::vector<const Tensor*>& grads, OptimizerState& state) {
  if (params.size() != grads.size() || params.size() != state.first_moment.size()) {
    throw value_error("adam_step: parameter, gradient, and moment counts differ");
  }

  state.step += 1;
  const double bias1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bias2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));

  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor& param = *params[p].second;
    const Tensor& grad = *grads[p];
    if (grad.shape() != param.shape()) {
      throw shape_error("adam_step: gradient shape " + shape_string(grad.shape()) +
                        " does not match parameter '" + params[p].first + "' of shape " +
                        shape_string(param.shape()));
    }
    Tensor& m = state.first_moment[p];
    Tensor& v = state.second_moment[p];
    double* mp = m.data();
    double* vp = v.data();
    double* w = param.data();
    const double* g = grad.data();
    for (std::size_t i = 0; i < param.size(); ++i) {
      mp[i] = state.beta1 * mp[i] + (1.0 - state.beta1) * g[i];
      vp[i] = state.beta2 * vp[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double m_hat = mp[i] / bias1;
      const double v_hat = vp[i] / bias2;
      w[i] -= state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon);
    }
  }
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

namespace {

// Collects the per-parameter gradients in trainable order. The binding's
// tracked tensors carry the node ids the gradient map is keyed by.
std::vector<const Tensor*> gradient_list(const GradientMap& grads, const TapeBinding& binding,
                                         bool embedding_trainable,
                                         std::vector<Tensor>& storage) {
  ModelParams& tracked = const_cast<ModelParams&>(binding.params);
  storage.clear();
  for (auto& [name, tensor] : tracked.named()) storage.push_back(grads.at(*tensor));
  if (embedding_trainable) storage.push_back(grads.at(binding.embedding_table));
  std::vector<const Tensor*> out;
  out.reserve(storage.size());
  for (const Tensor& g : storage) out.push_back(&g);
  return out;
}

double run_step(Model& model, const std::vector<const QAPair*>& batch, Objective objective,
                OptimizerState& optimizer, Rng& rng) {
  Tape tape;
  TapeBinding binding = model.bind(tape, rng);

  std::vector<Tensor> scores;
  std::vector<int> labels;
  scores.reserve(batch.size());
  labels.reserve(batch.size());
  for (const QAPair* pair : batch) {
    scores.push_back(model.forward(pair->question, pair->answer, Mode::train, &binding).score);
    labels.push_back(pair->label);
  }

  Tensor stacked = stack(scores);
  Tensor loss = objective == Objective::pointwise ? pointwise_loss(stacked, labels)
                                                  : listwise_loss(stacked, labels);

  GradientMap grads = clip_by_global_norm(tape.backward(loss), optimizer.clip_norm);
  std::vector<Tensor> storage;
  std::vector<const Tensor*> ordered =
      gradient_list(grads, binding, model.embedding.trainable, storage);
  adam_step(model.trainable(), ordered, optimizer);
  return loss.item();
}

}  // namespace

TrainResult train(Model& model, const std::vector<QuestionGroup>& train_groups,
                  const std::vector<QuestionGroup>& dev_groups, const TrainConfig& config) {
  config.validate();
  if (train_groups.empty()) throw data_error("train: empty train split");
  if (dev_groups.empty()) throw data_error("train: empty dev split");

  Rng rng(config.seed);

  TrainResult result;
  result.checkpoint = make_checkpoint(model, OptimizerState(), 0.0, rng.save_state());
  if (config.max_epochs == 0) return result;

  OptimizerState optimizer = OptimizerState::init(model.trainable(), config.learning_rate);

  const std::vector<QAPair> pointwise_pairs =
      config.objective == Objective::pointwise ? to_pointwise(train_groups) : std::vector<QAPair>();

  double best_map = -1.0;
  int evals_without_improvement = 0;
  std::int64_t steps_since_eval = 0;
  bool stop = false;

  auto run_eval = [&]() {
    const EvalReport report = evaluate(model, dev_groups);
    result.evals.push_back({result.steps, report.map, report.mrr});
    steps_since_eval = 0;
    if (report.map > best_map) {
      best_map = report.map;
      evals_without_improvement = 0;
      result.checkpoint = make_checkpoint(model, optimizer, best_map, rng.save_state());
    } else {
      evals_without_improvement += 1;
      if (evals_without_improvement >= config.patience) stop = true;
    }
  };

  for (int epoch = 0; epoch < config.max_epochs && !stop; ++epoch) {
    if (config.objective == Objective::pointwise) {
      std::vector<const QAPair*> order;
      order.reserve(pointwise_pairs.size());
      for (const QAPair& pair : pointwise_pairs) order.push_back(&pair);
      rng.shuffle(order);

      for (std::size_t start = 0; start < order.size() && !stop; start += config.batch_size) {
        const std::size_t end = std::min(order.size(), start + config.batch_size);
        std::vector<const QAPair*> batch(order.begin() + static_cast<std::ptrdiff_t>(start),
                                         order.begin() + static_cast<std::ptrdiff_t>(end));
        result.step_losses.push_back(
            run_step(model, batch, config.objective, optimizer, rng));
        result.steps += 1;
        steps_since_eval += 1;
        if (config.eval_every > 0 && steps_since_eval >= config.eval_every) run_eval();
      }
    } else {
      // one question group per step, as the listwise objective implies
      std::vector<const QuestionGroup*> order;
      order.reserve(train_groups.size());
      for (const QuestionGroup& group : train_groups) order.push_back(&group);
      rng.shuffle(order);

      for (const QuestionGroup* group : order) {
        std::vector<QAPair> pairs = to_pointwise({*group});
        std::vector<const QAPair*> batch;
        batch.reserve(pairs.size());
        for (const QAPair& pair : pairs) batch.push_back(&pair);
        result.step_losses.push_back(
            run_step(model, batch, config.objective, optimizer, rng));
        result.steps += 1;
        steps_since_eval += 1;
        if (config.eval_every > 0 && steps_since_eval >= config.eval_every) run_eval();
        if (stop) break;
      }
    }
    if (!stop && config.eval_every == 0) run_eval();
  }
  if (!stop && steps_since_eval > 0) run_eval();

  // leave the model holding the best parameters seen
  if (best_map >= 0.0) {
    Model best = model_from_checkpoint(result.checkpoint);
    model.params = std::move(best.params);
    model.embedding = std::move(best.embedding);
  }
  return result;
}

// ---------------------------------------------------------------------------
// Transfer learning
// ---------------------------------------------------------------------------

static void require_matching_shapes(const ModelConfig& source, const ModelConfig& target) {
  const bool mismatch =
      source.embed_dim != target.embed_dim || source.proj_dim != target.proj_dim ||
      source.filter_widths != target.filter_widths ||
      source.filters_per_width != target.filters_per_width ||
      source.lc_enabled != target.lc_enabled || source.n_clusters != target.n_clusters ||
      source.resolved_mem_dim() != target.resolved_mem_dim();
  if (mismatch) {
    throw config_error(
        "pretrain_finetune: source and target configs disagree on parameter shapes");
  }
}

TrainResult pretrain_finetune(const std::vector<QuestionGroup>& source_train,
                              const std::vector<QuestionGroup>& source_dev,
                              const std::vector<QuestionGroup>& target_train,
                              const std::vector<QuestionGroup>& target_dev,
                              const ModelConfig& source_config, const ModelConfig& target_config,
                              const TrainConfig& source_train_config,
                              const TrainConfig& target_train_config) {
  source_config.validate();
  target_config.validate();
  require_matching_shapes(source_config, target_config);

  // vocabulary is fixed at pretraining time; target OOV tokens become UNK
  Rng init_rng(source_train_config.seed);
  Model model = Model::init(source_config, build_vocab(source_train, 1), init_rng);

  TrainResult pretrain_result = train(model, source_train, source_dev, source_train_config);
  if (target_train_config.max_epochs == 0) return pretrain_result;

  model.config = target_config;
  model.config.embed_dim = source_config.embed_dim;  // table width is fixed by pretraining

  // fresh optimizer: source-corpus moment statistics are stale
  TrainResult finetune_result = train(model, target_train, target_dev, target_train_config);
  return finetune_result;
}

}  // namespace cclc

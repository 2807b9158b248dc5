#include <doctest.h>

#include <cmath>
#include <vector>

#include "cclc/error.hpp"
#include "cclc/model.hpp"
#include "cclc/objectives.hpp"
#include "cclc/rng.hpp"
#include "support/oracles.hpp"

using namespace cclc;

namespace {

ModelConfig tiny_config() {
  ModelConfig config;
  config.embed_dim = 4;
  config.proj_dim = 3;
  config.filter_widths = {1, 2};
  config.filters_per_width = 2;
  config.lc_enabled = true;
  config.n_clusters = 2;
  config.k_pool = 2;
  config.mem_dim = 0;  // = proj_dim
  config.dropout = 0.0;
  return config;
}

Vocabulary tiny_vocab() {
  return Vocabulary::from_tokens({Vocabulary::pad_token(), Vocabulary::unk_token(), "sun", "moon",
                                  "tide", "rises", "sets", "east", "west", "slow"});
}

// direct recomputation of sigmoid(w_gate x) ⊙ tanh(w_value x)
Tensor projection_oracle(const Tensor& x, const Tensor& w_gate, const Tensor& w_value) {
  const int l = w_gate.dim(0), d = w_gate.dim(1), t = x.dim(1);
  Tensor out({l, t});
  for (int i = 0; i < l; ++i) {
    for (int j = 0; j < t; ++j) {
      double gate = 0.0, value = 0.0;
      for (int p = 0; p < d; ++p) {
        gate += w_gate.at(i, p) * x.at(p, j);
        value += w_value.at(i, p) * x.at(p, j);
      }
      out.at(i, j) = 1.0 / (1.0 + std::exp(-gate)) * std::tanh(value);
    }
  }
  return out;
}

}  // namespace

TEST_SUITE("context projection") {
  TEST_CASE("zero weights give a zero matrix") {
    Tensor x({4, 3}, std::vector<double>(12, 1.0));
    Tensor out = context_projection(x, Tensor({3, 4}), Tensor({3, 4}));
    for (std::size_t i = 0; i < out.size(); ++i) CHECK(out.data()[i] == 0.0);
  }

  TEST_CASE("entries stay inside (-1, 1)") {
    Rng rng(3);
    Tensor x = Tensor::uniform({4, 6}, rng, -3.0, 3.0);
    Tensor w1 = Tensor::uniform({3, 4}, rng, -2.0, 2.0);
    Tensor w2 = Tensor::uniform({3, 4}, rng, -2.0, 2.0);
    Tensor out = context_projection(x, w1, w2);
    for (std::size_t i = 0; i < out.size(); ++i) {
      CHECK(out.data()[i] > -1.0);
      CHECK(out.data()[i] < 1.0);
    }
  }

  TEST_CASE("matches the direct formula") {
    Rng rng(5);
    Tensor x = Tensor::uniform({3, 2}, rng, -1.0, 1.0);
    Tensor w1 = Tensor::uniform({2, 3}, rng, -1.0, 1.0);
    Tensor w2 = Tensor::uniform({2, 3}, rng, -1.0, 1.0);
    Tensor out = context_projection(x, w1, w2);
    Tensor expected = projection_oracle(x, w1, w2);
    for (std::size_t i = 0; i < out.size(); ++i) {
      CHECK(out.data()[i] == doctest::Approx(expected.data()[i]).epsilon(1e-12));
    }
  }
}

TEST_SUITE("attention") {
  TEST_CASE("single source position makes every aligned column that position") {
    Rng rng(7);
    Tensor q_proj = Tensor::uniform({3, 1}, rng, -1.0, 1.0);  // one question word
    Tensor a_proj = Tensor::uniform({3, 4}, rng, -1.0, 1.0);
    Tensor wq = Tensor::uniform({3, 3}, rng, -1.0, 1.0);
    Tensor wa = Tensor::uniform({3, 3}, rng, -1.0, 1.0);
    auto [h_q, h_a] = attention(q_proj, a_proj, wq, wa);
    CHECK(h_q.shape() == std::vector<int>{3, 4});
    for (int j = 0; j < 4; ++j) {
      for (int i = 0; i < 3; ++i) {
        CHECK(h_q.at(i, j) == doctest::Approx(q_proj.at(i, 0)).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("toy case matches a hand recomputation") {
    Rng rng(11);
    const int l = 2, q_len = 3, a_len = 2;
    Tensor q_proj = Tensor::uniform({l, q_len}, rng, -1.0, 1.0);
    Tensor a_proj = Tensor::uniform({l, a_len}, rng, -1.0, 1.0);
    Tensor wq = Tensor::uniform({l, l}, rng, -1.0, 1.0);
    Tensor wa = Tensor::uniform({l, l}, rng, -1.0, 1.0);

    auto [h_q, h_a] = attention(q_proj, a_proj, wq, wa);
    CHECK(h_q.shape() == std::vector<int>{l, a_len});
    CHECK(h_a.shape() == std::vector<int>{l, q_len});

    // scores[s][t] = (wq q_proj)[:, s] . a_proj[:, t], softmaxed over s
    Tensor projected = oracles::matmul(wq, q_proj);
    for (int t = 0; t < a_len; ++t) {
      std::vector<double> column(q_len);
      for (int s = 0; s < q_len; ++s) {
        double acc = 0.0;
        for (int i = 0; i < l; ++i) acc += projected.at(i, s) * a_proj.at(i, t);
        column[static_cast<std::size_t>(s)] = acc;
      }
      std::vector<double> weights = oracles::softmax(column);
      double weight_total = 0.0;
      for (int i = 0; i < l; ++i) {
        double expected = 0.0;
        for (int s = 0; s < q_len; ++s) {
          expected += q_proj.at(i, s) * weights[static_cast<std::size_t>(s)];
        }
        CHECK(h_q.at(i, t) == doctest::Approx(expected).epsilon(1e-12));
      }
      for (double w : weights) {
        CHECK(w > 0.0);
        weight_total += w;
      }
      CHECK(std::abs(weight_total - 1.0) <= 1e-12);
    }
  }
}

TEST_SUITE("compare") {
  TEST_CASE("all-ones alignment returns the other side unchanged") {
    Rng rng(13);
    Tensor q_proj = Tensor::uniform({3, 2}, rng, -1.0, 1.0);
    Tensor a_proj = Tensor::uniform({3, 4}, rng, -1.0, 1.0);
    Tensor ones_q({3, 4}, std::vector<double>(12, 1.0));
    Tensor ones_a({3, 2}, std::vector<double>(6, 1.0));
    auto [c_q, c_a] = compare(q_proj, a_proj, ones_q, ones_a);
    for (std::size_t i = 0; i < c_q.size(); ++i) CHECK(c_q.data()[i] == a_proj.data()[i]);
    for (std::size_t i = 0; i < c_a.size(); ++i) CHECK(c_a.data()[i] == q_proj.data()[i]);
  }

  TEST_CASE("zero side zeroes the comparison") {
    Rng rng(17);
    Tensor a_proj({3, 4});
    Tensor h_q = Tensor::uniform({3, 4}, rng, -1.0, 1.0);
    auto [c_q, c_a] = compare(Tensor::uniform({3, 2}, rng, -1.0, 1.0), a_proj, h_q,
                              Tensor::uniform({3, 2}, rng, -1.0, 1.0));
    for (std::size_t i = 0; i < c_q.size(); ++i) CHECK(c_q.data()[i] == 0.0);
  }
}

TEST_SUITE("latent cluster") {
  TEST_CASE("a single cluster is returned verbatim whatever the sentence") {
    Rng rng(19);
    Tensor memory = Tensor::uniform({3, 1}, rng, -1.0, 1.0);
    Tensor w_lc = Tensor::uniform({4, 3}, rng, -1.0, 1.0);
    for (int trial = 0; trial < 3; ++trial) {
      Tensor sentence = Tensor::uniform({4}, rng, -2.0, 2.0);
      Tensor out = latent_cluster(sentence, w_lc, memory, 1);
      for (int i = 0; i < 3; ++i) CHECK(out.at(i) == memory.at(i, 0));
    }
  }

  TEST_CASE("matches the sort/softmax/sum oracle on n=4 k=2") {
    Rng rng(23);
    const int l = 3, mem = 2, n = 4, k = 2;
    Tensor sentence = Tensor::uniform({l}, rng, -1.0, 1.0);
    Tensor w_lc = Tensor::uniform({l, mem}, rng, -1.0, 1.0);
    Tensor memory = Tensor::uniform({mem, n}, rng, -1.0, 1.0);

    Tensor out = latent_cluster(sentence, w_lc, memory, k);

    // similarity p = s^T W M, recomputed by hand
    std::vector<double> p(n, 0.0);
    for (int j = 0; j < n; ++j) {
      for (int m = 0; m < mem; ++m) {
        double sw = 0.0;
        for (int i = 0; i < l; ++i) sw += sentence.at(i) * w_lc.at(i, m);
        p[static_cast<std::size_t>(j)] += sw * memory.at(m, j);
      }
    }
    auto [top_vals, top_idx] = oracles::k_max(p, k);
    std::vector<double> alpha = oracles::softmax(top_vals);
    for (int i = 0; i < mem; ++i) {
      double expected = 0.0;
      for (int j = 0; j < k; ++j) {
        expected += alpha[static_cast<std::size_t>(j)] *
                    memory.at(i, top_idx[static_cast<std::size_t>(j)]);
      }
      CHECK(out.at(i) == doctest::Approx(expected).epsilon(1e-12));
    }
  }

  TEST_CASE("k above the cluster count is a config error") {
    Tensor memory({2, 3});
    Tensor w_lc({4, 2});
    CHECK_THROWS_AS(latent_cluster(Tensor({4}), w_lc, memory, 4), config_error);
  }
}

TEST_SUITE("cluster augmentation") {
  TEST_CASE("disabled lc passes comparison matrices through") {
    ModelConfig config = tiny_config();
    config.lc_enabled = false;
    Rng rng(29);
    ModelParams params = ModelParams::init(config, rng);
    Tensor c_q = Tensor::uniform({3, 4}, rng, -1.0, 1.0);
    Tensor c_a = Tensor::uniform({3, 2}, rng, -1.0, 1.0);
    auto [c_q_new, c_a_new] = cluster_augment(Tensor({3, 2}), Tensor({3, 4}), c_q, c_a, params,
                                              config, nullptr);
    CHECK(c_q_new.data() == c_q.data());
    CHECK(c_a_new.data() == c_a.data());
  }

  TEST_CASE("appended block has mem_dim rows, identical across time") {
    ModelConfig config = tiny_config();
    Rng rng(31);
    ModelParams params = ModelParams::init(config, rng);
    Tensor q_proj = Tensor::uniform({3, 2}, rng, -1.0, 1.0);
    Tensor a_proj = Tensor::uniform({3, 5}, rng, -1.0, 1.0);
    Tensor c_q = Tensor::uniform({3, 5}, rng, -1.0, 1.0);
    Tensor c_a = Tensor::uniform({3, 2}, rng, -1.0, 1.0);

    ForwardTrace trace;
    auto [c_q_new, c_a_new] = cluster_augment(q_proj, a_proj, c_q, c_a, params, config, &trace);
    CHECK(c_q_new.shape() == std::vector<int>{3 + 3, 5});
    CHECK(c_a_new.shape() == std::vector<int>{3 + 3, 2});
    for (int t = 0; t < 5; ++t) {
      for (int i = 0; i < 3; ++i) {
        CHECK(c_q_new.at(3 + i, t) == c_q_new.at(3 + i, 0));
        CHECK(c_q_new.at(3 + i, t) == trace.lc_q.at(i));
      }
    }
  }
}

TEST_SUITE("aggregation") {
  TEST_CASE("zero output weight scores one half") {
    ModelConfig config = tiny_config();
    Rng rng(37);
    ModelParams params = ModelParams::init(config, rng);
    params.w_out = Tensor({2 * config.aggregate_dim()});
    Tensor c_q = Tensor::uniform({config.comparison_dim(), 3}, rng, -1.0, 1.0);
    Tensor c_a = Tensor::uniform({config.comparison_dim(), 4}, rng, -1.0, 1.0);
    Tensor score = aggregate(c_q, c_a, params, config, nullptr, nullptr);
    CHECK(score.item() == 0.5);
  }

  TEST_CASE("matches the conv + sigmoid oracle on a toy config") {
    ModelConfig config;
    config.embed_dim = 3;
    config.proj_dim = 3;
    config.filter_widths = {1, 2};
    config.filters_per_width = 2;
    config.lc_enabled = false;
    config.dropout = 0.0;
    Rng rng(41);
    ModelParams params = ModelParams::init(config, rng);

    Tensor c_q = Tensor::uniform({3, 4}, rng, -1.0, 1.0);
    Tensor c_a = Tensor::uniform({3, 3}, rng, -1.0, 1.0);
    ForwardTrace trace;
    Tensor score = aggregate(c_q, c_a, params, config, &trace, nullptr);

    std::vector<double> r_q, r_a;
    for (const Tensor& filters : params.conv_filters) {
      for (double v : oracles::conv1d_max(c_q, filters)) r_q.push_back(v);
      for (double v : oracles::conv1d_max(c_a, filters)) r_a.push_back(v);
    }
    double logit = 0.0;
    for (std::size_t i = 0; i < r_q.size(); ++i) logit += r_q[i] * params.w_out.at(static_cast<int>(i));
    for (std::size_t i = 0; i < r_a.size(); ++i) {
      logit += r_a[i] * params.w_out.at(static_cast<int>(r_q.size() + i));
    }
    const double expected = 1.0 / (1.0 + std::exp(-logit));
    CHECK(score.item() == doctest::Approx(expected).epsilon(1e-10));
    CHECK(score.item() > 0.0);
    CHECK(score.item() < 1.0);
  }
}

TEST_SUITE("model forward") {
  TEST_CASE("eval mode is deterministic") {
    Rng rng(43);
    Model model = Model::init(tiny_config(), tiny_vocab(), rng);
    const std::vector<std::string> q = {"sun", "rises", "east"};
    const std::vector<std::string> a = {"moon", "sets", "west", "slow"};
    const double first = model.score_pair(q, a);
    const double second = model.score_pair(q, a);
    CHECK(first == second);
    CHECK(first > 0.0);
    CHECK(first < 1.0);
  }

  TEST_CASE("all-zero parameters score one half") {
    Rng rng(47);
    Model model = Model::init(tiny_config(), tiny_vocab(), rng);
    for (auto& [name, tensor] : model.params.named()) *tensor = Tensor(tensor->shape());
    // zero memory columns are invalid for the unit-norm invariant but fine
    // for this degenerate check
    const double score = model.score_pair({"sun"}, {"moon", "tide"});
    CHECK(score == 0.5);
  }

  TEST_CASE("swapping question and answer changes the score in general") {
    Rng rng(53);
    Model model = Model::init(tiny_config(), tiny_vocab(), rng);
    const std::vector<std::string> q = {"sun", "rises"};
    const std::vector<std::string> a = {"moon", "sets", "west"};
    CHECK(model.score_pair(q, a) != model.score_pair(a, q));
  }

  TEST_CASE("single cluster appends the same block whatever the sentences") {
    ModelConfig config = tiny_config();
    config.n_clusters = 1;
    config.k_pool = 1;
    Rng rng(59);
    Model model = Model::init(config, tiny_vocab(), rng);
    ForwardTrace t1 = model.forward({"sun", "rises"}, {"moon"}, Mode::eval);
    ForwardTrace t2 = model.forward({"tide", "sets", "west"}, {"east", "slow"}, Mode::eval);
    for (int i = 0; i < config.resolved_mem_dim(); ++i) {
      CHECK(t1.lc_q.at(i) == model.params.memory.at(i, 0));
      CHECK(t1.lc_a.at(i) == model.params.memory.at(i, 0));
      CHECK(t2.lc_q.at(i) == model.params.memory.at(i, 0));
    }
  }

  TEST_CASE("contextual vectors take precedence and fall back cleanly") {
    ModelConfig config = tiny_config();
    Rng rng(61);
    Model model = Model::init(config, tiny_vocab(), rng);

    ContextualStore store;  // empty: always falls back
    model.contextual = &store;
    const double fallback = model.score_pair({"sun"}, {"moon"});
    model.contextual = nullptr;
    CHECK(fallback == model.score_pair({"sun"}, {"moon"}));
  }

  TEST_CASE("train mode without a binding is rejected") {
    Rng rng(67);
    Model model = Model::init(tiny_config(), tiny_vocab(), rng);
    CHECK_THROWS_AS(model.forward({"sun"}, {"moon"}, Mode::train), value_error);
  }

  TEST_CASE("every trace tensor stays finite and the score stays in (0,1)") {
    Rng rng(71);
    Model model = Model::init(tiny_config(), tiny_vocab(), rng);
    const std::vector<std::string> pool = {"sun", "moon", "tide", "rises", "sets",
                                           "east", "west", "slow", "?", "unknown-token"};
    for (int trial = 0; trial < 50; ++trial) {
      std::vector<std::string> q, a;
      for (int t = 0; t < 1 + static_cast<int>(rng.index(5)); ++t) q.push_back(pool[rng.index(pool.size())]);
      for (int t = 0; t < 1 + static_cast<int>(rng.index(6)); ++t) a.push_back(pool[rng.index(pool.size())]);
      ForwardTrace trace = model.forward(q, a, Mode::eval);
      for (const Tensor* t :
           {&trace.q_proj, &trace.a_proj, &trace.h_q, &trace.h_a, &trace.c_q, &trace.c_a,
            &trace.lc_q, &trace.lc_a, &trace.r_q, &trace.r_a, &trace.score}) {
        CHECK(t->all_finite());
      }
      CHECK(trace.score.item() > 0.0);
      CHECK(trace.score.item() < 1.0);
    }
  }
}

TEST_SUITE("objectives") {
  TEST_CASE("listwise loss is zero when the softmax matches the labels") {
    // two positives with equal scores: S = y' = [0.5, 0.5]
    Tensor scores({2}, {0.7, 0.7});
    CHECK(listwise_loss(scores, {1, 1}).item() == doctest::Approx(0.0).epsilon(1e-12));
  }

  TEST_CASE("listwise loss of y=[1,0] at equal scores is ln 2") {
    Tensor scores({2}, {0.4, 0.4});
    CHECK(listwise_loss(scores, {1, 0}).item() ==
          doctest::Approx(std::log(2.0)).epsilon(1e-12));
  }

  TEST_CASE("listwise loss rejects all-negative groups") {
    Tensor scores({2}, {0.1, 0.9});
    CHECK_THROWS_AS(listwise_loss(scores, {0, 0}), value_error);
  }

  TEST_CASE("listwise loss is nonnegative on a thousand random batches") {
    Rng rng(71);
    for (int trial = 0; trial < 1000; ++trial) {
      const int n = 2 + static_cast<int>(rng.index(8));
      Tensor scores = Tensor::uniform({n}, rng, 0.001, 0.999);
      std::vector<int> labels(static_cast<std::size_t>(n), 0);
      labels[rng.index(static_cast<std::size_t>(n))] = 1;
      for (int i = 0; i < n; ++i) {
        if (rng.uniform(0.0, 1.0) < 0.3) labels[static_cast<std::size_t>(i)] = 1;
      }
      CHECK(listwise_loss(scores, labels).item() >= 0.0);
    }
  }

  TEST_CASE("pointwise loss closed-form values") {
    Tensor half({1}, {0.5});
    CHECK(pointwise_loss(half, {1}).item() == doctest::Approx(std::log(2.0)).epsilon(1e-12));

    Tensor tiny({1}, {1e-9});
    CHECK(pointwise_loss(tiny, {0}).item() == doctest::Approx(0.0).epsilon(1e-6));
  }

  TEST_CASE("pointwise loss equals the per-element oracle") {
    Rng rng(73);
    const int n = 16;
    Tensor scores = Tensor::uniform({n}, rng, 0.01, 0.99);
    std::vector<int> labels;
    for (int i = 0; i < n; ++i) labels.push_back(rng.index(2) == 0 ? 0 : 1);

    double expected = 0.0;
    for (int i = 0; i < n; ++i) {
      const double s = scores.at(i);
      expected -= labels[static_cast<std::size_t>(i)] != 0 ? std::log(s) : std::log(1.0 - s);
    }
    expected /= n;
    CHECK(pointwise_loss(scores, labels).item() == doctest::Approx(expected).epsilon(1e-12));
  }

  TEST_CASE("pointwise loss is permutation invariant") {
    Tensor scores({4}, {0.2, 0.9, 0.5, 0.7});
    std::vector<int> labels = {0, 1, 1, 0};
    Tensor shuffled({4}, {0.7, 0.5, 0.9, 0.2});
    std::vector<int> shuffled_labels = {0, 1, 1, 0};
    CHECK(pointwise_loss(scores, labels).item() ==
          doctest::Approx(pointwise_loss(shuffled, shuffled_labels).item()).epsilon(1e-15));
  }

  TEST_CASE("loss gradients with respect to scores match finite differences") {
    Rng rng(79);
    Tensor score_values = Tensor::uniform({5}, rng, 0.05, 0.95);
    const std::vector<int> labels = {1, 0, 0, 1, 0};

    for (int which : {0, 1}) {
      Tape tape;
      Tensor scores = tape.watch(score_values);
      Tensor loss = which == 0 ? listwise_loss(scores, labels) : pointwise_loss(scores, labels);
      GradientMap grads = tape.backward(loss);
      const Tensor& g = grads.at(scores);

      std::vector<double> numeric = oracles::finite_difference(score_values, [&] {
        return (which == 0 ? listwise_loss(score_values, labels)
                           : pointwise_loss(score_values, labels))
            .item();
      });
      std::vector<double> analytic(g.data(), g.data() + g.size());
      CHECK(oracles::max_relative_error(analytic, numeric) <= 1e-4);
    }
  }
}

TEST_SUITE("full-model gradients") {
  TEST_CASE("both losses match finite differences on the tiny config") {
    ModelConfig config = tiny_config();
    Rng rng(83);
    Model model = Model::init(config, tiny_vocab(), rng);
    // scale to a well-conditioned evaluation point: at the +-0.1 init the
    // comparison features are products of two ~1e-2 matrices and true
    // gradients sit at the 1e-8 floor, below what h=1e-5 differences can
    // certify
    for (auto& [name, tensor] : model.params.named()) {
      for (std::size_t i = 0; i < tensor->size(); ++i) tensor->data()[i] *= 7.0;
    }
    for (std::size_t i = 0; i < model.embedding.table.size(); ++i) {
      model.embedding.table.data()[i] *= 7.0;
    }

    const std::vector<std::string> question = {"sun", "rises", "east", "?"};
    const std::vector<std::vector<std::string>> answers = {
        {"sun", "rises", "east"}, {"moon", "sets"}, {"tide", "slow", "west", "moon"}};
    const std::vector<int> labels = {1, 0, 0};

    auto loss_value = [&](Objective objective) {
      std::vector<Tensor> scores;
      for (const auto& answer : answers) {
        scores.push_back(model.forward(question, answer, Mode::eval).score);
      }
      Tensor stacked = stack(scores);
      return (objective == Objective::listwise ? listwise_loss(stacked, labels)
                                               : pointwise_loss(stacked, labels))
          .item();
    };

    for (Objective objective : {Objective::listwise, Objective::pointwise}) {
      Tape tape;
      Rng step_rng(1);
      TapeBinding binding = model.bind(tape, step_rng);
      std::vector<Tensor> scores;
      for (const auto& answer : answers) {
        scores.push_back(model.forward(question, answer, Mode::train, &binding).score);
      }
      Tensor stacked = stack(scores);
      Tensor loss = objective == Objective::listwise ? listwise_loss(stacked, labels)
                                                     : pointwise_loss(stacked, labels);
      GradientMap grads = tape.backward(loss);

      auto check_param = [&](const char* name, Tensor& value, const Tensor& tracked) {
        CAPTURE(name);
        std::vector<double> numeric =
            oracles::finite_difference(value, [&] { return loss_value(objective); });
        const Tensor& g = grads.at(tracked);
        std::vector<double> analytic(g.data(), g.data() + g.size());
        CHECK(oracles::max_relative_error(analytic, numeric) <= 1e-4);
      };

      auto named_values = model.params.named();
      auto named_tracked = binding.params.named();
      for (std::size_t i = 0; i < named_values.size(); ++i) {
        check_param(named_values[i].first.c_str(), *named_values[i].second,
                    *named_tracked[i].second);
      }
      check_param("embedding", model.embedding.table, binding.embedding_table);
    }
  }
}

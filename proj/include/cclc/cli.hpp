#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace cclc {

// Everything a command run needs, filled from flags and the optional
// `key = value` config file (flag > file > default).
struct RunConfig {
  std::string command;

  std::string train_path;
  std::string dev_path;
  std::string test_path;
  std::string embeddings_path;
  std::string contextual_path;
  std::string checkpoint_path;  // input checkpoint
  std::string out_path;         // output checkpoint / report
  std::string json_path;        // machine-readable evaluation summary

  std::string objective = "pointwise";
  std::string filter_mode = "at-least-one-positive";

  // model
  int embed_dim = 100;
  int proj_dim = 100;
  std::vector<int> filter_widths = {1, 2, 3, 4, 5};
  int filters_per_width = 100;
  bool no_lc = false;
  int clusters = 8;
  int kpool = 6;
  int mem_dim = 0;
  double dropout = 0.5;
  int min_count = 1;

  // training
  int batch_size = 64;
  int epochs = 20;
  int patience = 5;
  int eval_every = 0;
  double learning_rate = 1e-3;
  std::uint64_t seed = 42;

  // sweep-clusters
  std::vector<int> counts = {1, 4, 8, 16};
};

// Exit codes: 0 success, 2 usage/config, 3 data, 4 checkpoint.
int cli_main(const std::vector<std::string>& args);

int run_train(const RunConfig& config);
int run_finetune(const RunConfig& config);
int run_evaluate(const RunConfig& config);
int run_predict(const RunConfig& config);
int run_sweep_clusters(const RunConfig& config);

}  // namespace cclc

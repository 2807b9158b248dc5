#include "cclc/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "cclc/error.hpp"
#include "cclc/evaluation.hpp"
#include "cclc/rng.hpp"
#include "cclc/trainer.hpp"

namespace cclc {

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitCheckpoint = 4;

FilterMode parse_filter_mode(const std::string& mode) {
  if (mode == "at-least-one-positive") return FilterMode::at_least_one_positive;
  if (mode == "clean") return FilterMode::clean;
  throw config_error("unknown filter mode: " + mode);
}

Objective parse_objective(const std::string& objective) {
  if (objective == "pointwise") return Objective::pointwise;
  if (objective == "listwise") return Objective::listwise;
  throw config_error("unknown objective: " + objective);
}

ModelConfig model_config_from(const RunConfig& run) {
  ModelConfig config;
  config.embed_dim = run.embed_dim;
  config.proj_dim = run.proj_dim;
  config.filter_widths = run.filter_widths;
  config.filters_per_width = run.filters_per_width;
  config.lc_enabled = !run.no_lc;
  config.n_clusters = run.clusters;
  config.k_pool = run.kpool;
  config.mem_dim = run.mem_dim;
  config.dropout = run.dropout;
  config.validate();
  return config;
}

TrainConfig train_config_from(const RunConfig& run) {
  TrainConfig config;
  config.objective = parse_objective(run.objective);
  config.batch_size = run.batch_size;
  config.max_epochs = run.epochs;
  config.patience = run.patience;
  config.eval_every = run.eval_every;
  config.seed = run.seed;
  config.learning_rate = run.learning_rate;
  config.validate();
  return config;
}

void require_path(const std::string& path, const char* flag) {
  if (path.empty()) throw config_error(std::string("missing required ") + flag + " path");
}

std::vector<QuestionGroup> load_filtered(const std::string& path, FilterMode mode) {
  return filter_groups(load_corpus(path), mode);
}

EvalPoint best_eval(const TrainResult& result) {
  EvalPoint best;
  best.map = -1.0;
  for (const EvalPoint& point : result.evals) {
    if (point.map > best.map) best = point;
  }
  return best;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw data_error("cannot open " + path + " for writing");
  out << content;
  if (!out) throw data_error("write to " + path + " failed");
}

struct LoadedModel {
  Model model;
  std::optional<ContextualStore> contextual;
};

void attach_contextual(LoadedModel& loaded, const RunConfig& run) {
  if (run.contextual_path.empty()) return;
  loaded.contextual = load_contextual(run.contextual_path, loaded.model.config.embed_dim);
  loaded.model.contextual = &*loaded.contextual;
}

int train_and_report(Model& model, const RunConfig& run,
                     const std::vector<QuestionGroup>& train_groups,
                     const std::vector<QuestionGroup>& dev_groups) {
  require_path(run.out_path, "--out");
  const TrainConfig train_config = train_config_from(run);

  const TrainResult result = train(model, train_groups, dev_groups, train_config);
  save_checkpoint(result.checkpoint, run.out_path);

  // the model now holds the best parameters; one more dev pass yields the
  // per-question report that goes next to the checkpoint
  const EvalReport dev_report = evaluate(model, dev_groups);
  write_text_file(run.out_path + ".dev-report.tsv", dev_report.to_text());

  std::cout << "dev MAP\t" << dev_report.map << '\n';
  std::cout << "dev MRR\t" << dev_report.mrr << '\n';

  if (!run.test_path.empty()) {
    const EvalReport test_report =
        evaluate(model, load_filtered(run.test_path, parse_filter_mode(run.filter_mode)));
    std::cout << "test MAP\t" << test_report.map << '\n';
    std::cout << "test MRR\t" << test_report.mrr << '\n';
  }
  return kExitOk;
}

}  // namespace

int run_train(const RunConfig& run) {
  require_path(run.train_path, "--train");
  require_path(run.dev_path, "--dev");
  require_path(run.out_path, "--out");

  const FilterMode filter_mode = parse_filter_mode(run.filter_mode);
  const std::vector<QuestionGroup> train_groups = load_filtered(run.train_path, filter_mode);
  const std::vector<QuestionGroup> dev_groups = load_filtered(run.dev_path, filter_mode);
  if (train_groups.empty()) throw config_error("train split is empty after filtering");
  if (dev_groups.empty()) throw config_error("dev split is empty after filtering");

  const ModelConfig model_config = model_config_from(run);
  Rng rng(run.seed);

  LoadedModel loaded;
  loaded.model = Model::init(model_config, build_vocab(train_groups, run.min_count), rng);
  if (!run.embeddings_path.empty()) {
    loaded.model.embedding = load_pretrained_vectors(run.embeddings_path, loaded.model.vocab,
                                                     model_config.embed_dim, rng);
  }
  attach_contextual(loaded, run);

  return train_and_report(loaded.model, run, train_groups, dev_groups);
}

int run_finetune(const RunConfig& run) {
  require_path(run.checkpoint_path, "--checkpoint");
  require_path(run.train_path, "--train");
  require_path(run.dev_path, "--dev");
  require_path(run.out_path, "--out");

  const FilterMode filter_mode = parse_filter_mode(run.filter_mode);
  const std::vector<QuestionGroup> train_groups = load_filtered(run.train_path, filter_mode);
  const std::vector<QuestionGroup> dev_groups = load_filtered(run.dev_path, filter_mode);
  if (train_groups.empty()) throw config_error("train split is empty after filtering");
  if (dev_groups.empty()) throw config_error("dev split is empty after filtering");

  LoadedModel loaded;
  loaded.model = model_from_checkpoint(load_checkpoint(run.checkpoint_path));
  // selection count and dropout may differ per target dataset; parameter
  // shapes stay fixed by the pretrained checkpoint
  if (loaded.model.config.lc_enabled) {
    if (run.kpool > loaded.model.config.n_clusters) {
      throw config_error("finetune: --kpool exceeds the checkpoint's cluster count");
    }
    loaded.model.config.k_pool = run.kpool;
  }
  loaded.model.config.dropout = run.dropout;
  attach_contextual(loaded, run);

  return train_and_report(loaded.model, run, train_groups, dev_groups);
}

int run_evaluate(const RunConfig& run) {
  require_path(run.checkpoint_path, "--checkpoint");
  if (run.train_path.empty() && run.dev_path.empty() && run.test_path.empty()) {
    throw config_error("evaluate needs at least one of --train/--dev/--test");
  }

  LoadedModel loaded;
  loaded.model = model_from_checkpoint(load_checkpoint(run.checkpoint_path));
  attach_contextual(loaded, run);

  const FilterMode filter_mode = parse_filter_mode(run.filter_mode);
  std::string text;
  std::string json = "{\n";
  bool first_split = true;
  for (const auto& [name, path] :
       {std::pair<const char*, const std::string*>{"train", &run.train_path},
        {"dev", &run.dev_path},
        {"test", &run.test_path}}) {
    if (path->empty()) continue;
    const std::vector<QuestionGroup> groups = load_filtered(*path, filter_mode);
    if (groups.empty()) throw config_error(std::string(name) + " split is empty after filtering");
    const EvalReport report = evaluate(loaded.model, groups);
    text += std::string("# split\t") + name + "\n" + report.to_text();
    if (!first_split) json += ",\n";
    json += "\"" + std::string(name) + "\": " + report.to_json();
    first_split = false;
  }
  json += "\n}\n";

  std::cout << text;
  if (!run.out_path.empty()) write_text_file(run.out_path, text);
  if (!run.json_path.empty()) write_text_file(run.json_path, json);
  return kExitOk;
}

int run_predict(const RunConfig& run) {
  require_path(run.checkpoint_path, "--checkpoint");
  int provided = 0;
  const std::string* input = nullptr;
  for (const std::string* path : {&run.train_path, &run.dev_path, &run.test_path}) {
    if (!path->empty()) {
      ++provided;
      input = path;
    }
  }
  if (provided != 1) throw config_error("predict needs exactly one of --train/--dev/--test");

  LoadedModel loaded;
  loaded.model = model_from_checkpoint(load_checkpoint(run.checkpoint_path));
  attach_contextual(loaded, run);

  // predictions keep every group, even all-negative ones: no metrics here
  const std::vector<QuestionGroup> groups = load_corpus(*input);
  std::ostringstream out;
  out.precision(6);
  out << std::fixed;
  for (const QuestionGroup& group : groups) {
    std::vector<std::pair<double, int>> ranked;
    for (std::size_t i = 0; i < group.candidates.size(); ++i) {
      ranked.emplace_back(loaded.model.score_pair(group.question, group.candidates[i].tokens),
                          static_cast<int>(i));
    }
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (const auto& [score, index] : ranked) {
      out << group.question_id << '\t' << index << '\t' << score << '\n';
    }
  }
  std::cout << out.str();
  if (!run.out_path.empty()) write_text_file(run.out_path, out.str());
  return kExitOk;
}

int run_sweep_clusters(const RunConfig& run) {
  require_path(run.train_path, "--train");
  require_path(run.dev_path, "--dev");
  if (run.counts.empty()) throw config_error("sweep-clusters needs a nonempty --counts list");

  const FilterMode filter_mode = parse_filter_mode(run.filter_mode);
  const std::vector<QuestionGroup> train_groups = load_filtered(run.train_path, filter_mode);
  const std::vector<QuestionGroup> dev_groups = load_filtered(run.dev_path, filter_mode);
  if (train_groups.empty()) throw config_error("train split is empty after filtering");
  if (dev_groups.empty()) throw config_error("dev split is empty after filtering");

  std::ostringstream table;
  table.precision(6);
  table << std::fixed;
  table << "clusters\tMAP\tMRR\n";
  for (int count : run.counts) {
    if (count < 1) throw config_error("sweep-clusters: cluster counts must be positive");
    RunConfig per_run = run;
    per_run.clusters = count;
    per_run.kpool = std::min(run.kpool, count);  // selection cannot exceed the pool

    const ModelConfig model_config = model_config_from(per_run);
    const TrainConfig train_config = train_config_from(per_run);
    Rng rng(per_run.seed);

    LoadedModel loaded;
    loaded.model = Model::init(model_config, build_vocab(train_groups, per_run.min_count), rng);
    if (!per_run.embeddings_path.empty()) {
      loaded.model.embedding = load_pretrained_vectors(per_run.embeddings_path, loaded.model.vocab,
                                                       model_config.embed_dim, rng);
    }
    attach_contextual(loaded, per_run);

    const TrainResult result = train(loaded.model, train_groups, dev_groups, train_config);
    const EvalPoint best = best_eval(result);
    table << count << '\t' << best.map << '\t' << best.mrr << '\n';
  }

  std::cout << table.str();
  if (!run.out_path.empty()) write_text_file(run.out_path, table.str());
  return kExitOk;
}

// ---------------------------------------------------------------------------
// Argument parsing
// ---------------------------------------------------------------------------

namespace {

void add_data_flags(CLI::App* cmd, RunConfig& run) {
  cmd->add_option("--train", run.train_path, "training split TSV");
  cmd->add_option("--dev", run.dev_path, "dev split TSV");
  cmd->add_option("--test", run.test_path, "test split TSV");
  cmd->add_option("--embeddings", run.embeddings_path, "pretrained word-vector text file");
  cmd->add_option("--contextual", run.contextual_path, "precomputed contextual-vector file");
  cmd->add_option("--filter-mode", run.filter_mode, "at-least-one-positive or clean")
      ->check(CLI::IsMember({"at-least-one-positive", "clean"}));
}

void add_model_flags(CLI::App* cmd, RunConfig& run, bool shapes) {
  if (shapes) {
    cmd->add_option("--embed-dim", run.embed_dim, "word-vector dimensionality");
    cmd->add_option("--proj-dim", run.proj_dim, "context projection size");
    cmd->add_option("--filter-widths", run.filter_widths, "CNN filter widths")
        ->delimiter(',');
    cmd->add_option("--filters-per-width", run.filters_per_width, "CNN filters per width");
    cmd->add_flag("--no-lc", run.no_lc, "disable the latent-cluster block");
    cmd->add_option("--clusters", run.clusters, "latent memory vectors");
    cmd->add_option("--mem-dim", run.mem_dim, "latent memory size (0: proj dim)");
    cmd->add_option("--min-count", run.min_count, "vocabulary frequency cutoff");
  }
  cmd->add_option("--kpool", run.kpool, "top-k clusters kept by the similarity pool");
  cmd->add_option("--dropout", run.dropout, "dropout ratio");
}

void add_train_flags(CLI::App* cmd, RunConfig& run) {
  cmd->add_option("--objective", run.objective, "listwise or pointwise")
      ->check(CLI::IsMember({"listwise", "pointwise"}));
  cmd->add_option("--batch-size", run.batch_size, "pointwise batch size");
  cmd->add_option("--epochs", run.epochs, "maximum training epochs");
  cmd->add_option("--patience", run.patience, "dev evaluations without improvement before stop");
  cmd->add_option("--eval-every", run.eval_every, "steps between dev evaluations (0: per epoch)");
  cmd->add_option("--lr", run.learning_rate, "Adam learning rate");
}

void add_common_flags(CLI::App* cmd, RunConfig& run, std::string& config_path) {
  // consumed before parsing (see expand_config_args); registered so that
  // --help documents it
  cmd->add_option("--config", config_path, "key = value run configuration file");
  cmd->add_option("--seed", run.seed, "run seed");
  cmd->add_option("--out", run.out_path, "output path");
  cmd->add_option("--checkpoint", run.checkpoint_path, "checkpoint to load");
}

// Splits a flat `key = value` file into synthesized --key=value tokens,
// inserted ahead of the explicit flags so the command line wins.
std::vector<std::string> expand_config_args(const std::vector<std::string>& args) {
  if (args.empty()) return {};
  std::string config_path;
  std::vector<std::string> rest;
  for (std::size_t i = 1; i < args.size(); ++i) {
    const std::string& arg = args[i];
    if (arg == "--config") {
      if (i + 1 >= args.size()) throw config_error("--config expects a path");
      config_path = args[++i];
    } else if (arg.rfind("--config=", 0) == 0) {
      config_path = arg.substr(9);
    } else {
      rest.push_back(arg);
    }
  }

  std::vector<std::string> out = {args[0]};
  if (!config_path.empty()) {
    std::ifstream file(config_path);
    if (!file) throw config_error("cannot open config file " + config_path);
    std::string line;
    std::size_t line_no = 0;
    auto trim = [](std::string s) {
      while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.erase(s.begin());
      while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.pop_back();
      return s;
    };
    while (std::getline(file, line)) {
      ++line_no;
      const std::string trimmed = trim(line);
      if (trimmed.empty() || trimmed[0] == '#') continue;
      const std::size_t eq = trimmed.find('=');
      if (eq == std::string::npos) {
        throw config_error(config_path + ":" + std::to_string(line_no) +
                           ": expected key = value");
      }
      const std::string key = trim(trimmed.substr(0, eq));
      const std::string value = trim(trimmed.substr(eq + 1));
      if (key.empty()) {
        throw config_error(config_path + ":" + std::to_string(line_no) + ": empty key");
      }
      out.push_back("--" + key + "=" + value);
    }
  }
  out.insert(out.end(), rest.begin(), rest.end());
  return out;
}

// Later occurrences override earlier ones, giving flags precedence over
// config-file values.
void take_last_values(CLI::App* cmd) {
  for (CLI::Option* option : cmd->get_options()) {
    option->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  }
}

}  // namespace

int cli_main(const std::vector<std::string>& args) {
  RunConfig run;
  std::string config_path;
  CLI::App app{"compare-aggregate answer selection with latent clustering"};
  app.require_subcommand(1);

  CLI::App* train_cmd = app.add_subcommand("train", "train a model from scratch");
  add_common_flags(train_cmd, run, config_path);
  add_data_flags(train_cmd, run);
  add_model_flags(train_cmd, run, true);
  add_train_flags(train_cmd, run);

  CLI::App* pretrain_cmd =
      app.add_subcommand("pretrain", "train on a large source corpus for transfer");
  add_common_flags(pretrain_cmd, run, config_path);
  add_data_flags(pretrain_cmd, run);
  add_model_flags(pretrain_cmd, run, true);
  add_train_flags(pretrain_cmd, run);

  CLI::App* finetune_cmd =
      app.add_subcommand("finetune", "continue training from a checkpoint on a target corpus");
  add_common_flags(finetune_cmd, run, config_path);
  add_data_flags(finetune_cmd, run);
  add_model_flags(finetune_cmd, run, false);
  add_train_flags(finetune_cmd, run);

  CLI::App* evaluate_cmd = app.add_subcommand("evaluate", "rank candidates and report MAP/MRR");
  add_common_flags(evaluate_cmd, run, config_path);
  add_data_flags(evaluate_cmd, run);
  evaluate_cmd->add_option("--json", run.json_path, "write a machine-readable summary here");

  CLI::App* predict_cmd = app.add_subcommand("predict", "emit qid/answer-index/score lines");
  add_common_flags(predict_cmd, run, config_path);
  add_data_flags(predict_cmd, run);

  CLI::App* sweep_cmd =
      app.add_subcommand("sweep-clusters", "train once per cluster count and tabulate MAP/MRR");
  add_common_flags(sweep_cmd, run, config_path);
  add_data_flags(sweep_cmd, run);
  add_model_flags(sweep_cmd, run, true);
  add_train_flags(sweep_cmd, run);
  sweep_cmd->add_option("--counts", run.counts, "cluster counts to sweep")->delimiter(',');

  for (CLI::App* cmd : {train_cmd, pretrain_cmd, finetune_cmd, evaluate_cmd, predict_cmd, sweep_cmd}) {
    take_last_values(cmd);
  }

  std::vector<std::string> expanded;
  try {
    expanded = expand_config_args(args);
  } catch (const config_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  std::vector<const char*> argv;
  argv.push_back("cclc");
  for (const std::string& arg : expanded) argv.push_back(arg.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);  // prints contextual help, exit 0
  } catch (const CLI::ParseError& e) {
    app.exit(e);  // prints the parse error
    return kExitUsage;
  }

  try {
    if (train_cmd->parsed()) {
      run.command = "train";
      return run_train(run);
    }
    if (pretrain_cmd->parsed()) {
      run.command = "pretrain";
      return run_train(run);
    }
    if (finetune_cmd->parsed()) {
      run.command = "finetune";
      return run_finetune(run);
    }
    if (evaluate_cmd->parsed()) {
      run.command = "evaluate";
      return run_evaluate(run);
    }
    if (predict_cmd->parsed()) {
      run.command = "predict";
      return run_predict(run);
    }
    if (sweep_cmd->parsed()) {
      run.command = "sweep-clusters";
      return run_sweep_clusters(run);
    }
    std::cerr << "error: no command given\n";
    return kExitUsage;
  } catch (const config_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    std::cerr << "run 'cclc --help' for usage\n";
    return kExitUsage;
  } catch (const data_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const checkpoint_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitCheckpoint;
  } catch (const error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace cclc

#include "acosqe/cli.hpp"

#include <CLI11.hpp>
#include <fstream>
#include <iostream>

#include "acosqe/auxlm.hpp"
#include "acosqe/compress.hpp"
#include "acosqe/config.hpp"
#include "acosqe/corpus.hpp"
#include "acosqe/errors.hpp"
#include "acosqe/metrics.hpp"
#include "acosqe/pipeline.hpp"
#include "acosqe/synth.hpp"

namespace acosqe {

namespace {

TrainConfig load_train_config(const std::string& path) {
  if (path.empty()) return TrainConfig{};
  return train_config_from(parse_config_file(path));
}

AuxConfig load_aux_config(const std::string& path) {
  if (path.empty()) return AuxConfig{};
  return aux_config_from(parse_config_file(path));
}

CorpusConfig corpus_config_for(const TrainConfig& cfg) {
  CorpusConfig cc;
  cc.mode = cfg.tokenize_mode;
  cc.categories = cfg.categories;
  cc.k_max = cfg.k_max;
  return cc;
}

// calibration id list: comma-separated indices, "a-b" ranges allowed
std::vector<int> parse_id_list(const std::string& text) {
  std::vector<int> out;
  std::string tok;
  auto flush = [&] {
    if (tok.empty()) throw DataError("calibration list: empty entry");
    size_t dash = tok.find('-', tok[0] == '-' ? 1 : 0);
    if (dash == std::string::npos) {
      out.push_back(std::stoi(tok));
    } else {
      int a = std::stoi(tok.substr(0, dash));
      int b = std::stoi(tok.substr(dash + 1));
      if (b < a) throw DataError("calibration list: bad range " + tok);
      for (int i = a; i <= b; ++i) out.push_back(i);
    }
    tok.clear();
  };
  for (char c : text) {
    if (c == ',') flush();
    else if (!std::isspace(static_cast<unsigned char>(c))) tok += c;
  }
  if (!tok.empty()) flush();
  if (out.empty()) throw DataError("calibration list: no ids");
  return out;
}

HintLevel hint_level_from(const std::string& s) {
  if (s == "as") return HintLevel::kAspect;
  if (s == "as_ot") return HintLevel::kAspectOpinion;
  if (s == "as_ot_ac") return HintLevel::kAspectOpinionCategory;
  if (s == "full" || s == "as_ot_ac_sp") return HintLevel::kFull;
  throw DataError("unknown hint level: " + s);
}

int cmd_stats(const std::string& data, const std::string& config) {
  TrainConfig cfg = load_train_config(config);
  std::vector<Example> examples = parse_dataset(data, corpus_config_for(cfg));
  CorpusStats st = corpus_stats(examples);
  std::cout << "sentences " << st.sentences << "\n";
  std::cout << "tokens " << st.tokens << "\n";
  std::cout << "quads " << st.quads << "\n";
  std::cout << "implicit_aspects " << st.implicit_aspects << "\n";
  for (const auto& [cat, count] : st.per_category)
    std::cout << "category " << cat << " " << count << "\n";
  const char* pol_names[3] = {"positive", "negative", "neutral"};
  for (int p = 0; p < 3; ++p)
    std::cout << "polarity " << pol_names[p] << " " << st.per_polarity[p] << "\n";
  return 0;
}

int cmd_synth(const std::string& out_dir, uint64_t seed, int train_n, int test_n) {
  SynthConfig cfg;
  cfg.seed = seed;
  cfg.train_sentences = train_n;
  cfg.test_sentences = test_n;
  write_synthetic_corpus(out_dir, cfg);
  std::cerr << "wrote " << out_dir << "/train.jsonl (" << train_n
            << " sentences), test.jsonl (" << test_n << "), ledger.json\n";
  return 0;
}

int cmd_train(const std::string& data, const std::string& config,
              const std::string& out) {
  TrainConfig cfg = load_train_config(config);
  std::vector<Example> corpus = parse_dataset(data, corpus_config_for(cfg));
  TrainReport report;
  AcosModel model = train(corpus, cfg, &report);
  for (size_t e = 0; e < report.epoch_loss.size(); ++e) {
    std::cerr << "epoch " << e << " loss " << report.epoch_loss[e];
    if (e < report.dev_f1.size()) std::cerr << " dev_f1 " << report.dev_f1[e];
    std::cerr << "\n";
  }
  std::cerr << "best epoch " << report.best_epoch << "\n";
  save_acos_checkpoint(out, model);
  std::cerr << "saved " << out << "\n";
  return 0;
}

int cmd_train_aux(const std::string& data, const std::string& config,
                  const std::string& out) {
  AuxConfig acfg = load_aux_config(config);
  TrainConfig tcfg = load_train_config(config);
  std::vector<Example> corpus = parse_dataset(data, corpus_config_for(tcfg));
  AuxTrainReport report;
  AuxModel model = train_aux(corpus, acfg, &report);
  for (size_t e = 0; e < report.epoch_loss.size(); ++e)
    std::cerr << "epoch " << e << " loss " << report.epoch_loss[e] << "\n";
  save_aux_checkpoint(out, model);
  std::cerr << "saved " << out << "\n";
  return 0;
}

int cmd_prune(const std::string& model_path, const std::string& data,
              const std::string& calib, double sparsity,
              const std::string& hint_level, const std::string& config,
              const std::string& out) {
  AuxModel model = load_aux_checkpoint(model_path);
  TrainConfig tcfg = load_train_config(config);
  std::vector<Example> corpus = parse_dataset(data, corpus_config_for(tcfg));
  std::vector<Example> calib_set;
  for (int id : parse_id_list(calib)) {
    if (id < 0 || id >= static_cast<int>(corpus.size()))
      throw DataError("calibration id " + std::to_string(id) +
                      " outside the dataset");
    calib_set.push_back(corpus[id]);
  }
  auto masks = prune_aux(model, calib_set, hint_level_from(hint_level), sparsity);
  std::cout << sparsity_report(model.store, masks);
  save_aux_checkpoint(out, model);
  std::cerr << "saved " << out << "\n";
  return 0;
}

int cmd_generate(const std::string& text, const std::string& model_path,
                 int max_new_tokens, double repetition_penalty) {
  AuxModel model = load_aux_checkpoint(model_path);
  Hints h = generate_hints(model, text, max_new_tokens, repetition_penalty);
  std::cout << h.text << "\n";
  std::cerr << (h.parse ? "hints parse under the grammar\n"
                        : "hints do NOT parse under the grammar\n");
  return 0;
}

int cmd_predict(const std::string& input, bool as_file,
                const std::string& model_path, const std::string& aux_path,
                int max_new_tokens, double repetition_penalty) {
  AcosModel model = load_acos_checkpoint(model_path);
  AuxModel aux;
  bool have_aux = !aux_path.empty();
  if (have_aux) aux = load_aux_checkpoint(aux_path);
  auto emit = [&](const std::string& text) {
    std::vector<Quadruple> quads =
        extract_quadruples(text, model, have_aux ? &aux : nullptr,
                           max_new_tokens, repetition_penalty);
    Sentence s = tokenize(text, model.cfg.tokenize_mode);
    std::cout << example_to_json({s, quads}) << "\n";
  };
  if (as_file) {
    std::vector<Example> data =
        parse_dataset(input, corpus_config_for(model.cfg));
    for (const auto& ex : data) emit(ex.first.text);
  } else {
    emit(input);
  }
  return 0;
}

int cmd_eval(const std::string& data, const std::string& model_path,
             const std::string& aux_path, const std::string& subtask,
             const std::string& report, int max_new_tokens,
             double repetition_penalty) {
  if (report != "csv") throw DataError("unsupported report format: " + report);
  AcosModel model = load_acos_checkpoint(model_path);
  AuxModel aux;
  bool have_aux = !aux_path.empty();
  if (have_aux) aux = load_aux_checkpoint(aux_path);
  std::vector<Example> corpus = parse_dataset(data, corpus_config_for(model.cfg));
  std::cerr << "evaluating " << corpus.size() << " sentences\n";
  std::vector<std::vector<Quadruple>> preds =
      predict_corpus(corpus, model, have_aux ? &aux : nullptr, max_new_tokens,
                     repetition_penalty);
  std::vector<std::vector<Quadruple>> golds;
  golds.reserve(corpus.size());
  for (const auto& ex : corpus) golds.push_back(ex.second);
  if (subtask == "all") {
    std::cout << metrics_report_csv(preds, golds);
  } else {
    SubtaskKind kind = subtask_from_string(subtask);
    Prf1 m = prf1(corpus_match_counts(preds, golds, kind));
    char buf[96];
    std::snprintf(buf, sizeof(buf), "%s,%.2f,%.2f,%.2f\n", to_string(kind),
                  100.0 * m.precision, 100.0 * m.recall, 100.0 * m.f1);
    std::cout << "subtask,precision,recall,f1\n" << buf;
  }
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"aspect-category-opinion-sentiment quadruple extraction"};
  app.require_subcommand(1);

  // ---- stats ----
  std::string st_data, st_config;
  CLI::App* stats = app.add_subcommand("stats", "corpus summary counts");
  stats->add_option("data", st_data, "JSONL dataset")->required();
  stats->add_option("--config", st_config, "key=value config file");

  // ---- synth ----
  std::string sy_out;
  uint64_t sy_seed = 42;
  int sy_train = 1500, sy_test = 300;
  CLI::App* synth = app.add_subcommand("synth", "write the synthetic corpus");
  synth->add_option("out", sy_out, "output directory")->required();
  synth->add_option("--seed", sy_seed, "generator seed");
  synth->add_option("--train-sentences", sy_train, "training split size");
  synth->add_option("--test-sentences", sy_test, "test split size");

  // ---- train ----
  std::string tr_data, tr_config, tr_out = "acos.ckpt";
  CLI::App* train_cmd = app.add_subcommand("train", "train the extraction model");
  train_cmd->add_option("data", tr_data, "training JSONL")->required();
  train_cmd->add_option("--config", tr_config, "key=value config file");
  train_cmd->add_option("--out", tr_out, "checkpoint path");

  // ---- train-aux ----
  std::string ta_data, ta_config, ta_out = "aux.ckpt";
  CLI::App* train_aux_cmd =
      app.add_subcommand("train-aux", "train the hint language model");
  train_aux_cmd->add_option("data", ta_data, "training JSONL")->required();
  train_aux_cmd->add_option("--config", ta_config, "key=value config file");
  train_aux_cmd->add_option("--out", ta_out, "checkpoint path");

  // ---- prune ----
  std::string pr_model, pr_data, pr_calib, pr_level = "full", pr_config;
  std::string pr_out = "aux-pruned.ckpt";
  double pr_sparsity = 0.5;
  CLI::App* prune_cmd =
      app.add_subcommand("prune", "one-shot prune of the hint model");
  prune_cmd->add_option("--model", pr_model, "aux checkpoint")->required();
  prune_cmd->add_option("--data", pr_data, "calibration JSONL")->required();
  prune_cmd->add_option("--calib", pr_calib, "ids, e.g. 0-31 or 1,5,9")
      ->required();
  prune_cmd->add_option("--sparsity", pr_sparsity, "fraction of weights to drop");
  prune_cmd->add_option("--hint-level", pr_level, "as|as_ot|as_ot_ac|full");
  prune_cmd->add_option("--config", pr_config, "key=value config file");
  prune_cmd->add_option("--out", pr_out, "pruned checkpoint path");

  // ---- generate ----
  std::string ge_text, ge_model;
  int ge_max_new = 160;
  double ge_penalty = 1.0;
  CLI::App* generate_cmd =
      app.add_subcommand("generate", "hint text for one sentence");
  generate_cmd->add_option("text", ge_text, "input sentence")->required();
  generate_cmd->add_option("--model", ge_model, "aux checkpoint")->required();
  generate_cmd->add_option("--max-new-tokens", ge_max_new, "generation budget");
  generate_cmd->add_option("--repetition-penalty", ge_penalty,
                           "emitted-token logit divisor");

  // ---- predict ----
  std::string pd_input, pd_model, pd_aux;
  bool pd_file = false;
  int pd_max_new = 160;
  double pd_penalty = 1.0;
  CLI::App* predict_cmd =
      app.add_subcommand("predict", "extract quadruples from text");
  predict_cmd->add_option("input", pd_input, "sentence, or JSONL path with --file")
      ->required();
  predict_cmd->add_flag("--file", pd_file, "treat input as a dataset path");
  predict_cmd->add_option("--model", pd_model, "extraction checkpoint")->required();
  predict_cmd->add_option("--aux", pd_aux, "aux checkpoint for hints");
  predict_cmd->add_option("--max-new-tokens", pd_max_new, "hint budget");
  predict_cmd->add_option("--repetition-penalty", pd_penalty,
                          "hint repetition penalty");

  // ---- eval ----
  std::string ev_data, ev_model, ev_aux, ev_subtask = "all", ev_report = "csv";
  int ev_max_new = 160;
  double ev_penalty = 1.0;
  CLI::App* eval_cmd = app.add_subcommand("eval", "exact-match scores as CSV");
  eval_cmd->add_option("data", ev_data, "gold JSONL")->required();
  eval_cmd->add_option("--model", ev_model, "extraction checkpoint")->required();
  eval_cmd->add_option("--aux", ev_aux, "aux checkpoint for hints");
  eval_cmd->add_option("--subtask", ev_subtask, "all|acos|cs|tasd|aste");
  eval_cmd->add_option("--report", ev_report, "report format (csv)");
  eval_cmd->add_option("--max-new-tokens", ev_max_new, "hint budget");
  eval_cmd->add_option("--repetition-penalty", ev_penalty,
                       "hint repetition penalty");

  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("acosqe");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
    if (stats->parsed()) return cmd_stats(st_data, st_config);
    if (synth->parsed()) return cmd_synth(sy_out, sy_seed, sy_train, sy_test);
    if (train_cmd->parsed()) return cmd_train(tr_data, tr_config, tr_out);
    if (train_aux_cmd->parsed())
      return cmd_train_aux(ta_data, ta_config, ta_out);
    if (prune_cmd->parsed())
      return cmd_prune(pr_model, pr_data, pr_calib, pr_sparsity, pr_level,
                       pr_config, pr_out);
    if (generate_cmd->parsed())
      return cmd_generate(ge_text, ge_model, ge_max_new, ge_penalty);
    if (predict_cmd->parsed())
      return cmd_predict(pd_input, pd_file, pd_model, pd_aux, pd_max_new,
                         pd_penalty);
    if (eval_cmd->parsed())
      return cmd_eval(ev_data, ev_model, ev_aux, ev_subtask, ev_report,
                      ev_max_new, ev_penalty);
    return 1;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace acosqe

// Command-line driver for the unsupervised-parsing toolkit. Subcommands run
// the pipeline stages; every option can also come from a flat key=value
// config file passed with --config, with command-line flags taking
// precedence. Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric
// failure.

#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "uparse/errors.hpp"
#include "uparse/pipeline.hpp"

namespace {

using namespace uparse;

void add_config_option(CLI::App* sub) {
  sub->set_config("--config", "", "flat key=value config file");
  sub->allow_config_extras(CLI::config_extras_mode::ignore);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"unsupervised constituency parsing by imitation learning"};
  app.require_subcommand(1);

  pipeline::GenSyntheticOptions gen;
  CLI::App* gen_cmd = app.add_subcommand(
      "gen-synthetic", "sample sentences, reference parses, and NLI-style pairs "
                       "from a probabilistic grammar");
  add_config_option(gen_cmd);
  gen_cmd->add_option("--grammar", gen.grammar_path, "grammar rule file")->required();
  gen_cmd->add_option("--out_dir", gen.out_dir, "output directory")->required();
  gen_cmd->add_option("--count", gen.count, "sentences to sample");
  gen_cmd->add_option("--pairs", gen.pair_count, "sentence pairs to build");
  gen_cmd->add_option("--min_len", gen.min_len, "minimum sentence length");
  gen_cmd->add_option("--max_len", gen.max_len, "maximum sentence length");
  gen_cmd->add_option("--seed", gen.seed, "generation seed");
  gen_cmd->callback([&] {
    auto out = pipeline::gen_synthetic(gen);
    std::printf("wrote %s\nwrote %s\nwrote %s\n", out.sentences_path.c_str(),
                out.gold_path.c_str(), out.pairs_path.c_str());
  });

  pipeline::TrainPrpnOptions prpn;
  CLI::App* prpn_cmd = app.add_subcommand(
      "train-prpn", "train the distance-gated language model");
  add_config_option(prpn_cmd);
  prpn_cmd->add_option("--sentences", prpn.sentences_path, "training sentences")
      ->required();
  prpn_cmd->add_option("--out", prpn.out_checkpoint, "output checkpoint")->required();
  prpn_cmd->add_option("--max_vocab", prpn.max_vocab, "vocabulary cap");
  prpn_cmd->add_option("--embed_dim", prpn.embed_dim, "embedding width");
  prpn_cmd->add_option("--hidden_dim", prpn.hidden_dim, "hidden width");
  prpn_cmd->add_option("--context_window", prpn.context_window,
                       "left-context words for the distance estimator");
  prpn_cmd->add_option("--tau", prpn.tau, "gate temperature");
  prpn_cmd->add_option("--learning_rate", prpn.learning_rate, "SGD step size");
  prpn_cmd->add_option("--epochs", prpn.epochs, "training epochs");
  prpn_cmd->add_option("--batch_size", prpn.batch_size, "sentences per update");
  prpn_cmd->add_option("--clip_norm", prpn.clip_norm, "gradient norm cap");
  prpn_cmd->add_option("--seed", prpn.seed, "run seed");
  prpn_cmd->add_option("--precision", prpn.precision, "f64 or f32");
  prpn_cmd->callback([&] {
    pipeline::train_prpn(prpn);
    std::printf("wrote %s\n", prpn.out_checkpoint.c_str());
  });

  pipeline::InferTreesOptions infer;
  CLI::App* infer_cmd = app.add_subcommand(
      "infer-trees", "decode trees and distances for a sentence file");
  add_config_option(infer_cmd);
  infer_cmd->add_option("--checkpoint", infer.checkpoint, "model checkpoint")
      ->required();
  infer_cmd->add_option("--sentences", infer.sentences_path, "sentences to parse")
      ->required();
  infer_cmd->add_option("--scheme", infer.scheme,
                        "distance-to-tree scheme: a (max split) or b "
                        "(right-biased); PRPN checkpoints only");
  infer_cmd->add_option("--out_trees", infer.out_trees, "output tree file")
      ->required();
  infer_cmd->add_option("--out_distances", infer.out_distances,
                        "output distance file")
      ->required();
  infer_cmd->add_option("--precision", infer.precision, "f64 or f32");
  infer_cmd->callback([&] {
    pipeline::infer_trees(infer);
    std::printf("wrote %s\nwrote %s\n", infer.out_trees.c_str(),
                infer.out_distances.c_str());
  });

  pipeline::TrainSbsOptions sbs;
  CLI::App* sbs_cmd = app.add_subcommand(
      "train-sbs", "step-by-step imitation of teacher trees");
  add_config_option(sbs_cmd);
  sbs_cmd->add_option("--sentences", sbs.sentences_path, "sentence corpus")
      ->required();
  sbs_cmd->add_option("--trees", sbs.trees_path, "teacher trees")->required();
  sbs_cmd->add_option("--distances", sbs.distances_path, "teacher distances")
      ->required();
  sbs_cmd->add_option("--pairs", sbs.pairs_path,
                      "NLI pairs for the joint task loss (optional)");
  sbs_cmd->add_option("--out", sbs.out_checkpoint, "output checkpoint")->required();
  sbs_cmd->add_option("--max_vocab", sbs.max_vocab, "vocabulary cap");
  sbs_cmd->add_option("--embed_dim", sbs.embed_dim, "embedding width");
  sbs_cmd->add_option("--hidden_dim", sbs.hidden_dim, "hidden width");
  sbs_cmd->add_option("--classifier_hidden", sbs.classifier_hidden,
                      "classifier hidden width");
  sbs_cmd->add_option("--gamma_init", sbs.gamma_init, "initial ST temperature");
  sbs_cmd->add_option("--learn_gamma", sbs.learn_gamma,
                      "learn the temperature by backprop");
  sbs_cmd->add_option("--lambda", sbs.lambda, "parse-loss weight");
  sbs_cmd->add_option("--learning_rate", sbs.learning_rate, "SGD step size");
  sbs_cmd->add_option("--epochs", sbs.epochs, "training epochs");
  sbs_cmd->add_option("--batch_size", sbs.batch_size, "examples per update");
  sbs_cmd->add_option("--clip_norm", sbs.clip_norm, "gradient norm cap");
  sbs_cmd->add_option("--seed", sbs.seed, "run seed");
  sbs_cmd->add_option("--precision", sbs.precision, "f64 or f32");
  sbs_cmd->callback([&] {
    pipeline::train_sbs(sbs);
    std::printf("wrote %s\n", sbs.out_checkpoint.c_str());
  });

  pipeline::RefineOptions ref;
  CLI::App* ref_cmd = app.add_subcommand(
      "refine", "policy refinement with ST-Gumbel on the task loss");
  add_config_option(ref_cmd);
  ref_cmd->add_option("--checkpoint", ref.checkpoint, "SbS checkpoint to start from");
  ref_cmd->add_flag("--random_init", ref.random_init,
                    "start from random parameters (ablation baseline)");
  ref_cmd->add_option("--pairs", ref.pairs_path, "NLI pair corpus")->required();
  ref_cmd->add_option("--out_prefix", ref.out_prefix, "checkpoint name prefix")
      ->required();
  ref_cmd->add_option("--runs", ref.runs, "independently seeded refinement runs");
  ref_cmd->add_option("--eval_sentences", ref.eval_sentences_path,
                      "sentences for per-epoch parsing F");
  ref_cmd->add_option("--eval_gold", ref.eval_gold_path,
                      "reference trees for per-epoch parsing F");
  ref_cmd->add_option("--max_vocab", ref.max_vocab, "vocabulary cap (random init)");
  ref_cmd->add_option("--embed_dim", ref.embed_dim, "embedding width (random init)");
  ref_cmd->add_option("--hidden_dim", ref.hidden_dim, "hidden width (random init)");
  ref_cmd->add_option("--classifier_hidden", ref.classifier_hidden,
                      "classifier width (random init)");
  ref_cmd->add_option("--gamma_init", ref.gamma_init, "initial ST temperature");
  ref_cmd->add_option("--learn_gamma", ref.learn_gamma,
                      "learn the temperature by backprop");
  ref_cmd->add_option("--learning_rate", ref.learning_rate, "SGD step size");
  ref_cmd->add_option("--epochs", ref.epochs, "training epochs");
  ref_cmd->add_option("--batch_size", ref.batch_size, "pairs per update");
  ref_cmd->add_option("--clip_norm", ref.clip_norm, "gradient norm cap");
  ref_cmd->add_option("--seed", ref.seed, "base seed; run k uses seed+k-1");
  ref_cmd->add_option("--precision", ref.precision, "f64 or f32");
  ref_cmd->callback([&] {
    auto outs = pipeline::refine(ref);
    for (const auto& path : outs) std::printf("wrote %s\n", path.c_str());
  });

  pipeline::EvaluateOptions eval;
  std::vector<std::string> label_list;
  bool exclude_root = false;
  CLI::App* eval_cmd = app.add_subcommand(
      "evaluate", "unlabeled F, self-agreement, RB-agreement, per-label "
                  "accuracy, and the paired bootstrap test");
  add_config_option(eval_cmd);
  eval_cmd->add_option("--pred", eval.pred_paths,
                       "prediction tree files; baseline:lb, baseline:rb, and "
                       "baseline:balanced are also accepted")
      ->required();
  eval_cmd->add_option("--gold", eval.gold_path, "reference trees")->required();
  eval_cmd->add_flag("--strip_punct", eval.strip_punct,
                     "remove punctuation before scoring");
  eval_cmd->add_option("--punct", eval.punct_path,
                       "punctuation token file (default: bundled set)");
  eval_cmd->add_flag("--exclude_root", exclude_root,
                     "leave the whole-sentence span out of the bracket sets");
  eval_cmd->add_flag("--micro", eval.micro, "report the micro-average as headline");
  eval_cmd->add_option("--labels", label_list, "labels for per-type accuracy")
      ->delimiter(',');
  eval_cmd->add_option("--bootstrap_a", eval.bootstrap_a,
                       "run index (1-based) tested as the better system");
  eval_cmd->add_option("--bootstrap_b", eval.bootstrap_b,
                       "run index (1-based) compared against");
  eval_cmd->add_option("--bootstrap_iterations", eval.bootstrap_iterations,
                       "bootstrap resamples");
  eval_cmd->add_option("--bootstrap_seed", eval.bootstrap_seed, "bootstrap seed");
  eval_cmd->add_option("--out", eval.out_path, "write the report here");
  eval_cmd->add_flag("--json", eval.json, "emit JSON instead of text");
  eval_cmd->callback([&] {
    eval.include_root = !exclude_root;
    eval.labels = std::set<std::string>(label_list.begin(), label_list.end());
    auto result = pipeline::evaluate(eval);
    std::fputs(result.text.c_str(), stdout);
  });

  pipeline::RenderOptions render;
  CLI::App* render_cmd =
      app.add_subcommand("render", "draw one tree from a tree file as ASCII art");
  add_config_option(render_cmd);
  render_cmd->add_option("--trees", render.trees_path, "tree file")->required();
  render_cmd->add_option("--index", render.index, "1-based line number");
  render_cmd->callback([&] {
    std::fputs(pipeline::render(render).c_str(), stdout);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric failure: %s\n", e.what());
    return 3;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}

#pragma once

// Experiment stages behind the CLI subcommands. Every stage is a pure
// function of (inputs, options, seed) and writes its artifacts plus a
// .meta sidecar carrying the version, seed, and config hash.

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "uparse/eval.hpp"

namespace uparse::pipeline {

inline constexpr const char* kVersion = "uparse 0.1.0";

struct GenSyntheticOptions {
  std::string grammar_path;
  std::string out_dir;
  int count = 200;
  int pair_count = 200;
  int min_len = 2;
  int max_len = 10;
  std::uint64_t seed = 1;
};

struct GenSyntheticResult {
  std::string sentences_path;
  std::string gold_path;
  std::string pairs_path;
};

// Samples sentences with reference derivations; paraphrase hypotheses from
// entailment pairs are appended to the sentence and reference files so every
// pair member has a sentence-corpus entry.
GenSyntheticResult gen_synthetic(const GenSyntheticOptions& opts);

struct TrainPrpnOptions {
  std::string sentences_path;
  std::string out_checkpoint;
  int max_vocab = 10000;
  int embed_dim = 16;
  int hidden_dim = 24;
  int context_window = 3;
  double tau = 1.0;
  double learning_rate = 0.2;
  int epochs = 10;
  int batch_size = 1;
  double clip_norm = 5.0;
  std::uint64_t seed = 1;
  std::string precision = "f64";
};

// Language-model training; writes the checkpoint, its vocabulary
// (<checkpoint>.vocab), a loss log (<checkpoint>.log), and the sidecar.
void train_prpn(const TrainPrpnOptions& opts);

struct InferTreesOptions {
  std::string checkpoint;
  std::string sentences_path;
  std::string scheme = "b";  // "a" or "b"; ignored for Tree-LSTM checkpoints
  std::string out_trees;
  std::string out_distances;
  std::string precision = "f64";
};

// PRPN checkpoints: estimated distances plus the chosen inference scheme.
// Tree-LSTM checkpoints: argmax decoding plus canonical tree distances.
void infer_trees(const InferTreesOptions& opts);

struct TrainSbsOptions {
  std::string sentences_path;
  std::string trees_path;      // teacher trees (from infer-trees)
  std::string distances_path;  // teacher distances (from infer-trees)
  std::string pairs_path;      // optional; enables the joint task loss
  std::string out_checkpoint;
  int max_vocab = 10000;
  int embed_dim = 16;
  int hidden_dim = 24;
  int classifier_hidden = 32;
  double gamma_init = 0.5;
  bool learn_gamma = true;
  double lambda = 0.03;
  double learning_rate = 0.1;
  int epochs = 10;
  int batch_size = 1;
  double clip_norm = 5.0;
  std::uint64_t seed = 1;
  std::string precision = "f64";
};

void train_sbs(const TrainSbsOptions& opts);

struct RefineOptions {
  std::string checkpoint;  // SbS checkpoint; empty only with random_init
  bool random_init = false;
  std::string pairs_path;
  std::string out_prefix;
  int runs = 1;
  // Per-epoch parsing F is logged when both are set.
  std::string eval_sentences_path;
  std::string eval_gold_path;
  // Model dims for random_init (otherwise taken from the checkpoint).
  int max_vocab = 10000;
  int embed_dim = 16;
  int hidden_dim = 24;
  int classifier_hidden = 32;
  double gamma_init = 0.5;
  bool learn_gamma = true;
  double learning_rate = 0.05;
  int epochs = 10;
  int batch_size = 1;
  double clip_norm = 5.0;
  std::uint64_t seed = 1;
  std::string precision = "f64";
};

// One refinement run per seed offset; returns the checkpoint paths
// (<out_prefix>_s<k>.ckpt).
std::vector<std::string> refine(const RefineOptions& opts);

struct EvaluateOptions {
  // Tree files, or "baseline:lb" / "baseline:rb" / "baseline:balanced".
  std::vector<std::string> pred_paths;
  std::string gold_path;
  bool strip_punct = false;
  std::string punct_path;  // empty: bundled default set
  bool include_root = true;
  bool micro = false;  // report micro-averaged F as the headline number
  std::set<std::string> labels;
  int bootstrap_a = 0;  // 1-based run indices; 0 disables the test
  int bootstrap_b = 0;
  int bootstrap_iterations = 10000;
  std::uint64_t bootstrap_seed = 1;
  std::string out_path;  // empty: report returned only
  bool json = false;
};

struct EvaluateResult {
  struct Run {
    std::string id;
    MetricReport report;
    double rb_agreement = 0.0;
    std::map<std::string, LabelAccuracy> label_accuracy;
  };
  std::vector<Run> runs;
  std::optional<double> self_agreement;
  std::optional<double> bootstrap_p;
  std::string text;  // rendered report
};

EvaluateResult evaluate(const EvaluateOptions& opts);

struct RenderOptions {
  std::string trees_path;
  int index = 1;  // 1-based line number
};

std::string render(const RenderOptions& opts);

}  // namespace uparse::pipeline

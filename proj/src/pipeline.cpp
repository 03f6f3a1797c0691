#include "uparse/pipeline.hpp"

#include <filesystem>
#include <functional>
#include <sstream>
#include <unordered_map>

#include "uparse/checkpoint.hpp"
#include "uparse/config.hpp"
#include "uparse/errors.hpp"
#include "uparse/gumbel_treelstm.hpp"
#include "uparse/imitation.hpp"
#include "uparse/io.hpp"
#include "uparse/prpn.hpp"
#include "uparse/report.hpp"
#include "uparse/synthetic.hpp"

namespace uparse::pipeline {

namespace fs = std::filesystem;

namespace {

void require_file(const std::string& path, const std::string& hint) {
  if (!fs::exists(fs::path(path))) {
    throw DataError(path + " not found" + (hint.empty() ? "" : " (" + hint + ")"));
  }
}

void write_meta(const std::string& artifact_path, std::uint64_t seed,
                std::uint64_t steps, const RunConfig& resolved,
                std::map<std::string, std::string> extra) {
  CheckpointMeta meta;
  meta.version = kVersion;
  meta.seed = seed;
  meta.steps = steps;
  meta.config_hash = resolved.hash();
  meta.extra = std::move(extra);
  save_checkpoint_meta(meta, artifact_path + ".meta");
}

void write_train_log(const std::string& path, const TrainLog& log) {
  std::ostringstream ss;
  for (std::size_t e = 0; e < log.epoch_loss.size(); ++e) {
    ss << "epoch=" << (e + 1) << " loss=" << format_double(log.epoch_loss[e]);
    if (e < log.epoch_metric.size()) {
      ss << " acc=" << format_double(log.epoch_metric[e]);
    }
    if (e < log.epoch_f.size()) {
      ss << " f=" << format_double(log.epoch_f[e]);
    }
    ss << '\n';
  }
  write_file(path, ss.str());
}

std::string sentence_key(const std::vector<std::string>& words) {
  std::string key;
  for (const auto& w : words) {
    key += w;
    key += '\x1f';
  }
  return key;
}

std::string checkpoint_kind(const CheckpointMeta& meta) {
  auto it = meta.extra.find("model");
  if (it == meta.extra.end()) {
    throw DataError("checkpoint sidecar lacks a model kind");
  }
  return it->second;
}

int meta_int(const CheckpointMeta& meta, const std::string& key) {
  auto it = meta.extra.find(key);
  if (it == meta.extra.end()) throw DataError("checkpoint sidecar lacks " + key);
  return std::stoi(it->second);
}

double meta_double(const CheckpointMeta& meta, const std::string& key) {
  auto it = meta.extra.find(key);
  if (it == meta.extra.end()) throw DataError("checkpoint sidecar lacks " + key);
  return std::stod(it->second);
}

template <class Scalar>
PrpnT<Scalar> load_prpn(const std::string& checkpoint, const CheckpointMeta& meta) {
  PrpnConfig cfg;
  cfg.vocab_size = meta_int(meta, "vocab_size");
  cfg.embed_dim = meta_int(meta, "embed_dim");
  cfg.hidden_dim = meta_int(meta, "hidden_dim");
  cfg.context_window = meta_int(meta, "context_window");
  cfg.tau = meta_double(meta, "tau");
  cfg.seed = meta.seed;
  return PrpnT<Scalar>(cfg, load_checkpoint<Scalar>(checkpoint));
}

template <class Scalar>
TreeLstmT<Scalar> load_treelstm(const std::string& checkpoint,
                                const CheckpointMeta& meta) {
  TreeLstmConfig cfg;
  cfg.vocab_size = meta_int(meta, "vocab_size");
  cfg.embed_dim = meta_int(meta, "embed_dim");
  cfg.hidden_dim = meta_int(meta, "hidden_dim");
  cfg.classifier_hidden = meta_int(meta, "classifier_hidden");
  cfg.gamma_init = meta_double(meta, "gamma_init");
  cfg.learn_gamma = meta_int(meta, "learn_gamma") != 0;
  cfg.seed = meta.seed;
  return TreeLstmT<Scalar>(cfg, load_checkpoint<Scalar>(checkpoint));
}

bool is_f32(const std::string& precision) {
  if (precision == "f32") return true;
  if (precision == "f64") return false;
  throw UsageError("precision must be f64 or f32, got " + precision);
}

}  // namespace

// ---------------------------------------------------------------------------
// gen-synthetic

GenSyntheticResult gen_synthetic(const GenSyntheticOptions& opts) {
  require_file(opts.grammar_path, "grammar file");
  SyntheticGrammar grammar = SyntheticGrammar::from_file(opts.grammar_path);
  SyntheticData data = generate_synthetic(grammar, opts.count, opts.pair_count,
                                          opts.seed, opts.min_len, opts.max_len);

  // Paraphrase hypotheses become corpus sentences too, so downstream stages
  // can tie every pair member to a teacher tree.
  std::unordered_map<std::string, int> seen;
  for (const auto& sent : data.sentences) {
    seen.emplace(sentence_key(sent), 1);
  }
  for (const auto& pair : data.pairs) {
    if (pair.label != 0) continue;
    if (seen.emplace(sentence_key(pair.hypothesis), 1).second) {
      LabeledTree tree;
      // The paraphrase keeps the premise's derivation; regenerate its gold
      // tree by re-deriving structure from the premise entry.
      // Paraphrases are emitted in pair order, so scan for the premise.
      for (std::size_t i = 0; i < data.sentences.size(); ++i) {
        if (data.sentences[i] == pair.premise) {
          tree = data.gold[i];
          break;
        }
      }
      if (!tree.valid()) throw DataError("gen-synthetic: paraphrase lost its premise");
      // Relabel the premise derivation's leaves with the paraphrase tokens.
      std::vector<std::string> words = pair.hypothesis;
      std::size_t pos = 0;
      std::function<LabeledTree(const LabeledTree&)> relabel =
          [&](const LabeledTree& t) -> LabeledTree {
        if (t.is_leaf()) {
          Token tok{words[pos], static_cast<int>(pos + 1)};
          ++pos;
          return LabeledTree::leaf(std::move(tok));
        }
        std::vector<LabeledTree> children;
        for (const auto& c : t.children()) children.push_back(relabel(c));
        return LabeledTree::node(t.label(), std::move(children));
      };
      data.sentences.push_back(pair.hypothesis);
      data.gold.push_back(relabel(tree));
    }
  }

  fs::create_directories(fs::path(opts.out_dir));
  GenSyntheticResult out;
  out.sentences_path = (fs::path(opts.out_dir) / "sentences.txt").string();
  out.gold_path = (fs::path(opts.out_dir) / "gold.trees").string();
  out.pairs_path = (fs::path(opts.out_dir) / "pairs.tsv").string();
  write_sentences(out.sentences_path, data.sentences);
  write_trees(out.gold_path, data.gold);
  write_pairs(out.pairs_path, data.pairs);

  RunConfig resolved;
  resolved.set("grammar", opts.grammar_path);
  resolved.set("count", std::to_string(opts.count));
  resolved.set("pairs", std::to_string(opts.pair_count));
  resolved.set("min_len", std::to_string(opts.min_len));
  resolved.set("max_len", std::to_string(opts.max_len));
  resolved.set("seed", std::to_string(opts.seed));
  std::map<std::string, std::string> extra{{"stage", "gen-synthetic"}};
  write_meta(out.sentences_path, opts.seed, 0, resolved, extra);
  write_meta(out.gold_path, opts.seed, 0, resolved, extra);
  write_meta(out.pairs_path, opts.seed, 0, resolved, extra);
  return out;
}

// ---------------------------------------------------------------------------
// train-prpn

namespace {

RunConfig prpn_resolved(const TrainPrpnOptions& o) {
  RunConfig r;
  r.set("sentences", o.sentences_path);
  r.set("max_vocab", std::to_string(o.max_vocab));
  r.set("embed_dim", std::to_string(o.embed_dim));
  r.set("hidden_dim", std::to_string(o.hidden_dim));
  r.set("context_window", std::to_string(o.context_window));
  r.set("tau", format_double(o.tau));
  r.set("learning_rate", format_double(o.learning_rate));
  r.set("epochs", std::to_string(o.epochs));
  r.set("batch_size", std::to_string(o.batch_size));
  r.set("clip_norm", format_double(o.clip_norm));
  r.set("seed", std::to_string(o.seed));
  r.set("precision", o.precision);
  return r;
}

template <class Scalar>
void train_prpn_impl(const TrainPrpnOptions& opts) {
  auto sentences = read_sentences(opts.sentences_path);
  if (sentences.empty()) throw DataError("train-prpn: empty corpus");
  Vocabulary vocab = Vocabulary::build(sentences, opts.max_vocab);

  PrpnConfig cfg;
  cfg.vocab_size = vocab.size();
  cfg.embed_dim = opts.embed_dim;
  cfg.hidden_dim = opts.hidden_dim;
  cfg.context_window = opts.context_window;
  cfg.tau = opts.tau;
  cfg.learning_rate = opts.learning_rate;
  cfg.epochs = opts.epochs;
  cfg.batch_size = opts.batch_size;
  cfg.clip_norm = opts.clip_norm;
  cfg.seed = opts.seed;

  std::vector<std::vector<int>> corpus;
  corpus.reserve(sentences.size());
  for (const auto& sent : sentences) {
    if (sent.size() < 2) {
      throw DataError("train-prpn: sentences need at least 2 tokens");
    }
    corpus.push_back(vocab.encode(sent));
  }

  PrpnT<Scalar> model(cfg);
  TrainLog log = train_lm(model, corpus);

  save_checkpoint(model.params(), opts.out_checkpoint);
  vocab.save(opts.out_checkpoint + ".vocab");
  write_train_log(opts.out_checkpoint + ".log", log);
  write_meta(opts.out_checkpoint, opts.seed,
             static_cast<std::uint64_t>(opts.epochs) * corpus.size(),
             prpn_resolved(opts),
             {{"stage", "train-prpn"},
              {"model", "prpn"},
              {"vocab_size", std::to_string(cfg.vocab_size)},
              {"embed_dim", std::to_string(cfg.embed_dim)},
              {"hidden_dim", std::to_string(cfg.hidden_dim)},
              {"context_window", std::to_string(cfg.context_window)},
              {"tau", format_double(cfg.tau)}});
}

}  // namespace

void train_prpn(const TrainPrpnOptions& opts) {
  require_file(opts.sentences_path, "sentence corpus");
  if (is_f32(opts.precision)) {
    train_prpn_impl<float>(opts);
  } else {
    train_prpn_impl<double>(opts);
  }
}

// ---------------------------------------------------------------------------
// infer-trees

namespace {

RunConfig infer_resolved(const InferTreesOptions& o) {
  RunConfig r;
  r.set("checkpoint", o.checkpoint);
  r.set("sentences", o.sentences_path);
  r.set("scheme", o.scheme);
  r.set("precision", o.precision);
  return r;
}

template <class Scalar>
void infer_trees_impl(const InferTreesOptions& opts, const CheckpointMeta& meta) {
  auto sentences = read_sentences(opts.sentences_path);
  Vocabulary vocab = Vocabulary::load(opts.checkpoint + ".vocab");
  std::string kind = checkpoint_kind(meta);

  bool scheme_a = false;
  if (kind == "prpn") {
    if (opts.scheme == "a") {
      scheme_a = true;
    } else if (opts.scheme != "b") {
      throw UsageError("scheme must be 'a' or 'b', got " + opts.scheme);
    }
  }

  std::vector<BinaryTree> trees;
  std::vector<DistanceVector> distances;
  trees.reserve(sentences.size());
  distances.reserve(sentences.size());

  if (kind == "prpn") {
    PrpnT<Scalar> model = load_prpn<Scalar>(opts.checkpoint, meta);
    for (const auto& words : sentences) {
      if (words.size() == 1) {
        trees.push_back(BinaryTree::leaf(Token{words[0], 1}));
        distances.push_back(DistanceVector());
        continue;
      }
      DistanceVector d = model.extract_distances(vocab.encode(words));
      trees.push_back(scheme_a ? infer_tree_scheme_a(d, words)
                               : infer_tree_scheme_b(d, words));
      distances.push_back(std::move(d));
    }
  } else if (kind == "treelstm") {
    TreeLstmT<Scalar> model = load_treelstm<Scalar>(opts.checkpoint, meta);
    EncodeOptionsT<Scalar> enc_opts;
    enc_opts.mode = TreeMode::Argmax;
    for (const auto& words : sentences) {
      ad::TapeT<Scalar> tape(model.params());
      auto enc = model.encode_sentence(tape, vocab.encode(words), words, enc_opts);
      distances.push_back(tree_to_distances(enc.tree));
      trees.push_back(std::move(enc.tree));
    }
  } else {
    throw DataError("unknown checkpoint model kind: " + kind);
  }

  write_trees(opts.out_trees, trees);
  write_distances(opts.out_distances, distances);
  RunConfig resolved = infer_resolved(opts);
  std::map<std::string, std::string> extra{{"stage", "infer-trees"},
                                           {"model", kind},
                                           {"scheme", kind == "prpn" ? opts.scheme : "argmax"}};
  write_meta(opts.out_trees, meta.seed, 0, resolved, extra);
  write_meta(opts.out_distances, meta.seed, 0, resolved, extra);
}

}  // namespace

void infer_trees(const InferTreesOptions& opts) {
  require_file(opts.checkpoint, "run train-prpn or train-sbs first");
  require_file(opts.checkpoint + ".meta", "checkpoint sidecar");
  require_file(opts.checkpoint + ".vocab", "checkpoint vocabulary");
  require_file(opts.sentences_path, "sentence corpus");
  CheckpointMeta meta = load_checkpoint_meta(opts.checkpoint + ".meta");
  if (is_f32(opts.precision)) {
    infer_trees_impl<float>(opts, meta);
  } else {
    infer_trees_impl<double>(opts, meta);
  }
}

// ---------------------------------------------------------------------------
// train-sbs

namespace {

RunConfig sbs_resolved(const TrainSbsOptions& o) {
  RunConfig r;
  r.set("sentences", o.sentences_path);
  r.set("trees", o.trees_path);
  r.set("distances", o.distances_path);
  r.set("pairs", o.pairs_path);
  r.set("max_vocab", std::to_string(o.max_vocab));
  r.set("embed_dim", std::to_string(o.embed_dim));
  r.set("hidden_dim", std::to_string(o.hidden_dim));
  r.set("classifier_hidden", std::to_string(o.classifier_hidden));
  r.set("gamma_init", format_double(o.gamma_init));
  r.set("learn_gamma", o.learn_gamma ? "1" : "0");
  r.set("lambda", format_double(o.lambda));
  r.set("learning_rate", format_double(o.learning_rate));
  r.set("epochs", std::to_string(o.epochs));
  r.set("batch_size", std::to_string(o.batch_size));
  r.set("clip_norm", format_double(o.clip_norm));
  r.set("seed", std::to_string(o.seed));
  r.set("precision", o.precision);
  return r;
}

std::map<std::string, std::string> treelstm_meta(const TreeLstmConfig& cfg,
                                                 const std::string& stage) {
  return {{"stage", stage},
          {"model", "treelstm"},
          {"vocab_size", std::to_string(cfg.vocab_size)},
          {"embed_dim", std::to_string(cfg.embed_dim)},
          {"hidden_dim", std::to_string(cfg.hidden_dim)},
          {"classifier_hidden", std::to_string(cfg.classifier_hidden)},
          {"gamma_init", format_double(cfg.gamma_init)},
          {"learn_gamma", cfg.learn_gamma ? "1" : "0"}};
}

// Builds the SbS corpus from aligned sentence/teacher files, resolving pair
// members back to corpus sentences by their token text.
SbsCorpus build_sbs_corpus(const std::vector<std::vector<std::string>>& sentences,
                           const std::vector<LabeledTree>& teacher_trees,
                           const std::vector<DistanceVector>& teacher_distances,
                           const std::vector<NliPairText>& pairs,
                           const Vocabulary& vocab) {
  if (teacher_trees.size() != sentences.size() ||
      teacher_distances.size() != sentences.size()) {
    throw DataError("train-sbs: sentences, trees, and distances are not aligned");
  }
  SbsCorpus corpus;
  std::unordered_map<std::string, int> index;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    SbsExample ex;
    ex.words = sentences[i];
    ex.ids = vocab.encode(ex.words);
    if (ex.words.size() == 1) {
      // Single-token sentences have an empty composition; keep them for
      // completeness, they contribute nothing to the parse loss.
      ex.target = CompositionSequence{};
    } else {
      BinaryTree teacher = to_binary(teacher_trees[i]);
      if (teacher.leaf_count() != static_cast<int>(ex.words.size())) {
        throw DataError("train-sbs: teacher tree " + std::to_string(i + 1) +
                        " does not span its sentence");
      }
      ex.target = make_sbs_targets(teacher, teacher_distances[i]);
    }
    index.emplace(sentence_key(ex.words), static_cast<int>(i));
    corpus.sentences.push_back(std::move(ex));
  }
  for (const auto& pair : pairs) {
    auto p = index.find(sentence_key(pair.premise));
    auto h = index.find(sentence_key(pair.hypothesis));
    if (p == index.end() || h == index.end()) {
      throw DataError(
          "train-sbs: a pair sentence is missing from the sentence corpus; "
          "pairs must come from the same gen-synthetic run");
    }
    corpus.pairs.push_back({pair.label, p->second, h->second});
  }
  return corpus;
}

template <class Scalar>
void train_sbs_impl(const TrainSbsOptions& opts) {
  auto sentences = read_sentences(opts.sentences_path);
  auto teacher_trees = read_trees(opts.trees_path);
  auto teacher_distances = read_distances(opts.distances_path);
  std::vector<NliPairText> pairs;
  if (!opts.pairs_path.empty()) pairs = read_pairs(opts.pairs_path);

  Vocabulary vocab = Vocabulary::build(sentences, opts.max_vocab);
  SbsCorpus corpus =
      build_sbs_corpus(sentences, teacher_trees, teacher_distances, pairs, vocab);

  TreeLstmConfig cfg;
  cfg.vocab_size = vocab.size();
  cfg.embed_dim = opts.embed_dim;
  cfg.hidden_dim = opts.hidden_dim;
  cfg.classifier_hidden = opts.classifier_hidden;
  cfg.gamma_init = opts.gamma_init;
  cfg.learn_gamma = opts.learn_gamma;
  cfg.seed = opts.seed;

  ImitationConfig icfg;
  icfg.lambda = opts.lambda;
  icfg.learning_rate = opts.learning_rate;
  icfg.epochs = opts.epochs;
  icfg.batch_size = opts.batch_size;
  icfg.clip_norm = opts.clip_norm;
  icfg.seed = opts.seed;

  TreeLstmT<Scalar> model(cfg);
  TrainLog log = train_sbs(model, corpus, icfg);

  save_checkpoint(model.params(), opts.out_checkpoint);
  vocab.save(opts.out_checkpoint + ".vocab");
  write_train_log(opts.out_checkpoint + ".log", log);
  std::uint64_t steps = static_cast<std::uint64_t>(opts.epochs) *
                        (corpus.pairs.empty() ? corpus.sentences.size()
                                              : corpus.pairs.size());
  write_meta(opts.out_checkpoint, opts.seed, steps, sbs_resolved(opts),
             treelstm_meta(cfg, "train-sbs"));
}

}  // namespace

void train_sbs(const TrainSbsOptions& opts) {
  require_file(opts.sentences_path, "sentence corpus");
  require_file(opts.trees_path, "run infer-trees first");
  require_file(opts.distances_path, "run infer-trees first");
  if (!opts.pairs_path.empty()) require_file(opts.pairs_path, "pair corpus");
  if (is_f32(opts.precision)) {
    train_sbs_impl<float>(opts);
  } else {
    train_sbs_impl<double>(opts);
  }
}

// ---------------------------------------------------------------------------
// refine

namespace {

RunConfig refine_resolved(const RefineOptions& o) {
  RunConfig r;
  r.set("checkpoint", o.checkpoint);
  r.set("random_init", o.random_init ? "1" : "0");
  r.set("pairs", o.pairs_path);
  r.set("runs", std::to_string(o.runs));
  r.set("eval_sentences", o.eval_sentences_path);
  r.set("eval_gold", o.eval_gold_path);
  r.set("max_vocab", std::to_string(o.max_vocab));
  r.set("embed_dim", std::to_string(o.embed_dim));
  r.set("hidden_dim", std::to_string(o.hidden_dim));
  r.set("classifier_hidden", std::to_string(o.classifier_hidden));
  r.set("gamma_init", format_double(o.gamma_init));
  r.set("learn_gamma", o.learn_gamma ? "1" : "0");
  r.set("learning_rate", format_double(o.learning_rate));
  r.set("epochs", std::to_string(o.epochs));
  r.set("batch_size", std::to_string(o.batch_size));
  r.set("clip_norm", format_double(o.clip_norm));
  r.set("seed", std::to_string(o.seed));
  r.set("precision", o.precision);
  return r;
}

// Pair corpus without teacher targets (refinement never forces trees).
SbsCorpus build_pair_corpus(const std::vector<NliPairText>& pairs,
                            const Vocabulary& vocab) {
  SbsCorpus corpus;
  std::unordered_map<std::string, int> index;
  auto intern = [&](const std::vector<std::string>& words) {
    auto [it, fresh] = index.emplace(sentence_key(words),
                                     static_cast<int>(corpus.sentences.size()));
    if (fresh) {
      SbsExample ex;
      ex.words = words;
      ex.ids = vocab.encode(words);
      corpus.sentences.push_back(std::move(ex));
    }
    return it->second;
  };
  for (const auto& pair : pairs) {
    int p = intern(pair.premise);
    int h = intern(pair.hypothesis);
    corpus.pairs.push_back({pair.label, p, h});
  }
  return corpus;
}

template <class Scalar>
std::vector<std::string> refine_impl(const RefineOptions& opts) {
  std::vector<NliPairText> pairs = read_pairs(opts.pairs_path);
  if (pairs.empty()) throw DataError("refine: empty pair corpus");

  Vocabulary vocab = [&] {
    if (opts.random_init) {
      std::vector<std::vector<std::string>> texts;
      for (const auto& p : pairs) {
        texts.push_back(p.premise);
        texts.push_back(p.hypothesis);
      }
      return Vocabulary::build(texts, opts.max_vocab);
    }
    return Vocabulary::load(opts.checkpoint + ".vocab");
  }();

  SbsCorpus corpus = build_pair_corpus(pairs, vocab);

  // Optional per-epoch parsing F on a held-out reference set.
  std::vector<std::vector<std::string>> eval_sentences;
  std::vector<LabeledTree> eval_gold;
  bool track_f = !opts.eval_sentences_path.empty() && !opts.eval_gold_path.empty();
  if (track_f) {
    eval_sentences = read_sentences(opts.eval_sentences_path);
    eval_gold = read_trees(opts.eval_gold_path);
    if (eval_sentences.size() != eval_gold.size()) {
      throw DataError("refine: eval sentences and references are not aligned");
    }
  }

  std::vector<std::string> outputs;
  for (int run = 0; run < opts.runs; ++run) {
    std::uint64_t run_seed = opts.seed + static_cast<std::uint64_t>(run);
    TreeLstmT<Scalar> model = [&] {
      if (opts.random_init) {
        TreeLstmConfig cfg;
        cfg.vocab_size = vocab.size();
        cfg.embed_dim = opts.embed_dim;
        cfg.hidden_dim = opts.hidden_dim;
        cfg.classifier_hidden = opts.classifier_hidden;
        cfg.gamma_init = opts.gamma_init;
        cfg.learn_gamma = opts.learn_gamma;
        cfg.seed = run_seed;
        return TreeLstmT<Scalar>(cfg);
      }
      CheckpointMeta meta = load_checkpoint_meta(opts.checkpoint + ".meta");
      if (checkpoint_kind(meta) != "treelstm") {
        throw DataError("refine needs a Tree-LSTM checkpoint (run train-sbs first)");
      }
      return load_treelstm<Scalar>(opts.checkpoint, meta);
    }();

    ImitationConfig icfg;
    icfg.lambda = 0.0;
    icfg.learning_rate = opts.learning_rate;
    icfg.epochs = opts.epochs;
    icfg.batch_size = opts.batch_size;
    icfg.clip_norm = opts.clip_norm;
    icfg.seed = run_seed;

    auto eval_f = [&](TreeLstmT<Scalar>& m) {
      ParseRun parses{"refine", {}};
      EncodeOptionsT<Scalar> enc_opts;
      enc_opts.mode = TreeMode::Argmax;
      for (const auto& words : eval_sentences) {
        ad::TapeT<Scalar> tape(m.params());
        parses.trees.push_back(
            m.encode_sentence(tape, vocab.encode(words), words, enc_opts).tree);
      }
      return corpus_mean_f(parses, eval_gold, true).mean_f;
    };

    // Early stopping by parsing F when references are supplied: keep the
    // best-scoring epoch's parameters, counting the starting point as epoch
    // zero.
    std::vector<ad::Mat<Scalar>> best_params;
    double best_f = -1.0;
    int best_epoch = 0;
    int epoch_counter = 0;
    auto snapshot = [&](TreeLstmT<Scalar>& m) {
      best_params.clear();
      for (auto* p : m.params().all()) best_params.push_back(p->value);
    };
    std::function<double(TreeLstmT<Scalar>&)> hook;
    if (track_f) {
      best_f = eval_f(model);
      snapshot(model);
      hook = [&](TreeLstmT<Scalar>& m) {
        ++epoch_counter;
        double f = eval_f(m);
        if (f > best_f) {
          best_f = f;
          best_epoch = epoch_counter;
          snapshot(m);
        }
        return f;
      };
    }

    TrainLog log = refine(model, corpus, icfg, hook);

    if (track_f) {
      auto all = model.params().all();
      for (std::size_t i = 0; i < all.size(); ++i) all[i]->value = best_params[i];
    }

    std::string out = opts.out_prefix + "_s" + std::to_string(run + 1) + ".ckpt";
    save_checkpoint(model.params(), out);
    vocab.save(out + ".vocab");
    write_train_log(out + ".log", log);
    auto extra = treelstm_meta(model.config(), "refine");
    if (track_f) {
      extra["early_stop_epoch"] = std::to_string(best_epoch);
      extra["early_stop_f"] = format_double(best_f);
    }
    write_meta(out, run_seed,
               static_cast<std::uint64_t>(opts.epochs) * corpus.pairs.size(),
               refine_resolved(opts), extra);
    outputs.push_back(out);
  }
  return outputs;
}

}  // namespace

std::vector<std::string> refine(const RefineOptions& opts) {
  if (opts.runs < 1) throw UsageError("refine: runs must be >= 1");
  if (!opts.random_init) {
    if (opts.checkpoint.empty()) {
      throw UsageError("refine: needs --checkpoint or --random_init");
    }
    require_file(opts.checkpoint, "run train-sbs first");
    require_file(opts.checkpoint + ".meta", "checkpoint sidecar");
    require_file(opts.checkpoint + ".vocab", "checkpoint vocabulary");
  }
  require_file(opts.pairs_path, "pair corpus");
  if (is_f32(opts.precision)) {
    return refine_impl<float>(opts);
  }
  return refine_impl<double>(opts);
}

// ---------------------------------------------------------------------------
// evaluate

namespace {

std::optional<BaselineKind> baseline_spec(const std::string& pred) {
  if (pred.rfind("baseline:", 0) != 0) return std::nullopt;
  return baseline_kind_from_string(pred.substr(9));
}

}  // namespace

EvaluateResult evaluate(const EvaluateOptions& opts) {
  if (opts.pred_paths.empty()) throw UsageError("evaluate: no predictions given");
  require_file(opts.gold_path, "reference trees");
  std::vector<LabeledTree> gold = read_trees(opts.gold_path);
  if (gold.empty()) throw DataError("evaluate: empty reference corpus");

  std::set<std::string> punct =
      opts.punct_path.empty() ? default_punctuation() : read_token_set(opts.punct_path);

  // Resolve punctuation stripping against the gold fringes first.
  std::vector<std::vector<bool>> drop_masks;
  if (opts.strip_punct) {
    std::vector<LabeledTree> stripped;
    stripped.reserve(gold.size());
    for (const auto& g : gold) {
      std::vector<std::string> words;
      for (const Token& tok : g.fringe()) words.push_back(tok.surface);
      std::vector<bool> mask;
      for (const auto& w : words) mask.push_back(punct.count(w) > 0);
      drop_masks.push_back(mask);
      stripped.push_back(strip_punctuation(words, g, punct).tree);
    }
    gold = std::move(stripped);
  }

  EvaluateResult result;
  for (const auto& pred_path : opts.pred_paths) {
    EvaluateResult::Run run;
    run.id = pred_path;
    if (auto kind = baseline_spec(pred_path)) {
      ParseRun parses{pred_path, {}};
      for (const auto& g : gold) {
        std::vector<std::string> words;
        for (const Token& tok : g.fringe()) words.push_back(tok.surface);
        parses.trees.push_back(baseline_tree(*kind, words));
      }
      run.report = corpus_mean_f(parses, gold, opts.include_root);
      run.rb_agreement = rb_agreement(parses, opts.include_root);
      if (!opts.labels.empty()) {
        run.label_accuracy =
            per_label_accuracy(parses, gold, opts.labels, opts.include_root);
      }
      result.runs.push_back(std::move(run));
      continue;
    }

    require_file(pred_path, "prediction trees");
    std::vector<LabeledTree> raw = read_trees(pred_path);
    if (raw.size() != gold.size()) {
      throw DataError("evaluate: " + pred_path + " has " +
                      std::to_string(raw.size()) + " trees, reference has " +
                      std::to_string(gold.size()));
    }
    ParseRun parses{pred_path, {}};
    for (std::size_t i = 0; i < raw.size(); ++i) {
      BinaryTree t = to_binary(raw[i]);
      if (opts.strip_punct) {
        if (static_cast<int>(drop_masks[i].size()) != t.leaf_count()) {
          throw DataError("evaluate: " + pred_path + " sentence " +
                          std::to_string(i + 1) +
                          " does not align with the reference fringe");
        }
        t = prune_leaves(t, drop_masks[i]);
      }
      parses.trees.push_back(std::move(t));
    }
    run.report = corpus_mean_f(parses, gold, opts.include_root);
    run.rb_agreement = rb_agreement(parses, opts.include_root);
    if (!opts.labels.empty()) {
      run.label_accuracy =
          per_label_accuracy(parses, gold, opts.labels, opts.include_root);
    }
    result.runs.push_back(std::move(run));
  }

  if (result.runs.size() >= 2) {
    // Self-agreement over the non-baseline runs, skipped when fringe lengths
    // disagree (they cannot here: all runs align with the same gold corpus).
    std::vector<ParseRun> for_agreement;
    for (std::size_t r = 0; r < result.runs.size(); ++r) {
      if (baseline_spec(result.runs[r].id)) continue;
      std::vector<LabeledTree> raw = read_trees(result.runs[r].id);
      ParseRun parses{result.runs[r].id, {}};
      for (std::size_t i = 0; i < raw.size(); ++i) {
        BinaryTree t = to_binary(raw[i]);
        if (opts.strip_punct) t = prune_leaves(t, drop_masks[i]);
        parses.trees.push_back(std::move(t));
      }
      for_agreement.push_back(std::move(parses));
    }
    if (for_agreement.size() >= 2) {
      result.self_agreement = self_agreement(for_agreement, opts.include_root);
    }
  }

  if (opts.bootstrap_a > 0 || opts.bootstrap_b > 0) {
    if (opts.bootstrap_a < 1 ||
        opts.bootstrap_a > static_cast<int>(result.runs.size()) ||
        opts.bootstrap_b < 1 ||
        opts.bootstrap_b > static_cast<int>(result.runs.size())) {
      throw UsageError("evaluate: bootstrap run indices out of range");
    }
    result.bootstrap_p = paired_bootstrap(
        result.runs[static_cast<std::size_t>(opts.bootstrap_a - 1)].report.per_sentence_f,
        result.runs[static_cast<std::size_t>(opts.bootstrap_b - 1)].report.per_sentence_f,
        opts.bootstrap_iterations, opts.bootstrap_seed);
  }

  result.text = opts.json ? render_report_json(result, opts)
                          : render_report_text(result, opts);
  if (!opts.out_path.empty()) {
    write_file(opts.out_path, result.text);
    RunConfig resolved;
    resolved.set("gold", opts.gold_path);
    for (std::size_t i = 0; i < opts.pred_paths.size(); ++i) {
      resolved.set("pred." + std::to_string(i + 1), opts.pred_paths[i]);
    }
    resolved.set("strip_punct", opts.strip_punct ? "1" : "0");
    resolved.set("include_root", opts.include_root ? "1" : "0");
    resolved.set("micro", opts.micro ? "1" : "0");
    write_meta(opts.out_path, opts.bootstrap_seed, 0, resolved,
               {{"stage", "evaluate"}});
  }
  return result;
}

// ---------------------------------------------------------------------------
// render

std::string render(const RenderOptions& opts) {
  require_file(opts.trees_path, "tree file");
  std::vector<LabeledTree> trees = read_trees(opts.trees_path);
  if (opts.index < 1 || opts.index > static_cast<int>(trees.size())) {
    throw UsageError("render: index " + std::to_string(opts.index) +
                     " out of 1.." + std::to_string(trees.size()));
  }
  return render_ascii(trees[static_cast<std::size_t>(opts.index - 1)]);
}

}  // namespace uparse::pipeline

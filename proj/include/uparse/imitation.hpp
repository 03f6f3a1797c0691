#pragma once

// Knowledge transfer from the PRPN teacher to the Tree-LSTM parser. Teacher
// trees plus teacher distances determine an unambiguous composition order
// (merge the lowest-distance pair first); the Tree-LSTM is trained to follow
// it step by step with a parsing cross-entropy, optionally mixed with the
// sentence-pair task loss, and afterwards refined on the task loss alone
// with straight-through Gumbel sampling.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "uparse/distance.hpp"
#include "uparse/errors.hpp"
#include "uparse/gumbel_treelstm.hpp"
#include "uparse/prpn.hpp"
#include "uparse/rng.hpp"
#include "uparse/trees.hpp"

namespace uparse {

// One sentence with its teacher-derived composition targets.
struct SbsExample {
  std::vector<int> ids;
  std::vector<std::string> words;
  CompositionSequence target;
};

struct ImitationConfig {
  double lambda = 0.03;  // parse-loss weight in J = J_task + lambda * J_parse
  double learning_rate = 0.1;
  int epochs = 10;
  int batch_size = 1;
  double clip_norm = 5.0;
  std::uint64_t seed = 1;

  void validate() const {
    if (lambda < 0) throw DataError("imitation: lambda must be >= 0");
    if (epochs < 0 || batch_size < 1) throw DataError("imitation: bad schedule");
  }
};

// Composition targets from a teacher tree and its distances: among the
// mergeable pairs, the lowest boundary distance goes first.
inline CompositionSequence make_sbs_targets(const BinaryTree& teacher_tree,
                                            const DistanceVector& d) {
  return composition_order(teacher_tree, d);
}

// J_parse = -sum_j log p^(j)[target_j] over the per-step candidate
// distributions of a forced encoding.
template <class Scalar>
ad::VarT<Scalar> parse_loss(ad::TapeT<Scalar>& tape,
                            const std::vector<ad::VarT<Scalar>>& step_probs,
                            const CompositionSequence& targets) {
  if (step_probs.size() != targets.steps.size()) {
    throw DataError("parse_loss: " + std::to_string(step_probs.size()) +
                    " steps vs " + std::to_string(targets.steps.size()) +
                    " targets");
  }
  ad::VarT<Scalar> total = tape.scalar(Scalar(0));
  for (std::size_t j = 0; j < step_probs.size(); ++j) {
    int pos = targets.steps[j];
    if (pos < 1 || pos > static_cast<int>(step_probs[j].rows())) {
      throw DataError("parse_loss: step " + std::to_string(j + 1) +
                      " target " + std::to_string(pos) + " out of range");
    }
    ad::VarT<Scalar> picked =
        ad::clamp_min(ad::pick(step_probs[j], pos - 1), Scalar(1e-20));
    total = ad::sub(total, ad::log(picked));
  }
  return total;
}

template <class Scalar>
ad::VarT<Scalar> joint_loss(ad::VarT<Scalar> task, ad::VarT<Scalar> parse,
                            Scalar lambda) {
  if (lambda < 0) throw DataError("joint_loss: lambda must be >= 0");
  return ad::add(task, ad::scale(parse, lambda));
}

// Training corpus for the transfer stage. Pairs reference sentences by
// index; when no pairs are given, training uses the parse loss alone.
struct SbsCorpus {
  struct Pair {
    int label = 0;
    int premise = 0;
    int hypothesis = 0;
  };
  std::vector<SbsExample> sentences;
  std::vector<Pair> pairs;
};

// Step-by-step supervised transfer: encode along the target sequence, score
// every candidate at every step, and optimize J_task + lambda * J_parse
// (just lambda * J_parse when the corpus has no pairs).
template <class Scalar>
TrainLog train_sbs(TreeLstmT<Scalar>& model, const SbsCorpus& corpus,
                   const ImitationConfig& cfg) {
  cfg.validate();
  if (corpus.sentences.empty()) throw DataError("train_sbs: empty corpus");
  for (const auto& pair : corpus.pairs) {
    if (pair.premise < 0 || pair.hypothesis < 0 ||
        pair.premise >= static_cast<int>(corpus.sentences.size()) ||
        pair.hypothesis >= static_cast<int>(corpus.sentences.size())) {
      throw DataError("train_sbs: pair references a missing sentence");
    }
  }

  Rng rng(cfg.seed ^ 0x51b5ad4cf30b77a1ull);
  const bool with_task = !corpus.pairs.empty();
  std::vector<std::size_t> order(with_task ? corpus.pairs.size()
                                           : corpus.sentences.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  auto forced_encode = [&](ad::TapeT<Scalar>& tape, const SbsExample& ex) {
    EncodeOptionsT<Scalar> opts;
    opts.mode = TreeMode::Forced;
    opts.forced = &ex.target;
    return model.encode_sentence(tape, ex.ids, ex.words, opts);
  };

  TrainLog log;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double total = 0.0;
    std::size_t done = 0;
    while (done < order.size()) {
      std::size_t batch = std::min<std::size_t>(
          static_cast<std::size_t>(cfg.batch_size), order.size() - done);
      model.params().zero_grads();
      for (std::size_t b = 0; b < batch; ++b) {
        ad::TapeT<Scalar> tape(model.params());
        ad::VarT<Scalar> loss;
        if (with_task) {
          const auto& pair = corpus.pairs[order[done + b]];
          const SbsExample& prem = corpus.sentences[static_cast<std::size_t>(pair.premise)];
          const SbsExample& hyp = corpus.sentences[static_cast<std::size_t>(pair.hypothesis)];
          auto enc_p = forced_encode(tape, prem);
          auto enc_h = forced_encode(tape, hyp);
          auto cls = model.classify_pair(tape, enc_p.sentence, enc_h.sentence);
          ad::VarT<Scalar> task = ad::cross_entropy(cls.logits, pair.label);
          ad::VarT<Scalar> parse =
              ad::add(parse_loss(tape, enc_p.step_probs, prem.target),
                      parse_loss(tape, enc_h.step_probs, hyp.target));
          loss = joint_loss(task, parse, static_cast<Scalar>(cfg.lambda));
        } else {
          const SbsExample& ex = corpus.sentences[order[done + b]];
          auto enc = forced_encode(tape, ex);
          loss = ad::scale(parse_loss(tape, enc.step_probs, ex.target),
                           static_cast<Scalar>(cfg.lambda));
        }
        double value = static_cast<double>(loss.scalar_value());
        if (!std::isfinite(value)) {
          throw NumericError("train_sbs: non-finite loss at epoch " +
                             std::to_string(epoch + 1));
        }
        total += value;
        tape.backward(ad::scale(loss, Scalar(1) / static_cast<Scalar>(batch)));
      }
      model.params().clip_grads(static_cast<Scalar>(cfg.clip_norm));
      model.params().sgd_step(static_cast<Scalar>(cfg.learning_rate));
      done += batch;
    }
    log.epoch_loss.push_back(total / static_cast<double>(order.size()));
  }
  return log;
}

// Mean parse loss of the corpus under the current parameters (no updates).
template <class Scalar>
double eval_parse_loss(TreeLstmT<Scalar>& model, const SbsCorpus& corpus) {
  if (corpus.sentences.empty()) throw DataError("eval_parse_loss: empty corpus");
  double total = 0.0;
  for (const SbsExample& ex : corpus.sentences) {
    ad::TapeT<Scalar> tape(model.params());
    EncodeOptionsT<Scalar> opts;
    opts.mode = TreeMode::Forced;
    opts.forced = &ex.target;
    auto enc = model.encode_sentence(tape, ex.ids, ex.words, opts);
    total += static_cast<double>(
        parse_loss(tape, enc.step_probs, ex.target).scalar_value());
  }
  return total / static_cast<double>(corpus.sentences.size());
}

// Policy refinement: sample-mode (ST-Gumbel) encoding, task cross-entropy
// only. Returns per-epoch mean loss and training accuracy; epoch_hook, when
// set, is called after each epoch and its value logged (parsing F in the
// pipeline).
template <class Scalar>
TrainLog refine(TreeLstmT<Scalar>& model, const SbsCorpus& corpus,
                const ImitationConfig& cfg,
                const std::function<double(TreeLstmT<Scalar>&)>& epoch_hook = {}) {
  cfg.validate();
  if (corpus.pairs.empty()) throw DataError("refine: no sentence pairs");

  Rng rng(cfg.seed ^ 0x7c6e1b2f0d3a5941ull);
  std::vector<std::size_t> order(corpus.pairs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  TrainLog log;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double total = 0.0;
    std::size_t correct = 0;
    std::size_t done = 0;
    while (done < order.size()) {
      std::size_t batch = std::min<std::size_t>(
          static_cast<std::size_t>(cfg.batch_size), order.size() - done);
      model.params().zero_grads();
      for (std::size_t b = 0; b < batch; ++b) {
        const auto& pair = corpus.pairs[order[done + b]];
        const SbsExample& prem = corpus.sentences[static_cast<std::size_t>(pair.premise)];
        const SbsExample& hyp = corpus.sentences[static_cast<std::size_t>(pair.hypothesis)];
        ad::TapeT<Scalar> tape(model.params());
        EncodeOptionsT<Scalar> opts;
        opts.mode = TreeMode::Sample;
        opts.rng = &rng;
        auto enc_p = model.encode_sentence(tape, prem.ids, prem.words, opts);
        auto enc_h = model.encode_sentence(tape, hyp.ids, hyp.words, opts);
        auto cls = model.classify_pair(tape, enc_p.sentence, enc_h.sentence);
        ad::VarT<Scalar> loss = ad::cross_entropy(cls.logits, pair.label);
        double value = static_cast<double>(loss.scalar_value());
        if (!std::isfinite(value)) {
          throw NumericError("refine: non-finite loss at epoch " +
                             std::to_string(epoch + 1));
        }
        total += value;
        Eigen::Index argmax = 0;
        for (Eigen::Index i = 1; i < cls.probs.rows(); ++i) {
          if (cls.probs.value()(i, 0) > cls.probs.value()(argmax, 0)) argmax = i;
        }
        if (static_cast<int>(argmax) == pair.label) ++correct;
        tape.backward(ad::scale(loss, Scalar(1) / static_cast<Scalar>(batch)));
      }
      model.params().clip_grads(static_cast<Scalar>(cfg.clip_norm));
      model.params().sgd_step(static_cast<Scalar>(cfg.learning_rate));
      done += batch;
    }
    log.epoch_loss.push_back(total / static_cast<double>(order.size()));
    log.epoch_metric.push_back(static_cast<double>(correct) /
                               static_cast<double>(order.size()));
    if (epoch_hook) log.epoch_f.push_back(epoch_hook(model));
  }
  return log;
}

}  // namespace uparse

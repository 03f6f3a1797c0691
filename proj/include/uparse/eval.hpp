#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "uparse/trees.hpp"

namespace uparse {

struct FScore {
  double precision = 0.0;
  double recall = 0.0;
  double f = 0.0;
};

// F over two bracket sets. Both empty scores 1, exactly one empty scores 0.
FScore f_from_spans(const std::set<Span>& pred, const std::set<Span>& gold);

FScore unlabeled_f(const BinaryTree& pred, const BinaryTree& gold,
                   bool include_root);
FScore unlabeled_f(const BinaryTree& pred, const LabeledTree& gold,
                   bool include_root);

// One model run: predicted trees aligned with a sentence corpus.
struct ParseRun {
  std::string id;
  std::vector<BinaryTree> trees;
};

struct MetricReport {
  double mean_f = 0.0;   // macro average over sentences
  double micro_f = 0.0;  // from pooled bracket counts
  std::vector<double> per_sentence_f;
};

MetricReport corpus_mean_f(const ParseRun& run,
                           const std::vector<LabeledTree>& gold,
                           bool include_root);
MetricReport corpus_mean_f(const ParseRun& run,
                           const std::vector<BinaryTree>& gold,
                           bool include_root);

// Mean pairwise corpus F over all unordered run pairs.
double self_agreement(const std::vector<ParseRun>& runs, bool include_root);

// Mean F of the run against per-sentence right-branching trees.
double rb_agreement(const ParseRun& run, bool include_root);

struct LabelAccuracy {
  int occurrences = 0;
  int matched = 0;
  double accuracy = 0.0;
};

// For every requested label, the fraction of gold constituents (length >= 2)
// whose exact span appears in the predicted tree. Labels absent from the gold
// corpus are absent from the result.
std::map<std::string, LabelAccuracy> per_label_accuracy(
    const ParseRun& run, const std::vector<LabeledTree>& gold,
    const std::set<std::string>& labels, bool include_root);

// Paired one-tailed bootstrap test of mean(a) > mean(b): resamples sentence
// indices with replacement and reports the fraction of resamples where the
// mean difference is <= 0. Deterministic given the seed.
double paired_bootstrap(const std::vector<double>& a,
                        const std::vector<double>& b, int iterations,
                        std::uint64_t seed);

}  // namespace uparse

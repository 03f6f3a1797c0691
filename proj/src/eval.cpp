#include "uparse/eval.hpp"

#include <algorithm>
#include <functional>

#include "uparse/errors.hpp"
#include "uparse/rng.hpp"

namespace uparse {

namespace {

std::size_t intersection_size(const std::set<Span>& a, const std::set<Span>& b) {
  const std::set<Span>& small = a.size() <= b.size() ? a : b;
  const std::set<Span>& large = a.size() <= b.size() ? b : a;
  std::size_t n = 0;
  for (const Span& s : small) n += large.count(s);
  return n;
}

struct Counts {
  std::size_t match = 0;
  std::size_t pred = 0;
  std::size_t gold = 0;
};

FScore f_from_counts(const Counts& c) {
  if (c.pred == 0 && c.gold == 0) return FScore{1.0, 1.0, 1.0};
  if (c.pred == 0 || c.gold == 0) return FScore{0.0, 0.0, 0.0};
  FScore s;
  s.precision = static_cast<double>(c.match) / static_cast<double>(c.pred);
  s.recall = static_cast<double>(c.match) / static_cast<double>(c.gold);
  s.f = (s.precision + s.recall) > 0.0
            ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
            : 0.0;
  return s;
}

template <class GoldTree>
Counts sentence_counts(const BinaryTree& pred, const GoldTree& gold,
                       bool include_root) {
  if (pred.leaf_count() != gold.leaf_count()) {
    throw DataError("unlabeled_f: fringe mismatch (" +
                    std::to_string(pred.leaf_count()) + " vs " +
                    std::to_string(gold.leaf_count()) + " tokens)");
  }
  std::set<Span> ps = spans(pred, include_root);
  std::set<Span> gs = spans(gold, include_root);
  return Counts{intersection_size(ps, gs), ps.size(), gs.size()};
}

template <class GoldTree>
MetricReport corpus_report(const ParseRun& run, const std::vector<GoldTree>& gold,
                           bool include_root) {
  if (run.trees.size() != gold.size()) {
    throw DataError("corpus_mean_f: " + std::to_string(run.trees.size()) +
                    " predictions vs " + std::to_string(gold.size()) +
                    " references");
  }
  if (run.trees.empty()) throw DataError("corpus_mean_f: empty corpus");
  MetricReport report;
  report.per_sentence_f.reserve(run.trees.size());
  Counts pooled;
  double sum = 0.0;
  for (std::size_t i = 0; i < run.trees.size(); ++i) {
    Counts c = sentence_counts(run.trees[i], gold[i], include_root);
    pooled.match += c.match;
    pooled.pred += c.pred;
    pooled.gold += c.gold;
    double f = f_from_counts(c).f;
    report.per_sentence_f.push_back(f);
    sum += f;
  }
  report.mean_f = sum / static_cast<double>(run.trees.size());
  report.micro_f = f_from_counts(pooled).f;
  return report;
}

}  // namespace

FScore f_from_spans(const std::set<Span>& pred, const std::set<Span>& gold) {
  return f_from_counts(Counts{intersection_size(pred, gold), pred.size(), gold.size()});
}

FScore unlabeled_f(const BinaryTree& pred, const BinaryTree& gold,
                   bool include_root) {
  return f_from_counts(sentence_counts(pred, gold, include_root));
}

FScore unlabeled_f(const BinaryTree& pred, const LabeledTree& gold,
                   bool include_root) {
  return f_from_counts(sentence_counts(pred, gold, include_root));
}

MetricReport corpus_mean_f(const ParseRun& run,
                           const std::vector<LabeledTree>& gold,
                           bool include_root) {
  return corpus_report(run, gold, include_root);
}

MetricReport corpus_mean_f(const ParseRun& run,
                           const std::vector<BinaryTree>& gold,
                           bool include_root) {
  return corpus_report(run, gold, include_root);
}

double self_agreement(const std::vector<ParseRun>& runs, bool include_root) {
  if (runs.size() < 2) {
    throw DataError("self_agreement needs at least 2 runs, got " +
                    std::to_string(runs.size()));
  }
  double sum = 0.0;
  int pairs = 0;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    for (std::size_t j = i + 1; j < runs.size(); ++j) {
      sum += corpus_mean_f(runs[i], runs[j].trees, include_root).mean_f;
      ++pairs;
    }
  }
  return sum / static_cast<double>(pairs);
}

double rb_agreement(const ParseRun& run, bool include_root) {
  if (run.trees.empty()) throw DataError("rb_agreement: empty run");
  double sum = 0.0;
  for (const BinaryTree& t : run.trees) {
    BinaryTree rb = baseline_tree(BaselineKind::RightBranching, t.leaf_count());
    sum += f_from_counts(sentence_counts(t, rb, include_root)).f;
  }
  return sum / static_cast<double>(run.trees.size());
}

namespace {

void collect_labeled_spans(const LabeledTree& t, int& next,
                           std::vector<std::pair<std::string, Span>>& out) {
  if (t.is_leaf()) {
    ++next;
    return;
  }
  int start = next + 1;
  for (const auto& c : t.children()) collect_labeled_spans(c, next, out);
  Span span{start, next};
  if (span.length() >= 2) out.emplace_back(t.label(), span);
}

}  // namespace

std::map<std::string, LabelAccuracy> per_label_accuracy(
    const ParseRun& run, const std::vector<LabeledTree>& gold,
    const std::set<std::string>& labels, bool include_root) {
  if (run.trees.size() != gold.size()) {
    throw DataError("per_label_accuracy: prediction/reference count mismatch");
  }
  std::map<std::string, LabelAccuracy> out;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    std::vector<std::pair<std::string, Span>> gold_spans;
    int next = 0;
    collect_labeled_spans(gold[i], next, gold_spans);
    std::set<Span> pred_spans = spans(run.trees[i], include_root);
    for (const auto& [label, span] : gold_spans) {
      if (!labels.empty() && !labels.count(label)) continue;
      LabelAccuracy& acc = out[label];
      ++acc.occurrences;
      if (pred_spans.count(span)) ++acc.matched;
    }
  }
  for (auto& [label, acc] : out) {
    acc.accuracy = static_cast<double>(acc.matched) /
                   static_cast<double>(acc.occurrences);
  }
  return out;
}

double paired_bootstrap(const std::vector<double>& a,
                        const std::vector<double>& b, int iterations,
                        std::uint64_t seed) {
  if (a.size() != b.size()) {
    throw DataError("paired_bootstrap: score lists differ in length");
  }
  if (a.empty()) throw DataError("paired_bootstrap: empty score lists");
  if (iterations < 1000) {
    throw DataError("paired_bootstrap: need at least 1000 iterations");
  }
  std::vector<double> diff(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) diff[i] = a[i] - b[i];

  Rng rng(seed);
  int non_positive = 0;
  for (int it = 0; it < iterations; ++it) {
    double sum = 0.0;
    for (std::size_t i = 0; i < diff.size(); ++i) {
      sum += diff[rng.below(diff.size())];
    }
    if (sum <= 0.0) ++non_positive;
  }
  return static_cast<double>(non_positive) / static_cast<double>(iterations);
}

}  // namespace uparse

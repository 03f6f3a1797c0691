#include "uparse/report.hpp"

#include <cstdio>
#include <json.hpp>
#include <sstream>

#include "uparse/io.hpp"

namespace uparse::pipeline {

namespace {

std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

}  // namespace

std::string render_report_text(const EvaluateResult& result,
                               const EvaluateOptions& opts) {
  std::ostringstream out;
  out << "run  mean_f  micro_f  rb_agreement  id\n";
  for (std::size_t i = 0; i < result.runs.size(); ++i) {
    const auto& run = result.runs[i];
    out << (i + 1) << "    " << fixed4(run.report.mean_f) << "  "
        << fixed4(run.report.micro_f) << "   " << fixed4(run.rb_agreement)
        << "        " << run.id << '\n';
  }
  if (result.self_agreement) {
    out << "self_agreement: " << fixed4(*result.self_agreement) << '\n';
  }
  for (std::size_t i = 0; i < result.runs.size(); ++i) {
    const auto& acc = result.runs[i].label_accuracy;
    if (acc.empty()) continue;
    out << "label accuracy, run " << (i + 1) << " (" << result.runs[i].id << "):\n";
    out << "label  count  accuracy\n";
    for (const auto& [label, la] : acc) {
      out << label << "  " << la.occurrences << "  " << fixed4(la.accuracy) << '\n';
    }
  }
  if (result.bootstrap_p) {
    out << "bootstrap: p(F[" << opts.bootstrap_a << "] > F[" << opts.bootstrap_b
        << "]) = " << format_double(*result.bootstrap_p) << " ("
        << opts.bootstrap_iterations << " iterations, seed "
        << opts.bootstrap_seed << ")\n";
  }

  out << "\n# machine-readable\n";
  out << "runs=" << result.runs.size() << '\n';
  out << "include_root=" << (opts.include_root ? 1 : 0) << '\n';
  out << "strip_punct=" << (opts.strip_punct ? 1 : 0) << '\n';
  out << "average=" << (opts.micro ? "micro" : "macro") << '\n';
  for (std::size_t i = 0; i < result.runs.size(); ++i) {
    const auto& run = result.runs[i];
    std::string prefix = "run." + std::to_string(i + 1);
    out << prefix << ".id=" << run.id << '\n';
    out << prefix << ".mean_f=" << format_double(run.report.mean_f) << '\n';
    out << prefix << ".micro_f=" << format_double(run.report.micro_f) << '\n';
    out << prefix << ".rb_agreement=" << format_double(run.rb_agreement) << '\n';
    for (const auto& [label, la] : run.label_accuracy) {
      out << prefix << ".label." << label << ".count=" << la.occurrences << '\n';
      out << prefix << ".label." << label
          << ".accuracy=" << format_double(la.accuracy) << '\n';
    }
  }
  if (result.self_agreement) {
    out << "self_agreement=" << format_double(*result.self_agreement) << '\n';
  }
  if (result.bootstrap_p) {
    out << "bootstrap_p=" << format_double(*result.bootstrap_p) << '\n';
  }
  return out.str();
}

std::string render_report_json(const EvaluateResult& result,
                               const EvaluateOptions& opts) {
  nlohmann::ordered_json j;
  j["include_root"] = opts.include_root;
  j["strip_punct"] = opts.strip_punct;
  j["average"] = opts.micro ? "micro" : "macro";
  j["runs"] = nlohmann::ordered_json::array();
  for (const auto& run : result.runs) {
    nlohmann::ordered_json r;
    r["id"] = run.id;
    r["mean_f"] = run.report.mean_f;
    r["micro_f"] = run.report.micro_f;
    r["rb_agreement"] = run.rb_agreement;
    if (!run.label_accuracy.empty()) {
      nlohmann::ordered_json labels;
      for (const auto& [label, la] : run.label_accuracy) {
        labels[label] = {{"count", la.occurrences}, {"accuracy", la.accuracy}};
      }
      r["label_accuracy"] = labels;
    }
    j["runs"].push_back(r);
  }
  if (result.self_agreement) j["self_agreement"] = *result.self_agreement;
  if (result.bootstrap_p) {
    j["bootstrap_p"] = *result.bootstrap_p;
    j["bootstrap_a"] = opts.bootstrap_a;
    j["bootstrap_b"] = opts.bootstrap_b;
    j["bootstrap_iterations"] = opts.bootstrap_iterations;
    j["bootstrap_seed"] = opts.bootstrap_seed;
  }
  return j.dump(2) + "\n";
}

}  // namespace uparse::pipeline

#pragma once

#include <string>

#include "uparse/pipeline.hpp"

namespace uparse::pipeline {

// Table-style text report with a trailing machine-readable key=value block.
std::string render_report_text(const EvaluateResult& result,
                               const EvaluateOptions& opts);

std::string render_report_json(const EvaluateResult& result,
                               const EvaluateOptions& opts);

}  // namespace uparse::pipeline

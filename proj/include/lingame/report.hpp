#pragma once

// Deterministic renderings of meta-analytic results: forest plots (SVG and
// plain text) and canonical JSON.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "lingame/core.hpp"
#include "lingame/stats.hpp"

namespace lingame {

struct ForestStyle {
  double width = 820.0;
  double row_height = 24.0;
  double plot_left = 250.0;
  double plot_width = 320.0;
  double max_marker = 16.0;
};

// One row per included effect in input order, a pooled diamond, a zero line
// and a heterogeneity footer; excluded effects are listed as footnotes.
// Throws Error{InconsistentInput} when the meta weights do not cover exactly
// the included effects.
std::string forest_svg(const MetaResult& meta, std::span<const StudyEffect> effects,
                       const ForestStyle& style = {});

std::string forest_text(const MetaResult& meta, std::span<const StudyEffect> effects);

// Marker x-coordinate for an effect size; exposed for layout checks.
double forest_x(const MetaResult& meta, std::span<const StudyEffect> effects, double value,
                const ForestStyle& style = {});

// "τ²=0.00; Q=2.00 (df=1); I²=0.50; z=1.41; p=0.16"
std::string heterogeneity_line(const MetaResult& meta);

std::string footnote_text(ExclusionReason reason);

// Sorted keys, floats with six decimals, two-space indentation, trailing
// newline. Non-finite numbers are written as null.
std::string canonical_json(const nlohmann::json& value);

struct PipelineOutputs {
  std::string dataset_digest;
  nlohmann::json config;  // echoed verbatim
  std::vector<StudyEffect> effects;
  std::vector<MetaResult> metas;
};

nlohmann::json meta_to_json(const MetaResult& meta);
nlohmann::json effect_to_json(const StudyEffect& effect);

// Canonical results document. "meta" is omitted when no model was run.
std::string results_json(const PipelineOutputs& outputs);

nlohmann::json validation_to_json(const ValidationReport& report,
                                  const std::optional<DescriptiveStats>& descriptives);

}  // namespace lingame

#pragma once

// End-to-end orchestration: ingest, optional elicitation, ΔS, study-level
// regressions, meta-analysis and rendering. Each stage also has a document
// form so the CLI subcommands can be chained through files.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "lingame/core.hpp"
#include "lingame/elicit.hpp"
#include "lingame/stats.hpp"

namespace lingame {

enum class SentimentMode { Fixture, Live };

struct AnalysisConfig {
  bool fixed = true;
  bool random = true;
  Tau2Estimator tau2 = Tau2Estimator::DL;
};

struct PipelineConfig {
  std::filesystem::path data_path;
  std::optional<std::filesystem::path> rates_path;
  std::optional<std::filesystem::path> fixtures_path;
  std::optional<std::filesystem::path> instructions_dir;
  SentimentMode mode = SentimentMode::Fixture;
  ElicitationConfig elicitation;
  AnalysisConfig analysis;
  std::filesystem::path output_dir;
};

namespace exit_status {
inline constexpr int kOk = 0;
inline constexpr int kInternal = 1;
inline constexpr int kValidation = 2;
inline constexpr int kProvider = 3;
}  // namespace exit_status

// Where sentiments came from: "dataset", "fixture" or "live".
std::string sentiment_source(const PipelineConfig& config);

nlohmann::json config_echo(const AnalysisConfig& analysis, const std::string& source);

// ΔS per condition plus the per-study listing needed to rebuild StudyPoints.
nlohmann::json delta_s_document(std::span<const Study> dataset, const std::string& digest,
                                const std::string& source);
std::vector<StudyPoints> points_from_document(const nlohmann::json& doc);

nlohmann::json effects_document(std::span<const StudyEffect> effects, const std::string& digest,
                                const std::string& source);
std::vector<StudyEffect> effects_from_document(const nlohmann::json& doc);

// Models requested by the config in the order fixed, random_dl, random_reml.
// With random requested both tau2 estimators are run.
std::vector<MetaResult> run_models(std::span<const StudyEffect> effects,
                                   const AnalysisConfig& analysis);

// The model shown in the forest plot: the configured random estimator when
// random is requested, otherwise fixed.
const MetaResult& primary_model(std::span<const MetaResult> metas, const AnalysisConfig& analysis);

// Reads LINGAME_* and instructions, builds the provider and elicits. Throws
// Error{ProviderFailure} before any network traffic when credentials are
// missing in live mode. With `failures` given, failed conditions are
// collected unless every condition fails, which is rethrown.
std::vector<Study> elicit_for_config(std::span<const Study> dataset, const PipelineConfig& config,
                                     std::vector<ElicitationFailure>* failures = nullptr);

// Writes validation.json, delta_s.json, effects.json, results.json,
// forest.svg and forest.txt into the output directory. Conditions that fail
// to elicit are listed in validation.json and left without sentiments; the
// run only aborts when every condition fails. Returns the process exit
// status; on failure a JSON error document is written to `err`.
int run_pipeline(const PipelineConfig& config, std::ostream& err);

std::string error_json(ErrorCode code, int status, const std::string& message,
                       const nlohmann::json& details = nullptr);

int exit_status_for(ErrorCode code) noexcept;

}  // namespace lingame

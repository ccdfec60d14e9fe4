// lingame: sentiment-based analysis of dictator-game experiments.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "lingame/choice.hpp"
#include "lingame/core.hpp"
#include "lingame/dataset_io.hpp"
#include "lingame/elicit.hpp"
#include "lingame/error.hpp"
#include "lingame/pipeline.hpp"
#include "lingame/report.hpp"
#include "lingame/stats.hpp"

namespace fs = std::filesystem;
using namespace lingame;

namespace {

struct Options {
  std::string data;
  std::string rates;
  std::string fixtures;
  std::string instructions;
  std::string mode = "fixture";
  std::string population_mode = "count1000-country";
  std::string session_policy = "fresh-per-instruction";
  int parallelism = 1;
  int max_retries = 3;
  std::string tau2 = "dl";
  std::vector<std::string> models{"fixed", "random"};
  std::string out;
  std::string input;
  std::string text_out;
  std::string audit;
  std::string source = "dataset";
  bool skip_failed = false;

  // simulate
  std::vector<double> x0{1.0 / 3, 1.0 / 3, 1.0 / 3};
  std::vector<double> sentiments{2.6, 5.233, 5.369};
  std::vector<double> payoff = std::vector<double>(9, 0.0);
  double lambda = 1.0;
  double step = 1e-2;
  double horizon = 10.0;
  std::string integrator = "rk4";
  int every = 1;
};

void add_data(CLI::App* cmd, Options& o) {
  cmd->add_option("--data", o.data, "Dataset CSV")->required()->check(CLI::ExistingFile);
  cmd->add_option("--rates", o.rates, "study_id,condition_id,prosocial_rate CSV overriding rates")
      ->check(CLI::ExistingFile);
}

void add_elicitation(CLI::App* cmd, Options& o) {
  cmd->add_option("--mode", o.mode, "Sentiment source")
      ->check(CLI::IsMember({"fixture", "live"}));
  cmd->add_option("--fixtures", o.fixtures, "Fixture CSV answering fixture-mode queries")
      ->check(CLI::ExistingFile);
  cmd->add_option("--population-mode", o.population_mode)
      ->check(CLI::IsMember({"count1000-country", "count1000-usa", "nocount-country"}));
  cmd->add_option("--session-policy", o.session_policy)
      ->check(CLI::IsMember({"fresh-per-instruction", "single-chat-per-study"}));
  cmd->add_option("--parallelism", o.parallelism)->check(CLI::PositiveNumber);
  cmd->add_option("--max-retries", o.max_retries)->check(CLI::NonNegativeNumber);
  cmd->add_option("--instructions", o.instructions,
                  "Directory of <study_id>/<condition_id>.txt instruction texts")
      ->check(CLI::ExistingDirectory);
}

void add_analysis(CLI::App* cmd, Options& o) {
  cmd->add_option("--tau2", o.tau2, "Between-study variance estimator")
      ->check(CLI::IsMember({"dl", "reml"}));
  cmd->add_option("--model", o.models, "Meta-analysis models (fixed, random)")
      ->delimiter(',')
      ->check(CLI::IsMember({"fixed", "random"}));
}

std::vector<Study> load(const Options& o) {
  auto dataset = ingest(o.data);
  if (!o.rates.empty()) merge_rates(dataset, read_file(o.rates));
  return dataset;
}

PipelineConfig pipeline_config(const Options& o) {
  PipelineConfig c;
  c.data_path = o.data;
  if (!o.rates.empty()) c.rates_path = o.rates;
  if (!o.fixtures.empty()) c.fixtures_path = o.fixtures;
  if (!o.instructions.empty()) c.instructions_dir = o.instructions;
  c.mode = o.mode == "live" ? SentimentMode::Live : SentimentMode::Fixture;
  c.elicitation.population_mode = *population_mode_from_string(o.population_mode);
  c.elicitation.session_policy = *session_policy_from_string(o.session_policy);
  c.elicitation.parallelism = o.parallelism;
  c.elicitation.max_retries = o.max_retries;
  c.analysis.tau2 = o.tau2 == "reml" ? Tau2Estimator::REML : Tau2Estimator::DL;
  c.analysis.fixed = c.analysis.random = false;
  for (const auto& m : o.models) (m == "fixed" ? c.analysis.fixed : c.analysis.random) = true;
  c.output_dir = o.out.empty() ? fs::path(".") : fs::path(o.out);
  return c;
}

void emit(const std::string& path, const std::string& contents) {
  if (path.empty() || path == "-") {
    std::cout << contents;
  } else {
    write_file(path, contents);
  }
}

nlohmann::json read_json(const std::string& path) {
  try {
    return nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::ParseError, path + ": " + e.what());
  }
}

int cmd_validate(const Options& o) {
  const auto dataset = load(o);
  std::optional<DescriptiveStats> descriptives;
  try {
    descriptives = descriptive_stats(dataset);
  } catch (const Error&) {
  }
  emit(o.out, canonical_json(validation_to_json(validate_dataset(dataset), descriptives)));
  return 0;
}

int cmd_elicit(const Options& o) {
  auto config = pipeline_config(o);
  config.output_dir = fs::path(o.out).parent_path();
  if (config.output_dir.empty()) config.output_dir = ".";
  const auto dataset = load(o);
  std::vector<ElicitationFailure> failures;
  auto elicited = elicit_for_config(dataset, config, o.skip_failed ? &failures : nullptr);
  for (const auto& f : failures) {
    std::cerr << "skipped " << f.study_id << "/" << f.condition_id << ": " << f.message << "\n";
  }
  emit(o.out, serialize_dataset(elicited));
  return 0;
}

int cmd_delta_s(const Options& o) {
  const auto dataset = load(o);
  emit(o.out, delta_s_document(dataset, dataset_digest(dataset), o.source).dump(2) + "\n");
  return 0;
}

int cmd_regress(const Options& o) {
  const auto doc = read_json(o.input);
  std::vector<StudyEffect> effects;
  for (const auto& p : points_from_document(doc)) effects.push_back(study_effect(p));
  emit(o.out, effects_document(effects, doc.at("dataset_digest").get<std::string>(),
                               doc.at("sentiment_source").get<std::string>())
                      .dump(2) +
                  "\n");
  return 0;
}

int cmd_meta(const Options& o) {
  const auto doc = read_json(o.input);
  const auto effects = effects_from_document(doc);
  const auto analysis = pipeline_config(o).analysis;
  const auto metas = run_models(effects, analysis);
  emit(o.out, results_json({doc.at("dataset_digest").get<std::string>(),
                            config_echo(analysis, doc.at("sentiment_source").get<std::string>()),
                            effects, metas}));
  return 0;
}

int cmd_forest(const Options& o) {
  const auto effects = effects_from_document(read_json(o.input));
  const auto analysis = pipeline_config(o).analysis;
  const auto metas = run_models(effects, analysis);
  const auto& primary = primary_model(metas, analysis);
  emit(o.out, forest_svg(primary, effects));
  if (!o.text_out.empty()) emit(o.text_out, forest_text(primary, effects));
  return 0;
}

int cmd_simulate(const Options& o) {
  if (o.x0.size() != 3 || o.sentiments.size() != 3 || o.payoff.size() != 9) {
    throw Error(ErrorCode::InvalidArgument,
                "--x0 and --sentiments take 3 values, --payoff takes 9 (row major)");
  }
  ReplicatorConfig config;
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) config.payoff_matrix[i][j] = o.payoff[3 * i + j];
  }
  config.lambda = o.lambda;
  config.step = o.step;
  config.horizon = o.horizon;
  config.integrator = o.integrator == "euler" ? Integrator::Euler : Integrator::RK4;
  const PopulationState x0({o.x0[0], o.x0[1], o.x0[2]});
  const auto traj =
      simulate_replicator(x0, {o.sentiments[0], o.sentiments[1], o.sentiments[2]}, config);

  std::string csv = "t,x_keep,x_half,x_all\n";
  char buf[128];
  for (std::size_t k = 0; k < traj.size(); ++k) {
    if (k % static_cast<std::size_t>(o.every) != 0 && k + 1 != traj.size()) continue;
    const auto& p = traj[k];
    std::snprintf(buf, sizeof buf, "%.6f,%.12f,%.12f,%.12f\n", p.t, p.x[0], p.x[1], p.x[2]);
    csv += buf;
  }
  emit(o.out, csv);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sentiment-based analysis of dictator-game experiments"};
  app.require_subcommand(1);
  Options o;

  auto* validate = app.add_subcommand("validate", "Report exclusions and descriptive statistics");
  add_data(validate, o);
  validate->add_option("--out", o.out, "Output JSON (default stdout)");

  auto* elicit = app.add_subcommand("elicit", "Elicit sentiment scores into a dataset CSV");
  add_data(elicit, o);
  add_elicitation(elicit, o);
  elicit->add_option("--out", o.out, "Output dataset CSV")->required();
  elicit->add_flag("--skip-failed", o.skip_failed,
                   "Keep going when a condition fails; its scores stay empty");

  auto* delta = app.add_subcommand("delta-s", "Compute ΔS per condition");
  add_data(delta, o);
  delta->add_option("--sentiment-source", o.source, "Recorded provenance of the sentiments")
      ->check(CLI::IsMember({"dataset", "fixture", "live"}));
  delta->add_option("--out", o.out, "Output JSON (default stdout)");

  auto* regress = app.add_subcommand("regress", "Study-level regressions of rate on ΔS");
  regress->add_option("--input", o.input, "delta-s JSON")->required()->check(CLI::ExistingFile);
  regress->add_option("--out", o.out, "Output JSON (default stdout)");

  auto* meta = app.add_subcommand("meta", "Meta-analysis of study effects");
  meta->add_option("--input", o.input, "regress JSON")->required()->check(CLI::ExistingFile);
  add_analysis(meta, o);
  meta->add_option("--out", o.out, "Output JSON (default stdout)");

  auto* forest = app.add_subcommand("forest", "Forest plot of study effects");
  forest->add_option("--input", o.input, "regress JSON")->required()->check(CLI::ExistingFile);
  add_analysis(forest, o);
  forest->add_option("--out", o.out, "Output SVG (default stdout)");
  forest->add_option("--text", o.text_out, "Also write the plain-text plot here");

  auto* simulate = app.add_subcommand("simulate", "Sentiment-augmented replicator dynamics");
  simulate->add_option("--x0", o.x0, "Initial shares keep,half,all")->delimiter(',');
  simulate->add_option("--sentiments", o.sentiments, "Sentiments keep,half,all")->delimiter(',');
  simulate->add_option("--payoff", o.payoff, "3x3 interaction payoffs, row major")->delimiter(',');
  simulate->add_option("--lambda", o.lambda)->check(CLI::NonNegativeNumber);
  simulate->add_option("--step", o.step)->check(CLI::PositiveNumber);
  simulate->add_option("--horizon", o.horizon)->check(CLI::PositiveNumber);
  simulate->add_option("--integrator", o.integrator)->check(CLI::IsMember({"rk4", "euler"}));
  simulate->add_option("--every", o.every, "Emit every n-th step")->check(CLI::PositiveNumber);
  simulate->add_option("--out", o.out, "Trajectory CSV (default stdout)");

  auto* run = app.add_subcommand("run", "Full pipeline: validate, ΔS, regress, meta, plot");
  add_data(run, o);
  add_elicitation(run, o);
  add_analysis(run, o);
  run->add_option("--out", o.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*run) return run_pipeline(pipeline_config(o), std::cerr);
    if (*validate) return cmd_validate(o);
    if (*elicit) return cmd_elicit(o);
    if (*delta) return cmd_delta_s(o);
    if (*regress) return cmd_regress(o);
    if (*meta) return cmd_meta(o);
    if (*forest) return cmd_forest(o);
    if (*simulate) return cmd_simulate(o);
  } catch (const Error& e) {
    const int status = exit_status_for(e.code());
    std::cerr << error_json(e.code(), status, e.what());
    return status;
  } catch (const std::exception& e) {
    std::cerr << error_json(ErrorCode::Internal, exit_status::kInternal, e.what());
    return exit_status::kInternal;
  }
  return exit_status::kInternal;
}

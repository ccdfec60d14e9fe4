#include "lingame/pipeline.hpp"

#include <ostream>

#include "lingame/dataset_io.hpp"
#include "lingame/error.hpp"
#include "lingame/http_provider.hpp"
#include "lingame/report.hpp"

namespace lingame {

namespace fs = std::filesystem;

std::string sentiment_source(const PipelineConfig& config) {
  if (config.mode == SentimentMode::Live) return "live";
  return config.fixtures_path ? "fixture" : "dataset";
}

nlohmann::json config_echo(const AnalysisConfig& analysis, const std::string& source) {
  nlohmann::json models = nlohmann::json::array();
  if (analysis.fixed) models.push_back("fixed");
  if (analysis.random) models.push_back("random");
  return {{"models", models},
          {"tau2", analysis.tau2 == Tau2Estimator::DL ? "dl" : "reml"},
          {"ci_multiplier", kCiMultiplier},
          {"sentiment_source", source},
          {"regression", "ols_with_intercept"},
          {"effect_scale", "raw_slope"}};
}

nlohmann::json delta_s_document(std::span<const Study> dataset, const std::string& digest,
                                const std::string& source) {
  nlohmann::json studies = nlohmann::json::array();
  for (const auto& study : dataset) {
    nlohmann::json conditions = nlohmann::json::array();
    for (const auto& c : study.conditions) {
      nlohmann::json row{{"condition_id", c.condition_id}};
      if (c.sentiments.delta_s_computable()) {
        const auto d = delta_s(c.sentiments);
        row["delta_s"] = d.value;
        row["branch"] = to_string(d.branch);
      } else {
        row["delta_s"] = nullptr;
        row["branch"] = nullptr;
      }
      row["prosocial_rate"] =
          c.prosocial_rate ? nlohmann::json(*c.prosocial_rate) : nlohmann::json(nullptr);
      conditions.push_back(std::move(row));
    }
    studies.push_back({{"study_id", study.study_id},
                       {"listed_conditions", study.conditions.size()},
                       {"conditions", std::move(conditions)}});
  }
  return {{"dataset_digest", digest}, {"sentiment_source", source}, {"studies", studies}};
}

std::vector<StudyPoints> points_from_document(const nlohmann::json& doc) {
  std::vector<StudyPoints> out;
  try {
    for (const auto& s : doc.at("studies")) {
      StudyPoints p;
      p.study_id = s.at("study_id").get<std::string>();
      p.listed_conditions = s.at("listed_conditions").get<std::size_t>();
      for (const auto& c : s.at("conditions")) {
        if (c.at("delta_s").is_null() || c.at("prosocial_rate").is_null()) continue;
        p.delta_s.push_back(c.at("delta_s").get<double>());
        p.rates.push_back(c.at("prosocial_rate").get<double>());
      }
      out.push_back(std::move(p));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaError, std::string("malformed delta-s document: ") + e.what());
  }
  return out;
}

nlohmann::json effects_document(std::span<const StudyEffect> effects, const std::string& digest,
                                const std::string& source) {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& e : effects) list.push_back(effect_to_json(e));
  return {{"dataset_digest", digest}, {"sentiment_source", source}, {"effects", list}};
}

std::vector<StudyEffect> effects_from_document(const nlohmann::json& doc) {
  std::vector<StudyEffect> out;
  try {
    for (const auto& j : doc.at("effects")) {
      StudyEffect e;
      e.study_id = j.at("study_id").get<std::string>();
      e.slope = j.at("slope").get<double>();
      e.intercept = j.at("intercept").get<double>();
      e.se = j.at("se").get<double>();
      e.n_conditions = j.at("n_conditions").get<std::size_t>();
      e.included = j.at("included").get<bool>();
      if (!j.at("exclusion_reason").is_null()) {
        const auto text = j.at("exclusion_reason").get<std::string>();
        e.exclusion_reason = exclusion_reason_from_string(text);
        if (!e.exclusion_reason) {
          throw Error(ErrorCode::SchemaError, "unknown exclusion reason '" + text + "'");
        }
      }
      out.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaError, std::string("malformed effects document: ") + e.what());
  }
  return out;
}

std::vector<MetaResult> run_models(std::span<const StudyEffect> effects,
                                   const AnalysisConfig& analysis) {
  std::vector<MetaResult> out;
  if (analysis.fixed) out.push_back(meta_fixed(effects));
  if (analysis.random) {
    out.push_back(meta_random(effects, Tau2Estimator::DL));
    out.push_back(meta_random(effects, Tau2Estimator::REML));
  }
  return out;
}

const MetaResult& primary_model(std::span<const MetaResult> metas, const AnalysisConfig& analysis) {
  MetaModel wanted = MetaModel::Fixed;
  if (analysis.random) {
    wanted = analysis.tau2 == Tau2Estimator::DL ? MetaModel::RandomDL : MetaModel::RandomREML;
  }
  for (const auto& m : metas) {
    if (m.model == wanted) return m;
  }
  throw Error(ErrorCode::InvalidArgument, "no meta-analysis model was requested");
}

namespace {

std::vector<Study> elicit_with_provider(std::span<const Study> dataset, CompletionProvider& provider,
                                        const PipelineConfig& config, const ElicitationHooks& hooks,
                                        std::vector<ElicitationFailure>* failures) {
  auto out = elicit_dataset(dataset, provider, config.elicitation, hooks, failures);
  std::size_t total = 0;
  for (const auto& study : dataset) total += study.conditions.size();
  if (failures && total > 0 && failures->size() == total) {
    throw Error(failures->front().code,
                "every condition failed to elicit; first: " + failures->front().message);
  }
  return out;
}

}  // namespace

std::vector<Study> elicit_for_config(std::span<const Study> dataset, const PipelineConfig& config,
                                     std::vector<ElicitationFailure>* failures) {
  ElicitationHooks hooks;
  if (config.instructions_dir) {
    const fs::path dir = *config.instructions_dir;
    hooks.instructions = [dir](const Condition& c) -> std::string {
      const fs::path file = dir / c.study_id / (c.condition_id + ".txt");
      return fs::exists(file) ? read_file(file) : std::string{};
    };
  }
  std::optional<AuditLog> audit;
  if (config.mode == SentimentMode::Live) {
    auto settings = HttpProviderSettings::from_environment();
    fs::create_directories(config.output_dir);
    audit.emplace((config.output_dir / "audit.jsonl").string());
    hooks.audit = [&audit](const AuditRecord& r) { audit->write(r); };
    HttpChatProvider provider(std::move(settings));
    return elicit_with_provider(dataset, provider, config, hooks, failures);
  }
  if (!config.fixtures_path) {
    throw Error(ErrorCode::InvalidArgument, "fixture elicitation needs a fixtures file");
  }
  const auto fixture_data = ingest(*config.fixtures_path);
  FixtureProvider provider(fixture_data);
  return elicit_with_provider(dataset, provider, config, hooks, failures);
}

std::string error_json(ErrorCode code, int status, const std::string& message,
                       const nlohmann::json& details) {
  nlohmann::json j{{"error", {{"code", to_string(code)}, {"message", message}, {"exit_status", status}}}};
  if (!details.is_null()) j["error"]["details"] = details;
  return j.dump() + "\n";
}

int exit_status_for(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::ProviderFailure:
    case ErrorCode::ParseFailure:
    case ErrorCode::NonNumericResponse:
      return exit_status::kProvider;
    case ErrorCode::IoError:
    case ErrorCode::Internal:
      return exit_status::kInternal;
    default:
      return exit_status::kValidation;
  }
}

namespace {

void refuse_overwrite(const fs::path& target, const PipelineConfig& config) {
  std::vector<fs::path> inputs{config.data_path};
  if (config.rates_path) inputs.push_back(*config.rates_path);
  if (config.fixtures_path) inputs.push_back(*config.fixtures_path);
  for (const auto& in : inputs) {
    std::error_code ec;
    if (fs::exists(target) && fs::equivalent(target, in, ec)) {
      throw Error(ErrorCode::IoError, "refusing to overwrite input " + in.string());
    }
  }
}

}  // namespace

int run_pipeline(const PipelineConfig& config, std::ostream& err) {
  try {
    config.elicitation.validate();
    if (!config.analysis.fixed && !config.analysis.random) {
      throw Error(ErrorCode::InvalidArgument, "no meta-analysis model requested");
    }
    if (config.mode == SentimentMode::Live) {
      // Fail before touching the network or the output directory.
      (void)HttpProviderSettings::from_environment();
    }
    fs::create_directories(config.output_dir);
    const auto out = [&](const char* name) {
      const fs::path p = config.output_dir / name;
      refuse_overwrite(p, config);
      return p;
    };

    auto dataset = ingest(config.data_path);
    if (config.rates_path) merge_rates(dataset, read_file(*config.rates_path));
    std::vector<ElicitationFailure> failures;
    if (config.mode == SentimentMode::Live || config.fixtures_path) {
      dataset = elicit_for_config(dataset, config, &failures);
      write_file(out("elicited.csv"), serialize_dataset(dataset));
    }

    const std::string digest = dataset_digest(dataset);
    const std::string source = sentiment_source(config);

    const auto report = validate_dataset(dataset);
    std::optional<DescriptiveStats> descriptives;
    try {
      descriptives = descriptive_stats(dataset);
    } catch (const Error&) {
    }
    auto validation = validation_to_json(report, descriptives);
    if (!failures.empty()) {
      auto& list = validation["elicitation_failures"] = nlohmann::json::array();
      for (const auto& f : failures) {
        list.push_back({{"study_id", f.study_id},
                        {"condition_id", f.condition_id},
                        {"code", to_string(f.code)},
                        {"message", f.message}});
      }
    }
    write_file(out("validation.json"), canonical_json(validation));

    const auto delta_doc = delta_s_document(dataset, digest, source);
    write_file(out("delta_s.json"), delta_doc.dump(2) + "\n");

    std::vector<StudyEffect> effects;
    for (const auto& p : points_from_document(delta_doc)) effects.push_back(study_effect(p));
    const auto effects_doc = effects_document(effects, digest, source);
    write_file(out("effects.json"), effects_doc.dump(2) + "\n");
    effects = effects_from_document(effects_doc);

    std::size_t included = 0;
    nlohmann::json exclusions = nlohmann::json::array();
    for (const auto& e : effects) {
      if (e.included) {
        ++included;
      } else {
        exclusions.push_back(
            {{"study_id", e.study_id},
             {"reason", to_string(e.exclusion_reason.value_or(ExclusionReason::MissingData))}});
      }
    }
    if (included < 2) {
      err << error_json(ErrorCode::NoIncludedStudies, exit_status::kValidation,
                        std::to_string(included) +
                            " included stud(ies); the meta-analysis needs at least 2",
                        {{"exclusions", exclusions}});
      return exit_status::kValidation;
    }

    const auto metas = run_models(effects, config.analysis);
    const auto& primary = primary_model(metas, config.analysis);
    write_file(out("results.json"),
               results_json({digest, config_echo(config.analysis, source), effects, metas}));
    write_file(out("forest.svg"), forest_svg(primary, effects));
    write_file(out("forest.txt"), forest_text(primary, effects));
    return exit_status::kOk;
  } catch (const Error& e) {
    const int status = exit_status_for(e.code());
    err << error_json(e.code(), status, e.what());
    return status;
  } catch (const std::exception& e) {
    err << error_json(ErrorCode::Internal, exit_status::kInternal, e.what());
    return exit_status::kInternal;
  }
}

}  // namespace lingame

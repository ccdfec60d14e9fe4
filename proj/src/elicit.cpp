#include "lingame/elicit.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <exception>
#include <regex>
#include <thread>

#include <json.hpp>

namespace lingame {

std::string_view to_string(PopulationMode mode) noexcept {
  switch (mode) {
    case PopulationMode::Count1000Country: return "count1000-country";
    case PopulationMode::Count1000USA: return "count1000-usa";
    case PopulationMode::NoCountCountry: return "nocount-country";
  }
  return "unknown";
}

std::string_view to_string(SessionPolicy policy) noexcept {
  switch (policy) {
    case SessionPolicy::FreshPerInstruction: return "fresh-per-instruction";
    case SessionPolicy::SingleChatPerStudy: return "single-chat-per-study";
  }
  return "unknown";
}

std::optional<PopulationMode> population_mode_from_string(std::string_view text) noexcept {
  for (auto m : {PopulationMode::Count1000Country, PopulationMode::Count1000USA,
                 PopulationMode::NoCountCountry}) {
    if (to_string(m) == text) return m;
  }
  return std::nullopt;
}

std::optional<SessionPolicy> session_policy_from_string(std::string_view text) noexcept {
  for (auto p : {SessionPolicy::FreshPerInstruction, SessionPolicy::SingleChatPerStudy}) {
    if (to_string(p) == text) return p;
  }
  return std::nullopt;
}

void ElicitationConfig::validate() const {
  if (parallelism < 1) throw Error(ErrorCode::InvalidArgument, "parallelism must be >= 1");
  if (max_retries < 0) throw Error(ErrorCode::InvalidArgument, "max_retries must be >= 0");
  if (session_policy == SessionPolicy::SingleChatPerStudy &&
      population_mode != PopulationMode::Count1000Country) {
    throw Error(ErrorCode::InvalidArgument,
                "single-chat-per-study only runs with the count1000-country population mode");
  }
}

std::string build_prompt(const PromptSpec& spec, const ElicitationConfig& config) {
  if (spec.action_text.empty()) throw Error(ErrorCode::InvalidSpec, "empty action text");

  std::string population;
  switch (config.population_mode) {
    case PopulationMode::Count1000Country:
      if (spec.country.empty()) throw Error(ErrorCode::InvalidSpec, "empty country");
      population = "a population of 1000 people living in " + spec.country;
      break;
    case PopulationMode::Count1000USA:
      population = "a population of 1000 people living in the USA";
      break;
    case PopulationMode::NoCountCountry:
      if (spec.country.empty()) throw Error(ErrorCode::InvalidSpec, "empty country");
      population = "a population living in " + spec.country;
      break;
  }

  std::string prompt;
  if (!spec.instruction_text.empty()) {
    prompt += spec.instruction_text;
    prompt += "\n\n";
  }
  prompt += "Now imagine that there is " + population +
            ". What do you think the average response to the following questions would be? "
            "(Please return an exact number with two decimal digits). How negative or positive "
            "is the action of " +
            spec.action_text +
            " on a 1–7 scale, with 1 being 'very negative' and 7 being 'very positive'?";
  return prompt;
}

SentimentScore parse_score(std::string_view raw) {
  static const std::regex number(R"(-?(?:\d+(?:\.\d+)?|\.\d+))");
  std::match_results<std::string_view::const_iterator> m;
  if (!std::regex_search(raw.begin(), raw.end(), m, number)) {
    throw Error(ErrorCode::NonNumericResponse,
                "no number in response: \"" + std::string(raw) + "\"");
  }
  const std::string token = m.str();
  double value = 0.0;
  std::from_chars(token.data(), token.data() + token.size(), value);
  if (!(value >= SentimentScore::kMin && value <= SentimentScore::kMax)) {
    throw Error(ErrorCode::OutOfRangeScore, "score " + token + " outside [1, 7]");
  }
  return SentimentScore(value);
}

FixtureProvider::FixtureProvider(std::span<const Study> dataset) {
  for (const auto& study : dataset) {
    for (const auto& c : study.conditions) {
      for (Action a : kAllActions) {
        if (const auto& s = c.sentiments[a]) {
          scores_.emplace(std::tuple{c.study_id, c.condition_id, a}, s->value());
        }
      }
    }
  }
}

std::string FixtureProvider::complete(SessionId, const Query& query) {
  const auto it = scores_.find({query.study_id, query.condition_id, query.action});
  if (it == scores_.end()) {
    throw ProviderError("fixture has no " + std::string(to_string(query.action)) + " score for " +
                            query.study_id + "/" + query.condition_id,
                        false);
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", it->second);
  return buf;
}

AuditLog::AuditLog(const std::string& path) : out_(path, std::ios::app) {
  if (!out_) throw Error(ErrorCode::IoError, "cannot open audit log " + path);
}

void AuditLog::write(const AuditRecord& r) {
  nlohmann::json j{{"study_id", r.study_id},       {"condition_id", r.condition_id},
                   {"action", to_string(r.action)}, {"mode", r.mode},
                   {"prompt", r.prompt},           {"raw_response", r.raw_response},
                   {"timestamp", r.timestamp}};
  j["parsed_score"] = r.parsed_score ? nlohmann::json(*r.parsed_score) : nlohmann::json(nullptr);
  std::lock_guard lock(mutex_);
  out_ << j.dump() << '\n';
  out_.flush();
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

namespace {

std::string mode_label(const ElicitationConfig& config) {
  return std::string(to_string(config.population_mode)) + "/" +
         std::string(to_string(config.session_policy));
}

SentimentScore query_with_retries(CompletionProvider& provider, SessionId session,
                                  const Query& query, const ElicitationConfig& config,
                                  const ElicitationHooks& hooks) {
  auto backoff = config.initial_backoff;
  for (int attempt = 0;; ++attempt) {
    const bool last = attempt >= config.max_retries;
    AuditRecord record{query.study_id, query.condition_id, query.action, mode_label(config),
                       query.prompt,   {},                 std::nullopt, {}};
    try {
      record.raw_response = provider.complete(session, query);
    } catch (const ProviderError& e) {
      if (!e.retriable() || last) {
        throw Error(ErrorCode::ProviderFailure,
                    "provider failed for " + query.study_id + "/" + query.condition_id + " (" +
                        std::string(to_string(query.action)) + ") after " +
                        std::to_string(attempt + 1) + " attempt(s): " + e.what());
      }
      if (hooks.sleep) hooks.sleep(backoff);
      backoff *= 2;
      continue;
    }

    std::optional<Error> parse_error;
    std::optional<SentimentScore> score;
    try {
      score = parse_score(record.raw_response);
      record.parsed_score = score->value();
    } catch (const Error& e) {
      parse_error = e;
    }
    if (hooks.audit) {
      record.timestamp = hooks.clock ? hooks.clock() : std::string{};
      hooks.audit(record);
    }
    if (score) return *score;
    if (last) {
      throw ParseFailureError("unparseable response for " + query.study_id + "/" +
                                  query.condition_id + ": " + parse_error->what(),
                              record.raw_response);
    }
    if (hooks.sleep) hooks.sleep(backoff);
    backoff *= 2;
  }
}

}  // namespace

SentimentTriple elicit_triple(const Condition& condition, CompletionProvider& provider,
                              SessionId session, const ElicitationConfig& config,
                              const ElicitationHooks& hooks) {
  if (!condition.offers(Action::KeepAll) || !condition.offers(Action::GiveAll)) {
    throw Error(ErrorCode::InvalidSpec, "condition " + condition.study_id + "/" +
                                            condition.condition_id +
                                            " lacks keep_all or give_all action text");
  }
  const std::string instructions = hooks.instructions ? hooks.instructions(condition) : "";
  SentimentTriple triple;
  for (Action a : kAllActions) {
    if (!condition.offers(a)) continue;
    PromptSpec spec{instructions, condition.action_texts[index_of(a)], condition.country};
    Query query{condition.study_id, condition.condition_id, a, build_prompt(spec, config)};
    triple[a] = query_with_retries(provider, session, query, config, hooks);
  }
  return triple;
}

SentimentTriple elicit_triple(const Condition& condition, CompletionProvider& provider,
                              const ElicitationConfig& config, const ElicitationHooks& hooks) {
  const SessionId session = provider.open_session();
  struct Closer {
    CompletionProvider& p;
    SessionId s;
    ~Closer() { p.close_session(s); }
  } closer{provider, session};
  return elicit_triple(condition, provider, session, config, hooks);
}

namespace {

template <typename Fn>
void run_parallel(std::size_t units, int parallelism, Fn&& fn) {
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;
  std::atomic<bool> failed{false};
  const auto worker = [&] {
    for (std::size_t i; !failed && (i = next++) < units;) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        failed = true;
      }
    }
  };
  const auto threads = std::min<std::size_t>(static_cast<std::size_t>(parallelism), units);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace

std::vector<Study> elicit_dataset(std::span<const Study> dataset, CompletionProvider& provider,
                                  const ElicitationConfig& config, const ElicitationHooks& hooks,
                                  std::vector<ElicitationFailure>* failures) {
  config.validate();
  std::vector<Study> out(dataset.begin(), dataset.end());

  std::vector<Condition*> work;
  for (auto& study : out) {
    for (auto& c : study.conditions) work.push_back(&c);
  }
  std::vector<std::optional<ElicitationFailure>> failed(work.size());
  // Writes only this condition's result slot, so workers never share state.
  const auto attempt = [&](std::size_t i, const std::function<SentimentTriple()>& fn) {
    if (!failures) {
      work[i]->sentiments = fn();
      return;
    }
    try {
      work[i]->sentiments = fn();
    } catch (const Error& e) {
      work[i]->sentiments = {};
      failed[i] = ElicitationFailure{work[i]->study_id, work[i]->condition_id, e.code(), e.what()};
    }
  };

  if (config.session_policy == SessionPolicy::FreshPerInstruction) {
    run_parallel(work.size(), config.parallelism, [&](std::size_t i) {
      attempt(i, [&] { return elicit_triple(*work[i], provider, config, hooks); });
    });
  } else {
    std::vector<std::size_t> first_index(out.size());
    for (std::size_t s = 0, k = 0; s < out.size(); ++s) {
      first_index[s] = k;
      k += out[s].conditions.size();
    }
    run_parallel(out.size(), config.parallelism, [&](std::size_t s) {
      const SessionId session = provider.open_session();
      struct Closer {
        CompletionProvider& p;
        SessionId id;
        ~Closer() { p.close_session(id); }
      } closer{provider, session};
      for (std::size_t j = 0; j < out[s].conditions.size(); ++j) {
        const std::size_t i = first_index[s] + j;
        attempt(i, [&] { return elicit_triple(*work[i], provider, session, config, hooks); });
      }
    });
  }
  if (failures) {
    for (auto& f : failed) {
      if (f) failures->push_back(std::move(*f));
    }
  }
  return out;
}

}  // namespace lingame

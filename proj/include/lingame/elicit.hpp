#pragma once

// Sentiment elicitation: prompt rendering, response parsing and the
// session-aware query loop over a pluggable completion provider.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <tuple>
#include <vector>

#include "lingame/core.hpp"
#include "lingame/error.hpp"

namespace lingame {

enum class PopulationMode { Count1000Country, Count1000USA, NoCountCountry };
enum class SessionPolicy { FreshPerInstruction, SingleChatPerStudy };

std::string_view to_string(PopulationMode mode) noexcept;
std::string_view to_string(SessionPolicy policy) noexcept;
std::optional<PopulationMode> population_mode_from_string(std::string_view text) noexcept;
std::optional<SessionPolicy> session_policy_from_string(std::string_view text) noexcept;

struct ElicitationConfig {
  PopulationMode population_mode = PopulationMode::Count1000Country;
  SessionPolicy session_policy = SessionPolicy::FreshPerInstruction;
  int max_retries = 3;
  int parallelism = 1;
  std::chrono::milliseconds initial_backoff{1000};

  // Only the main configuration and its three robustness variants are
  // accepted: the population modes under fresh sessions, or the default
  // population mode in a single chat per study.
  void validate() const;
};

struct PromptSpec {
  std::string instruction_text;
  std::string action_text;
  std::string country;
};

std::string build_prompt(const PromptSpec& spec, const ElicitationConfig& config);

// First decimal literal in the text, required to lie in [1, 7].
// Throws Error{NonNumericResponse} or Error{OutOfRangeScore}.
SentimentScore parse_score(std::string_view raw);

using SessionId = std::uint64_t;

struct Query {
  std::string study_id;
  std::string condition_id;
  Action action;
  std::string prompt;
};

// Raised by providers on transport failure. Non-retriable failures (missing
// fixture, 4xx responses) abort the retry loop immediately.
class ProviderError : public Error {
 public:
  ProviderError(const std::string& message, bool retriable)
      : Error(ErrorCode::ProviderFailure, message), retriable_(retriable) {}

  bool retriable() const noexcept { return retriable_; }

 private:
  bool retriable_;
};

// Calls on one session are issued sequentially; distinct sessions may be used
// from different threads at once.
class CompletionProvider {
 public:
  virtual ~CompletionProvider() = default;

  virtual SessionId open_session() = 0;
  virtual std::string complete(SessionId session, const Query& query) = 0;
  virtual void close_session(SessionId session) = 0;
};

// Serves the sentiment columns of a dataset as two-decimal responses, keyed
// by (study_id, condition_id, action). Immutable after construction.
class FixtureProvider final : public CompletionProvider {
 public:
  explicit FixtureProvider(std::span<const Study> dataset);

  SessionId open_session() override { return ++next_session_; }
  std::string complete(SessionId session, const Query& query) override;
  void close_session(SessionId) override {}

 private:
  std::map<std::tuple<std::string, std::string, Action>, double> scores_;
  std::atomic<SessionId> next_session_{0};
};

struct AuditRecord {
  std::string study_id;
  std::string condition_id;
  Action action;
  std::string mode;
  std::string prompt;
  std::string raw_response;
  std::optional<double> parsed_score;
  std::string timestamp;
};

// JSON-lines audit sink; safe to share across elicitation threads.
class AuditLog {
 public:
  explicit AuditLog(const std::string& path);

  void write(const AuditRecord& record);

 private:
  std::mutex mutex_;
  std::ofstream out_;
};

std::string utc_timestamp();

struct ElicitationHooks {
  std::function<void(const AuditRecord&)> audit;
  std::function<void(std::chrono::milliseconds)> sleep = [](std::chrono::milliseconds d) {
    std::this_thread::sleep_for(d);
  };
  std::function<std::string()> clock = utc_timestamp;
  // Full experimental instructions preceding the template; empty when absent.
  std::function<std::string(const Condition&)> instructions;
};

// Raised when the final attempt still produced an unparseable response.
class ParseFailureError : public Error {
 public:
  ParseFailureError(const std::string& message, std::string raw)
      : Error(ErrorCode::ParseFailure, message), raw_(std::move(raw)) {}

  const std::string& raw_response() const noexcept { return raw_; }

 private:
  std::string raw_;
};

// Queries every action the condition offers inside the given session.
SentimentTriple elicit_triple(const Condition& condition, CompletionProvider& provider,
                              SessionId session, const ElicitationConfig& config,
                              const ElicitationHooks& hooks = {});

// Opens a fresh session for this condition and closes it afterwards.
SentimentTriple elicit_triple(const Condition& condition, CompletionProvider& provider,
                              const ElicitationConfig& config, const ElicitationHooks& hooks = {});

struct ElicitationFailure {
  std::string study_id;
  std::string condition_id;
  ErrorCode code;
  std::string message;
};

// Returns a copy of the dataset with sentiments replaced by elicited ones,
// honoring the session policy and fanning out up to config.parallelism.
// The first failure is rethrown unless `failures` is given, in which case
// failed conditions keep all-absent sentiments and are recorded there in
// dataset order.
std::vector<Study> elicit_dataset(std::span<const Study> dataset, CompletionProvider& provider,
                                  const ElicitationConfig& config,
                                  const ElicitationHooks& hooks = {},
                                  std::vector<ElicitationFailure>* failures = nullptr);

}  // namespace lingame

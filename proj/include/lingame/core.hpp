#pragma once

// Domain types for sentiment-annotated dictator-game conditions and the
// ΔS statistic built on top of them.

#include <array>
#include <compare>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace lingame {

// The three prominent dictator-game actions, in payoff order.
enum class Action { KeepAll = 0, GiveHalf = 1, GiveAll = 2 };

inline constexpr std::array<Action, 3> kAllActions{Action::KeepAll, Action::GiveHalf,
                                                   Action::GiveAll};

std::string_view to_string(Action action) noexcept;

constexpr std::size_t index_of(Action action) noexcept {
  return static_cast<std::size_t>(action);
}

// A score on the 1–7 elicitation scale. Construction outside the scale throws
// Error{OutOfRangeScore}; there is no clamping.
class SentimentScore {
 public:
  static constexpr double kMin = 1.0;
  static constexpr double kMax = 7.0;

  explicit SentimentScore(double value);

  double value() const noexcept { return value_; }

  friend auto operator<=>(const SentimentScore&, const SentimentScore&) = default;

 private:
  double value_;
};

struct SentimentTriple {
  std::optional<SentimentScore> s_zero;
  std::optional<SentimentScore> s_half;
  std::optional<SentimentScore> s_all;

  // s_half may be absent (two-action games); s_zero and s_all may not.
  bool delta_s_computable() const noexcept { return s_zero && s_all; }

  const std::optional<SentimentScore>& operator[](Action action) const noexcept;
  std::optional<SentimentScore>& operator[](Action action) noexcept;

  friend bool operator==(const SentimentTriple&, const SentimentTriple&) = default;
};

struct Condition {
  std::string study_id;
  std::string condition_id;
  std::string label;
  std::string country;
  // Instruction excerpt per action, indexed by Action. Empty means the action
  // is not offered (give_half in the extreme dictator game).
  std::array<std::string, 3> action_texts;
  SentimentTriple sentiments;
  std::optional<double> prosocial_rate;

  bool offers(Action action) const noexcept {
    return !action_texts[index_of(action)].empty();
  }

  friend bool operator==(const Condition&, const Condition&) = default;
};

struct Study {
  std::string study_id;
  std::string citation;
  std::vector<Condition> conditions;

  friend bool operator==(const Study&, const Study&) = default;
};

// Throws Error{InvalidArgument} if the study breaks its invariants: empty,
// foreign study_id on a condition, duplicate condition_id, or a
// prosocial_rate outside [0, 1].
void check_invariants(const Study& study);

enum class DeltaSBranch { HalfDominant, AllLeading, TwoAction };

std::string_view to_string(DeltaSBranch branch) noexcept;

struct DeltaSValue {
  double value;
  DeltaSBranch branch;

  friend bool operator==(const DeltaSValue&, const DeltaSValue&) = default;
};

// Prosocial-sentiment advantage over the selfish action:
//   s_half - s_zero                   if s_all <= s_half
//   (s_all + s_half) / 2 - s_zero     if s_all >  s_half
//   s_all - s_zero                    if s_half is absent
// Throws Error{MissingSentiment} when s_zero or s_all is absent.
DeltaSValue delta_s(const SentimentTriple& triple);

struct ColumnStats {
  std::size_t n = 0;
  double mean = 0.0;
  std::optional<double> sd;  // sample sd (n - 1); absent for n < 2
};

struct DescriptiveStats {
  ColumnStats s_zero;
  ColumnStats s_half;
  ColumnStats s_all;
};

// Column means and sample standard deviations over every condition carrying
// the respective score. Throws Error{EmptyColumn} if any column has no values.
DescriptiveStats descriptive_stats(std::span<const Study> dataset);

enum class IssueCode { MissingSentiment, MissingProsocialRate, TooFewConditions };

std::string_view to_string(IssueCode code) noexcept;

struct ConditionIssue {
  std::string study_id;
  std::string condition_id;
  IssueCode code;
};

struct StudyIssue {
  std::string study_id;
  IssueCode code;
  std::size_t usable_conditions;
};

struct ValidationReport {
  std::vector<ConditionIssue> conditions;
  std::vector<StudyIssue> studies;

  bool clean() const noexcept { return conditions.empty() && studies.empty(); }
};

// A condition is usable for regression when ΔS is computable and it carries a
// prosocial rate. Studies with fewer than three usable conditions are flagged.
bool usable_for_regression(const Condition& condition) noexcept;

ValidationReport validate_dataset(std::span<const Study> dataset);

}  // namespace lingame

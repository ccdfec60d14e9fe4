#include "lingame/core.hpp"

#include <cmath>
#include <set>

#include "lingame/error.hpp"

namespace lingame {

std::string_view to_string(Action action) noexcept {
  switch (action) {
    case Action::KeepAll: return "keep_all";
    case Action::GiveHalf: return "give_half";
    case Action::GiveAll: return "give_all";
  }
  return "unknown";
}

std::string_view to_string(DeltaSBranch branch) noexcept {
  switch (branch) {
    case DeltaSBranch::HalfDominant: return "HalfDominant";
    case DeltaSBranch::AllLeading: return "AllLeading";
    case DeltaSBranch::TwoAction: return "TwoAction";
  }
  return "unknown";
}

std::string_view to_string(IssueCode code) noexcept {
  switch (code) {
    case IssueCode::MissingSentiment: return "MissingSentiment";
    case IssueCode::MissingProsocialRate: return "MissingProsocialRate";
    case IssueCode::TooFewConditions: return "TooFewConditions";
  }
  return "unknown";
}

SentimentScore::SentimentScore(double value) : value_(value) {
  // NaN fails both comparisons and is rejected too.
  if (!(value >= kMin && value <= kMax)) {
    throw Error(ErrorCode::OutOfRangeScore,
                "sentiment score " + std::to_string(value) + " outside [1, 7]");
  }
}

const std::optional<SentimentScore>& SentimentTriple::operator[](Action action) const noexcept {
  switch (action) {
    case Action::KeepAll: return s_zero;
    case Action::GiveHalf: return s_half;
    case Action::GiveAll: break;
  }
  return s_all;
}

std::optional<SentimentScore>& SentimentTriple::operator[](Action action) noexcept {
  const auto& self = *this;
  return const_cast<std::optional<SentimentScore>&>(self[action]);
}

void check_invariants(const Study& study) {
  if (study.conditions.empty()) {
    throw Error(ErrorCode::InvalidArgument, "study '" + study.study_id + "' has no conditions");
  }
  std::set<std::string> seen;
  for (const auto& c : study.conditions) {
    if (c.study_id != study.study_id) {
      throw Error(ErrorCode::InvalidArgument,
                  "condition '" + c.condition_id + "' carries study_id '" + c.study_id +
                      "' inside study '" + study.study_id + "'");
    }
    if (!seen.insert(c.condition_id).second) {
      throw Error(ErrorCode::InvalidArgument, "duplicate condition_id '" + c.condition_id +
                                                  "' in study '" + study.study_id + "'");
    }
    if (c.prosocial_rate && !(*c.prosocial_rate >= 0.0 && *c.prosocial_rate <= 1.0)) {
      throw Error(ErrorCode::InvalidArgument, "prosocial_rate of '" + c.condition_id +
                                                  "' outside [0, 1]");
    }
  }
}

DeltaSValue delta_s(const SentimentTriple& triple) {
  if (!triple.delta_s_computable()) {
    throw Error(ErrorCode::MissingSentiment, "delta S needs both s_zero and s_all");
  }
  const double zero = triple.s_zero->value();
  const double all = triple.s_all->value();
  if (!triple.s_half) {
    return {all - zero, DeltaSBranch::TwoAction};
  }
  const double half = triple.s_half->value();
  if (all <= half) {
    return {half - zero, DeltaSBranch::HalfDominant};
  }
  return {(all + half) / 2.0 - zero, DeltaSBranch::AllLeading};
}

namespace {

ColumnStats column(std::span<const Study> dataset, Action action) {
  std::vector<double> values;
  for (const auto& study : dataset) {
    for (const auto& c : study.conditions) {
      if (const auto& s = c.sentiments[action]) values.push_back(s->value());
    }
  }
  if (values.empty()) {
    throw Error(ErrorCode::EmptyColumn,
                "no condition carries a " + std::string(to_string(action)) + " score");
  }
  ColumnStats out;
  out.n = values.size();
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / static_cast<double>(out.n);
  if (out.n >= 2) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.sd = std::sqrt(ss / static_cast<double>(out.n - 1));
  }
  return out;
}

}  // namespace

DescriptiveStats descriptive_stats(std::span<const Study> dataset) {
  return {column(dataset, Action::KeepAll), column(dataset, Action::GiveHalf),
          column(dataset, Action::GiveAll)};
}

bool usable_for_regression(const Condition& condition) noexcept {
  return condition.sentiments.delta_s_computable() && condition.prosocial_rate.has_value();
}

ValidationReport validate_dataset(std::span<const Study> dataset) {
  ValidationReport report;
  for (const auto& study : dataset) {
    std::size_t usable = 0;
    for (const auto& c : study.conditions) {
      if (!c.sentiments.delta_s_computable()) {
        report.conditions.push_back({study.study_id, c.condition_id, IssueCode::MissingSentiment});
      }
      if (!c.prosocial_rate) {
        report.conditions.push_back(
            {study.study_id, c.condition_id, IssueCode::MissingProsocialRate});
      }
      if (usable_for_regression(c)) ++usable;
    }
    if (usable < 3) {
      report.studies.push_back({study.study_id, IssueCode::TooFewConditions, usable});
    }
  }
  return report;
}

}  // namespace lingame

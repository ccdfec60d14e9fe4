#pragma once

// Study-level regression of prosocial rate on ΔS and inverse-variance
// meta-analysis of the resulting slopes.

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lingame/core.hpp"

namespace lingame {

inline constexpr double kCiMultiplier = 1.959964;

struct OlsFit {
  double slope;
  double intercept;
  double se_slope;
};

// Unweighted least squares with intercept. Throws Error{TooFewPoints} for
// n < 3 and Error{DegenerateDesign} when every x is equal.
OlsFit fit_ols(std::span<const double> xs, std::span<const double> ys);

enum class ExclusionReason { TooFewConditions, DegenerateDesign, MissingData };

std::string_view to_string(ExclusionReason reason) noexcept;
std::optional<ExclusionReason> exclusion_reason_from_string(std::string_view text) noexcept;

struct StudyEffect {
  std::string study_id;
  double slope = 0.0;
  double intercept = 0.0;
  double se = 0.0;
  std::size_t n_conditions = 0;  // conditions entering the regression
  bool included = false;
  std::optional<ExclusionReason> exclusion_reason;

  friend bool operator==(const StudyEffect&, const StudyEffect&) = default;
};

// Regression inputs for one study after dropping unusable conditions.
struct StudyPoints {
  std::string study_id;
  std::size_t listed_conditions = 0;
  std::vector<double> delta_s;
  std::vector<double> rates;
};

StudyPoints study_points(const Study& study);

// Exclusion is a result state: fewer than three listed conditions gives
// TooFewConditions, fewer than three usable ones gives MissingData, and
// constant ΔS gives DegenerateDesign.
StudyEffect study_effect(const StudyPoints& points);
StudyEffect study_effect(const Study& study);

enum class MetaModel { Fixed, RandomDL, RandomREML };
enum class Tau2Estimator { DL, REML };

std::string_view to_string(MetaModel model) noexcept;

struct MetaResult {
  MetaModel model = MetaModel::Fixed;
  double pooled = 0.0;
  double se = 0.0;
  std::pair<double, double> ci95{0.0, 0.0};
  double z = 0.0;
  double p = 1.0;
  double q = 0.0;
  int df = 0;
  double tau2 = 0.0;
  double i2 = 0.0;
  std::map<std::string, double> weights;  // normalized, keyed by study_id
  // REML bookkeeping; DL and fixed always report converged with 0 iterations.
  bool converged = true;
  int iterations = 0;
};

// Excluded effects in the input are ignored. Throws Error{NoIncludedStudies}
// when nothing is left and Error{ZeroStandardError} for any se == 0.
MetaResult meta_fixed(std::span<const StudyEffect> effects);
MetaResult meta_random(std::span<const StudyEffect> effects, Tau2Estimator estimator);

// Restricted log-likelihood of the random-effects model at a given tau2, up to
// an additive constant.
double restricted_log_likelihood(std::span<const StudyEffect> effects, double tau2);

double normal_cdf(double x) noexcept;

// Two-sided p-value of a standard normal statistic.
double two_sided_p(double z) noexcept;

}  // namespace lingame

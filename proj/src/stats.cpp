#include "lingame/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "lingame/error.hpp"

namespace lingame {

std::string_view to_string(ExclusionReason reason) noexcept {
  switch (reason) {
    case ExclusionReason::TooFewConditions: return "TooFewConditions";
    case ExclusionReason::DegenerateDesign: return "DegenerateDesign";
    case ExclusionReason::MissingData: return "MissingData";
  }
  return "unknown";
}

std::optional<ExclusionReason> exclusion_reason_from_string(std::string_view text) noexcept {
  for (auto r : {ExclusionReason::TooFewConditions, ExclusionReason::DegenerateDesign,
                 ExclusionReason::MissingData}) {
    if (to_string(r) == text) return r;
  }
  return std::nullopt;
}

std::string_view to_string(MetaModel model) noexcept {
  switch (model) {
    case MetaModel::Fixed: return "fixed";
    case MetaModel::RandomDL: return "random_dl";
    case MetaModel::RandomREML: return "random_reml";
  }
  return "unknown";
}

OlsFit fit_ols(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) {
    throw Error(ErrorCode::InvalidArgument, "fit_ols: xs and ys differ in length");
  }
  const std::size_t n = xs.size();
  if (n < 3) {
    throw Error(ErrorCode::TooFewPoints,
                "fit_ols: " + std::to_string(n) + " points leave no residual degrees of freedom");
  }
  if (std::all_of(xs.begin(), xs.end(), [&](double x) { return x == xs.front(); })) {
    throw Error(ErrorCode::DegenerateDesign, "fit_ols: all x values are equal");
  }
  const double nd = static_cast<double>(n);
  double x_mean = 0.0, y_mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    x_mean += xs[i];
    y_mean += ys[i];
  }
  x_mean /= nd;
  y_mean /= nd;

  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = xs[i] - x_mean;
    sxx += dx * dx;
    sxy += dx * (ys[i] - y_mean);
  }
  OlsFit fit{};
  fit.slope = sxy / sxx;
  fit.intercept = y_mean - fit.slope * x_mean;

  double rss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = ys[i] - fit.intercept - fit.slope * xs[i];
    rss += r * r;
  }
  fit.se_slope = std::sqrt(rss / (nd - 2.0) / sxx);
  return fit;
}

StudyPoints study_points(const Study& study) {
  StudyPoints points;
  points.study_id = study.study_id;
  points.listed_conditions = study.conditions.size();
  for (const auto& c : study.conditions) {
    if (!usable_for_regression(c)) continue;
    points.delta_s.push_back(delta_s(c.sentiments).value);
    points.rates.push_back(*c.prosocial_rate);
  }
  return points;
}

StudyEffect study_effect(const StudyPoints& points) {
  StudyEffect effect;
  effect.study_id = points.study_id;
  effect.n_conditions = points.delta_s.size();
  if (points.listed_conditions < 3) {
    effect.exclusion_reason = ExclusionReason::TooFewConditions;
    return effect;
  }
  if (points.delta_s.size() < 3) {
    effect.exclusion_reason = ExclusionReason::MissingData;
    return effect;
  }
  const auto& xs = points.delta_s;
  if (std::all_of(xs.begin(), xs.end(), [&](double x) { return x == xs.front(); })) {
    effect.exclusion_reason = ExclusionReason::DegenerateDesign;
    return effect;
  }
  const OlsFit fit = fit_ols(points.delta_s, points.rates);
  effect.slope = fit.slope;
  effect.intercept = fit.intercept;
  effect.se = fit.se_slope;
  effect.included = true;
  return effect;
}

StudyEffect study_effect(const Study& study) { return study_effect(study_points(study)); }

namespace {

struct Sample {
  std::string study_id;
  double effect;
  double variance;
};

// Included effects sorted by study_id, so every sum runs in the same order
// regardless of the caller's ordering.
std::vector<Sample> collect(std::span<const StudyEffect> effects) {
  std::vector<Sample> out;
  for (const auto& e : effects) {
    if (!e.included) continue;
    if (!(e.se > 0.0)) {
      throw Error(ErrorCode::ZeroStandardError,
                  "study '" + e.study_id +
                      "' has zero standard error (perfect within-study fit); inverse-variance "
                      "weight is infinite. Exclude the study or jitter its data.");
    }
    out.push_back({e.study_id, e.slope, e.se * e.se});
  }
  if (out.empty()) {
    throw Error(ErrorCode::NoIncludedStudies, "meta-analysis needs at least one included study");
  }
  std::sort(out.begin(), out.end(),
            [](const Sample& a, const Sample& b) { return a.study_id < b.study_id; });
  for (std::size_t i = 1; i < out.size(); ++i) {
    if (out[i].study_id == out[i - 1].study_id) {
      throw Error(ErrorCode::InvalidArgument, "duplicate study_id '" + out[i].study_id + "'");
    }
  }
  return out;
}

struct Heterogeneity {
  double q;
  int df;
  double i2;
  double sum_w;
  double sum_w2;
};

Heterogeneity heterogeneity(const std::vector<Sample>& samples) {
  double sum_w = 0.0, sum_w2 = 0.0, sum_wy = 0.0;
  for (const auto& s : samples) {
    const double w = 1.0 / s.variance;
    sum_w += w;
    sum_w2 += w * w;
    sum_wy += w * s.effect;
  }
  const double pooled = sum_wy / sum_w;
  double q = 0.0;
  for (const auto& s : samples) {
    const double d = s.effect - pooled;
    q += d * d / s.variance;
  }
  Heterogeneity h{q, static_cast<int>(samples.size()) - 1, 0.0, sum_w, sum_w2};
  if (q > 0.0) h.i2 = std::max(0.0, (q - h.df) / q);
  return h;
}

MetaResult pool(const std::vector<Sample>& samples, const Heterogeneity& h, double tau2,
                MetaModel model) {
  MetaResult r;
  r.model = model;
  r.tau2 = tau2;
  r.q = h.q;
  r.df = h.df;
  r.i2 = h.i2;

  double sum_w = 0.0, sum_wy = 0.0;
  std::vector<double> w(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    w[i] = 1.0 / (samples[i].variance + tau2);
    sum_w += w[i];
    sum_wy += w[i] * samples[i].effect;
  }
  r.pooled = sum_wy / sum_w;
  r.se = std::sqrt(1.0 / sum_w);
  r.ci95 = {r.pooled - kCiMultiplier * r.se, r.pooled + kCiMultiplier * r.se};
  r.z = r.pooled / r.se;
  r.p = two_sided_p(r.z);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    r.weights.emplace(samples[i].study_id, w[i] / sum_w);
  }
  return r;
}

double dl_tau2(const Heterogeneity& h) {
  const double denom = h.sum_w - h.sum_w2 / h.sum_w;
  if (!(denom > 0.0)) return 0.0;
  return std::max(0.0, (h.q - h.df) / denom);
}

constexpr double kRemlTolerance = 1e-10;
constexpr int kRemlMaxIterations = 100;

}  // namespace

MetaResult meta_fixed(std::span<const StudyEffect> effects) {
  const auto samples = collect(effects);
  return pool(samples, heterogeneity(samples), 0.0, MetaModel::Fixed);
}

MetaResult meta_random(std::span<const StudyEffect> effects, Tau2Estimator estimator) {
  const auto samples = collect(effects);
  const auto h = heterogeneity(samples);
  const double dl = dl_tau2(h);
  if (estimator == Tau2Estimator::DL) return pool(samples, h, dl, MetaModel::RandomDL);

  if (samples.size() < 2) {
    throw Error(ErrorCode::InvalidArgument, "REML needs at least two included studies");
  }
  // Newton steps on the restricted likelihood (Fisher scoring where the
  // observed curvature is not negative), halved until the likelihood does not
  // decrease, projected onto tau2 >= 0.
  const auto rll = [&](double t) {
    double sw = 0.0, swy = 0.0, log_det = 0.0;
    for (const auto& s : samples) {
      sw += 1.0 / (s.variance + t);
      swy += s.effect / (s.variance + t);
      log_det += std::log(s.variance + t);
    }
    const double mu = swy / sw;
    double rss = 0.0;
    for (const auto& s : samples) rss += (s.effect - mu) * (s.effect - mu) / (s.variance + t);
    return -0.5 * (log_det + std::log(sw) + rss);
  };
  double tau2 = dl;
  bool converged = false;
  int iter = 0;
  while (iter < kRemlMaxIterations) {
    ++iter;
    double sw = 0.0, sw2 = 0.0, sw3 = 0.0, swy = 0.0;
    for (const auto& s : samples) {
      const double w = 1.0 / (s.variance + tau2);
      sw += w;
      sw2 += w * w;
      sw3 += w * w * w;
      swy += w * s.effect;
    }
    const double mu = swy / sw;
    double ypp = 0.0, wa2 = 0.0, wa = 0.0;  // a = P y = w * (y - mu)
    for (const auto& s : samples) {
      const double w = 1.0 / (s.variance + tau2);
      const double a = w * (s.effect - mu);
      ypp += a * a;
      wa2 += w * a * a;
      wa += w * a;
    }
    const double tr_p = sw - sw2 / sw;
    const double tr_pp = sw2 - 2.0 * sw3 / sw + (sw2 * sw2) / (sw * sw);
    const double score = 0.5 * (ypp - tr_p);
    const double curvature = 0.5 * tr_pp - (wa2 - wa * wa / sw);
    double step = curvature < 0.0 ? -score / curvature : score / (0.5 * tr_pp);

    // Differences below the slack are rounding noise near the optimum.
    const double current = rll(tau2);
    const double slack = 1e-12 * (1.0 + std::abs(current));
    double next = std::max(0.0, tau2 + step);
    for (int halving = 0; halving < 40 && rll(next) < current - slack; ++halving) {
      step /= 2.0;
      next = std::max(0.0, tau2 + step);
    }
    const double change = std::abs(next - tau2);
    tau2 = next;
    if (change < kRemlTolerance) {
      converged = true;
      break;
    }
  }
  MetaResult r = pool(samples, h, tau2, MetaModel::RandomREML);
  r.converged = converged;
  r.iterations = iter;
  return r;
}

double restricted_log_likelihood(std::span<const StudyEffect> effects, double tau2) {
  const auto samples = collect(effects);
  double sw = 0.0, swy = 0.0, log_det = 0.0;
  for (const auto& s : samples) {
    const double w = 1.0 / (s.variance + tau2);
    sw += w;
    swy += w * s.effect;
    log_det += std::log(s.variance + tau2);
  }
  const double mu = swy / sw;
  double rss = 0.0;
  for (const auto& s : samples) {
    const double r = s.effect - mu;
    rss += r * r / (s.variance + tau2);
  }
  return -0.5 * (log_det + std::log(sw) + rss);
}

double normal_cdf(double x) noexcept { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double two_sided_p(double z) noexcept { return std::erfc(std::abs(z) / std::numbers::sqrt2); }

}  // namespace lingame

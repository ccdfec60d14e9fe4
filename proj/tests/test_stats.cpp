#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "lingame/error.hpp"
#include "lingame/stats.hpp"

using namespace lingame;

namespace {

// Normal equations on raw sums, solved by Cramer's rule; se from
// sigma^2 (X'X)^{-1}. Deliberately a different route from the centered
// two-pass formulas in fit_ols.
OlsFit normal_equations_oracle(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  long double sx = 0, sxx = 0, sy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sxx += static_cast<long double>(x[i]) * x[i];
    sy += y[i];
    sxy += static_cast<long double>(x[i]) * y[i];
  }
  const long double det = n * sxx - sx * sx;
  const long double intercept = (sxx * sy - sx * sxy) / det;
  const long double slope = (n * sxy - sx * sy) / det;
  long double rss = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const long double r = y[i] - intercept - slope * x[i];
    rss += r * r;
  }
  const long double sigma2 = rss / (n - 2);
  const long double var_slope = sigma2 * n / det;  // [(X'X)^{-1}]_{22}
  return {static_cast<double>(slope), static_cast<double>(intercept),
          static_cast<double>(std::sqrt(var_slope))};
}

StudyEffect effect(const std::string& id, double slope, double se) {
  StudyEffect e;
  e.study_id = id;
  e.slope = slope;
  e.se = se;
  e.n_conditions = 3;
  e.included = true;
  return e;
}

std::vector<StudyEffect> random_effects(std::mt19937_64& rng, int k) {
  std::uniform_real_distribution<double> beta(-1.0, 1.0);
  std::uniform_real_distribution<double> se(0.05, 0.8);
  std::vector<StudyEffect> out;
  for (int i = 0; i < k; ++i) out.push_back(effect("s" + std::to_string(i), beta(rng), se(rng)));
  return out;
}

// Simpson's rule for the standard normal density on [a, b].
double simpson_normal(double a, double b, int intervals) {
  const auto phi = [](double t) { return std::exp(-0.5 * t * t) / std::sqrt(2.0 * M_PI); };
  const double h = (b - a) / intervals;
  double s = phi(a) + phi(b);
  for (int i = 1; i < intervals; ++i) s += (i % 2 ? 4.0 : 2.0) * phi(a + i * h);
  return s * h / 3.0;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected lingame::Error");
  return ErrorCode::Internal;
}

void check_same(const MetaResult& a, const MetaResult& b, double tol) {
  CHECK(a.pooled == doctest::Approx(b.pooled).epsilon(tol));
  CHECK(a.se == doctest::Approx(b.se).epsilon(tol));
  CHECK(a.ci95.first == doctest::Approx(b.ci95.first).epsilon(tol));
  CHECK(a.ci95.second == doctest::Approx(b.ci95.second).epsilon(tol));
  CHECK(a.z == doctest::Approx(b.z).epsilon(tol));
  CHECK(a.p == doctest::Approx(b.p).epsilon(tol));
  CHECK(a.q == doctest::Approx(b.q).epsilon(tol));
  CHECK(a.i2 == doctest::Approx(b.i2).epsilon(tol));
  CHECK(a.tau2 == doctest::Approx(b.tau2).epsilon(tol));
  CHECK(a.df == b.df);
}

}  // namespace

TEST_CASE("fit_ols examples") {
  const std::vector<double> x{0, 1, 2};
  const auto perfect = fit_ols(x, std::vector<double>{0, 1, 2});
  CHECK(perfect.slope == doctest::Approx(1.0));
  CHECK(perfect.intercept == doctest::Approx(0.0));
  CHECK(perfect.se_slope == doctest::Approx(0.0));

  const std::vector<double> y{0, 2, 2};
  const auto fit = fit_ols(x, y);
  const auto oracle = normal_equations_oracle(x, y);
  CHECK(fit.slope == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fit.intercept == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(fit.se_slope == doctest::Approx(0.5773502691896258).epsilon(1e-12));
  CHECK(oracle.se_slope == doctest::Approx(0.5773502691896258).epsilon(1e-12));

  CHECK(code_of([] { fit_ols(std::vector<double>{1, 1, 1}, std::vector<double>{0, 0.5, 1}); }) ==
        ErrorCode::DegenerateDesign);
  CHECK(code_of([] { fit_ols(std::vector<double>{1, 2}, std::vector<double>{0, 1}); }) ==
        ErrorCode::TooFewPoints);
  CHECK(code_of([] { fit_ols(std::vector<double>{1, 2, 3}, std::vector<double>{0, 1}); }) ==
        ErrorCode::InvalidArgument);
}

TEST_CASE("fit_ols agrees with the normal-equations oracle") {
  std::mt19937_64 rng(42);
  std::uniform_int_distribution<int> size(3, 10);
  std::uniform_real_distribution<double> val(-5.0, 5.0);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = size(rng);
    std::vector<double> x(n), y(n);
    for (int i = 0; i < n; ++i) {
      x[i] = val(rng);
      y[i] = val(rng);
    }
    const auto fit = fit_ols(x, y);
    const auto oracle = normal_equations_oracle(x, y);
    CHECK(std::abs(fit.slope - oracle.slope) < 1e-6);
    CHECK(std::abs(fit.intercept - oracle.intercept) < 1e-6);
    CHECK(std::abs(fit.se_slope - oracle.se_slope) < 1e-6);
  }
}

TEST_CASE("fit_ols invariants") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> val(-5.0, 5.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 3 + trial % 8;
    std::vector<double> x(n), y(n);
    for (int i = 0; i < n; ++i) {
      x[i] = val(rng);
      y[i] = val(rng);
    }
    const auto fit = fit_ols(x, y);
    double resid = 0.0;
    for (int i = 0; i < n; ++i) resid += y[i] - fit.intercept - fit.slope * x[i];
    CHECK(std::abs(resid) < 1e-10);

    const double cx = val(rng), cy = val(rng), scale = 0.5 + std::abs(val(rng));
    std::vector<double> xs = x, ys = y, xc = x;
    for (auto& v : xs) v += cx;
    for (auto& v : ys) v += cy;
    for (auto& v : xc) v *= scale;
    CHECK(fit_ols(xs, y).slope == doctest::Approx(fit.slope).epsilon(1e-9));
    CHECK(fit_ols(x, ys).slope == doctest::Approx(fit.slope).epsilon(1e-9));
    CHECK(fit_ols(xc, y).slope == doctest::Approx(fit.slope / scale).epsilon(1e-9));
  }
}

TEST_CASE("study_effect exclusion states") {
  SUBCASE("identical delta S in four conditions") {
    const auto e = study_effect(StudyPoints{"ow", 4, {3, 3, 3, 3}, {0.2, 0.3, 0.25, 0.22}});
    CHECK_FALSE(e.included);
    CHECK(e.exclusion_reason == ExclusionReason::DegenerateDesign);
    CHECK(e.n_conditions == 4);
  }
  SUBCASE("perfect fit is included") {
    const auto e = study_effect(StudyPoints{"pf", 3, {0, 1, 2}, {0, 1, 2}});
    CHECK(e.included);
    CHECK(e.slope == doctest::Approx(1.0));
    CHECK(e.se == doctest::Approx(0.0));
    CHECK_FALSE(e.exclusion_reason.has_value());
  }
  SUBCASE("two conditions") {
    const auto e = study_effect(StudyPoints{"two", 2, {0, 1}, {0.1, 0.2}});
    CHECK(e.exclusion_reason == ExclusionReason::TooFewConditions);
  }
  SUBCASE("enough listed conditions but missing data") {
    const auto e = study_effect(StudyPoints{"gap", 4, {0, 1}, {0.1, 0.2}});
    CHECK(e.exclusion_reason == ExclusionReason::MissingData);
  }
  SUBCASE("from a Study drops unusable conditions") {
    Study s{"st", "st", {}};
    const double rows[][4] = {{2.0, 5.0, 4.0, 0.2}, {2.0, 6.0, 4.0, 0.4}, {3.0, 6.0, 4.0, 0.3}};
    for (int i = 0; i < 3; ++i) {
      Condition c;
      c.study_id = "st";
      c.condition_id = "c" + std::to_string(i);
      c.sentiments = {SentimentScore(rows[i][0]), SentimentScore(rows[i][1]),
                      SentimentScore(rows[i][2])};
      c.prosocial_rate = rows[i][3];
      s.conditions.push_back(c);
    }
    Condition blank;
    blank.study_id = "st";
    blank.condition_id = "blank";
    blank.prosocial_rate = 0.9;
    s.conditions.push_back(blank);
    const auto e = study_effect(s);
    CHECK(e.included);
    CHECK(e.n_conditions == 3);
    const auto oracle = normal_equations_oracle({3.0, 4.0, 3.0}, {0.2, 0.4, 0.3});
    CHECK(e.slope == doctest::Approx(oracle.slope).epsilon(1e-12));
  }
}

TEST_CASE("meta_fixed examples") {
  const std::vector one{effect("a", 0.5, 0.2)};
  const auto single = meta_fixed(one);
  CHECK(single.pooled == doctest::Approx(0.5));
  CHECK(single.se == doctest::Approx(0.2));
  CHECK(single.q == 0.0);
  CHECK(single.i2 == 0.0);
  CHECK(single.df == 0);

  const std::vector two{effect("a", 0.0, 1.0), effect("b", 2.0, 1.0)};
  const auto f = meta_fixed(two);
  CHECK(f.pooled == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(f.se == doctest::Approx(0.7071067811865476).epsilon(1e-12));
  CHECK(f.q == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(f.df == 1);
  CHECK(f.i2 == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(f.tau2 == 0.0);
  CHECK(f.ci95.first == doctest::Approx(1.0 - kCiMultiplier * f.se).epsilon(1e-12));
  CHECK(f.weights.at("a") == doctest::Approx(0.5));

  const std::vector same{effect("a", 1.0, 0.1), effect("b", 1.0, 0.7), effect("c", 1.0, 0.3)};
  const auto h = meta_fixed(same);
  CHECK(h.pooled == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(h.q == doctest::Approx(0.0));
}

TEST_CASE("meta error paths") {
  CHECK(code_of([] { meta_fixed({}); }) == ErrorCode::NoIncludedStudies);
  StudyEffect excluded = effect("x", 1.0, 0.1);
  excluded.included = false;
  CHECK(code_of([&] { meta_fixed(std::vector{excluded}); }) == ErrorCode::NoIncludedStudies);
  CHECK(code_of([] { meta_fixed(std::vector{effect("a", 1.0, 0.0), effect("b", 1.0, 1.0)}); }) ==
        ErrorCode::ZeroStandardError);
  CHECK(code_of([] { meta_random(std::vector{effect("a", 1.0, 0.0)}, Tau2Estimator::DL); }) ==
        ErrorCode::ZeroStandardError);
  CHECK(code_of([] { meta_fixed(std::vector{effect("a", 1.0, 1.0), effect("a", 2.0, 1.0)}); }) ==
        ErrorCode::InvalidArgument);
  CHECK(code_of([] { meta_random(std::vector{effect("a", 1.0, 1.0)}, Tau2Estimator::REML); }) ==
        ErrorCode::InvalidArgument);
}

TEST_CASE("meta_random DerSimonian-Laird examples") {
  const std::vector two{effect("a", 0.0, 1.0), effect("b", 2.0, 1.0)};
  const auto r = meta_random(two, Tau2Estimator::DL);
  CHECK(r.model == MetaModel::RandomDL);
  CHECK(r.tau2 == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.pooled == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.se == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.ci95.first == doctest::Approx(-0.959964).epsilon(1e-9));
  CHECK(r.ci95.second == doctest::Approx(2.959964).epsilon(1e-9));
  CHECK(r.q == doctest::Approx(2.0));
  CHECK(r.i2 == doctest::Approx(0.5));

  const std::vector one{effect("a", 0.4, 0.3)};
  const auto s = meta_random(one, Tau2Estimator::DL);
  CHECK(s.pooled == doctest::Approx(0.4));
  CHECK(s.se == doctest::Approx(0.3));
  CHECK(s.tau2 == 0.0);
}

TEST_CASE("homogeneous effects truncate tau2 at zero") {
  const std::vector es{effect("a", 0.30, 0.2), effect("b", 0.31, 0.25), effect("c", 0.29, 0.3)};
  const auto f = meta_fixed(es);
  REQUIRE(f.q <= f.df);
  const auto r = meta_random(es, Tau2Estimator::DL);
  CHECK(r.tau2 == 0.0);
  CHECK(r.pooled == f.pooled);
  CHECK(r.se == f.se);
  CHECK(r.ci95 == f.ci95);
  CHECK(r.z == f.z);
  CHECK(r.p == f.p);
  CHECK(r.q == f.q);
  CHECK(r.i2 == f.i2);
  CHECK(r.weights == f.weights);
}

TEST_CASE("REML on the two-study example") {
  const std::vector two{effect("a", 0.0, 1.0), effect("b", 2.0, 1.0)};
  const auto reml = meta_random(two, Tau2Estimator::REML);
  const auto dl = meta_random(two, Tau2Estimator::DL);
  CHECK(reml.converged);
  CHECK(reml.tau2 >= 0.0);
  CHECK(reml.tau2 == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(restricted_log_likelihood(two, reml.tau2) >=
        restricted_log_likelihood(two, dl.tau2) - 1e-12);
}

TEST_CASE("REML matches a grid maximizer of the restricted likelihood") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    const auto es = random_effects(rng, 3 + trial % 6);
    const auto reml = meta_random(es, Tau2Estimator::REML);
    REQUIRE(reml.converged);
    // Coarse grid, then golden-section refinement: independent of the
    // Fisher-scoring iteration.
    double best = 0.0, best_ll = restricted_log_likelihood(es, 0.0);
    for (int i = 1; i <= 4000; ++i) {
      const double t = 2.0 * i / 4000.0;
      const double ll = restricted_log_likelihood(es, t);
      if (ll > best_ll) {
        best_ll = ll;
        best = t;
      }
    }
    double lo = std::max(0.0, best - 0.001), hi = best + 0.001;
    const double g = (std::sqrt(5.0) - 1.0) / 2.0;
    for (int i = 0; i < 200; ++i) {
      const double a = hi - g * (hi - lo), b = lo + g * (hi - lo);
      if (restricted_log_likelihood(es, a) > restricted_log_likelihood(es, b)) {
        hi = b;
      } else {
        lo = a;
      }
    }
    const double grid = 0.5 * (lo + hi);
    CHECK(std::abs(reml.tau2 - grid) < 1e-6);
    CHECK(restricted_log_likelihood(es, reml.tau2) >= best_ll - 1e-12);
  }
}

TEST_CASE("normal_cdf") {
  CHECK(normal_cdf(0.0) == 0.5);
  const double upper = 0.5 + simpson_normal(0.0, 1.959964, 2000);
  CHECK(upper == doctest::Approx(0.975).epsilon(1e-6));
  CHECK(std::abs(normal_cdf(1.959964) - upper) < 1e-7);
  const double tail = simpson_normal(8.0, 40.0, 20000);
  CHECK(tail == doctest::Approx(6.22096e-16).epsilon(1e-4));
  CHECK(std::abs(normal_cdf(-8.0) - tail) < 1e-7);
  CHECK(normal_cdf(-8.0) == doctest::Approx(tail).epsilon(1e-6));
  CHECK(two_sided_p(1.959964) == doctest::Approx(0.05).epsilon(1e-6));
}

TEST_CASE("meta-analysis properties") {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> k_dist(2, 12);
  std::uniform_real_distribution<double> scale_dist(0.1, 10.0);
  for (int trial = 0; trial < 250; ++trial) {
    auto es = random_effects(rng, k_dist(rng));
    const auto f = meta_fixed(es);
    const auto dl = meta_random(es, Tau2Estimator::DL);
    const auto reml = meta_random(es, Tau2Estimator::REML);

    const auto [lo, hi] = std::minmax_element(es.begin(), es.end(), [](auto& a, auto& b) {
      return a.slope < b.slope;
    });
    for (const auto* m : {&f, &dl, &reml}) {
      CHECK(m->pooled >= lo->slope - 1e-12);
      CHECK(m->pooled <= hi->slope + 1e-12);
      double wsum = 0.0;
      for (const auto& [id, w] : m->weights) wsum += w;
      CHECK(std::abs(wsum - 1.0) <= 1e-12);
      CHECK(m->p >= 0.0);
      CHECK(m->p <= 1.0);
      CHECK(m->i2 >= 0.0);
      CHECK(m->i2 <= 1.0);
      CHECK(m->ci95.first == doctest::Approx(m->pooled - kCiMultiplier * m->se).epsilon(1e-12));
    }
    CHECK(dl.se >= f.se);
    CHECK(reml.se >= f.se);

    // Permutation invariance is exact: sums run in study_id order.
    auto shuffled = es;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    const auto fp = meta_fixed(shuffled);
    const auto dlp = meta_random(shuffled, Tau2Estimator::DL);
    CHECK(fp.pooled == f.pooled);
    CHECK(fp.se == f.se);
    CHECK(fp.q == f.q);
    CHECK(dlp.pooled == dl.pooled);
    CHECK(dlp.tau2 == dl.tau2);
    CHECK(dlp.weights == dl.weights);

    const double c = scale_dist(rng);
    auto scaled = es;
    for (auto& e : scaled) {
      e.slope *= c;
      e.se *= c;
    }
    for (auto est : {Tau2Estimator::DL, Tau2Estimator::REML}) {
      const auto base = meta_random(es, est);
      const auto s = meta_random(scaled, est);
      CHECK(std::abs(s.pooled - c * base.pooled) <= 1e-10 * std::max(1.0, c));
      CHECK(std::abs(s.se - c * base.se) <= 1e-10 * std::max(1.0, c));
      CHECK(std::abs(s.tau2 - c * c * base.tau2) <= 1e-8 * std::max(1.0, c * c));
      CHECK(std::abs(s.q - base.q) <= 1e-10 * std::max(1.0, base.q));
      CHECK(std::abs(s.i2 - base.i2) <= 1e-10);
      CHECK(std::abs(s.z - base.z) <= 1e-10 * std::max(1.0, std::abs(base.z)));
      CHECK(std::abs(s.p - base.p) <= 1e-10);
    }

    if (dl.tau2 == 0.0) {
      CHECK(dl.pooled == f.pooled);
      CHECK(dl.se == f.se);
      CHECK(dl.weights == f.weights);
    }
  }
}

TEST_CASE("tau2 == 0 makes random identical to fixed") {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> jitter(-0.01, 0.01);
  std::uniform_real_distribution<double> se(0.5, 1.5);
  int hits = 0;
  for (int trial = 0; trial < 250; ++trial) {
    std::vector<StudyEffect> es;
    const int k = 2 + trial % 9;
    for (int i = 0; i < k; ++i) es.push_back(effect("s" + std::to_string(i), 0.3 + jitter(rng), se(rng)));
    const auto f = meta_fixed(es);
    const auto r = meta_random(es, Tau2Estimator::DL);
    REQUIRE(r.tau2 == 0.0);
    ++hits;
    CHECK(r.pooled == f.pooled);
    CHECK(r.se == f.se);
    CHECK(r.ci95 == f.ci95);
    CHECK(r.z == f.z);
    CHECK(r.p == f.p);
    CHECK(r.q == f.q);
    CHECK(r.df == f.df);
    CHECK(r.i2 == f.i2);
    CHECK(r.weights == f.weights);
  }
  CHECK(hits == 250);
}

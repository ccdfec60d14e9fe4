#include "lingame/choice.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "lingame/error.hpp"

namespace lingame {

ActionProfile::ActionProfile(const Triple& payoffs, const Triple& sentiments)
    : payoffs_(payoffs), sentiments_(sentiments) {
  if (!(payoffs[0] > payoffs[1] && payoffs[1] > payoffs[2])) {
    throw Error(ErrorCode::InvalidArgument,
                "payoffs must satisfy keep_all > give_half > give_all");
  }
  for (double s : sentiments) {
    if (!(s >= SentimentScore::kMin && s <= SentimentScore::kMax)) {
      throw Error(ErrorCode::InvalidArgument, "sentiment " + std::to_string(s) + " outside [1, 7]");
    }
  }
}

void UtilityParams::validate() const {
  if (!(lambda >= 0.0)) throw Error(ErrorCode::InvalidArgument, "lambda must be >= 0");
  if (!(theta > 0.0)) throw Error(ErrorCode::InvalidArgument, "theta must be > 0");
}

Triple utility(const ActionProfile& profile, const UtilityParams& params) {
  params.validate();
  Triple u{};
  for (std::size_t i = 0; i < 3; ++i) {
    u[i] = profile.payoffs()[i] + params.lambda * profile.sentiments()[i];
  }
  return u;
}

std::vector<Action> dominance_filter(const ActionProfile& profile) {
  const auto& m = profile.payoffs();
  const auto& s = profile.sentiments();
  std::vector<Action> kept;
  for (std::size_t j = 0; j < 3; ++j) {
    bool dominated = false;
    for (std::size_t k = 0; k < 3 && !dominated; ++k) {
      if (k == j) continue;
      dominated = m[k] >= m[j] && s[k] >= s[j] && (m[k] > m[j] || s[k] > s[j]);
    }
    if (!dominated) kept.push_back(kAllActions[j]);
  }
  return kept;
}

Triple logit_choice(const Triple& utilities, double theta) {
  if (!(theta > 0.0)) throw Error(ErrorCode::InvalidArgument, "theta must be > 0");
  const double top = *std::max_element(utilities.begin(), utilities.end());
  Triple p{};
  double total = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    p[i] = std::exp((utilities[i] - top) / theta);
    total += p[i];
  }
  for (auto& v : p) v /= total;
  return p;
}

double predict_prosocial(const ActionProfile& profile, const UtilityParams& params) {
  const Triple p = logit_choice(utility(profile, params), params.theta);
  return p[index_of(Action::GiveHalf)] + p[index_of(Action::GiveAll)];
}

PopulationState::PopulationState(const Triple& shares) : shares_(shares) {
  double sum = 0.0;
  for (double v : shares) {
    if (!(v >= 0.0)) {
      throw Error(ErrorCode::InvalidInitialState, "population shares must be non-negative");
    }
    sum += v;
  }
  if (std::abs(sum - 1.0) > kTolerance) {
    throw Error(ErrorCode::InvalidInitialState,
                "population shares sum to " + std::to_string(sum) + ", not 1");
  }
}

std::string_view to_string(Integrator integrator) noexcept {
  return integrator == Integrator::Euler ? "euler" : "rk4";
}

void ReplicatorConfig::validate() const {
  if (!(step > 0.0)) throw Error(ErrorCode::InvalidArgument, "step must be > 0");
  if (!(horizon > 0.0)) throw Error(ErrorCode::InvalidArgument, "horizon must be > 0");
  if (step > horizon) throw Error(ErrorCode::InvalidArgument, "step must not exceed horizon");
  if (!(lambda >= 0.0)) throw Error(ErrorCode::InvalidArgument, "lambda must be >= 0");
}

Triple replicator_field(const Triple& x, const Triple& sentiments, const Matrix3& payoff_matrix,
                        double lambda) {
  Triple fitness{};
  double mean = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    double ax = 0.0;
    for (std::size_t j = 0; j < 3; ++j) ax += payoff_matrix[i][j] * x[j];
    fitness[i] = ax + lambda * sentiments[i];
    mean += x[i] * fitness[i];
  }
  Triple dx{};
  for (std::size_t i = 0; i < 3; ++i) dx[i] = x[i] * (fitness[i] - mean);
  return dx;
}

namespace {

Triple axpy(const Triple& x, double a, const Triple& d) {
  return {x[0] + a * d[0], x[1] + a * d[1], x[2] + a * d[2]};
}

Triple project_to_simplex(Triple x) {
  double sum = 0.0;
  for (auto& v : x) {
    v = std::max(v, 0.0);
    sum += v;
  }
  for (auto& v : x) v /= sum;
  return x;
}

}  // namespace

std::vector<TrajectoryPoint> simulate_replicator(const PopulationState& x0,
                                                 const Triple& sentiments,
                                                 const ReplicatorConfig& config) {
  config.validate();
  const auto field = [&](const Triple& x) {
    return replicator_field(x, sentiments, config.payoff_matrix, config.lambda);
  };

  const auto steps =
      static_cast<std::size_t>(std::max(1.0, std::ceil(config.horizon / config.step - 1e-9)));
  std::vector<TrajectoryPoint> out;
  out.reserve(steps + 1);
  out.push_back({0.0, x0.shares()});

  Triple x = x0.shares();
  double t = 0.0;
  for (std::size_t k = 1; k <= steps; ++k) {
    const double t_next =
        k == steps ? config.horizon : std::min(config.horizon, static_cast<double>(k) * config.step);
    const double h = t_next - t;
    if (config.integrator == Integrator::Euler) {
      x = axpy(x, h, field(x));
    } else {
      const Triple k1 = field(x);
      const Triple k2 = field(axpy(x, h / 2.0, k1));
      const Triple k3 = field(axpy(x, h / 2.0, k2));
      const Triple k4 = field(axpy(x, h, k3));
      for (std::size_t i = 0; i < 3; ++i) {
        x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
      }
    }
    x = project_to_simplex(x);
    t = t_next;
    out.push_back({t, x});
  }
  return out;
}

}  // namespace lingame

#pragma once

// Language-based utility over the three prominent dictator-game actions:
// Pareto filtering, logit choice, and sentiment-augmented replicator dynamics.

#include <array>
#include <cstddef>
#include <string_view>
#include <vector>

#include "lingame/core.hpp"

namespace lingame {

using Triple = std::array<double, 3>;
using Matrix3 = std::array<Triple, 3>;

// Own material payoff and sentiment per action, indexed by Action.
class ActionProfile {
 public:
  // Throws Error{InvalidArgument} unless payoffs are strictly decreasing
  // keep > half > all and sentiments lie in [1, 7].
  ActionProfile(const Triple& payoffs, const Triple& sentiments);

  const Triple& payoffs() const noexcept { return payoffs_; }
  const Triple& sentiments() const noexcept { return sentiments_; }

 private:
  Triple payoffs_;
  Triple sentiments_;
};

struct UtilityParams {
  double lambda = 1.0;  // money units per sentiment point, >= 0
  double theta = 1.0;   // logit temperature in money units, > 0

  void validate() const;
};

// u_i = m_i + lambda * S_i
Triple utility(const ActionProfile& profile, const UtilityParams& params);

// Actions not weakly Pareto-dominated in (payoff, sentiment). Always contains
// keep_all, the strict payoff maximum.
std::vector<Action> dominance_filter(const ActionProfile& profile);

// Softmax of u / theta with max-subtraction.
Triple logit_choice(const Triple& utilities, double theta);

// P(give_half) + P(give_all) under logit choice over the utilities.
double predict_prosocial(const ActionProfile& profile, const UtilityParams& params);

class PopulationState {
 public:
  static constexpr double kTolerance = 1e-9;

  // Throws Error{InvalidInitialState} for negative shares or a sum off 1 by
  // more than kTolerance.
  explicit PopulationState(const Triple& shares);

  const Triple& shares() const noexcept { return shares_; }
  double operator[](std::size_t i) const noexcept { return shares_[i]; }

 private:
  Triple shares_;
};

enum class Integrator { Euler, RK4 };

std::string_view to_string(Integrator integrator) noexcept;

struct ReplicatorConfig {
  Matrix3 payoff_matrix{};
  double lambda = 1.0;
  double step = 1e-2;
  double horizon = 1.0;
  Integrator integrator = Integrator::RK4;

  void validate() const;
};

struct TrajectoryPoint {
  double t;
  Triple x;
};

// x_i * (pi_i - mean pi) with pi = A x + lambda * S.
Triple replicator_field(const Triple& x, const Triple& sentiments, const Matrix3& payoff_matrix,
                        double lambda);

// Fixed-step integration from t = 0 to t = horizon inclusive; the last step is
// shortened to land on the horizon. Each state is projected back onto the
// simplex.
std::vector<TrajectoryPoint> simulate_replicator(const PopulationState& x0,
                                                 const Triple& sentiments,
                                                 const ReplicatorConfig& config);

}  // namespace lingame

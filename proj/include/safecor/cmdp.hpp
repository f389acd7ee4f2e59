#ifndef SAFECOR_CMDP_HPP
#define SAFECOR_CMDP_HPP

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace safecor {

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using StateVec = Vec<double>;
using ActionVec = Vec<double>;

/// One environment transition. `state` is the observation the action was taken from.
struct StepRecord {
  StateVec state;
  ActionVec action;
  double reward = 0.0;
  double cost = 0.0;
  std::optional<double> cor;
  bool terminal = false;
  bool truncated = false;
};

struct Trajectory {
  std::vector<StepRecord> steps;
  std::uint64_t seed = 0;
  /// Observation after the last step; used for bootstrapping truncated episodes.
  StateVec final_state;

  bool ends_terminal() const { return !steps.empty() && steps.back().terminal; }
  bool ends_truncated() const { return !steps.empty() && steps.back().truncated; }
};

struct CmdpSpec {
  double gamma = 0.99;
  double threshold_d = 0.025;
  int horizon = 1000;
  int obs_dim = 1;
  int act_dim = 1;

  void validate() const;
};

struct Returns {
  double reward = 0.0;
  double cost = 0.0;
};

namespace detail {
inline void check_gamma(double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0))
    throw std::invalid_argument("discount factor must lie in (0,1), got " + std::to_string(gamma));
}
}  // namespace detail

/// Sum_t gamma^t xs[t], accumulated backwards (Horner form).
template <typename Derived>
typename Derived::Scalar discounted_sum(const Eigen::DenseBase<Derived>& xs,
                                        typename Derived::Scalar gamma) {
  using Scalar = typename Derived::Scalar;
  detail::check_gamma(static_cast<double>(gamma));
  Scalar acc(0);
  for (Eigen::Index t = xs.size() - 1; t >= 0; --t) {
    const Scalar x = xs.derived().coeff(t);
    if (!std::isfinite(x))
      throw std::invalid_argument("discounted_sum: non-finite value (" +
                                  std::string(std::isnan(x) ? "NaN" : "Inf") + ") at index " +
                                  std::to_string(t));
    acc = x + gamma * acc;
  }
  return acc;
}

double discounted_sum(std::span<const double> xs, double gamma);

/// Discounted reward and cost returns of one trajectory.
Returns trajectory_returns(const Trajectory& traj, const CmdpSpec& spec);

/// Upper bound on the discounted cost return: d / (1 - gamma).
double constraint_limit(const CmdpSpec& spec);

/// Checks the structural invariants of a trajectory (nonempty, finite, flags only on the last step).
void validate_trajectory(const Trajectory& traj);

std::vector<double> reward_channel(const Trajectory& traj);
std::vector<double> cost_channel(const Trajectory& traj);

}  // namespace safecor

#endif  // SAFECOR_CMDP_HPP

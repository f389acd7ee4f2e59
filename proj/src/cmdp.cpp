#include "safecor/cmdp.hpp"

namespace safecor {

void CmdpSpec::validate() const {
  detail::check_gamma(gamma);
  if (!(threshold_d >= 0.0)) throw std::invalid_argument("threshold_d must be >= 0");
  if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  if (obs_dim < 1 || act_dim < 1) throw std::invalid_argument("obs_dim and act_dim must be positive");
}

double discounted_sum(std::span<const double> xs, double gamma) {
  return discounted_sum(Eigen::Map<const Eigen::VectorXd>(xs.data(), static_cast<Eigen::Index>(xs.size())),
                        gamma);
}

std::vector<double> reward_channel(const Trajectory& traj) {
  std::vector<double> out;
  out.reserve(traj.steps.size());
  for (const auto& s : traj.steps) out.push_back(s.reward);
  return out;
}

std::vector<double> cost_channel(const Trajectory& traj) {
  std::vector<double> out;
  out.reserve(traj.steps.size());
  for (const auto& s : traj.steps) out.push_back(s.cost);
  return out;
}

Returns trajectory_returns(const Trajectory& traj, const CmdpSpec& spec) {
  spec.validate();
  if (traj.steps.size() > static_cast<std::size_t>(spec.horizon))
    throw std::invalid_argument("trajectory longer than horizon (" + std::to_string(traj.steps.size()) +
                                " > " + std::to_string(spec.horizon) + ")");
  for (std::size_t t = 0; t < traj.steps.size(); ++t) {
    const auto& step = traj.steps[t];
    if (step.state.size() != spec.obs_dim)
      throw std::invalid_argument("trajectory state dimension " + std::to_string(step.state.size()) +
                                  " at step " + std::to_string(t) + " does not match obs_dim " +
                                  std::to_string(spec.obs_dim));
  }
  const auto rewards = reward_channel(traj);
  const auto costs = cost_channel(traj);
  return {discounted_sum(rewards, spec.gamma), discounted_sum(costs, spec.gamma)};
}

double constraint_limit(const CmdpSpec& spec) {
  spec.validate();
  return spec.threshold_d / (1.0 - spec.gamma);
}

void validate_trajectory(const Trajectory& traj) {
  if (traj.steps.empty()) throw std::invalid_argument("trajectory is empty");
  for (std::size_t t = 0; t < traj.steps.size(); ++t) {
    const auto& s = traj.steps[t];
    const bool last = t + 1 == traj.steps.size();
    if (!last && (s.terminal || s.truncated))
      throw std::invalid_argument("terminal/truncated flag on non-final step " + std::to_string(t));
    if (s.terminal && s.truncated)
      throw std::invalid_argument("step flagged both terminal and truncated");
    if (!(s.cost >= 0.0)) throw std::invalid_argument("negative or NaN cost at step " + std::to_string(t));
    if (!std::isfinite(s.reward) || !s.state.allFinite() || !s.action.allFinite())
      throw std::invalid_argument("non-finite entry at step " + std::to_string(t));
  }
}

}  // namespace safecor

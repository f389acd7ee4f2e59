#include "safecor/envs.hpp"

#include <algorithm>
#include <stdexcept>

namespace safecor {

namespace {

constexpr int kMaxPlacementAttempts = 100000;

void check_action(const ActionVec& action, int act_dim) {
  if (action.size() != act_dim)
    throw std::invalid_argument("action dimension " + std::to_string(action.size()) + " != " +
                                std::to_string(act_dim));
  if (!action.allFinite()) throw std::invalid_argument("non-finite action");
}

}  // namespace

// ---------------------------------------------------------------------------
// PointGoalMini

void PointGoalMiniConfig::validate() const {
  if (!(arena_half_width > 0.0)) throw std::invalid_argument("arena_half_width must be > 0");
  if (n_hazards < 0) throw std::invalid_argument("n_hazards must be >= 0");
  if (!(hazard_radius > 0.0) || !(goal_radius > 0.0)) throw std::invalid_argument("radii must be > 0");
  if (!(max_speed > 0.0) || !(dt > 0.0)) throw std::invalid_argument("max_speed and dt must be > 0");
  if (!(goal_bonus >= 0.0)) throw std::invalid_argument("goal_bonus must be >= 0");
  if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  if (!(threshold_d >= 0.0)) throw std::invalid_argument("threshold_d must be >= 0");
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must lie in (0,1)");
}

PointGoalMini::PointGoalMini(PointGoalMiniConfig config) : config_(config), rng_(config.seed) {
  config_.validate();
  hazards_.resize(static_cast<std::size_t>(config_.n_hazards), Eigen::Vector2d::Zero());
}

CmdpSpec PointGoalMini::spec() const {
  return {config_.gamma, config_.threshold_d, config_.horizon, 4 + 2 * config_.n_hazards, 2};
}

std::unique_ptr<Environment> PointGoalMini::clone() const { return std::make_unique<PointGoalMini>(*this); }

Eigen::Vector2d PointGoalMini::sample_point(double margin) {
  const double half = std::max(config_.arena_half_width - margin, 0.0);
  std::uniform_real_distribution<double> u(-half, half);
  const double x = u(rng_);
  const double y = u(rng_);
  return {x, y};
}

Eigen::Vector2d PointGoalMini::sample_goal() {
  const double keep_agent = config_.goal_radius + 0.5;
  const double keep_hazard = config_.goal_radius + config_.hazard_radius;
  for (int attempt = 0; attempt < kMaxPlacementAttempts; ++attempt) {
    const Eigen::Vector2d g = sample_point(config_.goal_radius);
    if ((g - agent_).norm() < keep_agent) continue;
    const bool clear = std::all_of(hazards_.begin(), hazards_.end(),
                                   [&](const Eigen::Vector2d& h) { return (g - h).norm() >= keep_hazard; });
    if (clear) return g;
  }
  throw std::runtime_error("PointGoalMini: could not place goal; arena too crowded");
}

StateVec PointGoalMini::reset(std::uint64_t seed) {
  rng_.seed(seed);
  agent_ = sample_point(0.3);
  velocity_.setZero();
  const double keep_agent = config_.hazard_radius + 0.25;
  for (std::size_t i = 0; i < hazards_.size(); ++i) {
    bool placed = false;
    for (int attempt = 0; attempt < kMaxPlacementAttempts && !placed; ++attempt) {
      const Eigen::Vector2d h = sample_point(0.0);
      if ((h - agent_).norm() < keep_agent) continue;
      bool clear = true;
      for (std::size_t j = 0; j < i; ++j)
        if ((h - hazards_[j]).norm() < 2.0 * config_.hazard_radius) clear = false;
      if (clear) {
        hazards_[i] = h;
        placed = true;
      }
    }
    if (!placed) throw std::runtime_error("PointGoalMini: could not place hazards; arena too crowded");
  }
  goal_ = sample_goal();
  steps_ = 0;
  done_ = false;
  return observe();
}

void PointGoalMini::set_layout(const Eigen::Vector2d& agent, const Eigen::Vector2d& goal,
                               std::vector<Eigen::Vector2d> hazards) {
  if (static_cast<int>(hazards.size()) != config_.n_hazards)
    throw std::invalid_argument("set_layout: hazard count does not match config");
  agent_ = agent;
  goal_ = goal;
  hazards_ = std::move(hazards);
  velocity_.setZero();
  steps_ = 0;
  done_ = false;
}

bool PointGoalMini::in_hazard(const Eigen::Vector2d& p) const {
  return std::any_of(hazards_.begin(), hazards_.end(),
                     [&](const Eigen::Vector2d& h) { return (p - h).norm() <= config_.hazard_radius; });
}

StateVec PointGoalMini::observe() const {
  StateVec obs(4 + 2 * config_.n_hazards);
  obs.segment<2>(0) = goal_ - agent_;
  obs.segment<2>(2) = velocity_;
  for (std::size_t i = 0; i < hazards_.size(); ++i)
    obs.segment<2>(4 + 2 * static_cast<Eigen::Index>(i)) = hazards_[i] - agent_;
  return obs;
}

StepOutcome PointGoalMini::step(const ActionVec& action) {
  if (done_) throw std::logic_error("PointGoalMini::step called on a finished episode; call reset()");
  check_action(action, 2);

  StepOutcome out;
  out.record.state = observe();
  const Eigen::Vector2d accel = action.cwiseMax(-1.0).cwiseMin(1.0);
  out.record.action = accel;

  const double prev_dist = (goal_ - agent_).norm();
  velocity_ += config_.dt * accel;
  const double speed = velocity_.norm();
  if (speed > config_.max_speed) velocity_ *= config_.max_speed / speed;
  const double w = config_.arena_half_width;
  agent_ = (agent_ + config_.dt * velocity_).cwiseMax(-w).cwiseMin(w);
  const double new_dist = (goal_ - agent_).norm();

  double reward = prev_dist - new_dist;
  if (new_dist <= config_.goal_radius) {
    reward += config_.goal_bonus;
    goal_ = sample_goal();
  }
  out.record.reward = reward;
  out.record.cost = in_hazard(agent_) ? 1.0 : 0.0;

  ++steps_;
  if (steps_ >= config_.horizon) {
    out.record.truncated = true;
    done_ = true;
  }
  out.next_state = observe();
  return out;
}

// ---------------------------------------------------------------------------
// ChainCmdp

void ChainCmdpConfig::validate() const {
  if (n_states < 2) throw std::invalid_argument("chain needs at least 2 states");
  if (!(slip_prob >= 0.0 && slip_prob < 1.0)) throw std::invalid_argument("slip_prob must lie in [0,1)");
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must lie in (0,1)");
  if (horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  if (static_cast<int>(rewards.size()) != n_states || static_cast<int>(costs.size()) != n_states)
    throw std::invalid_argument("chain reward/cost tables must have n_states entries");
  for (double c : costs)
    if (!(c >= 0.0)) throw std::invalid_argument("chain costs must be >= 0");
}

ChainCmdp::ChainCmdp(ChainCmdpConfig config) : config_(std::move(config)) { config_.validate(); }

CmdpSpec ChainCmdp::spec() const {
  return {config_.gamma, config_.threshold_d, config_.horizon, config_.n_states, 1};
}

std::unique_ptr<Environment> ChainCmdp::clone() const { return std::make_unique<ChainCmdp>(*this); }

StateVec ChainCmdp::observe() const {
  StateVec obs = StateVec::Zero(config_.n_states);
  obs(state_) = 1.0;
  return obs;
}

StateVec ChainCmdp::reset(std::uint64_t seed) {
  rng_.seed(seed);
  state_ = 0;
  steps_ = 0;
  done_ = false;
  return observe();
}

StepOutcome ChainCmdp::step(const ActionVec& action) {
  if (done_) throw std::logic_error("ChainCmdp::step called on a finished episode; call reset()");
  check_action(action, 1);
  StepOutcome out;
  out.record.state = observe();
  out.record.action = action;
  out.record.reward = config_.rewards[static_cast<std::size_t>(state_)];
  out.record.cost = config_.costs[static_cast<std::size_t>(state_)];

  bool right = action(0) >= 0.0;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  if (u(rng_) < config_.slip_prob) right = !right;
  state_ = right ? std::min(state_ + 1, config_.n_states - 1) : std::max(state_ - 1, 0);

  ++steps_;
  if (steps_ >= config_.horizon) {
    out.record.truncated = true;
    done_ = true;
  }
  out.next_state = observe();
  return out;
}

Eigen::MatrixXd chain_transition_matrix(const ChainCmdpConfig& chain, const TabularPolicy& policy) {
  chain.validate();
  const int n = chain.n_states;
  if (policy.size() != n) throw std::invalid_argument("tabular policy size must equal n_states");
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n, n);
  for (int s = 0; s < n; ++s) {
    const double p_right = policy(s);
    if (!(p_right >= 0.0 && p_right <= 1.0)) throw std::invalid_argument("policy probabilities must lie in [0,1]");
    const double move_right = p_right * (1.0 - chain.slip_prob) + (1.0 - p_right) * chain.slip_prob;
    P(s, std::min(s + 1, n - 1)) += move_right;
    P(s, std::max(s - 1, 0)) += 1.0 - move_right;
  }
  return P;
}

Returns exact_policy_evaluation(const ChainCmdpConfig& chain, const TabularPolicy& policy) {
  const Eigen::MatrixXd P = chain_transition_matrix(chain, policy);
  const int n = chain.n_states;
  const Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n, n) - chain.gamma * P;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
  if (!lu.isInvertible()) throw std::runtime_error("exact_policy_evaluation: singular Bellman system");
  const Eigen::VectorXd r = Eigen::Map<const Eigen::VectorXd>(chain.rewards.data(), n);
  const Eigen::VectorXd c = Eigen::Map<const Eigen::VectorXd>(chain.costs.data(), n);
  return {lu.solve(r)(0), lu.solve(c)(0)};
}

ChainOptimum chain_optimal_policy(const ChainCmdpConfig& chain) {
  chain.validate();
  const int n = chain.n_states;
  TabularPolicy policy = TabularPolicy::Ones(n);
  const Eigen::VectorXd r = Eigen::Map<const Eigen::VectorXd>(chain.rewards.data(), n);
  Eigen::VectorXd v;
  for (int iter = 0; iter < 1000; ++iter) {
    const Eigen::MatrixXd P = chain_transition_matrix(chain, policy);
    v = (Eigen::MatrixXd::Identity(n, n) - chain.gamma * P).fullPivLu().solve(r);
    TabularPolicy improved = policy;
    for (int s = 0; s < n; ++s) {
      const int right = std::min(s + 1, n - 1);
      const int left = std::max(s - 1, 0);
      const double q_right = (1.0 - chain.slip_prob) * v(right) + chain.slip_prob * v(left);
      const double q_left = (1.0 - chain.slip_prob) * v(left) + chain.slip_prob * v(right);
      // keep the incumbent on ties so the iteration terminates
      if (q_right > q_left + 1e-12) improved(s) = 1.0;
      else if (q_left > q_right + 1e-12) improved(s) = 0.0;
    }
    if (improved == policy) break;
    policy = improved;
  }
  return {policy, v(0)};
}

}  // namespace safecor

#ifndef SAFECOR_ENVS_HPP
#define SAFECOR_ENVS_HPP

#include "safecor/cmdp.hpp"

#include <memory>
#include <random>
#include <string>
#include <vector>

namespace safecor {

struct StepOutcome {
  StepRecord record;
  StateVec next_state;
};

/// Episodic CMDP with continuous actions. Single-owner and mutable.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual StateVec reset(std::uint64_t seed) = 0;
  virtual StepOutcome step(const ActionVec& action) = 0;
  virtual CmdpSpec spec() const = 0;
  virtual std::string name() const = 0;
  virtual std::unique_ptr<Environment> clone() const = 0;

  int obs_dim() const { return spec().obs_dim; }
  int act_dim() const { return spec().act_dim; }
};

struct PointGoalMiniConfig {
  double arena_half_width = 2.0;
  int n_hazards = 8;
  double hazard_radius = 0.35;
  double goal_radius = 0.3;
  double max_speed = 1.0;
  double dt = 0.1;
  double goal_bonus = 1.0;
  int horizon = 1000;
  double threshold_d = 0.025;
  double gamma = 0.99;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Point mass in a square arena: reach re-spawning goals while staying out of hazard circles.
///
/// Observation layout: [goal - agent (2), velocity (2), hazard_i - agent (2 per hazard)].
/// Reward is goal-distance progress plus a bonus on reaching the goal; the goal then
/// re-spawns and the episode continues until the horizon. Cost is 1 while the agent
/// center lies inside any hazard.
class PointGoalMini final : public Environment {
 public:
  explicit PointGoalMini(PointGoalMiniConfig config = {});

  StateVec reset(std::uint64_t seed) override;
  StepOutcome step(const ActionVec& action) override;
  CmdpSpec spec() const override;
  std::string name() const override { return "pointgoal"; }
  std::unique_ptr<Environment> clone() const override;

  const PointGoalMiniConfig& config() const { return config_; }

  // Direct state access for scripted tests.
  Eigen::Vector2d agent_position() const { return agent_; }
  Eigen::Vector2d agent_velocity() const { return velocity_; }
  Eigen::Vector2d goal_position() const { return goal_; }
  const std::vector<Eigen::Vector2d>& hazards() const { return hazards_; }
  void set_layout(const Eigen::Vector2d& agent, const Eigen::Vector2d& goal,
                  std::vector<Eigen::Vector2d> hazards);

  bool in_hazard(const Eigen::Vector2d& p) const;
  StateVec observe() const;

 private:
  Eigen::Vector2d sample_point(double margin);
  Eigen::Vector2d sample_goal();

  PointGoalMiniConfig config_;
  std::mt19937_64 rng_;
  Eigen::Vector2d agent_ = Eigen::Vector2d::Zero();
  Eigen::Vector2d velocity_ = Eigen::Vector2d::Zero();
  Eigen::Vector2d goal_ = Eigen::Vector2d::Zero();
  std::vector<Eigen::Vector2d> hazards_;
  int steps_ = 0;
  bool done_ = true;
};

struct ChainCmdpConfig {
  int n_states = 5;
  double slip_prob = 0.1;
  double gamma = 0.99;
  int horizon = 200;
  double threshold_d = 0.025;
  std::vector<double> rewards{0.0, 0.0, 0.0, 0.0, 1.0};
  std::vector<double> costs{0.0, 0.0, 1.0, 0.0, 0.0};

  void validate() const;
};

/// Tabular policy over the chain's two actions: probability of moving right in each state.
using TabularPolicy = Eigen::VectorXd;

/// Left/right chain. Reward and cost are per-state tables paid on leaving the state.
/// A move succeeds with probability 1 - slip_prob and goes the opposite way otherwise;
/// the ends are reflecting. The continuous action maps to "right" iff a[0] >= 0.
class ChainCmdp final : public Environment {
 public:
  explicit ChainCmdp(ChainCmdpConfig config = {});

  StateVec reset(std::uint64_t seed) override;
  StepOutcome step(const ActionVec& action) override;
  CmdpSpec spec() const override;
  std::string name() const override { return "chain"; }
  std::unique_ptr<Environment> clone() const override;

  const ChainCmdpConfig& config() const { return config_; }
  int position() const { return state_; }

 private:
  StateVec observe() const;

  ChainCmdpConfig config_;
  std::mt19937_64 rng_;
  int state_ = 0;
  int steps_ = 0;
  bool done_ = true;
};

/// Row-stochastic transition matrix of the chain under `policy`.
Eigen::MatrixXd chain_transition_matrix(const ChainCmdpConfig& chain, const TabularPolicy& policy);

/// Exact discounted reward and cost values from state 0, by solving (I - gamma P) v = r.
Returns exact_policy_evaluation(const ChainCmdpConfig& chain, const TabularPolicy& policy);

/// Unconstrained optimal deterministic policy and its value from state 0 (policy iteration).
struct ChainOptimum {
  TabularPolicy policy;
  double value = 0.0;
};
ChainOptimum chain_optimal_policy(const ChainCmdpConfig& chain);

}  // namespace safecor

#endif  // SAFECOR_ENVS_HPP

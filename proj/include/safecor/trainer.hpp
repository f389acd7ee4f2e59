#ifndef SAFECOR_TRAINER_HPP
#define SAFECOR_TRAINER_HPP

#include "safecor/cmdp.hpp"
#include "safecor/cor.hpp"
#include "safecor/envs.hpp"
#include "safecor/policy_net.hpp"

#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace safecor {

/// Which shaping channels are active. `off` is the unshaped Lagrangian baseline;
/// `bc_loglik` replaces CoR shaping with a log-likelihood term on reward-expert pairs.
enum class AblationMode { off, rew_only, cost_only, both, bc_loglik };
enum class ExpertMode { agent, reward_expert, safe_expert };

std::string to_string(AblationMode mode);
std::string to_string(ExpertMode mode);
AblationMode ablation_mode_from_string(const std::string& text);
ExpertMode expert_mode_from_string(const std::string& text);

struct TrainerConfig {
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip_ratio = 0.2;
  double max_kl = 0.001;
  double learning_rate = 3e-4;
  double lagrange_lr = 0.05;
  double lagrange_init = 0.0;
  int epochs_per_batch = 10;
  int steps_per_batch = 4000;
  long long total_steps = 200000;
  int minibatch_size = 500;
  int value_epochs = 10;
  CorParams cor;
  AblationMode ablation_mode = AblationMode::both;
  double bc_coef = 0.01;
  ExpertMode expert_mode = ExpertMode::agent;
  // 64 keeps desk-scale runs fast; larger widths work unchanged.
  int hidden_dim = 64;
  double log_std_init = -0.5;
  double safe_expert_d = 0.005;
  std::uint64_t seed = 0;
  int workers = 1;

  void validate() const;
  /// Channels that receive CoR for this configuration (none for experts and baselines).
  CorChannels cor_channels() const;
  bool uses_cor() const;
};

/// Deterministic seed derivation (splitmix64 over the inputs).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0);

struct EpisodeSpan {
  Eigen::Index start = 0;
  Eigen::Index length = 0;
  bool terminal = false;
  bool truncated = false;
  std::uint64_t seed = 0;
  double bootstrap_reward = 0.0;  // value of the final observation for truncated episodes, else 0
  double bootstrap_cost = 0.0;
};

/// Flattened steps of several complete episodes, column-batched.
struct RolloutBatch {
  Eigen::MatrixXd states;   // obs_dim x N
  Eigen::MatrixXd actions;  // act_dim x N (as sampled, before environment clamping)
  Eigen::VectorXd reward, cost, cor;
  Eigen::VectorXd shaped_reward, shaped_cost;
  Eigen::VectorXd log_prob;
  Eigen::VectorXd value_reward, value_cost;
  Eigen::VectorXd adv_reward, adv_cost;
  Eigen::VectorXd ret_reward, ret_cost;
  std::vector<EpisodeSpan> episodes;
  bool has_cor = false;

  Eigen::Index size() const { return reward.size(); }
  /// Steps with positive raw cost.
  long long cv() const;
};

struct RolloutRequest {
  int min_steps = 4000;
  std::uint64_t sample_seed = 0;   // action noise
  std::uint64_t episode_seed = 0;  // environment resets
  int workers = 1;
};

/// Runs complete episodes until at least `min_steps` steps are collected, then annotates
/// CoR (when a model is given), shaped channels, values and GAE. With K workers each one
/// collects its share with derived seeds and results are merged in worker order.
RolloutBatch collect_rollouts(const Checkpoint& nets, const Environment& env, const RolloutRequest& request,
                              const CorModel* cor_model, CorChannels channels, const TrainerConfig& config);

struct Gae {
  Eigen::VectorXd advantages;
  Eigen::VectorXd targets;
};

/// Generalized advantage estimation for one episode. `bootstrap` is the value after the
/// last step (0 for terminal episodes).
Gae compute_gae(std::span<const double> rewards, std::span<const double> values, double bootstrap, double gamma,
                double gae_lambda);

/// Fills adv_*/ret_* of every episode in the batch from the shaped channels and values.
void annotate_advantages(RolloutBatch& batch, double gamma, double gae_lambda);

/// Reward advantages normalized to zero mean and unit variance, cost advantages as is,
/// combined as (A_r - mu A_c) / (1 + mu).
Eigen::VectorXd combined_advantages(const RolloutBatch& batch, double multiplier);

/// Optional behaviour-cloning term: coef * mean log pi(a|s) over expert pairs (column-batched).
struct BcTerm {
  Eigen::MatrixXd states;
  Eigen::MatrixXd actions;
  double coef = 0.0;
};

struct Surrogate {
  double value = 0.0;
  Eigen::VectorXd grad;  // gradient of `value` w.r.t. the flat policy parameters
};

/// mean_i min(r_i A_i, clip(r_i, 1-eps, 1+eps) A_i) [+ bc term], r_i = exp(logp_i - old_logp_i).
Surrogate clipped_surrogate(const GaussianPolicy<double>& policy, const Eigen::MatrixXd& states,
                            const Eigen::MatrixXd& actions, const Eigen::VectorXd& old_log_prob,
                            const Eigen::VectorXd& advantages, double clip_ratio, const BcTerm* bc = nullptr);

struct LagrangeState {
  double multiplier = 0.0;
  double running_cost = 0.0;
};

/// Projected ascent on the multiplier using the mean per-episode discounted shaped-cost return.
LagrangeState lagrange_update(const LagrangeState& state, const RolloutBatch& batch, const CmdpSpec& spec,
                              const TrainerConfig& config);

/// Mean over episodes of the discounted shaped-cost return.
double mean_episode_cost_return(const RolloutBatch& batch, double gamma);

struct OptimizerState {
  Adam<double> policy;
  Adam<double> value_reward;
  Adam<double> value_cost;

  static OptimizerState for_nets(const Checkpoint& nets, double learning_rate);
};

struct UpdateStats {
  double kl = 0.0;
  int policy_steps = 0;
  bool early_stopped = false;
  double surrogate = 0.0;
  double value_loss_reward = 0.0;
  double value_loss_cost = 0.0;
};

/// One batch of clipped-surrogate Lagrangian policy updates plus value regression.
/// After each minibatch step the exact mean KL to the collection policy is measured;
/// the loop stops once it exceeds max_kl, and a step taking it above 2 max_kl is undone.
UpdateStats ppo_lagrangian_update(const RolloutBatch& batch, Checkpoint& nets, OptimizerState& optim,
                                  double multiplier, const TrainerConfig& config, const DemoPairs* bc_pairs,
                                  std::mt19937_64& rng);

/// One row of the training metrics log.
struct BatchMetrics {
  long long batch = 0;
  long long steps = 0;
  double avg_reward_return = 0.0;  // undiscounted raw reward per episode
  double avg_cost_return = 0.0;    // undiscounted raw cost per episode
  double cost_rate = 0.0;
  long long cv = 0;
  long long total_cv = 0;
  double multiplier = 0.0;
  double kl = 0.0;
  double cor_mean = 0.0;
};

inline constexpr const char* kMetricsHeader =
    "batch,steps,avg_reward_return,avg_cost_return,cost_rate,cv,total_cv,multiplier,kl,cor_mean";

std::string render_metrics_csv(const std::vector<BatchMetrics>& rows);
void write_metrics_csv(const std::filesystem::path& path, const std::vector<BatchMetrics>& rows);
/// Throws std::runtime_error naming the offending line on malformed input.
std::vector<BatchMetrics> read_metrics_csv(const std::filesystem::path& path);

struct TrainResult {
  Checkpoint nets;
  std::vector<BatchMetrics> metrics;
  LagrangeState lagrange;
};

struct TrainInputs {
  const CorModel* cor_model = nullptr;  // required for CoR-shaped modes
  const DemoPairs* bc_pairs = nullptr;  // required for bc_loglik
  std::optional<std::filesystem::path> out_dir;  // writes metrics.csv and checkpoint.txt when set
  std::function<void(const BatchMetrics&)> on_batch;
};

/// collect -> GAE -> multiplier update -> policy/value update, until total_steps.
TrainResult train(const TrainerConfig& config, const Environment& env, const TrainInputs& inputs = {});

}  // namespace safecor

#endif  // SAFECOR_TRAINER_HPP

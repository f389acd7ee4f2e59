#include "safecor/trainer.hpp"

#include "safecor/text_io.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <thread>

namespace safecor {

std::string to_string(AblationMode mode) {
  switch (mode) {
    case AblationMode::off: return "off";
    case AblationMode::rew_only: return "rew_only";
    case AblationMode::cost_only: return "cost_only";
    case AblationMode::both: return "both";
    case AblationMode::bc_loglik: return "bc_loglik";
  }
  return "off";
}

std::string to_string(ExpertMode mode) {
  switch (mode) {
    case ExpertMode::agent: return "agent";
    case ExpertMode::reward_expert: return "reward_expert";
    case ExpertMode::safe_expert: return "safe_expert";
  }
  return "agent";
}

AblationMode ablation_mode_from_string(const std::string& text) {
  for (auto m : {AblationMode::off, AblationMode::rew_only, AblationMode::cost_only, AblationMode::both,
                 AblationMode::bc_loglik})
    if (to_string(m) == text) return m;
  throw std::invalid_argument("unknown ablation mode '" + text + "'");
}

ExpertMode expert_mode_from_string(const std::string& text) {
  for (auto m : {ExpertMode::agent, ExpertMode::reward_expert, ExpertMode::safe_expert})
    if (to_string(m) == text) return m;
  throw std::invalid_argument("unknown expert mode '" + text + "'");
}

void TrainerConfig::validate() const {
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("trainer gamma must lie in (0,1)");
  if (!(gae_lambda >= 0.0 && gae_lambda <= 1.0)) throw std::invalid_argument("gae_lambda must lie in [0,1]");
  if (!(clip_ratio > 0.0 && clip_ratio < 1.0)) throw std::invalid_argument("clip_ratio must lie in (0,1)");
  if (!(max_kl > 0.0)) throw std::invalid_argument("max_kl must be > 0");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be > 0");
  if (!(lagrange_lr >= 0.0) || !(lagrange_init >= 0.0)) throw std::invalid_argument("lagrange settings must be >= 0");
  if (epochs_per_batch < 1 || value_epochs < 0) throw std::invalid_argument("epoch counts must be positive");
  if (steps_per_batch < 1 || minibatch_size < 1) throw std::invalid_argument("batch sizes must be positive");
  if (total_steps < 0) throw std::invalid_argument("total_steps must be >= 0");
  if (!(bc_coef >= 0.0)) throw std::invalid_argument("bc_coef must be >= 0");
  if (hidden_dim < 1) throw std::invalid_argument("hidden_dim must be positive");
  if (!(safe_expert_d >= 0.0)) throw std::invalid_argument("safe_expert_d must be >= 0");
  if (workers < 1) throw std::invalid_argument("workers must be >= 1");
  cor.validate();
}

CorChannels TrainerConfig::cor_channels() const {
  if (expert_mode != ExpertMode::agent) return {false, false};
  switch (ablation_mode) {
    case AblationMode::rew_only: return {true, false};
    case AblationMode::cost_only: return {false, true};
    case AblationMode::both: return {true, true};
    default: return {false, false};
  }
}

bool TrainerConfig::uses_cor() const {
  const auto ch = cor_channels();
  return ch.reward || ch.cost;
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(base) ^ a) ^ b);
}

long long RolloutBatch::cv() const { return (cost.array() > 0.0).count(); }

// ---------------------------------------------------------------------------
// Rollouts

namespace {

struct EpisodeData {
  Trajectory traj;
  std::vector<ActionVec> sampled;
  std::vector<double> log_prob;
};

std::vector<EpisodeData> run_episodes(const GaussianPolicy<double>& policy, Environment& env, int min_steps,
                                      std::uint64_t sample_seed, std::uint64_t episode_seed) {
  std::mt19937_64 rng(sample_seed);
  std::vector<EpisodeData> out;
  long long steps = 0;
  std::uint64_t episode = 0;
  while (steps < min_steps) {
    EpisodeData ep;
    ep.traj.seed = derive_seed(episode_seed, episode++);
    StateVec s = env.reset(ep.traj.seed);
    while (true) {
      auto [a, lp] = policy.sample(s, rng);
      StepOutcome o = env.step(a);
      ep.sampled.push_back(std::move(a));
      ep.log_prob.push_back(lp);
      const bool done = o.record.terminal || o.record.truncated;
      ep.traj.steps.push_back(std::move(o.record));
      s = std::move(o.next_state);
      if (done) break;
    }
    ep.traj.final_state = s;
    steps += static_cast<long long>(ep.traj.steps.size());
    out.push_back(std::move(ep));
  }
  return out;
}

}  // namespace

RolloutBatch collect_rollouts(const Checkpoint& nets, const Environment& env, const RolloutRequest& request,
                              const CorModel* cor_model, CorChannels channels, const TrainerConfig& config) {
  if ((channels.reward || channels.cost) && cor_model == nullptr)
    throw std::invalid_argument("collect_rollouts: CoR shaping enabled but no demonstration sets given");
  if (cor_model != nullptr && cor_model->raw_dim() != env.obs_dim())
    throw std::invalid_argument("collect_rollouts: demo set dimension " + std::to_string(cor_model->raw_dim()) +
                                " != observation dimension " + std::to_string(env.obs_dim()));
  if (nets.obs_dim() != env.obs_dim() || nets.act_dim() != env.act_dim())
    throw std::invalid_argument("collect_rollouts: network dimensions do not match the environment");

  const int k = std::max(1, request.workers);
  const int share = (request.min_steps + k - 1) / k;
  std::vector<std::vector<EpisodeData>> per_worker(static_cast<std::size_t>(k));
  if (k == 1) {
    auto local = env.clone();
    per_worker[0] = run_episodes(nets.policy, *local, share, derive_seed(request.sample_seed, 0),
                                 derive_seed(request.episode_seed, 0));
  } else {
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(k));
    std::vector<std::thread> threads;
    for (int w = 0; w < k; ++w) {
      threads.emplace_back([&, w] {
        try {
          auto local = env.clone();
          per_worker[static_cast<std::size_t>(w)] =
              run_episodes(nets.policy, *local, share, derive_seed(request.sample_seed, static_cast<std::uint64_t>(w)),
                           derive_seed(request.episode_seed, static_cast<std::uint64_t>(w)));
        } catch (...) {
          errors[static_cast<std::size_t>(w)] = std::current_exception();
        }
      });
    }
    for (auto& t : threads) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  std::vector<EpisodeData> episodes;
  for (auto& w : per_worker)
    for (auto& ep : w) episodes.push_back(std::move(ep));

  Eigen::Index n = 0;
  for (const auto& ep : episodes) n += static_cast<Eigen::Index>(ep.traj.steps.size());

  RolloutBatch batch;
  batch.states.resize(env.obs_dim(), n);
  batch.actions.resize(env.act_dim(), n);
  for (auto* v : {&batch.reward, &batch.cost, &batch.cor, &batch.shaped_reward, &batch.shaped_cost, &batch.log_prob})
    v->resize(n);
  batch.has_cor = cor_model != nullptr;

  Eigen::MatrixXd final_states(env.obs_dim(), static_cast<Eigen::Index>(episodes.size()));
  Eigen::Index t = 0;
  for (std::size_t e = 0; e < episodes.size(); ++e) {
    auto& ep = episodes[e];
    const auto len = static_cast<Eigen::Index>(ep.traj.steps.size());
    EpisodeSpan span{t, len, ep.traj.ends_terminal(), ep.traj.ends_truncated(), ep.traj.seed};
    std::vector<double> shaped_r, shaped_c;
    if (cor_model != nullptr) {
      ep.traj = annotate_cor(ep.traj, *cor_model);
      auto shaped = augment(ep.traj, cor_model->params(), channels);
      shaped_r = std::move(shaped.rewards);
      shaped_c = std::move(shaped.costs);
    } else {
      shaped_r = reward_channel(ep.traj);
      shaped_c = cost_channel(ep.traj);
    }
    for (Eigen::Index i = 0; i < len; ++i) {
      const auto& step = ep.traj.steps[static_cast<std::size_t>(i)];
      batch.states.col(t + i) = step.state;
      batch.actions.col(t + i) = ep.sampled[static_cast<std::size_t>(i)];
      batch.reward(t + i) = step.reward;
      batch.cost(t + i) = step.cost;
      batch.cor(t + i) = step.cor.value_or(0.0);
      batch.shaped_reward(t + i) = shaped_r[static_cast<std::size_t>(i)];
      batch.shaped_cost(t + i) = shaped_c[static_cast<std::size_t>(i)];
      batch.log_prob(t + i) = ep.log_prob[static_cast<std::size_t>(i)];
    }
    final_states.col(static_cast<Eigen::Index>(e)) = ep.traj.final_state;
    batch.episodes.push_back(span);
    t += len;
  }

  batch.value_reward = nets.value_reward.forward(batch.states).row(0).transpose();
  batch.value_cost = nets.value_cost.forward(batch.states).row(0).transpose();
  if (!episodes.empty()) {
    const Eigen::VectorXd boot_r = nets.value_reward.forward(final_states).row(0).transpose();
    const Eigen::VectorXd boot_c = nets.value_cost.forward(final_states).row(0).transpose();
    for (std::size_t e = 0; e < batch.episodes.size(); ++e) {
      auto& span = batch.episodes[e];
      // truncation bootstraps with the value estimate, termination with zero
      span.bootstrap_reward = span.terminal ? 0.0 : boot_r(static_cast<Eigen::Index>(e));
      span.bootstrap_cost = span.terminal ? 0.0 : boot_c(static_cast<Eigen::Index>(e));
    }
  }
  annotate_advantages(batch, config.gamma, config.gae_lambda);
  return batch;
}

// ---------------------------------------------------------------------------
// Advantages

Gae compute_gae(std::span<const double> rewards, std::span<const double> values, double bootstrap, double gamma,
                double gae_lambda) {
  if (rewards.size() != values.size()) throw std::invalid_argument("compute_gae: rewards and values differ in length");
  if (!std::isfinite(bootstrap)) throw std::invalid_argument("compute_gae: non-finite bootstrap value");
  const auto n = static_cast<Eigen::Index>(rewards.size());
  Gae out{Eigen::VectorXd(n), Eigen::VectorXd(n)};
  double next_value = bootstrap;
  double acc = 0.0;
  for (Eigen::Index t = n - 1; t >= 0; --t) {
    const double r = rewards[static_cast<std::size_t>(t)];
    const double v = values[static_cast<std::size_t>(t)];
    if (!std::isfinite(r) || !std::isfinite(v))
      throw std::invalid_argument("compute_gae: non-finite input at step " + std::to_string(t));
    const double delta = r + gamma * next_value - v;
    acc = delta + gamma * gae_lambda * acc;
    out.advantages(t) = acc;
    out.targets(t) = acc + v;
    next_value = v;
  }
  return out;
}

void annotate_advantages(RolloutBatch& batch, double gamma, double gae_lambda) {
  const Eigen::Index n = batch.size();
  for (auto* v : {&batch.adv_reward, &batch.adv_cost, &batch.ret_reward, &batch.ret_cost}) v->resize(n);
  for (const auto& ep : batch.episodes) {
    auto seg = [&](const Eigen::VectorXd& v) {
      return std::span<const double>(v.data() + ep.start, static_cast<std::size_t>(ep.length));
    };
    const Gae r = compute_gae(seg(batch.shaped_reward), seg(batch.value_reward), ep.bootstrap_reward, gamma, gae_lambda);
    const Gae c = compute_gae(seg(batch.shaped_cost), seg(batch.value_cost), ep.bootstrap_cost, gamma, gae_lambda);
    batch.adv_reward.segment(ep.start, ep.length) = r.advantages;
    batch.ret_reward.segment(ep.start, ep.length) = r.targets;
    batch.adv_cost.segment(ep.start, ep.length) = c.advantages;
    batch.ret_cost.segment(ep.start, ep.length) = c.targets;
  }
}

Eigen::VectorXd combined_advantages(const RolloutBatch& batch, double multiplier) {
  if (!(multiplier >= 0.0)) throw std::invalid_argument("multiplier must be >= 0");
  const Eigen::Index n = batch.size();
  if (n == 0) return {};
  const double mean = batch.adv_reward.mean();
  const double var = (batch.adv_reward.array() - mean).square().mean();
  const Eigen::VectorXd norm_r = (batch.adv_reward.array() - mean) / (std::sqrt(var) + 1e-8);
  return (norm_r - multiplier * batch.adv_cost) / (1.0 + multiplier);
}

// ---------------------------------------------------------------------------
// Surrogate and updates

Surrogate clipped_surrogate(const GaussianPolicy<double>& policy, const Eigen::MatrixXd& states,
                            const Eigen::MatrixXd& actions, const Eigen::VectorXd& old_log_prob,
                            const Eigen::VectorXd& advantages, double clip_ratio, const BcTerm* bc) {
  const Eigen::Index n = states.cols();
  if (actions.cols() != n || old_log_prob.size() != n || advantages.size() != n)
    throw std::invalid_argument("clipped_surrogate: batch sizes differ");
  if (n == 0) throw std::invalid_argument("clipped_surrogate: empty batch");
  const Eigen::VectorXd log_prob = policy.log_prob_batch(states, actions);
  Eigen::VectorXd weights = Eigen::VectorXd::Zero(n);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double ratio = std::exp(log_prob(i) - old_log_prob(i));
    const double a = advantages(i);
    const double unclipped = ratio * a;
    const double clipped = std::clamp(ratio, 1.0 - clip_ratio, 1.0 + clip_ratio) * a;
    if (unclipped <= clipped) {
      total += unclipped;
      weights(i) = unclipped / static_cast<double>(n);  // d(ratio)/dtheta = ratio * dlogp/dtheta
    } else {
      total += clipped;
    }
  }
  Surrogate out{total / static_cast<double>(n), policy.weighted_log_prob_grad(states, actions, weights)};
  if (!std::isfinite(out.value)) throw std::runtime_error("clipped_surrogate: non-finite objective");
  if (bc != nullptr && bc->coef > 0.0 && bc->states.cols() > 0) {
    const auto m = static_cast<double>(bc->states.cols());
    out.value += bc->coef * policy.log_prob_batch(bc->states, bc->actions).mean();
    out.grad += policy.weighted_log_prob_grad(bc->states, bc->actions,
                                              Eigen::VectorXd::Constant(bc->states.cols(), bc->coef / m));
  }
  return out;
}

OptimizerState OptimizerState::for_nets(const Checkpoint& nets, double learning_rate) {
  return {Adam<double>(nets.policy.num_params(), learning_rate),
          Adam<double>(nets.value_reward.num_params(), learning_rate),
          Adam<double>(nets.value_cost.num_params(), learning_rate)};
}

namespace {

Eigen::MatrixXd gather_cols(const Eigen::MatrixXd& m, std::span<const Eigen::Index> idx) {
  Eigen::MatrixXd out(m.rows(), static_cast<Eigen::Index>(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = m.col(idx[j]);
  return out;
}

Eigen::VectorXd gather(const Eigen::VectorXd& v, std::span<const Eigen::Index> idx) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t j = 0; j < idx.size(); ++j) out(static_cast<Eigen::Index>(j)) = v(idx[j]);
  return out;
}

double regress_value(Mlp<double>& net, Adam<double>& adam, const Eigen::MatrixXd& states,
                     const Eigen::VectorXd& targets) {
  Mlp<double>::Tape tape;
  const Eigen::MatrixXd v = net.forward(states, tape);
  const Eigen::RowVectorXd err = v.row(0) - targets.transpose();
  const double loss = err.squaredNorm() / static_cast<double>(err.size());
  const Eigen::MatrixXd d_out = (2.0 / static_cast<double>(err.size())) * err;
  Eigen::VectorXd params = net.flatten();
  adam.step(params, net.backward(tape, d_out));
  net.unflatten(params);
  return loss;
}

}  // namespace

UpdateStats ppo_lagrangian_update(const RolloutBatch& batch, Checkpoint& nets, OptimizerState& optim,
                                  double multiplier, const TrainerConfig& config, const DemoPairs* bc_pairs,
                                  std::mt19937_64& rng) {
  const Eigen::Index n = batch.size();
  UpdateStats stats;
  if (n == 0) return stats;
  if (batch.adv_reward.size() != n || batch.ret_cost.size() != n)
    throw std::invalid_argument("ppo_lagrangian_update: batch is missing advantages");

  const bool use_bc = config.ablation_mode == AblationMode::bc_loglik && config.expert_mode == ExpertMode::agent;
  if (use_bc && (bc_pairs == nullptr || bc_pairs->states.rows() == 0))
    throw std::invalid_argument("bc_loglik ablation requires reward-expert state-action pairs");
  Eigen::MatrixXd bc_states_t, bc_actions_t;
  if (use_bc) {
    bc_states_t = bc_pairs->states.transpose();
    bc_actions_t = bc_pairs->actions.transpose();
  }

  const Eigen::VectorXd adv = combined_advantages(batch, multiplier);
  const GaussianPolicy<double> old_policy = nets.policy;
  const Eigen::Index mb = std::min<Eigen::Index>(config.minibatch_size, n);
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));

  bool stop = false;
  for (int epoch = 0; epoch < config.epochs_per_batch && !stop; ++epoch) {
    std::iota(perm.begin(), perm.end(), Eigen::Index{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    for (Eigen::Index start = 0; start < n && !stop; start += mb) {
      const auto len = std::min(mb, n - start);
      const std::span<const Eigen::Index> idx(perm.data() + start, static_cast<std::size_t>(len));
      BcTerm bc;
      if (use_bc) {
        const auto m = std::min<Eigen::Index>(mb, bc_states_t.cols());
        std::vector<Eigen::Index> pick(static_cast<std::size_t>(m));
        std::uniform_int_distribution<Eigen::Index> u(0, bc_states_t.cols() - 1);
        for (auto& p : pick) p = u(rng);
        bc = {gather_cols(bc_states_t, pick), gather_cols(bc_actions_t, pick), config.bc_coef};
      }
      const Surrogate sur = clipped_surrogate(nets.policy, gather_cols(batch.states, idx),
                                              gather_cols(batch.actions, idx), gather(batch.log_prob, idx),
                                              gather(adv, idx), config.clip_ratio, use_bc ? &bc : nullptr);
      const GaussianPolicy<double> before = nets.policy;
      const Adam<double> adam_before = optim.policy;
      Eigen::VectorXd params = nets.policy.flatten();
      optim.policy.step(params, -sur.grad);
      nets.policy.unflatten(params);
      nets.policy.clamp_log_std();
      if (!nets.policy.all_finite()) throw std::runtime_error("policy parameters became non-finite");

      const double kl = mean_kl(nets.policy, old_policy, batch.states);
      if (!std::isfinite(kl)) throw std::runtime_error("non-finite KL during policy update");
      if (kl > 2.0 * config.max_kl) {
        nets.policy = before;
        optim.policy = adam_before;
        stats.early_stopped = true;
        stop = true;
        break;
      }
      stats.kl = kl;
      stats.surrogate = sur.value;
      ++stats.policy_steps;
      if (kl > config.max_kl) {
        stats.early_stopped = true;
        stop = true;
      }
    }
  }

  for (int epoch = 0; epoch < config.value_epochs; ++epoch) {
    std::iota(perm.begin(), perm.end(), Eigen::Index{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    double loss_r = 0.0, loss_c = 0.0;
    int count = 0;
    for (Eigen::Index start = 0; start < n; start += mb) {
      const auto len = std::min(mb, n - start);
      const std::span<const Eigen::Index> idx(perm.data() + start, static_cast<std::size_t>(len));
      const Eigen::MatrixXd s = gather_cols(batch.states, idx);
      loss_r += regress_value(nets.value_reward, optim.value_reward, s, gather(batch.ret_reward, idx));
      loss_c += regress_value(nets.value_cost, optim.value_cost, s, gather(batch.ret_cost, idx));
      ++count;
    }
    stats.value_loss_reward = loss_r / count;
    stats.value_loss_cost = loss_c / count;
  }
  if (!std::isfinite(stats.value_loss_reward) || !std::isfinite(stats.value_loss_cost))
    throw std::runtime_error("NaN in value loss");
  return stats;
}

double mean_episode_cost_return(const RolloutBatch& batch, double gamma) {
  if (batch.episodes.empty()) throw std::invalid_argument("mean_episode_cost_return: batch has no episodes");
  double sum = 0.0;
  for (const auto& ep : batch.episodes)
    sum += discounted_sum(batch.shaped_cost.segment(ep.start, ep.length), gamma);
  return sum / static_cast<double>(batch.episodes.size());
}

LagrangeState lagrange_update(const LagrangeState& state, const RolloutBatch& batch, const CmdpSpec& spec,
                              const TrainerConfig& config) {
  const double c_hat = mean_episode_cost_return(batch, spec.gamma);
  const double gap = c_hat - constraint_limit(spec);
  LagrangeState next;
  next.multiplier = std::max(0.0, state.multiplier + config.lagrange_lr * gap);
  next.running_cost = 0.9 * state.running_cost + 0.1 * c_hat;
  return next;
}

// ---------------------------------------------------------------------------
// Metrics log

std::string render_metrics_csv(const std::vector<BatchMetrics>& rows) {
  std::ostringstream out;
  out << kMetricsHeader << '\n';
  for (const auto& r : rows) {
    out << r.batch << ',' << r.steps << ',' << format_double(r.avg_reward_return) << ','
        << format_double(r.avg_cost_return) << ',' << format_double(r.cost_rate) << ',' << r.cv << ',' << r.total_cv
        << ',' << format_double(r.multiplier) << ',' << format_double(r.kl) << ',' << format_double(r.cor_mean)
        << '\n';
  }
  return out.str();
}

void write_metrics_csv(const std::filesystem::path& path, const std::vector<BatchMetrics>& rows) {
  write_text_file(path, render_metrics_csv(rows));
}

std::vector<BatchMetrics> read_metrics_csv(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  auto fail = [&](const std::string& what) {
    throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " + what);
  };
  if (!std::getline(in, line)) {
    line_no = 1;
    fail("missing header");
  }
  ++line_no;
  if (line != kMetricsHeader) fail("unexpected header '" + line + "'");
  std::vector<BatchMetrics> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 10) fail("expected 10 fields, found " + std::to_string(f.size()));
    try {
      BatchMetrics r;
      r.batch = parse_int(f[0]);
      r.steps = parse_int(f[1]);
      r.avg_reward_return = parse_double(f[2]);
      r.avg_cost_return = parse_double(f[3]);
      r.cost_rate = parse_double(f[4]);
      r.cv = parse_int(f[5]);
      r.total_cv = parse_int(f[6]);
      r.multiplier = parse_double(f[7]);
      r.kl = parse_double(f[8]);
      r.cor_mean = parse_double(f[9]);
      rows.push_back(r);
    } catch (const std::invalid_argument& e) {
      fail(e.what());
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Training loop

TrainResult train(const TrainerConfig& config, const Environment& env, const TrainInputs& inputs) {
  config.validate();
  CmdpSpec spec = env.spec();
  spec.gamma = config.gamma;
  if (config.expert_mode == ExpertMode::safe_expert) spec.threshold_d = config.safe_expert_d;
  spec.validate();

  const CorChannels channels = config.cor_channels();
  const CorModel* cor_model = config.expert_mode == ExpertMode::agent ? inputs.cor_model : nullptr;
  if ((channels.reward || channels.cost) && cor_model == nullptr)
    throw std::invalid_argument("ablation mode " + to_string(config.ablation_mode) +
                                " requires reward- and safe-expert demonstration sets");
  const bool use_bc = config.ablation_mode == AblationMode::bc_loglik && config.expert_mode == ExpertMode::agent;
  if (use_bc) {
    if (inputs.bc_pairs == nullptr) throw std::invalid_argument("bc_loglik requires reward-expert state-action pairs");
    if (inputs.bc_pairs->states.cols() != spec.obs_dim || inputs.bc_pairs->actions.cols() != spec.act_dim)
      throw std::invalid_argument("bc pair dimensions do not match the environment");
  }

  TrainResult result{make_checkpoint(spec.obs_dim, spec.act_dim, config.hidden_dim, config.log_std_init,
                                     derive_seed(config.seed, 0x1d17)),
                     {},
                     {config.expert_mode == ExpertMode::reward_expert ? 0.0 : config.lagrange_init, 0.0}};
  OptimizerState optim = OptimizerState::for_nets(result.nets, config.learning_rate);
  std::mt19937_64 update_rng(derive_seed(config.seed, 0x0b0b));

  long long steps = 0;
  long long total_cv = 0;
  for (long long b = 0; steps < config.total_steps; ++b) {
    try {
      const RolloutRequest request{config.steps_per_batch, derive_seed(config.seed, 1, static_cast<std::uint64_t>(b)),
                                   derive_seed(config.seed, 2, static_cast<std::uint64_t>(b)), config.workers};
      const RolloutBatch batch = collect_rollouts(result.nets, env, request, cor_model, channels, config);
      if (config.expert_mode != ExpertMode::reward_expert)
        result.lagrange = lagrange_update(result.lagrange, batch, spec, config);
      const UpdateStats stats = ppo_lagrangian_update(batch, result.nets, optim, result.lagrange.multiplier, config,
                                                      use_bc ? inputs.bc_pairs : nullptr, update_rng);

      BatchMetrics row;
      row.batch = b;
      steps += batch.size();
      row.steps = steps;
      const auto episodes = static_cast<double>(batch.episodes.size());
      row.avg_reward_return = batch.reward.sum() / episodes;
      row.avg_cost_return = batch.cost.sum() / episodes;
      row.cost_rate = batch.cost.mean();
      row.cv = batch.cv();
      total_cv += row.cv;
      row.total_cv = total_cv;
      row.multiplier = result.lagrange.multiplier;
      row.kl = stats.kl;
      row.cor_mean = batch.has_cor ? batch.cor.mean() : 0.0;
      result.metrics.push_back(row);
      if (inputs.on_batch) inputs.on_batch(row);
    } catch (const std::exception& e) {
      throw std::runtime_error("training batch " + std::to_string(b) + ": " + e.what());
    }
  }

  if (inputs.out_dir) {
    write_metrics_csv(*inputs.out_dir / "metrics.csv", result.metrics);
    write_checkpoint(*inputs.out_dir / "checkpoint.txt", result.nets);
  }
  return result;
}

}  // namespace safecor

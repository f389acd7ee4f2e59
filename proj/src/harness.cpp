#include "safecor/harness.hpp"

#include "safecor/text_io.hpp"

#include <algorithm>
#include <iostream>
#include <sstream>

namespace safecor {

double score(double reward, double cost, const ScoreParams& params) { return reward - params.l_c * cost; }

// ---------------------------------------------------------------------------
// Evaluation

Evaluation evaluate(const Checkpoint& ckpt, const Environment& env, int n_episodes,
                    std::span<const std::uint64_t> seeds, const ScoreParams& score_params, double total_cv) {
  if (ckpt.obs_dim() != env.obs_dim() || ckpt.act_dim() != env.act_dim())
    throw std::invalid_argument("evaluate: checkpoint expects obs_dim=" + std::to_string(ckpt.obs_dim()) +
                                " act_dim=" + std::to_string(ckpt.act_dim()) + " but environment has obs_dim=" +
                                std::to_string(env.obs_dim()) + " act_dim=" + std::to_string(env.act_dim()));
  if (n_episodes < 1) throw std::invalid_argument("evaluate: n_episodes must be >= 1");
  if (seeds.empty()) throw std::invalid_argument("evaluate: no seeds given");

  Evaluation out;
  auto local = env.clone();
  for (const std::uint64_t seed : seeds) {
    for (int e = 0; e < n_episodes; ++e) {
      StateVec s = local->reset(derive_seed(seed, 0xe7a1, static_cast<std::uint64_t>(e)));
      double reward = 0.0, cost = 0.0;
      long long steps = 0, cv = 0;
      while (true) {
        StepOutcome o = local->step(ckpt.policy.forward(s).mean);
        reward += o.record.reward;
        cost += o.record.cost;
        cv += o.record.cost > 0.0 ? 1 : 0;
        ++steps;
        s = std::move(o.next_state);
        if (o.record.terminal || o.record.truncated) break;
      }
      EpisodeRow row{seed, e, {}};
      row.metrics.reward_return = reward;
      row.metrics.cost_return = cost;
      row.metrics.cv = static_cast<double>(cv);
      row.metrics.total_cv = total_cv;
      row.metrics.cost_rate = cost / static_cast<double>(steps);
      row.metrics.score = score(reward, cost, score_params);
      out.episodes.push_back(row);
    }
  }
  const auto n = static_cast<double>(out.episodes.size());
  for (const auto& r : out.episodes) {
    out.aggregate.reward_return += r.metrics.reward_return / n;
    out.aggregate.cost_return += r.metrics.cost_return / n;
    out.aggregate.cv += r.metrics.cv / n;
    out.aggregate.cost_rate += r.metrics.cost_rate / n;
    out.aggregate.score += r.metrics.score / n;
  }
  out.aggregate.total_cv = total_cv;
  return out;
}

std::string render_episode_table(const Evaluation& eval) {
  std::ostringstream out;
  out << kEpisodeTableHeader << '\n';
  for (const auto& r : eval.episodes) {
    const auto& m = r.metrics;
    out << r.seed << ',' << r.episode << ',' << format_double(m.reward_return) << ',' << format_double(m.cost_return)
        << ',' << format_double(m.cv) << ',' << format_double(m.cost_rate) << ',' << format_double(m.score) << ','
        << format_double(m.total_cv) << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Demonstrations

Demonstrations generate_demos(const Checkpoint& expert, const Environment& env, int episodes, std::uint64_t seed,
                              DemoLabel label, std::size_t max_states) {
  if (episodes < 1) throw std::invalid_argument("generate_demos: episodes must be >= 1");
  auto local = env.clone();
  std::vector<Trajectory> trajectories;
  for (int e = 0; e < episodes; ++e) {
    Trajectory traj;
    traj.seed = derive_seed(seed, 0xde40, static_cast<std::uint64_t>(e));
    StateVec s = local->reset(traj.seed);
    while (true) {
      StepOutcome o = local->step(expert.policy.forward(s).mean);
      const bool done = o.record.terminal || o.record.truncated;
      traj.steps.push_back(std::move(o.record));
      s = std::move(o.next_state);
      if (done) break;
    }
    traj.final_state = s;
    trajectories.push_back(std::move(traj));
  }
  DemoSet states = build_demo_set(trajectories, label, max_states, derive_seed(seed, 0x5ab));

  long long total = 0;
  for (const auto& t : trajectories) total += static_cast<long long>(t.steps.size());
  DemoPairs pairs{Eigen::MatrixXd(total, env.obs_dim()), Eigen::MatrixXd(total, env.act_dim())};
  Eigen::Index row = 0;
  for (const auto& t : trajectories) {
    for (const auto& step : t.steps) {
      pairs.states.row(row) = step.state.transpose();
      pairs.actions.row(row) = expert.policy.forward(step.state).mean.transpose();
      ++row;
    }
  }
  if (pairs.states.rows() > static_cast<Eigen::Index>(max_states)) {
    pairs.states.conservativeResize(static_cast<Eigen::Index>(max_states), Eigen::NoChange);
    pairs.actions.conservativeResize(static_cast<Eigen::Index>(max_states), Eigen::NoChange);
  }
  return {std::move(states), std::move(pairs)};
}

// ---------------------------------------------------------------------------
// Comparison tables

const std::vector<Variant>& pipeline_variants() {
  static const std::vector<Variant> v{{"baseline", AblationMode::off}, {"safecor", AblationMode::both}};
  return v;
}

const std::vector<Variant>& ablation_variants() {
  static const std::vector<Variant> v{{"baseline", AblationMode::off},
                                      {"rew_only", AblationMode::rew_only},
                                      {"cost_only", AblationMode::cost_only},
                                      {"both", AblationMode::both},
                                      {"bc_loglik", AblationMode::bc_loglik}};
  return v;
}

std::string render_comparison_csv(const std::vector<ComparisonRow>& rows) {
  std::ostringstream out;
  out << kComparisonHeader << '\n';
  for (const auto& r : rows) {
    const auto& m = r.metrics;
    out << r.variant << ',' << r.seed << ',' << format_double(m.reward_return) << ',' << format_double(m.cost_return)
        << ',' << format_double(m.cv) << ',' << format_double(m.cost_rate) << ',' << format_double(m.score) << ','
        << format_double(m.total_cv) << '\n';
  }
  return out.str();
}

std::vector<ComparisonRow> read_comparison_csv(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  std::string line;
  int line_no = 1;
  if (!std::getline(in, line) || line != kComparisonHeader)
    throw std::runtime_error(path.string() + ":1: unexpected header");
  std::vector<ComparisonRow> rows;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 8)
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": expected 8 fields");
    try {
      ComparisonRow r{f[0], f[1], {}};
      r.metrics.reward_return = parse_double(f[2]);
      r.metrics.cost_return = parse_double(f[3]);
      r.metrics.cv = parse_double(f[4]);
      r.metrics.cost_rate = parse_double(f[5]);
      r.metrics.score = parse_double(f[6]);
      r.metrics.total_cv = parse_double(f[7]);
      rows.push_back(r);
    } catch (const std::invalid_argument& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return rows;
}

std::vector<ComparisonRow> median_rows(const std::vector<ComparisonRow>& rows, const std::vector<Variant>& variants) {
  auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  };
  std::vector<ComparisonRow> out;
  for (const auto& variant : variants) {
    std::vector<MetricsRow> ms;
    for (const auto& r : rows)
      if (r.variant == variant.name && r.seed != "median") ms.push_back(r.metrics);
    if (ms.empty()) continue;
    auto col = [&](double MetricsRow::*field) {
      std::vector<double> v;
      for (const auto& m : ms) v.push_back(m.*field);
      return median(v);
    };
    ComparisonRow row{variant.name, "median", {}};
    row.metrics.reward_return = col(&MetricsRow::reward_return);
    row.metrics.cost_return = col(&MetricsRow::cost_return);
    row.metrics.cv = col(&MetricsRow::cv);
    row.metrics.cost_rate = col(&MetricsRow::cost_rate);
    row.metrics.score = col(&MetricsRow::score);
    row.metrics.total_cv = col(&MetricsRow::total_cv);
    out.push_back(row);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pipeline stages

namespace {

bool stage_done(const std::filesystem::path& dir) {
  return std::filesystem::exists(dir / "checkpoint.txt") && std::filesystem::exists(dir / "metrics.csv");
}

template <typename Fn>
auto run_stage(const std::string& name, Fn&& fn) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

void log_stage(const std::string& msg) { std::clog << "[safecor] " << msg << std::endl; }

}  // namespace

void train_experts(const RunConfig& config, const ArtifactLayout& layout) {
  run_stage("experts", [&] {
    const auto env = config.make_env();
    for (auto mode : {ExpertMode::reward_expert, ExpertMode::safe_expert}) {
      const auto dir = layout.expert_dir(to_string(mode));
      if (stage_done(dir)) {
        log_stage("experts: reusing " + dir.string());
        continue;
      }
      TrainerConfig t = config.trainer_for_seed(config.seeds.front());
      t.expert_mode = mode;
      t.ablation_mode = AblationMode::off;
      t.total_steps = config.resolved_expert_steps();
      log_stage("experts: training " + to_string(mode));
      TrainInputs inputs;
      inputs.out_dir = dir;
      train(t, *env, inputs);
    }
  });
}

void write_demos(const RunConfig& config, const ArtifactLayout& layout) {
  run_stage("demos", [&] {
    const auto env = config.make_env();
    const auto max_states = static_cast<std::size_t>(config.demo_max_states);
    const std::uint64_t seed = config.seeds.front();
    if (!std::filesystem::exists(layout.reward_demo()) || !std::filesystem::exists(layout.reward_pairs())) {
      const auto expert = read_checkpoint(layout.expert_dir("reward_expert") / "checkpoint.txt");
      const auto demos = generate_demos(expert, *env, config.demo_episodes, derive_seed(seed, 1), DemoLabel::reward_expert,
                                        max_states);
      write_demo_file(layout.reward_demo(), demos.states);
      write_demo_pairs(layout.reward_pairs(), demos.pairs, "reward_expert_pairs");
    }
    if (!std::filesystem::exists(layout.safe_demo())) {
      const auto expert = read_checkpoint(layout.expert_dir("safe_expert") / "checkpoint.txt");
      const auto demos = generate_demos(expert, *env, config.demo_episodes, derive_seed(seed, 2), DemoLabel::safe_expert,
                                        max_states);
      write_demo_file(layout.safe_demo(), demos.states);
    }
  });
}

CorModel load_cor_model(const RunConfig& config, const std::filesystem::path& reward_path,
                        const std::filesystem::path& safe_path) {
  return CorModel(read_demo_file(reward_path), read_demo_file(safe_path), config.trainer.cor, config.cor_feature_mask,
                  config.cor_standardize);
}

std::vector<ComparisonRow> train_and_evaluate(const RunConfig& config, const ArtifactLayout& layout,
                                              const std::vector<Variant>& variants) {
  const auto env = config.make_env();
  const CorModel model = run_stage("agents", [&] { return load_cor_model(config, layout.reward_demo(), layout.safe_demo()); });
  const DemoPairs pairs = run_stage("agents", [&] { return read_demo_pairs(layout.reward_pairs(), env->obs_dim()); });

  for (const auto& variant : variants) {
    for (const auto seed : config.seeds) {
      const auto dir = layout.agent_dir(variant.name, seed);
      if (stage_done(dir)) continue;
      run_stage("agents", [&] {
        TrainerConfig t = config.trainer_for_seed(seed);
        t.expert_mode = ExpertMode::agent;
        t.ablation_mode = variant.mode;
        log_stage("agents: training " + variant.name + " seed " + std::to_string(seed));
        TrainInputs inputs;
        inputs.cor_model = &model;
        inputs.bc_pairs = &pairs;
        inputs.out_dir = dir;
        train(t, *env, inputs);
      });
    }
  }

  return run_stage("eval", [&] {
    std::vector<ComparisonRow> rows;
    for (const auto& variant : variants) {
      for (const auto seed : config.seeds) {
        const auto dir = layout.agent_dir(variant.name, seed);
        const auto ckpt = read_checkpoint(dir / "checkpoint.txt");
        const auto log = read_metrics_csv(dir / "metrics.csv");
        const double total_cv = log.empty() ? 0.0 : static_cast<double>(log.back().total_cv);
        const std::uint64_t seeds[] = {seed};
        const Evaluation eval = evaluate(ckpt, *env, config.eval_episodes, seeds, config.score, total_cv);
        write_text_file(layout.eval_table(variant.name, seed), render_episode_table(eval));
        rows.push_back({variant.name, std::to_string(seed), eval.aggregate});
      }
    }
    return rows;
  });
}

std::filesystem::path run_pipeline(const RunConfig& config) {
  const ArtifactLayout layout{config.out_dir};
  write_text_file(layout.root / "config.json", render_run_config(config));
  train_experts(config, layout);
  write_demos(config, layout);
  const auto rows = train_and_evaluate(config, layout, pipeline_variants());
  write_text_file(layout.root / "comparison.csv", render_comparison_csv(rows));
  return layout.root;
}

std::filesystem::path ablation_grid(const RunConfig& config) {
  const ArtifactLayout layout{config.out_dir};
  write_text_file(layout.root / "config.json", render_run_config(config));
  train_experts(config, layout);
  write_demos(config, layout);
  auto rows = train_and_evaluate(config, layout, ablation_variants());
  const auto medians = median_rows(rows, ablation_variants());
  rows.insert(rows.end(), medians.begin(), medians.end());
  const auto path = layout.root / "ablation.csv";
  write_text_file(path, render_comparison_csv(rows));
  return path;
}

}  // namespace safecor

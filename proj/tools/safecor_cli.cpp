// Command-line front end: train, gen-demos, eval, pipeline, ablate, plot.
// Exit codes: 0 success, 1 configuration error, 2 runtime failure.

#include "safecor/config.hpp"
#include "safecor/harness.hpp"
#include "safecor/text_io.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>

namespace {

struct CommonOptions {
  std::string config_path;
  std::optional<long long> seed;
  std::string out;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("--config", opts.config_path, "flat JSON run configuration");
  cmd->add_option("--seed", opts.seed, "seed (defaults to the first entry of 'seeds')");
  cmd->add_option("--out", opts.out, "output directory");
  cmd->add_option("--override", opts.overrides, "key=value config override (dot paths), repeatable");
}

safecor::RunConfig load(const CommonOptions& opts) {
  std::optional<std::filesystem::path> path;
  if (!opts.config_path.empty()) path = opts.config_path;
  auto overrides = opts.overrides;
  if (!opts.out.empty()) overrides.push_back("out_dir=\"" + opts.out + "\"");
  return safecor::load_run_config(path, overrides);
}

std::uint64_t pick_seed(const CommonOptions& opts, const safecor::RunConfig& config) {
  if (opts.seed) {
    if (*opts.seed < 0) throw safecor::ConfigError("--seed must be non-negative");
    return static_cast<std::uint64_t>(*opts.seed);
  }
  return config.seeds.front();
}

void print_metrics(const safecor::MetricsRow& m) {
  std::cout << "reward_return=" << safecor::format_double(m.reward_return)
            << " cost_return=" << safecor::format_double(m.cost_return) << " cv=" << safecor::format_double(m.cv)
            << " cost_rate=" << safecor::format_double(m.cost_rate) << " score=" << safecor::format_double(m.score)
            << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Constraint-reward shaped safe reinforcement learning"};
  app.require_subcommand(1);

  CommonOptions train_opts, demo_opts, eval_opts, pipe_opts, ablate_opts, plot_opts;
  auto* train_cmd = app.add_subcommand("train", "train one agent (or expert) from a config");
  add_common(train_cmd, train_opts);

  auto* demo_cmd = app.add_subcommand("gen-demos", "roll an expert checkpoint and write demonstration files");
  add_common(demo_cmd, demo_opts);
  std::string demo_checkpoint, demo_label = "reward_expert";
  demo_cmd->add_option("--checkpoint", demo_checkpoint, "expert checkpoint")->required();
  demo_cmd->add_option("--label", demo_label, "reward_expert | safe_expert")
      ->check(CLI::IsMember({"reward_expert", "safe_expert"}));

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint with the deterministic policy");
  add_common(eval_cmd, eval_opts);
  std::string eval_checkpoint;
  eval_cmd->add_option("--checkpoint", eval_checkpoint, "checkpoint to evaluate")->required();

  auto* pipe_cmd = app.add_subcommand("pipeline", "experts -> demos -> baseline and CoR agents -> comparison.csv");
  add_common(pipe_cmd, pipe_opts);

  auto* ablate_cmd = app.add_subcommand("ablate", "experts -> demos -> ablation variants -> ablation.csv");
  add_common(ablate_cmd, ablate_opts);

  auto* plot_cmd = app.add_subcommand("plot", "render SVG learning curves from metrics CSVs");
  add_common(plot_cmd, plot_opts);
  std::vector<std::string> plot_series;
  plot_cmd->add_option("--metrics", plot_series, "name=path of a metrics.csv, repeatable")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*train_cmd) {
      const auto config = load(train_opts);
      const auto seed = pick_seed(train_opts, config);
      const auto env = config.make_env();
      auto trainer = config.trainer_for_seed(seed);
      std::optional<safecor::CorModel> model;
      std::optional<safecor::DemoPairs> pairs;
      if (!config.reward_demo_path.empty() && !config.safe_demo_path.empty())
        model.emplace(safecor::load_cor_model(config, config.reward_demo_path, config.safe_demo_path));
      if (!config.reward_pairs_path.empty())
        pairs = safecor::read_demo_pairs(config.reward_pairs_path, env->obs_dim());
      if (trainer.uses_cor() && trainer.expert_mode == safecor::ExpertMode::agent && !model)
        throw safecor::ConfigError("ablation mode " + safecor::to_string(trainer.ablation_mode) +
                                   " needs demos.reward_path and demos.safe_path");
      if (trainer.ablation_mode == safecor::AblationMode::bc_loglik && !pairs)
        throw safecor::ConfigError("bc_loglik needs demos.reward_pairs_path");
      safecor::TrainInputs inputs;
      inputs.cor_model = model ? &*model : nullptr;
      inputs.bc_pairs = pairs ? &*pairs : nullptr;
      inputs.out_dir = std::filesystem::path(config.out_dir);
      inputs.on_batch = [](const safecor::BatchMetrics& m) {
        std::clog << "batch " << m.batch << " steps " << m.steps << " reward " << m.avg_reward_return << " cost "
                  << m.avg_cost_return << " total_cv " << m.total_cv << " multiplier " << m.multiplier << '\n';
      };
      safecor::write_text_file(std::filesystem::path(config.out_dir) / "config.json",
                               safecor::render_run_config(config));
      safecor::train(trainer, *env, inputs);
      std::cout << config.out_dir << '\n';
    } else if (*demo_cmd) {
      const auto config = load(demo_opts);
      const auto seed = pick_seed(demo_opts, config);
      const auto env = config.make_env();
      const auto expert = safecor::read_checkpoint(demo_checkpoint);
      const auto label = safecor::demo_label_from_string(demo_label);
      const auto demos = safecor::generate_demos(expert, *env, config.demo_episodes, seed, label,
                                                 static_cast<std::size_t>(config.demo_max_states));
      const std::filesystem::path out = config.out_dir;
      safecor::write_demo_file(out / (demo_label + ".demo"), demos.states);
      if (label == safecor::DemoLabel::reward_expert)
        safecor::write_demo_pairs(out / "reward_expert_pairs.demo", demos.pairs, "reward_expert_pairs");
      std::cout << (out / (demo_label + ".demo")).string() << '\n';
    } else if (*eval_cmd) {
      const auto config = load(eval_opts);
      const auto env = config.make_env();
      const auto ckpt = safecor::read_checkpoint(eval_checkpoint);
      std::vector<std::uint64_t> seeds = config.seeds;
      if (eval_opts.seed) seeds = {pick_seed(eval_opts, config)};
      const auto eval = safecor::evaluate(ckpt, *env, config.eval_episodes, seeds, config.score);
      safecor::write_text_file(std::filesystem::path(config.out_dir) / "eval.csv", safecor::render_episode_table(eval));
      print_metrics(eval.aggregate);
    } else if (*pipe_cmd) {
      const auto config = load(pipe_opts);
      std::cout << safecor::run_pipeline(config).string() << '\n';
    } else if (*ablate_cmd) {
      const auto config = load(ablate_opts);
      std::cout << safecor::ablation_grid(config).string() << '\n';
    } else if (*plot_cmd) {
      const auto config = load(plot_opts);
      std::vector<std::pair<std::string, std::filesystem::path>> series;
      for (const auto& s : plot_series) {
        const auto eq = s.find('=');
        if (eq == std::string::npos || eq == 0) throw safecor::ConfigError("--metrics expects name=path, got '" + s + "'");
        series.emplace_back(s.substr(0, eq), s.substr(eq + 1));
      }
      const double d = config.env == safecor::EnvKind::pointgoal ? config.pointgoal.threshold_d : config.chain.threshold_d;
      for (const auto& p : safecor::emit_plots(series, d, config.out_dir)) std::cout << p.string() << '\n';
    }
  } catch (const safecor::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

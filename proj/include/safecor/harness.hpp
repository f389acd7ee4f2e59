#ifndef SAFECOR_HARNESS_HPP
#define SAFECOR_HARNESS_HPP

#include "safecor/config.hpp"
#include "safecor/cor.hpp"
#include "safecor/envs.hpp"
#include "safecor/policy_net.hpp"
#include "safecor/trainer.hpp"

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace safecor {

/// Driving-style score: reward - l_c * cost.
double score(double reward, double cost, const ScoreParams& params);

/// One evaluation record. Episode costs are undiscounted per-episode sums.
struct MetricsRow {
  double reward_return = 0.0;
  double cost_return = 0.0;
  double cv = 0.0;
  double total_cv = 0.0;
  double cost_rate = 0.0;
  double score = 0.0;
};

struct EpisodeRow {
  std::uint64_t seed = 0;
  int episode = 0;
  MetricsRow metrics;
};

struct Evaluation {
  MetricsRow aggregate;
  std::vector<EpisodeRow> episodes;
};

/// Runs the deterministic (mean-action) policy for n_episodes per seed.
/// `total_cv` is copied into every row; it is a training-time quantity.
Evaluation evaluate(const Checkpoint& ckpt, const Environment& env, int n_episodes,
                    std::span<const std::uint64_t> seeds, const ScoreParams& score_params, double total_cv = 0.0);

inline constexpr const char* kEpisodeTableHeader =
    "seed,episode,reward_return,cost_return,cv,cost_rate,score,total_cv";
std::string render_episode_table(const Evaluation& eval);

/// Rolls the expert's mean action for `episodes` episodes and collects demonstrations.
struct Demonstrations {
  DemoSet states;
  DemoPairs pairs;
};
Demonstrations generate_demos(const Checkpoint& expert, const Environment& env, int episodes, std::uint64_t seed,
                              DemoLabel label, std::size_t max_states);

struct Variant {
  std::string name;
  AblationMode mode;
};
const std::vector<Variant>& pipeline_variants();  // baseline, safecor
const std::vector<Variant>& ablation_variants();  // baseline, rew_only, cost_only, both, bc_loglik

/// One row of a comparison CSV (evaluation metrics plus training Total CV).
struct ComparisonRow {
  std::string variant;
  std::string seed;  // decimal seed or "median"
  MetricsRow metrics;
};

inline constexpr const char* kComparisonHeader = "variant,seed,reward_return,cost_return,cv,cost_rate,score,total_cv";
std::string render_comparison_csv(const std::vector<ComparisonRow>& rows);
std::vector<ComparisonRow> read_comparison_csv(const std::filesystem::path& path);

/// Directory layout shared by the pipeline stages.
struct ArtifactLayout {
  std::filesystem::path root;

  std::filesystem::path expert_dir(const std::string& name) const { return root / "experts" / name; }
  std::filesystem::path reward_demo() const { return root / "demos" / "reward_expert.demo"; }
  std::filesystem::path safe_demo() const { return root / "demos" / "safe_expert.demo"; }
  std::filesystem::path reward_pairs() const { return root / "demos" / "reward_expert_pairs.demo"; }
  std::filesystem::path agent_dir(const std::string& variant, std::uint64_t seed) const {
    return root / "agents" / variant / ("seed_" + std::to_string(seed));
  }
  std::filesystem::path eval_table(const std::string& variant, std::uint64_t seed) const {
    return root / "eval" / (variant + "_seed_" + std::to_string(seed) + ".csv");
  }
};

/// A failing stage; the message names the stage.
class StageError : public std::runtime_error {
 public:
  StageError(const std::string& stage, const std::string& what)
      : std::runtime_error("stage '" + stage + "' failed: " + what), stage_(stage) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

/// Stage 1: trains the reward expert (unconstrained) and the safe expert (tight threshold).
void train_experts(const RunConfig& config, const ArtifactLayout& layout);
/// Stage 2: rolls both experts and writes the demonstration files.
void write_demos(const RunConfig& config, const ArtifactLayout& layout);
/// Loads the CoR model (and the reward-expert pairs) from demo files.
CorModel load_cor_model(const RunConfig& config, const std::filesystem::path& reward_path,
                        const std::filesystem::path& safe_path);

/// Stages 3-4 for the given variants: trains each (variant, seed) agent and evaluates it.
/// Every stage skips work whose output files already exist.
std::vector<ComparisonRow> train_and_evaluate(const RunConfig& config, const ArtifactLayout& layout,
                                              const std::vector<Variant>& variants);

/// Experts -> demos -> baseline and CoR agents -> comparison.csv. Returns the artifact directory.
std::filesystem::path run_pipeline(const RunConfig& config);

/// Experts -> demos -> all ablation variants; writes ablation.csv with per-seed rows and
/// one median row per variant. Returns the CSV path.
std::filesystem::path ablation_grid(const RunConfig& config);

/// Median per variant of each metric, in variant order.
std::vector<ComparisonRow> median_rows(const std::vector<ComparisonRow>& rows, const std::vector<Variant>& variants);

/// Writes reward_return.svg, cost_rate.svg (with a dashed threshold line at `threshold_d`)
/// and total_cv.svg, one series per named metrics CSV. Returns the written paths.
std::vector<std::filesystem::path> emit_plots(const std::vector<std::pair<std::string, std::filesystem::path>>& series,
                                              double threshold_d, const std::filesystem::path& out_dir);

}  // namespace safecor

#endif  // SAFECOR_HARNESS_HPP

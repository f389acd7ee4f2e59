#ifndef SAFECOR_CONFIG_HPP
#define SAFECOR_CONFIG_HPP

#include "safecor/envs.hpp"
#include "safecor/trainer.hpp"

#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace safecor {

/// Invalid configuration: unknown key, wrong type, out-of-range value, missing file.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ScoreParams {
  double l_c = 5.0;
};

enum class EnvKind { pointgoal, chain };

/// Complete experiment configuration. Serialized as a flat JSON object whose keys are
/// dot paths (e.g. "trainer.total_steps"); unknown keys are rejected.
struct RunConfig {
  EnvKind env = EnvKind::pointgoal;
  PointGoalMiniConfig pointgoal;
  ChainCmdpConfig chain;
  double gamma = 0.99;
  TrainerConfig trainer;
  std::vector<int> cor_feature_mask;
  bool cor_standardize = false;
  std::string reward_demo_path;
  std::string safe_demo_path;
  std::string reward_pairs_path;
  int demo_episodes = 10;
  long long demo_max_states = 10000;
  long long expert_total_steps = -1;  // < 0: same as trainer.total_steps
  std::vector<std::uint64_t> seeds{0, 1, 2};
  std::string out_dir = "runs";
  int eval_episodes = 20;
  ScoreParams score;

  std::unique_ptr<Environment> make_env() const;
  /// Trainer settings with gamma and seed filled in.
  TrainerConfig trainer_for_seed(std::uint64_t seed) const;
  long long resolved_expert_steps() const;
  void validate() const;
};

/// Every accepted key, in canonical order.
const std::vector<std::string>& config_keys();

/// Parses a flat JSON document. Relative demo paths resolve against `base_dir`.
RunConfig parse_run_config(const std::string& json_text, const std::filesystem::path& base_dir = {},
                           const std::vector<std::string>& overrides = {});
RunConfig load_run_config(const std::optional<std::filesystem::path>& path,
                          const std::vector<std::string>& overrides = {});

/// Canonical flat JSON (all keys, sorted, 2-space indent, trailing newline).
std::string render_run_config(const RunConfig& config);

}  // namespace safecor

#endif  // SAFECOR_CONFIG_HPP

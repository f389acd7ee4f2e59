#include "safecor/config.hpp"

#include "safecor/text_io.hpp"

#include <json.hpp>

#include <functional>
#include <limits>

namespace safecor {

using nlohmann::json;

namespace {

double as_double(const json& j, const std::string& key) {
  if (!j.is_number()) throw ConfigError("config key '" + key + "' must be a number");
  return j.get<double>();
}

long long as_int(const json& j, const std::string& key) {
  if (j.is_number_integer()) return j.get<long long>();
  if (j.is_number_float()) {
    const double d = j.get<double>();
    if (d == std::floor(d) && std::abs(d) < 9.0e15) return static_cast<long long>(d);
  }
  throw ConfigError("config key '" + key + "' must be an integer");
}

int as_small_int(const json& j, const std::string& key) {
  const long long v = as_int(j, key);
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
    throw ConfigError("config key '" + key + "' is out of range");
  return static_cast<int>(v);
}

bool as_bool(const json& j, const std::string& key) {
  if (!j.is_boolean()) throw ConfigError("config key '" + key + "' must be true or false");
  return j.get<bool>();
}

std::string as_string(const json& j, const std::string& key) {
  if (!j.is_string()) throw ConfigError("config key '" + key + "' must be a string");
  return j.get<std::string>();
}

std::vector<double> as_double_vec(const json& j, const std::string& key) {
  if (!j.is_array()) throw ConfigError("config key '" + key + "' must be an array of numbers");
  std::vector<double> out;
  for (const auto& e : j) out.push_back(as_double(e, key));
  return out;
}

std::vector<int> as_int_vec(const json& j, const std::string& key) {
  if (!j.is_array()) throw ConfigError("config key '" + key + "' must be an array of integers");
  std::vector<int> out;
  for (const auto& e : j) out.push_back(as_small_int(e, key));
  return out;
}

struct Field {
  std::string key;
  std::function<json(const RunConfig&)> get;
  std::function<void(RunConfig&, const json&)> set;
};

#define SAFECOR_DOUBLE(KEY, MEMBER) \
  Field{KEY, [](const RunConfig& c) { return json(c.MEMBER); }, [](RunConfig& c, const json& j) { c.MEMBER = as_double(j, KEY); }}
#define SAFECOR_INT(KEY, MEMBER) \
  Field{KEY, [](const RunConfig& c) { return json(c.MEMBER); }, [](RunConfig& c, const json& j) { c.MEMBER = as_small_int(j, KEY); }}
#define SAFECOR_LONG(KEY, MEMBER) \
  Field{KEY, [](const RunConfig& c) { return json(c.MEMBER); }, [](RunConfig& c, const json& j) { c.MEMBER = as_int(j, KEY); }}
#define SAFECOR_STRING(KEY, MEMBER) \
  Field{KEY, [](const RunConfig& c) { return json(c.MEMBER); }, [](RunConfig& c, const json& j) { c.MEMBER = as_string(j, KEY); }}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      Field{"env", [](const RunConfig& c) { return json(c.env == EnvKind::pointgoal ? "pointgoal" : "chain"); },
            [](RunConfig& c, const json& j) {
              const auto s = as_string(j, "env");
              if (s == "pointgoal") c.env = EnvKind::pointgoal;
              else if (s == "chain") c.env = EnvKind::chain;
              else throw ConfigError("config key 'env' must be \"pointgoal\" or \"chain\", got '" + s + "'");
            }},
      SAFECOR_DOUBLE("gamma", gamma),
      SAFECOR_DOUBLE("env.arena_half_width", pointgoal.arena_half_width),
      SAFECOR_INT("env.n_hazards", pointgoal.n_hazards),
      SAFECOR_DOUBLE("env.hazard_radius", pointgoal.hazard_radius),
      SAFECOR_DOUBLE("env.goal_radius", pointgoal.goal_radius),
      SAFECOR_DOUBLE("env.max_speed", pointgoal.max_speed),
      SAFECOR_DOUBLE("env.dt", pointgoal.dt),
      SAFECOR_DOUBLE("env.goal_bonus", pointgoal.goal_bonus),
      SAFECOR_INT("env.horizon", pointgoal.horizon),
      SAFECOR_DOUBLE("env.threshold_d", pointgoal.threshold_d),
      SAFECOR_INT("chain.n_states", chain.n_states),
      SAFECOR_DOUBLE("chain.slip_prob", chain.slip_prob),
      SAFECOR_INT("chain.horizon", chain.horizon),
      SAFECOR_DOUBLE("chain.threshold_d", chain.threshold_d),
      Field{"chain.rewards", [](const RunConfig& c) { return json(c.chain.rewards); },
            [](RunConfig& c, const json& j) { c.chain.rewards = as_double_vec(j, "chain.rewards"); }},
      Field{"chain.costs", [](const RunConfig& c) { return json(c.chain.costs); },
            [](RunConfig& c, const json& j) { c.chain.costs = as_double_vec(j, "chain.costs"); }},
      SAFECOR_DOUBLE("trainer.gae_lambda", trainer.gae_lambda),
      SAFECOR_DOUBLE("trainer.clip_ratio", trainer.clip_ratio),
      SAFECOR_DOUBLE("trainer.max_kl", trainer.max_kl),
      SAFECOR_DOUBLE("trainer.learning_rate", trainer.learning_rate),
      SAFECOR_DOUBLE("trainer.lagrange_lr", trainer.lagrange_lr),
      SAFECOR_DOUBLE("trainer.lagrange_init", trainer.lagrange_init),
      SAFECOR_INT("trainer.epochs_per_batch", trainer.epochs_per_batch),
      SAFECOR_INT("trainer.value_epochs", trainer.value_epochs),
      SAFECOR_INT("trainer.steps_per_batch", trainer.steps_per_batch),
      SAFECOR_LONG("trainer.total_steps", trainer.total_steps),
      SAFECOR_INT("trainer.minibatch_size", trainer.minibatch_size),
      Field{"trainer.ablation_mode", [](const RunConfig& c) { return json(to_string(c.trainer.ablation_mode)); },
            [](RunConfig& c, const json& j) {
              try {
                c.trainer.ablation_mode = ablation_mode_from_string(as_string(j, "trainer.ablation_mode"));
              } catch (const std::invalid_argument& e) {
                throw ConfigError(e.what());
              }
            }},
      SAFECOR_DOUBLE("trainer.bc_coef", trainer.bc_coef),
      Field{"trainer.expert_mode", [](const RunConfig& c) { return json(to_string(c.trainer.expert_mode)); },
            [](RunConfig& c, const json& j) {
              try {
                c.trainer.expert_mode = expert_mode_from_string(as_string(j, "trainer.expert_mode"));
              } catch (const std::invalid_argument& e) {
                throw ConfigError(e.what());
              }
            }},
      SAFECOR_INT("trainer.hidden_dim", trainer.hidden_dim),
      SAFECOR_DOUBLE("trainer.log_std_init", trainer.log_std_init),
      SAFECOR_DOUBLE("trainer.safe_expert_d", trainer.safe_expert_d),
      SAFECOR_INT("trainer.workers", trainer.workers),
      SAFECOR_DOUBLE("cor.alpha", trainer.cor.alpha),
      SAFECOR_DOUBLE("cor.lambda_r", trainer.cor.lambda_r),
      SAFECOR_DOUBLE("cor.lambda_c", trainer.cor.lambda_c),
      Field{"cor.feature_mask", [](const RunConfig& c) { return json(c.cor_feature_mask); },
            [](RunConfig& c, const json& j) { c.cor_feature_mask = as_int_vec(j, "cor.feature_mask"); }},
      Field{"cor.standardize", [](const RunConfig& c) { return json(c.cor_standardize); },
            [](RunConfig& c, const json& j) { c.cor_standardize = as_bool(j, "cor.standardize"); }},
      SAFECOR_STRING("demos.reward_path", reward_demo_path),
      SAFECOR_STRING("demos.safe_path", safe_demo_path),
      SAFECOR_STRING("demos.reward_pairs_path", reward_pairs_path),
      SAFECOR_INT("demos.episodes", demo_episodes),
      SAFECOR_LONG("demos.max_states", demo_max_states),
      SAFECOR_LONG("pipeline.expert_total_steps", expert_total_steps),
      Field{"seeds", [](const RunConfig& c) { return json(c.seeds); },
            [](RunConfig& c, const json& j) {
              c.seeds.clear();
              for (long long s : [&] {
                     if (!j.is_array()) throw ConfigError("config key 'seeds' must be an array of integers");
                     std::vector<long long> v;
                     for (const auto& e : j) v.push_back(as_int(e, "seeds"));
                     return v;
                   }()) {
                if (s < 0) throw ConfigError("seeds must be non-negative");
                c.seeds.push_back(static_cast<std::uint64_t>(s));
              }
            }},
      SAFECOR_STRING("out_dir", out_dir),
      SAFECOR_INT("eval_episodes", eval_episodes),
      SAFECOR_DOUBLE("score.l_c", score.l_c),
  };
  return table;
}

#undef SAFECOR_DOUBLE
#undef SAFECOR_INT
#undef SAFECOR_LONG
#undef SAFECOR_STRING

const Field& find_field(const std::string& key) {
  for (const auto& f : fields())
    if (f.key == key) return f;
  throw ConfigError("unknown config key '" + key + "'");
}

json parse_override_value(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error&) {
    return json(text);
  }
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> out;
    for (const auto& f : fields()) out.push_back(f.key);
    return out;
  }();
  return keys;
}

std::unique_ptr<Environment> RunConfig::make_env() const {
  if (env == EnvKind::pointgoal) {
    PointGoalMiniConfig c = pointgoal;
    c.gamma = gamma;
    return std::make_unique<PointGoalMini>(c);
  }
  ChainCmdpConfig c = chain;
  c.gamma = gamma;
  return std::make_unique<ChainCmdp>(c);
}

TrainerConfig RunConfig::trainer_for_seed(std::uint64_t seed) const {
  TrainerConfig t = trainer;
  t.gamma = gamma;
  t.seed = seed;
  return t;
}

long long RunConfig::resolved_expert_steps() const {
  return expert_total_steps < 0 ? trainer.total_steps : expert_total_steps;
}

void RunConfig::validate() const {
  try {
    if (seeds.empty()) throw ConfigError("config key 'seeds' must be nonempty");
    if (eval_episodes < 1) throw ConfigError("eval_episodes must be >= 1");
    if (demo_episodes < 1) throw ConfigError("demos.episodes must be >= 1");
    if (demo_max_states < 1) throw ConfigError("demos.max_states must be >= 1");
    if (!(score.l_c >= 0.0)) throw ConfigError("score.l_c must be >= 0");
    if (out_dir.empty()) throw ConfigError("out_dir must be nonempty");
    trainer_for_seed(0).validate();
    const auto env_ptr = make_env();
    for (int m : cor_feature_mask)
      if (m < 0 || m >= env_ptr->obs_dim()) throw ConfigError("cor.feature_mask index " + std::to_string(m) + " out of range");
    for (const auto* p : {&reward_demo_path, &safe_demo_path, &reward_pairs_path})
      if (!p->empty() && !std::filesystem::exists(*p)) throw ConfigError("referenced file does not exist: " + *p);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

RunConfig parse_run_config(const std::string& json_text, const std::filesystem::path& base_dir,
                           const std::vector<std::string>& overrides) {
  json doc;
  try {
    doc = json_text.empty() ? json::object() : json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");

  for (const auto& ov : overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override must look like key=value: '" + ov + "'");
    const std::string key = ov.substr(0, eq);
    find_field(key);
    doc[key] = parse_override_value(ov.substr(eq + 1));
  }

  RunConfig config;
  for (const auto& [key, value] : doc.items()) find_field(key).set(config, value);
  for (auto* p : {&config.reward_demo_path, &config.safe_demo_path, &config.reward_pairs_path})
    if (!p->empty() && std::filesystem::path(*p).is_relative() && !base_dir.empty()) *p = (base_dir / *p).string();
  config.validate();
  return config;
}

RunConfig load_run_config(const std::optional<std::filesystem::path>& path, const std::vector<std::string>& overrides) {
  if (!path) return parse_run_config("", {}, overrides);
  std::string text;
  try {
    text = read_text_file(*path);
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  return parse_run_config(text, path->parent_path(), overrides);
}

std::string render_run_config(const RunConfig& config) {
  json doc = json::object();
  for (const auto& f : fields()) doc[f.key] = f.get(config);
  return doc.dump(2) + "\n";
}

}  // namespace safecor

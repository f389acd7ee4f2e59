// Acceptance run: one PASS/FAIL line per criterion, exit status 0 only when all pass.
//   acceptance --out <dir> [--only 1,2,...]

#include "safecor/harness.hpp"
#include "safecor/text_io.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>

using namespace safecor;

namespace {

// ---------------------------------------------------------------------------
// Shared helpers and oracles

Eigen::VectorXd random_vector(Eigen::Index n, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Eigen::VectorXd v(n);
  for (auto& x : v) x = normal(rng);
  return v;
}

Eigen::MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double scale = 1.0,
                              double shift = 0.0) {
  Eigen::MatrixXd m(r, c);
  m.reshaped() = random_vector(r * c, rng, scale).array() + shift;
  return m;
}

double rel_err(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double scale = std::max({a.norm(), b.norm(), 1e-8});
  return (a - b).norm() / scale;
}

// kernel straight from the definition, with pow
double kernel(double delta, double alpha) { return std::pow(1.0 + delta / alpha, -(alpha + 1.0) / 2.0); }
double cor_oracle(double da, double db, double alpha) {
  return kernel(da, alpha) / (kernel(da, alpha) + kernel(db, alpha));
}

double brute_distance(const Eigen::VectorXd& s, const Eigen::MatrixXd& rows) {
  double acc = 0.0;
  for (Eigen::Index r = 0; r < rows.rows(); ++r) acc += (s - rows.row(r).transpose()).squaredNorm();
  return std::sqrt(acc / static_cast<double>(rows.rows()));
}

bool near_kink(const Mlp<double>& net, const Eigen::MatrixXd& x, double margin = 1e-3) {
  Mlp<double>::Tape tape;
  net.forward(x, tape);
  for (std::size_t l = 0; l + 1 < tape.pre.size(); ++l)
    if (tape.pre[l].cwiseAbs().minCoeff() < margin) return true;
  return false;
}

Eigen::VectorXd central_diff(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& theta,
                             double h) {
  Eigen::VectorXd fd(theta.size());
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    Eigen::VectorXd plus = theta, minus = theta;
    plus(i) += h;
    minus(i) -= h;
    fd(i) = (f(plus) - f(minus)) / (2 * h);
  }
  return fd;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Demo sets from random-action rollouts; enough to exercise the shaping path.
CorModel random_demo_model(const Environment& env, std::uint64_t seed, const CorParams& params) {
  auto local = env.clone();
  std::vector<Trajectory> a, b;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int e = 0; e < 4; ++e) {
    for (auto* dest : {&a, &b}) {
      Trajectory traj;
      StateVec s = local->reset(derive_seed(seed, static_cast<std::uint64_t>(e), dest == &a ? 0 : 1));
      for (int t = 0; t < 50; ++t) {
        ActionVec act(env.act_dim());
        for (auto& x : act) x = normal(rng);
        auto o = local->step(act);
        traj.steps.push_back(o.record);
        s = o.next_state;
      }
      traj.final_state = s;
      dest->push_back(traj);
    }
  }
  return CorModel(build_demo_set(a, DemoLabel::reward_expert), build_demo_set(b, DemoLabel::safe_expert), params);
}

struct Report {
  bool pass = true;
  std::ostringstream detail;
  void expect(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

// ---------------------------------------------------------------------------
// Criteria

Report criterion_1() {
  Report r;
  const double v = cor_from_distances(1.0, 2.0, 3.0);
  const double oracle = cor_oracle(1.0, 2.0, 3.0);
  r.detail << "cor(3,1,2)=" << format_double(v) << " oracle=" << format_double(oracle);
  r.expect(std::abs(v - oracle) < 1e-6, "reference vs oracle");
  r.expect(std::abs(v - 0.609756) < 1e-6, "reference value 0.609756");

  const DemoSet a(Eigen::RowVector2d(1.0, 2.0), DemoLabel::reward_expert);
  const DemoSet b(Eigen::RowVector2d(-1.0, 2.0), DemoLabel::safe_expert);
  const double mid = cor(Eigen::Vector2d(0.0, 5.0), a, b, CorParams{});
  r.detail << " midpoint=" << format_double(mid);
  r.expect(std::abs(mid - 0.5) < 1e-12, "midpoint 0.5");
  return r;
}

Report criterion_2() {
  Report r;
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> dim_d(1, 6), count_d(1, 30);
  std::uniform_real_distribution<double> alpha_d(0.5, 10.0), scale_d(0.1, 5.0);
  double worst_dist = 0.0, worst_comp = 0.0;
  bool in_range = true;
  const int triples = 10000;
  for (int i = 0; i < triples; ++i) {
    const int dim = dim_d(rng);
    const Eigen::MatrixXd ra = random_matrix(count_d(rng), dim, rng, scale_d(rng), 1.0);
    const Eigen::MatrixXd rb = random_matrix(count_d(rng), dim, rng, scale_d(rng), -1.0);
    const DemoSet a(ra, DemoLabel::reward_expert), b(rb, DemoLabel::safe_expert);
    const Eigen::VectorXd s = random_vector(dim, rng, 3.0);
    CorParams params;
    params.alpha = alpha_d(rng);
    const double v = cor(s, a, b, params);
    in_range = in_range && v > 0.0 && v < 1.0;
    worst_comp = std::max(worst_comp, std::abs(v + cor(s, b, a, params) - 1.0));
    for (const auto& [set, rows] : {std::pair{&a, &ra}, std::pair{&b, &rb}}) {
      const double slow = brute_distance(s, *rows);
      worst_dist = std::max(worst_dist, std::abs(set_distance(s, *set) - slow) / std::max(slow, 1e-300));
    }
  }
  bool monotone = true;
  for (double alpha : {0.5, 3.0, 20.0}) {
    for (double fixed : {0.0, 0.1, 1.0, 10.0}) {
      double prev_a = 2.0, prev_b = -1.0;
      for (int k = 0; k <= 200; ++k) {
        const double d = 0.05 * k + 0.001 * k * k;
        const double va = cor_from_distances(d, fixed, alpha);
        const double vb = cor_from_distances(fixed, d, alpha);
        monotone = monotone && va < prev_a && vb > prev_b;
        prev_a = va;
        prev_b = vb;
      }
    }
  }
  r.detail << triples << " triples, complement err " << worst_comp << ", distance rel err " << worst_dist;
  r.expect(in_range, "open interval");
  r.expect(worst_comp < 1e-12, "complement identity");
  r.expect(worst_dist < 1e-9, "sufficient statistics vs brute force");
  r.expect(monotone, "strict monotonicity on grids");
  return r;
}

Report criterion_3() {
  Report r;
  std::mt19937_64 rng(3);
  double worst_lp = 0.0, worst_v = 0.0, worst_s = 0.0;
  int n_lp = 0, n_v = 0, n_s = 0;

  for (int trial = 0; n_lp < 100 && trial < 1000; ++trial) {
    GaussianPolicy<double> policy(3, 2, 6);
    policy.unflatten(random_vector(policy.num_params(), rng, 0.5));
    policy.clamp_log_std();
    const int batch = 1 + trial % 4;
    const Eigen::MatrixXd s = random_matrix(3, batch, rng);
    if (near_kink(policy.mean_net(), s)) continue;
    const Eigen::MatrixXd a = random_matrix(2, batch, rng);
    const Eigen::VectorXd w = random_vector(batch, rng);
    const auto f = [&](const Eigen::VectorXd& theta) {
      auto p = policy;
      p.unflatten(theta);
      return w.dot(p.log_prob_batch(s, a));
    };
    worst_lp = std::max(worst_lp, rel_err(policy.weighted_log_prob_grad(s, a, w), central_diff(f, policy.flatten(), 1e-5)));
    ++n_lp;
  }

  const Checkpoint nets = make_checkpoint(4, 2, 6, -0.5, 1);
  for (int trial = 0; n_v < 100 && trial < 1000; ++trial) {
    Mlp<double> net = trial % 2 == 0 ? nets.value_reward : nets.value_cost;
    net.unflatten(random_vector(net.num_params(), rng, 0.5));
    const Eigen::VectorXd s = random_vector(4, rng);
    if (near_kink(net, s)) continue;
    const auto [v, grad] = value_forward_and_grad(net, s);
    const auto f = [&](const Eigen::VectorXd& theta) {
      Mlp<double> m = net;
      m.unflatten(theta);
      return m.forward(s)(0, 0);
    };
    worst_v = std::max(worst_v, rel_err(grad, central_diff(f, net.flatten(), 1e-5)));
    ++n_v;
  }

  for (int trial = 0; n_s < 100 && trial < 1000; ++trial) {
    GaussianPolicy<double> policy(3, 2, 5);
    policy.unflatten(random_vector(policy.num_params(), rng, 0.5));
    policy.clamp_log_std();
    GaussianPolicy<double> old = policy;
    old.unflatten(policy.flatten() + random_vector(policy.num_params(), rng, 0.05));
    old.clamp_log_std();
    const int n = 10;
    const Eigen::MatrixXd s = random_matrix(3, n, rng);
    Eigen::MatrixXd a(2, n);
    Eigen::VectorXd old_lp(n);
    for (int i = 0; i < n; ++i) {
      auto [act, lp] = old.sample(s.col(i), rng);
      a.col(i) = act;
      old_lp(i) = lp;
    }
    RolloutBatch batch;
    batch.reward = Eigen::VectorXd::Zero(n);
    batch.adv_reward = random_vector(n, rng);
    batch.adv_cost = random_vector(n, rng);
    const double mu = std::uniform_real_distribution<double>(0.0, 3.0)(rng);
    const Eigen::VectorXd adv = combined_advantages(batch, mu);
    const Eigen::VectorXd ratio = (policy.log_prob_batch(s, a) - old_lp).array().exp();
    if (((ratio.array() - 0.8).abs() < 1e-3).any() || ((ratio.array() - 1.2).abs() < 1e-3).any()) continue;
    const BcTerm bc{random_matrix(3, 4, rng), random_matrix(2, 4, rng), 0.01};
    const BcTerm* bc_ptr = n_s % 2 == 0 ? &bc : nullptr;
    const Surrogate sur = clipped_surrogate(policy, s, a, old_lp, adv, 0.2, bc_ptr);
    const auto f = [&](const Eigen::VectorXd& theta) {
      auto p = policy;
      p.unflatten(theta);
      return clipped_surrogate(p, s, a, old_lp, adv, 0.2, bc_ptr).value;
    };
    worst_s = std::max(worst_s, rel_err(sur.grad, central_diff(f, policy.flatten(), 1e-6)));
    ++n_s;
  }
  r.detail << "worst rel err: log-prob " << worst_lp << " (" << n_lp << "), value " << worst_v << " (" << n_v
           << "), surrogate " << worst_s << " (" << n_s << ")";
  r.expect(n_lp == 100 && n_v == 100 && n_s == 100, "100 instances each");
  r.expect(worst_lp < 1e-4 && worst_v < 1e-4 && worst_s < 1e-4, "relative error < 1e-4");
  return r;
}

Report criterion_4() {
  Report r;
  // Monte-Carlo vs exact evaluation
  {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    ChainCmdpConfig chain;
    chain.gamma = 0.9;
    chain.horizon = 300;
    chain.slip_prob = 0.2;
    for (int s = 0; s < chain.n_states; ++s) {
      chain.rewards[static_cast<std::size_t>(s)] = u(rng);
      chain.costs[static_cast<std::size_t>(s)] = u(rng) < 0.4 ? 1.0 : 0.0;
    }
    TabularPolicy policy(chain.n_states);
    for (auto& p : policy) p = u(rng);
    const auto exact = exact_policy_evaluation(chain, policy);
    ChainCmdp env(chain);
    std::mt19937_64 act_rng(5);
    const int episodes = 100000;
    double sr = 0, sr2 = 0, sc = 0, sc2 = 0;
    ActionVec a(1);
    for (int ep = 0; ep < episodes; ++ep) {
      env.reset(static_cast<std::uint64_t>(ep) + 1000);
      double gr = 0.0, gc = 0.0, w = 1.0;
      while (true) {
        a(0) = u(act_rng) < policy(env.position()) ? 1.0 : -1.0;
        const auto out = env.step(a);
        gr += w * out.record.reward;
        gc += w * out.record.cost;
        w *= chain.gamma;
        if (out.record.truncated) break;
      }
      sr += gr;
      sr2 += gr * gr;
      sc += gc;
      sc2 += gc * gc;
    }
    const double mr = sr / episodes, mc = sc / episodes;
    const double se_r = std::sqrt((sr2 / episodes - mr * mr) / episodes);
    const double se_c = std::sqrt((sc2 / episodes - mc * mc) / episodes);
    r.detail << "MC reward " << mr << " vs " << exact.reward << " (" << std::abs(mr - exact.reward) / se_r
             << " se), cost " << mc << " vs " << exact.cost << " (" << std::abs(mc - exact.cost) / se_c << " se)";
    r.expect(std::abs(mr - exact.reward) < 3 * se_r && std::abs(mc - exact.cost) < 3 * se_c, "MC within 3 SE");
  }
  // GAE(lambda=1) with zero values is the discounted return-to-go
  {
    std::mt19937_64 rng(6);
    bool exact = true;
    for (int trial = 0; trial < 20; ++trial) {
      const int n = 1 + 11 * trial;
      std::vector<double> rewards(static_cast<std::size_t>(n)), values(static_cast<std::size_t>(n), 0.0);
      for (auto& x : rewards) x = std::normal_distribution<double>(0.0, 1.0)(rng);
      const Gae g = compute_gae(rewards, values, 0.0, 0.99, 1.0);
      double ret = 0.0;
      for (int t = n - 1; t >= 0; --t) {
        ret = rewards[static_cast<std::size_t>(t)] + 0.99 * ret;
        exact = exact && g.advantages(t) == ret;
      }
    }
    r.expect(exact, "GAE identity");
  }
  // unconstrained training reaches the DP optimum
  {
    ChainCmdpConfig chain;
    ChainCmdp env(chain);
    TrainerConfig config;
    config.expert_mode = ExpertMode::reward_expert;
    config.ablation_mode = AblationMode::off;
    config.gamma = chain.gamma;
    config.steps_per_batch = 4000;
    config.total_steps = 50LL * 4000;
    const auto result = train(config, env);
    TabularPolicy p(chain.n_states);
    const double sd = std::exp(result.nets.policy.log_std()(0));
    for (int s = 0; s < chain.n_states; ++s) {
      const double mean = result.nets.policy.forward(Eigen::VectorXd::Unit(chain.n_states, s)).mean(0);
      p(s) = 1.0 - normal_cdf(-mean / sd);
    }
    const double learned = exact_policy_evaluation(chain, p).reward;
    const double optimum = chain_optimal_policy(chain).value;
    r.detail << "; chain " << result.metrics.size() << " batches, value " << learned << " vs optimum " << optimum;
    r.expect(result.metrics.size() <= 50 && learned >= 0.95 * optimum, "within 5% of optimum");
  }
  return r;
}

Report criterion_5(const std::filesystem::path& out) {
  Report r;
  PointGoalMiniConfig pg;
  pg.horizon = 250;
  const PointGoalMini env(pg);
  TrainerConfig shaped;
  shaped.steps_per_batch = 1000;
  shaped.total_steps = 5000;
  shaped.hidden_dim = 32;
  shaped.seed = 7;
  shaped.cor.lambda_r = 0.0;
  shaped.cor.lambda_c = 0.0;
  shaped.ablation_mode = AblationMode::both;
  TrainerConfig baseline = shaped;
  baseline.ablation_mode = AblationMode::off;
  const CorModel model = random_demo_model(env, 5, shaped.cor);
  TrainInputs a, b;
  a.cor_model = b.cor_model = &model;
  a.out_dir = out / "shaped";
  b.out_dir = out / "baseline";
  train(shaped, env, a);
  train(baseline, env, b);
  const auto la = read_text_file(out / "shaped" / "metrics.csv");
  const auto lb = read_text_file(out / "baseline" / "metrics.csv");
  r.detail << "metrics logs " << (la == lb ? "identical" : "differ") << " (" << la.size() << " bytes)";
  r.expect(la == lb, "bitwise-identical logs");
  r.expect(read_text_file(out / "shaped" / "checkpoint.txt") == read_text_file(out / "baseline" / "checkpoint.txt"),
           "identical checkpoints");
  return r;
}

Report criterion_8(const std::filesystem::path& out) {
  Report r;
  PointGoalMiniConfig pg;
  pg.horizon = 250;
  const PointGoalMini env(pg);
  TrainerConfig config;
  config.steps_per_batch = 1000;
  config.total_steps = 4000;
  config.hidden_dim = 32;
  config.seed = 13;
  const CorModel model = random_demo_model(env, 8, config.cor);
  for (const char* run : {"a", "b"}) {
    TrainInputs in;
    in.cor_model = &model;
    in.out_dir = out / run;
    train(config, env, in);
  }
  const bool same_log = read_text_file(out / "a" / "metrics.csv") == read_text_file(out / "b" / "metrics.csv");
  const bool same_ckpt = read_text_file(out / "a" / "checkpoint.txt") == read_text_file(out / "b" / "checkpoint.txt");
  r.expect(same_log && same_ckpt, "reproducible training");

  const Checkpoint ckpt = read_checkpoint(out / "a" / "checkpoint.txt");
  write_checkpoint(out / "ckpt_copy.txt", ckpt);
  const Checkpoint again = read_checkpoint(out / "ckpt_copy.txt");
  const bool ckpt_rt = read_text_file(out / "ckpt_copy.txt") == read_text_file(out / "a" / "checkpoint.txt") &&
                       again.policy.flatten() == ckpt.policy.flatten() &&
                       again.value_reward.flatten() == ckpt.value_reward.flatten() &&
                       again.value_cost.flatten() == ckpt.value_cost.flatten();
  r.expect(ckpt_rt, "checkpoint round trip");

  const Demonstrations demos = generate_demos(ckpt, env, 3, 21, DemoLabel::reward_expert, 500);
  write_demo_file(out / "states.demo", demos.states);
  write_demo_pairs(out / "pairs.demo", demos.pairs, "reward_expert_pairs");
  const DemoSet states = read_demo_file(out / "states.demo");
  const DemoPairs pairs = read_demo_pairs(out / "pairs.demo", env.obs_dim());
  const bool demo_rt = states.states() == demos.states.states() && states.label() == demos.states.label() &&
                       pairs.states == demos.pairs.states && pairs.actions == demos.pairs.actions;
  r.expect(demo_rt, "demo round trip");
  r.detail << "logs " << (same_log ? "identical" : "differ") << ", checkpoint round trip "
           << (ckpt_rt ? "exact" : "inexact") << ", demo round trip " << (demo_rt ? "exact" : "inexact");
  return r;
}

// Criteria 6 and 7 share one artifact tree: experts, demos and four agent variants.
struct Directional {
  std::vector<ComparisonRow> rows;
  std::map<std::string, double> tail_cost_rate;  // median over seeds of the last-5-batch training cost rate
  double d = 0.0;
};

Directional run_directional(const std::filesystem::path& out) {
  RunConfig config;
  config.out_dir = out.string();
  const ArtifactLayout layout{out};
  write_text_file(out / "config.json", render_run_config(config));
  train_experts(config, layout);
  write_demos(config, layout);
  const std::vector<Variant> variants = {{"baseline", AblationMode::off},
                                         {"both", AblationMode::both},
                                         {"rew_only", AblationMode::rew_only},
                                         {"cost_only", AblationMode::cost_only}};
  auto rows = train_and_evaluate(config, layout, variants);
  const auto medians = median_rows(rows, variants);
  rows.insert(rows.end(), medians.begin(), medians.end());
  write_text_file(out / "comparison.csv", render_comparison_csv(rows));

  Directional result{rows, {}, config.pointgoal.threshold_d};
  for (const auto& v : variants) {
    std::vector<double> tails;
    for (const auto seed : config.seeds) {
      const auto log = read_metrics_csv(layout.agent_dir(v.name, seed) / "metrics.csv");
      const std::size_t k = std::min<std::size_t>(5, log.size());
      double acc = 0.0;
      for (std::size_t i = log.size() - k; i < log.size(); ++i) acc += log[i].cost_rate;
      tails.push_back(k ? acc / static_cast<double>(k) : 0.0);
    }
    std::sort(tails.begin(), tails.end());
    result.tail_cost_rate[v.name] = tails[tails.size() / 2];
  }
  return result;
}

const MetricsRow& median_of(const Directional& dir, const std::string& variant) {
  for (const auto& r : dir.rows)
    if (r.variant == variant && r.seed == "median") return r.metrics;
  throw std::runtime_error("no median row for " + variant);
}

Report criterion_6(const Directional& dir) {
  Report r;
  const auto& base = median_of(dir, "baseline");
  const auto& cor = median_of(dir, "both");
  const double limit = 1.5 * dir.d;
  r.detail << "median total_cv " << cor.total_cv << " (CoR) vs " << base.total_cv << " (baseline); median eval cost "
           << cor.cost_return << " vs " << base.cost_return << "; final evaluation cost rate " << cor.cost_rate << " / "
           << base.cost_rate << " vs limit " << limit << " (training cost rate over the last 5 batches "
           << dir.tail_cost_rate.at("both") << " / " << dir.tail_cost_rate.at("baseline") << ")";
  r.expect(cor.total_cv <= base.total_cv, "Total CV");
  r.expect(cor.cost_return <= base.cost_return, "evaluation cost");
  r.expect(cor.cost_rate <= limit, "CoR final cost rate");
  r.expect(base.cost_rate <= limit, "baseline final cost rate");
  return r;
}

Report criterion_7(const Directional& dir) {
  Report r;
  const std::vector<std::string> names = {"rew_only", "cost_only", "both"};
  std::map<std::string, double> cv, reward;
  for (const auto& n : names) {
    cv[n] = median_of(dir, n).total_cv;
    reward[n] = median_of(dir, n).reward_return;
    r.detail << n << " total_cv " << cv[n] << " reward " << reward[n] << "; ";
  }
  r.expect(cv["both"] <= std::min(cv["rew_only"], cv["cost_only"]), "both has the lowest Total CV");
  r.expect(reward["rew_only"] >= std::max(reward["cost_only"], reward["both"]), "rew_only has the highest reward");
  return r;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"safecor acceptance run"};
  std::string out = "acceptance_artifacts";
  std::vector<int> only;
  app.add_option("--out", out, "artifact directory");
  app.add_option("--only", only, "criteria to run (default: all)")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  const std::filesystem::path root(out);
  std::filesystem::create_directories(root);
  const std::set<int> wanted = only.empty() ? std::set<int>{1, 2, 3, 4, 5, 6, 7, 8} : std::set<int>(only.begin(), only.end());

  std::optional<Directional> directional;
  const std::map<int, std::pair<std::string, std::function<Report()>>> criteria = {
      {1, {"CoR exactness", criterion_1}},
      {2, {"CoR property suite", criterion_2}},
      {3, {"gradient fidelity", criterion_3}},
      {4, {"tabular oracle", criterion_4}},
      {5, {"overlay purity", [&] { return criterion_5(root / "overlay"); }}},
      {6, {"directional Safe CoR", [&] {
             if (!directional) directional = run_directional(root / "directional");
             return criterion_6(*directional);
           }}},
      {7, {"ablation ordering", [&] {
             if (!directional) directional = run_directional(root / "directional");
             return criterion_7(*directional);
           }}},
      {8, {"reproducibility and round trips", [&] { return criterion_8(root / "repro"); }}},
  };

  bool all = true;
  std::ostringstream summary;
  for (const auto& [id, entry] : criteria) {
    if (!wanted.count(id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Report r;
    try {
      r = entry.second();
    } catch (const std::exception& e) {
      r.pass = false;
      r.detail << "exception: " << e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    all = all && r.pass;
    std::ostringstream line;
    line << "criterion " << id << " (" << entry.first << "): " << (r.pass ? "PASS" : "FAIL") << " - " << r.detail.str()
         << " [" << std::fixed << std::setprecision(1) << secs << " s]";
    std::cout << line.str() << std::endl;
    summary << line.str() << '\n';
  }
  write_text_file(root / "acceptance.txt", summary.str());
  return all ? 0 : 1;
}

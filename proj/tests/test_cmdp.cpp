#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "safecor/cmdp.hpp"

#include <cmath>
#include <random>

using namespace safecor;

namespace {

Trajectory random_trajectory(int n, std::mt19937_64& rng, bool binary_cost = true) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Trajectory t;
  for (int i = 0; i < n; ++i) {
    StepRecord s;
    s.state = Eigen::VectorXd::Random(3);
    s.action = Eigen::VectorXd::Random(2);
    s.reward = u(rng);
    s.cost = binary_cost ? (u(rng) > 0.3 ? 1.0 : 0.0) : std::abs(u(rng));
    t.steps.push_back(s);
  }
  t.steps.back().truncated = true;
  return t;
}

CmdpSpec spec_for(double gamma, int horizon = 1000) {
  CmdpSpec spec;
  spec.gamma = gamma;
  spec.horizon = horizon;
  spec.obs_dim = 3;
  spec.act_dim = 2;
  return spec;
}

}  // namespace

TEST_CASE("discounted_sum basic values") {
  CHECK(discounted_sum(Eigen::VectorXd(0), 0.99) == 0.0);
  CHECK(discounted_sum(Eigen::Vector3d(1, 1, 1), 0.5) == 1.75);
  const std::vector<double> v{1.0, 1.0, 1.0};
  CHECK(discounted_sum(v, 0.5) == 1.75);
}

TEST_CASE("discounted_sum matches a forward power accumulation") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd xs(100);
    for (auto& x : xs) x = u(rng);
    double oracle = 0.0, w = 1.0;
    for (Eigen::Index t = 0; t < xs.size(); ++t) {
      oracle += w * xs(t);
      w *= 0.9;
    }
    const double got = discounted_sum(xs, 0.9);
    CHECK(std::abs(got - oracle) <= 1e-12 * std::max(1.0, std::abs(oracle)));
  }
}

TEST_CASE("discounted_sum works for float scalars") {
  Eigen::VectorXf xs(3);
  xs << 1.0f, 2.0f, 4.0f;
  CHECK(discounted_sum(xs, 0.5f) == doctest::Approx(3.0f));
}

TEST_CASE("discounted_sum is linear") {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::VectorXd x(64), y(64);
    for (auto& v : x) v = n(rng);
    for (auto& v : y) v = n(rng);
    const double a = n(rng), b = n(rng);
    const double lhs = discounted_sum((a * x + b * y).eval(), 0.97);
    const double rhs = a * discounted_sum(x, 0.97) + b * discounted_sum(y, 0.97);
    CHECK(std::abs(lhs - rhs) < 1e-12 * std::max(1.0, std::abs(lhs)));
  }
}

TEST_CASE("discounted_sum rejects bad input") {
  CHECK_THROWS_AS(discounted_sum(Eigen::Vector2d(1, 1), 1.0), std::invalid_argument);
  CHECK_THROWS_AS(discounted_sum(Eigen::Vector2d(1, 1), 0.0), std::invalid_argument);
  CHECK_THROWS_WITH_AS(discounted_sum(Eigen::Vector3d(1, std::nan(""), 1), 0.9), doctest::Contains("NaN"),
                       std::invalid_argument);
  CHECK_THROWS_WITH_AS(discounted_sum(Eigen::Vector3d(1, 1, INFINITY), 0.9), doctest::Contains("index 2"),
                       std::invalid_argument);
}

TEST_CASE("trajectory_returns examples") {
  Trajectory t;
  StepRecord a;
  a.state = Eigen::VectorXd::Zero(3);
  a.action = Eigen::VectorXd::Zero(2);
  a.reward = 1.0;
  a.cost = 0.0;
  StepRecord b = a;
  b.reward = 0.0;
  b.cost = 1.0;
  b.truncated = true;
  t.steps = {a, b};
  const auto r = trajectory_returns(t, spec_for(0.99));
  CHECK(r.reward == 1.0);
  CHECK(r.cost == 0.99);

  for (auto& s : t.steps) s.reward = s.cost = 0.0;
  const auto z = trajectory_returns(t, spec_for(0.99));
  CHECK(z.reward == 0.0);
  CHECK(z.cost == 0.0);
}

TEST_CASE("trajectory_returns equals the channel-wise oracle") {
  std::mt19937_64 rng(3);
  const auto t = random_trajectory(50, rng);
  const auto r = trajectory_returns(t, spec_for(0.95));
  std::vector<double> rew, cost;
  for (const auto& s : t.steps) {
    rew.push_back(s.reward);
    cost.push_back(s.cost);
  }
  CHECK(r.reward == discounted_sum(rew, 0.95));
  CHECK(r.cost == discounted_sum(cost, 0.95));
}

TEST_CASE("trajectory_returns checks horizon and dimensions") {
  std::mt19937_64 rng(4);
  const auto t = random_trajectory(10, rng);
  CHECK_THROWS_AS(trajectory_returns(t, spec_for(0.9, 5)), std::invalid_argument);
  auto spec = spec_for(0.9);
  spec.obs_dim = 4;
  CHECK_THROWS_AS(trajectory_returns(t, spec), std::invalid_argument);
}

TEST_CASE("cost return lies in its bound") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + trial * 3;
    const auto t = random_trajectory(n, rng, false);
    double max_cost = 0.0;
    for (const auto& s : t.steps) max_cost = std::max(max_cost, s.cost);
    const double gamma = 0.9;
    const double c = trajectory_returns(t, spec_for(gamma)).cost;
    CHECK(c >= 0.0);
    CHECK(c <= (1.0 - std::pow(gamma, n)) / (1.0 - gamma) * max_cost + 1e-12);
  }
}

TEST_CASE("returns of a concatenation split at the head length") {
  std::mt19937_64 rng(6);
  const auto head = random_trajectory(17, rng);
  const auto tail = random_trajectory(23, rng);
  Trajectory joined = head;
  joined.steps.back().truncated = false;
  joined.steps.insert(joined.steps.end(), tail.steps.begin(), tail.steps.end());
  const auto spec = spec_for(0.97);
  Trajectory h = head;
  const auto rh = trajectory_returns(h, spec);
  const auto rt = trajectory_returns(tail, spec);
  const auto rj = trajectory_returns(joined, spec);
  const double g = std::pow(0.97, 17);
  CHECK(rj.reward == doctest::Approx(rh.reward + g * rt.reward).epsilon(1e-12));
  CHECK(rj.cost == doctest::Approx(rh.cost + g * rt.cost).epsilon(1e-12));
}

TEST_CASE("constraint_limit") {
  CmdpSpec spec;
  spec.threshold_d = 0.025;
  spec.gamma = 0.99;
  CHECK(constraint_limit(spec) == doctest::Approx(2.5).epsilon(1e-12));
  spec.threshold_d = 0.02;
  CHECK(constraint_limit(spec) == doctest::Approx(2.0).epsilon(1e-12));
  spec.threshold_d = 0.0;
  spec.gamma = 0.5;
  CHECK(constraint_limit(spec) == 0.0);
}

TEST_CASE("spec and trajectory validation") {
  CmdpSpec spec;
  CHECK_NOTHROW(spec.validate());
  spec.gamma = 1.0;
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);
  spec = CmdpSpec{};
  spec.horizon = 0;
  CHECK_THROWS_AS(spec.validate(), std::invalid_argument);

  std::mt19937_64 rng(7);
  auto t = random_trajectory(5, rng);
  CHECK_NOTHROW(validate_trajectory(t));
  t.steps[1].terminal = true;
  CHECK_THROWS_AS(validate_trajectory(t), std::invalid_argument);
  t = random_trajectory(5, rng);
  t.steps[2].cost = -1.0;
  CHECK_THROWS_AS(validate_trajectory(t), std::invalid_argument);
  CHECK_THROWS_AS(validate_trajectory(Trajectory{}), std::invalid_argument);
}

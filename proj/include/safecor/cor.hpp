#ifndef SAFECOR_COR_HPP
#define SAFECOR_COR_HPP

#include "safecor/cmdp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

namespace safecor {

enum class DemoLabel { reward_expert, safe_expert, other };

std::string to_string(DemoLabel label);
DemoLabel demo_label_from_string(const std::string& text);

/// A demonstration state set together with the sufficient statistics of the RMS
/// set distance: the mean state and the mean squared norm.
///
/// States are stored one per row. The statistics are computed once at
/// construction; the object is immutable afterwards.
template <typename Scalar>
class BasicDemoSet {
 public:
  using Matrix = Mat<Scalar>;
  using Vector = Vec<Scalar>;

  BasicDemoSet() = default;

  BasicDemoSet(Matrix states, DemoLabel label, std::string label_text = {})
      : states_(std::move(states)), label_(label), label_text_(std::move(label_text)) {
    if (states_.rows() < 1) throw std::invalid_argument("demo set needs at least one state");
    if (states_.cols() < 1) throw std::invalid_argument("demo set states need dimension >= 1");
    if (!states_.allFinite()) throw std::invalid_argument("demo set contains non-finite entries");
    if (label_text_.empty()) label_text_ = to_string(label_);
    mean_ = states_.colwise().mean().transpose();
    mean_sq_norm_ = states_.rowwise().squaredNorm().mean();
  }

  const Matrix& states() const { return states_; }
  Eigen::Index count() const { return states_.rows(); }
  Eigen::Index dim() const { return states_.cols(); }
  const Vector& mean() const { return mean_; }
  Scalar mean_sq_norm() const { return mean_sq_norm_; }
  DemoLabel label() const { return label_; }
  const std::string& label_text() const { return label_text_; }
  bool empty() const { return states_.rows() == 0; }

 private:
  Matrix states_;
  Vector mean_;
  Scalar mean_sq_norm_ = Scalar(0);
  DemoLabel label_ = DemoLabel::other;
  std::string label_text_;
};

using DemoSet = BasicDemoSet<double>;

struct CorParams {
  double alpha = 3.0;
  double lambda_r = 0.1;
  double lambda_c = 0.01;

  void validate() const;
};

/// Root-mean-square distance from `s` to every state in `set`.
///
/// Uses ||s||^2 - 2 s.mu + m2, which equals the mean of ||s - s_a||^2 exactly in
/// real arithmetic; the max(0, .) absorbs negative round-off.
template <typename Derived, typename Scalar>
Scalar set_distance(const Eigen::MatrixBase<Derived>& s, const BasicDemoSet<Scalar>& set) {
  if (set.empty()) throw std::invalid_argument("set_distance: empty demonstration set");
  if (s.size() != set.dim())
    throw std::invalid_argument("set_distance: state dimension " + std::to_string(s.size()) +
                                " != demo set dimension " + std::to_string(set.dim()));
  const Scalar sq = s.squaredNorm() - Scalar(2) * s.dot(set.mean()) + set.mean_sq_norm();
  return std::sqrt(std::max(Scalar(0), sq));
}

/// CoR from the two set distances. Evaluated as a logistic of the log-kernel
/// difference so that very distant sets neither underflow nor produce 0/0.
template <typename Scalar>
Scalar cor_from_distances(Scalar delta_a, Scalar delta_b, Scalar alpha) {
  if (!(alpha > Scalar(0))) throw std::invalid_argument("CoR alpha must be > 0");
  const Scalar half_exp = (alpha + Scalar(1)) / Scalar(2);
  // log f(A) - log f(B) with f(x) = (1 + x/alpha)^(-(alpha+1)/2)
  const Scalar z = half_exp * (std::log1p(delta_b / alpha) - std::log1p(delta_a / alpha));
  Scalar value = z >= Scalar(0) ? Scalar(1) / (Scalar(1) + std::exp(-z))
                                : std::exp(z) / (Scalar(1) + std::exp(z));
  // open interval
  const Scalar lo = std::numeric_limits<Scalar>::denorm_min();
  const Scalar hi = std::nextafter(Scalar(1), Scalar(0));
  return std::clamp(value, lo, hi);
}

/// Relative closeness of `s` to `reward_set` versus `safe_set`; 0.5 at equal distance.
template <typename Derived, typename Scalar>
Scalar cor(const Eigen::MatrixBase<Derived>& s, const BasicDemoSet<Scalar>& reward_set,
           const BasicDemoSet<Scalar>& safe_set, const CorParams& params) {
  return cor_from_distances<Scalar>(set_distance(s, reward_set), set_distance(s, safe_set),
                                    static_cast<Scalar>(params.alpha));
}

/// Optional preprocessing applied to states before distances are measured:
/// a feature subset, then per-dimension standardization.
struct FeatureMap {
  std::vector<int> mask;  // empty = all features
  Eigen::VectorXd offset;
  Eigen::VectorXd scale;  // empty = no standardization

  Eigen::VectorXd apply(const Eigen::VectorXd& s) const;
  Eigen::MatrixXd apply_rows(const Eigen::MatrixXd& states) const;
  bool identity() const { return mask.empty() && scale.size() == 0; }
};

/// Both demonstration sets plus the parameters needed to evaluate CoR on raw observations.
class CorModel {
 public:
  CorModel(DemoSet reward_set, DemoSet safe_set, CorParams params, std::vector<int> mask = {},
           bool standardize = false);

  double operator()(const StateVec& s) const;

  const DemoSet& reward_set() const { return reward_; }
  const DemoSet& safe_set() const { return safe_; }
  const CorParams& params() const { return params_; }
  const FeatureMap& features() const { return features_; }
  Eigen::Index raw_dim() const { return raw_dim_; }

 private:
  DemoSet reward_;
  DemoSet safe_;
  CorParams params_;
  FeatureMap features_;
  Eigen::Index raw_dim_ = 0;
};

/// Returns a copy of `traj` with every step's cor filled in. Throws before mutating anything.
Trajectory annotate_cor(const Trajectory& traj, const DemoSet& reward_set, const DemoSet& safe_set,
                        const CorParams& params);
Trajectory annotate_cor(const Trajectory& traj, const CorModel& model);

/// Which channels receive the CoR term.
struct CorChannels {
  bool reward = true;
  bool cost = true;
};

struct ShapedChannels {
  std::vector<double> rewards;
  std::vector<double> costs;
};

/// reward + lambda_r * cor and cost + lambda_c * cor, per step.
ShapedChannels augment(const Trajectory& traj, const CorParams& params, CorChannels channels = {});

/// Concatenates the states of `trajectories`; if there are more than `max_states`,
/// keeps a uniform random subset (order preserved) drawn with `subsample_seed`.
DemoSet build_demo_set(std::span<const Trajectory> trajectories, DemoLabel label,
                       std::size_t max_states = std::numeric_limits<std::size_t>::max(),
                       std::uint64_t subsample_seed = 0);

/// Text format: header `dim=<int> count=<int> label=<string>`, then one state per line
/// as space-separated 17-significant-digit decimals.
void write_demo_file(const std::filesystem::path& path, const DemoSet& set);
DemoSet read_demo_file(const std::filesystem::path& path);

/// State-action pairs stored in the demo file format, each row = [state, action].
struct DemoPairs {
  Eigen::MatrixXd states;   // count x obs_dim
  Eigen::MatrixXd actions;  // count x act_dim
};
void write_demo_pairs(const std::filesystem::path& path, const DemoPairs& pairs, const std::string& label);
DemoPairs read_demo_pairs(const std::filesystem::path& path, int obs_dim);

}  // namespace safecor

#endif  // SAFECOR_COR_HPP

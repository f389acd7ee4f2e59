#ifndef SAFECOR_POLICY_NET_HPP
#define SAFECOR_POLICY_NET_HPP

#include "safecor/cmdp.hpp"

#include <Eigen/QR>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace safecor {

/// Fully connected network with rectified-linear hidden layers and a linear output.
///
/// Inputs are batched column-wise: a (input_dim x N) matrix maps to (output_dim x N).
/// Parameters flatten layer by layer as [W (column-major), b].
template <typename Scalar>
class Mlp {
 public:
  using Matrix = Mat<Scalar>;
  using Vector = Vec<Scalar>;

  struct Layer {
    Matrix weight;  // out x in
    Vector bias;
  };

  /// Intermediate values kept by a forward pass for backpropagation.
  struct Tape {
    std::vector<Matrix> inputs;  // input of each layer (post-activation of the previous one)
    std::vector<Matrix> pre;     // pre-activation of each layer
  };

  Mlp() = default;

  /// Zero-initialized network with the given layer sizes, e.g. {obs, 64, 64, act}.
  explicit Mlp(const std::vector<int>& sizes) {
    if (sizes.size() < 2) throw std::invalid_argument("Mlp needs at least input and output sizes");
    for (int s : sizes)
      if (s < 1) throw std::invalid_argument("Mlp layer sizes must be positive");
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l)
      layers_.push_back({Matrix::Zero(sizes[l + 1], sizes[l]), Vector::Zero(sizes[l + 1])});
  }

  Eigen::Index input_dim() const { return layers_.front().weight.cols(); }
  Eigen::Index output_dim() const { return layers_.back().weight.rows(); }
  std::size_t num_layers() const { return layers_.size(); }
  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }

  std::vector<int> sizes() const {
    std::vector<int> out{static_cast<int>(input_dim())};
    for (const auto& l : layers_) out.push_back(static_cast<int>(l.weight.rows()));
    return out;
  }

  Eigen::Index num_params() const {
    Eigen::Index n = 0;
    for (const auto& l : layers_) n += l.weight.size() + l.bias.size();
    return n;
  }

  template <typename Derived>
  Matrix forward(const Eigen::MatrixBase<Derived>& x) const {
    check_input(x.rows());
    Matrix a = x;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      Matrix z = (layers_[l].weight * a).colwise() + layers_[l].bias;
      if (l + 1 < layers_.size()) z = z.cwiseMax(Scalar(0));
      check_finite(z, l);
      a = std::move(z);
    }
    return a;
  }

  template <typename Derived>
  Matrix forward(const Eigen::MatrixBase<Derived>& x, Tape& tape) const {
    check_input(x.rows());
    tape.inputs.resize(layers_.size());
    tape.pre.resize(layers_.size());
    Matrix a = x;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      tape.inputs[l] = a;
      tape.pre[l] = (layers_[l].weight * a).colwise() + layers_[l].bias;
      check_finite(tape.pre[l], l);
      a = l + 1 < layers_.size() ? Matrix(tape.pre[l].cwiseMax(Scalar(0))) : tape.pre[l];
    }
    return a;
  }

  /// Flat gradient of sum(d_out .* output) with respect to all parameters.
  Vector backward(const Tape& tape, const Matrix& d_out) const {
    Vector grad(num_params());
    Matrix dz = d_out;
    Eigen::Index offset = num_params();
    for (std::size_t i = layers_.size(); i-- > 0;) {
      const auto& layer = layers_[i];
      offset -= layer.weight.size() + layer.bias.size();
      Eigen::Map<Matrix>(grad.data() + offset, layer.weight.rows(), layer.weight.cols()).noalias() =
          dz * tape.inputs[i].transpose();
      grad.segment(offset + layer.weight.size(), layer.bias.size()) = dz.rowwise().sum();
      if (i > 0) {
        Matrix da = layer.weight.transpose() * dz;
        dz = (tape.pre[i - 1].array() > Scalar(0)).select(da, Scalar(0));
      }
    }
    return grad;
  }

  Vector flatten() const {
    Vector out(num_params());
    Eigen::Index offset = 0;
    for (const auto& l : layers_) {
      out.segment(offset, l.weight.size()) = Eigen::Map<const Vector>(l.weight.data(), l.weight.size());
      offset += l.weight.size();
      out.segment(offset, l.bias.size()) = l.bias;
      offset += l.bias.size();
    }
    return out;
  }

  template <typename Derived>
  void unflatten(const Eigen::MatrixBase<Derived>& flat) {
    if (flat.size() != num_params()) throw std::invalid_argument("Mlp::unflatten: parameter count mismatch");
    Eigen::Index offset = 0;
    for (auto& l : layers_) {
      Eigen::Map<Vector>(l.weight.data(), l.weight.size()) = flat.segment(offset, l.weight.size());
      offset += l.weight.size();
      l.bias = flat.segment(offset, l.bias.size());
      offset += l.bias.size();
    }
  }

  bool all_finite() const {
    for (const auto& l : layers_)
      if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
    return true;
  }

 private:
  void check_input(Eigen::Index rows) const {
    if (layers_.empty()) throw std::logic_error("Mlp has no layers");
    if (rows != input_dim())
      throw std::invalid_argument("Mlp input dimension " + std::to_string(rows) + " != " +
                                  std::to_string(input_dim()));
  }
  static void check_finite(const Matrix& z, std::size_t layer) {
    if (!z.allFinite()) throw std::runtime_error("non-finite activation in layer " + std::to_string(layer));
  }

  std::vector<Layer> layers_;
};

/// Orthogonal initialization: each weight matrix is `gain` times a matrix with orthonormal
/// rows or columns; biases are zero. The output layer uses `output_gain`.
template <typename Scalar, typename Rng>
void orthogonal_init(Mlp<Scalar>& net, Rng& rng, Scalar hidden_gain, Scalar output_gain) {
  using Matrix = typename Mlp<Scalar>::Matrix;
  std::normal_distribution<double> normal(0.0, 1.0);
  auto& layers = net.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const Eigen::Index rows = layers[l].weight.rows();
    const Eigen::Index cols = layers[l].weight.cols();
    const Eigen::Index big = std::max(rows, cols);
    const Eigen::Index small = std::min(rows, cols);
    Matrix g(big, small);
    for (Eigen::Index j = 0; j < small; ++j)
      for (Eigen::Index i = 0; i < big; ++i) g(i, j) = static_cast<Scalar>(normal(rng));
    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix q = qr.householderQ() * Matrix::Identity(big, small);
    // sign fix so the distribution is uniform over orthogonal matrices
    for (Eigen::Index j = 0; j < small; ++j)
      if (qr.matrixQR()(j, j) < Scalar(0)) q.col(j) *= Scalar(-1);
    const Scalar gain = l + 1 == layers.size() ? output_gain : hidden_gain;
    layers[l].weight = gain * (rows >= cols ? q : Matrix(q.transpose()));
    layers[l].bias.setZero();
  }
}

/// Diagonal Gaussian policy: mean from an Mlp, state-independent log standard deviation.
template <typename Scalar>
class GaussianPolicy {
 public:
  using Matrix = Mat<Scalar>;
  using Vector = Vec<Scalar>;

  static constexpr double kLogStdMin = -5.0;
  static constexpr double kLogStdMax = 2.0;

  struct Output {
    Vector mean;
    Vector std;
  };

  GaussianPolicy() = default;
  GaussianPolicy(int obs_dim, int act_dim, int hidden_dim, Scalar log_std_init = Scalar(-0.5))
      : mean_net_({obs_dim, hidden_dim, hidden_dim, act_dim}),
        log_std_(Vector::Constant(act_dim, log_std_init)) {
    clamp_log_std();
  }

  Mlp<Scalar>& mean_net() { return mean_net_; }
  const Mlp<Scalar>& mean_net() const { return mean_net_; }
  Vector& log_std() { return log_std_; }
  const Vector& log_std() const { return log_std_; }

  Eigen::Index obs_dim() const { return mean_net_.input_dim(); }
  Eigen::Index act_dim() const { return log_std_.size(); }
  Eigen::Index num_params() const { return mean_net_.num_params() + log_std_.size(); }

  void clamp_log_std() {
    log_std_ = log_std_.cwiseMax(Scalar(kLogStdMin)).cwiseMin(Scalar(kLogStdMax));
  }

  template <typename Derived>
  Output forward(const Eigen::MatrixBase<Derived>& s) const {
    check_params();
    return {mean_net_.forward(s), log_std_.array().exp().matrix()};
  }

  template <typename Derived>
  Matrix mean_batch(const Eigen::MatrixBase<Derived>& states) const {
    check_params();
    return mean_net_.forward(states);
  }

  /// Draws a = mean + std * eps and returns it with its log density.
  template <typename Derived, typename Rng>
  std::pair<Vector, Scalar> sample(const Eigen::MatrixBase<Derived>& s, Rng& rng) const {
    const Output out = forward(s);
    std::normal_distribution<double> normal(0.0, 1.0);
    Vector eps(act_dim());
    for (Eigen::Index i = 0; i < eps.size(); ++i) eps(i) = static_cast<Scalar>(normal(rng));
    Vector a = out.mean + out.std.cwiseProduct(eps);
    return {a, log_density(a, out.mean)};
  }

  template <typename DS, typename DA>
  Scalar log_prob(const Eigen::MatrixBase<DS>& s, const Eigen::MatrixBase<DA>& a) const {
    const Output out = forward(s);
    return log_density(a, out.mean);
  }

  template <typename DS, typename DA>
  Vector log_prob_batch(const Eigen::MatrixBase<DS>& states, const Eigen::MatrixBase<DA>& actions) const {
    const Matrix means = mean_batch(states);
    const Vector inv_var = (Scalar(-2) * log_std_).array().exp().matrix();
    const Matrix diff = actions - means;
    Vector out = Scalar(-0.5) * (diff.array().square().colwise() * inv_var.array()).colwise().sum().transpose();
    out.array() += log_norm_const();
    return out;
  }

  /// log pi(a|s) and its gradient with respect to the flat parameter vector.
  template <typename DS, typename DA>
  std::pair<Scalar, Vector> log_prob_and_grad(const Eigen::MatrixBase<DS>& s,
                                              const Eigen::MatrixBase<DA>& a) const {
    Matrix states = s;
    Matrix actions = a;
    const Vector weights = Vector::Ones(1);
    Scalar lp = log_prob_batch(states, actions)(0);
    return {lp, weighted_log_prob_grad(states, actions, weights)};
  }

  /// Gradient of sum_i w_i log pi(a_i|s_i) for column-batched states and actions.
  template <typename DS, typename DA, typename DW>
  Vector weighted_log_prob_grad(const Eigen::MatrixBase<DS>& states, const Eigen::MatrixBase<DA>& actions,
                                const Eigen::MatrixBase<DW>& weights) const {
    check_params();
    typename Mlp<Scalar>::Tape tape;
    const Matrix means = mean_net_.forward(states, tape);
    const Vector inv_var = (Scalar(-2) * log_std_).array().exp().matrix();
    const Matrix diff = actions - means;
    // d/dmean = w * (a - mean) / var
    const Matrix d_mean = (diff.array().colwise() * inv_var.array()).rowwise() * weights.transpose().array();
    Vector grad(num_params());
    grad.head(mean_net_.num_params()) = mean_net_.backward(tape, d_mean);
    // d/dlog_std = w * ((a - mean)^2 / var - 1)
    const Matrix z2 = diff.array().square().colwise() * inv_var.array();
    grad.tail(act_dim()) = ((z2.array() - Scalar(1)).rowwise() * weights.transpose().array()).rowwise().sum();
    return grad;
  }

  Vector flatten() const {
    Vector out(num_params());
    out << mean_net_.flatten(), log_std_;
    return out;
  }

  template <typename Derived>
  void unflatten(const Eigen::MatrixBase<Derived>& flat) {
    if (flat.size() != num_params()) throw std::invalid_argument("GaussianPolicy::unflatten: size mismatch");
    mean_net_.unflatten(flat.head(mean_net_.num_params()));
    log_std_ = flat.tail(act_dim());
  }

  bool all_finite() const { return mean_net_.all_finite() && log_std_.allFinite(); }

 private:
  Scalar log_norm_const() const {
    return -log_std_.sum() - Scalar(0.5) * static_cast<Scalar>(act_dim()) * std::log(Scalar(2) * std::numbers::pi_v<Scalar>);
  }

  template <typename DA, typename DM>
  Scalar log_density(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DM>& mean) const {
    if (a.size() != act_dim()) throw std::invalid_argument("action dimension mismatch");
    const Vector inv_var = (Scalar(-2) * log_std_).array().exp().matrix();
    return Scalar(-0.5) * ((a - mean).array().square() * inv_var.array()).sum() + log_norm_const();
  }

  void check_params() const {
    if (!log_std_.allFinite()) throw std::runtime_error("non-finite policy log_std");
  }

  Mlp<Scalar> mean_net_;
  Vector log_std_;
};

/// Mean KL(new || old) over column-batched states for two policies sharing the architecture.
template <typename Scalar, typename Derived>
Scalar mean_kl(const GaussianPolicy<Scalar>& new_policy, const GaussianPolicy<Scalar>& old_policy,
               const Eigen::MatrixBase<Derived>& states) {
  const Mat<Scalar> mu_new = new_policy.mean_batch(states);
  const Mat<Scalar> mu_old = old_policy.mean_batch(states);
  const Vec<Scalar> log_ratio = old_policy.log_std() - new_policy.log_std();
  const Vec<Scalar> var_new = (Scalar(2) * new_policy.log_std()).array().exp().matrix();
  const Vec<Scalar> inv_var_old = (Scalar(-2) * old_policy.log_std()).array().exp().matrix();
  const Scalar per_state_const =
      (log_ratio.array() + Scalar(0.5) * var_new.array() * inv_var_old.array() - Scalar(0.5)).sum();
  const Scalar mean_term =
      Scalar(0.5) * ((mu_new - mu_old).array().square().colwise() * inv_var_old.array()).colwise().sum().mean();
  return per_state_const + mean_term;
}

/// Value head: scalar Mlp output for one state and its flat parameter gradient.
template <typename Scalar, typename Derived>
std::pair<Scalar, Vec<Scalar>> value_forward_and_grad(const Mlp<Scalar>& net, const Eigen::MatrixBase<Derived>& s) {
  if (net.output_dim() != 1) throw std::invalid_argument("value head must have one output");
  typename Mlp<Scalar>::Tape tape;
  const Mat<Scalar> x = s;
  const Scalar v = net.forward(x, tape)(0, 0);
  return {v, net.backward(tape, Mat<Scalar>::Ones(1, 1))};
}

/// Adaptive-moment optimizer over a flat parameter vector (minimizes).
template <typename Scalar>
class Adam {
 public:
  using Vector = Vec<Scalar>;

  Adam() = default;
  Adam(Eigen::Index n, Scalar lr, Scalar beta1 = Scalar(0.9), Scalar beta2 = Scalar(0.999),
       Scalar eps = Scalar(1e-8))
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps), m_(Vector::Zero(n)), v_(Vector::Zero(n)) {}

  void step(Vector& params, const Vector& grad) {
    if (grad.size() != m_.size() || params.size() != m_.size())
      throw std::invalid_argument("Adam::step: size mismatch");
    if (!grad.allFinite()) throw std::runtime_error("Adam::step: non-finite gradient");
    ++t_;
    m_ = beta1_ * m_ + (Scalar(1) - beta1_) * grad;
    v_ = beta2_ * v_ + (Scalar(1) - beta2_) * grad.cwiseAbs2();
    const Scalar c1 = Scalar(1) - std::pow(beta1_, static_cast<Scalar>(t_));
    const Scalar c2 = Scalar(1) - std::pow(beta2_, static_cast<Scalar>(t_));
    params.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
    if (!params.allFinite()) throw std::runtime_error("Adam::step: parameters became non-finite");
  }

  long steps() const { return t_; }

 private:
  Scalar lr_ = Scalar(3e-4);
  Scalar beta1_ = Scalar(0.9);
  Scalar beta2_ = Scalar(0.999);
  Scalar eps_ = Scalar(1e-8);
  Vector m_;
  Vector v_;
  long t_ = 0;
};

/// Policy plus reward- and cost-value heads, as saved to disk.
struct Checkpoint {
  GaussianPolicy<double> policy;
  Mlp<double> value_reward;
  Mlp<double> value_cost;

  int obs_dim() const { return static_cast<int>(policy.obs_dim()); }
  int act_dim() const { return static_cast<int>(policy.act_dim()); }
  int hidden_dim() const { return policy.mean_net().sizes().at(1); }
};

/// Freshly initialized networks (hidden gain 1, policy output gain 0.01, value output gain 1).
Checkpoint make_checkpoint(int obs_dim, int act_dim, int hidden_dim, double log_std_init, std::uint64_t seed);

/// Text format: header lines with shapes and log_std bounds, then one parameter per line
/// with 17 significant digits. Reading reproduces the parameters bit-exactly.
void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace safecor

#endif  // SAFECOR_POLICY_NET_HPP

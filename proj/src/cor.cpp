#include "safecor/cor.hpp"

#include "safecor/text_io.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <sstream>

namespace safecor {

std::string to_string(DemoLabel label) {
  switch (label) {
    case DemoLabel::reward_expert: return "reward_expert";
    case DemoLabel::safe_expert: return "safe_expert";
    case DemoLabel::other: return "other";
  }
  return "other";
}

DemoLabel demo_label_from_string(const std::string& text) {
  if (text == "reward_expert") return DemoLabel::reward_expert;
  if (text == "safe_expert") return DemoLabel::safe_expert;
  return DemoLabel::other;
}

void CorParams::validate() const {
  if (!(alpha > 0.0)) throw std::invalid_argument("cor alpha must be > 0");
  if (!(lambda_r >= 0.0) || !(lambda_c >= 0.0)) throw std::invalid_argument("cor lambdas must be >= 0");
}

// ---------------------------------------------------------------------------

Eigen::VectorXd FeatureMap::apply(const Eigen::VectorXd& s) const {
  Eigen::VectorXd out;
  if (mask.empty()) {
    out = s;
  } else {
    out.resize(static_cast<Eigen::Index>(mask.size()));
    for (std::size_t i = 0; i < mask.size(); ++i) {
      if (mask[i] < 0 || mask[i] >= s.size()) throw std::invalid_argument("feature mask index out of range");
      out(static_cast<Eigen::Index>(i)) = s(mask[i]);
    }
  }
  if (scale.size() > 0) out = ((out - offset).array() / scale.array()).matrix();
  return out;
}

Eigen::MatrixXd FeatureMap::apply_rows(const Eigen::MatrixXd& states) const {
  if (identity()) return states;
  Eigen::MatrixXd first = apply(states.row(0).transpose());
  Eigen::MatrixXd out(states.rows(), first.size());
  for (Eigen::Index r = 0; r < states.rows(); ++r) out.row(r) = apply(states.row(r).transpose()).transpose();
  return out;
}

CorModel::CorModel(DemoSet reward_set, DemoSet safe_set, CorParams params, std::vector<int> mask,
                   bool standardize)
    : params_(params) {
  params_.validate();
  if (reward_set.empty() || safe_set.empty()) throw std::invalid_argument("CorModel: empty demonstration set");
  if (reward_set.dim() != safe_set.dim())
    throw std::invalid_argument("CorModel: demo set dimensions differ (" + std::to_string(reward_set.dim()) +
                                " vs " + std::to_string(safe_set.dim()) + ")");
  raw_dim_ = reward_set.dim();
  features_.mask = std::move(mask);
  if (standardize) {
    FeatureMap masked{features_.mask, {}, {}};
    const Eigen::MatrixXd a = masked.apply_rows(reward_set.states());
    const Eigen::MatrixXd b = masked.apply_rows(safe_set.states());
    Eigen::MatrixXd all(a.rows() + b.rows(), a.cols());
    all << a, b;
    features_.offset = all.colwise().mean().transpose();
    const Eigen::MatrixXd centered = all.rowwise() - features_.offset.transpose();
    features_.scale =
        (centered.array().square().colwise().mean().sqrt().transpose()).max(1e-8).matrix();
  }
  if (features_.identity()) {
    reward_ = std::move(reward_set);
    safe_ = std::move(safe_set);
  } else {
    reward_ = DemoSet(features_.apply_rows(reward_set.states()), reward_set.label(), reward_set.label_text());
    safe_ = DemoSet(features_.apply_rows(safe_set.states()), safe_set.label(), safe_set.label_text());
  }
}

double CorModel::operator()(const StateVec& s) const {
  if (s.size() != raw_dim_)
    throw std::invalid_argument("CoR: state dimension " + std::to_string(s.size()) + " != demo dimension " +
                                std::to_string(raw_dim_));
  if (features_.identity()) return cor(s, reward_, safe_, params_);
  return cor(features_.apply(s), reward_, safe_, params_);
}

// ---------------------------------------------------------------------------

Trajectory annotate_cor(const Trajectory& traj, const CorModel& model) {
  std::vector<double> values;
  values.reserve(traj.steps.size());
  for (const auto& step : traj.steps) values.push_back(model(step.state));
  Trajectory out = traj;
  for (std::size_t t = 0; t < values.size(); ++t) out.steps[t].cor = values[t];
  return out;
}

Trajectory annotate_cor(const Trajectory& traj, const DemoSet& reward_set, const DemoSet& safe_set,
                        const CorParams& params) {
  params.validate();
  if (reward_set.empty() || safe_set.empty()) throw std::invalid_argument("annotate_cor: empty demonstration set");
  std::vector<double> values;
  values.reserve(traj.steps.size());
  for (const auto& step : traj.steps) values.push_back(cor(step.state, reward_set, safe_set, params));
  Trajectory out = traj;
  for (std::size_t t = 0; t < values.size(); ++t) out.steps[t].cor = values[t];
  return out;
}

ShapedChannels augment(const Trajectory& traj, const CorParams& params, CorChannels channels) {
  params.validate();
  ShapedChannels out;
  out.rewards.reserve(traj.steps.size());
  out.costs.reserve(traj.steps.size());
  for (std::size_t t = 0; t < traj.steps.size(); ++t) {
    const auto& step = traj.steps[t];
    if (!step.cor) throw std::invalid_argument("augment: step " + std::to_string(t) + " has no CoR annotation");
    out.rewards.push_back(channels.reward ? step.reward + params.lambda_r * *step.cor : step.reward);
    out.costs.push_back(channels.cost ? step.cost + params.lambda_c * *step.cor : step.cost);
  }
  return out;
}

DemoSet build_demo_set(std::span<const Trajectory> trajectories, DemoLabel label, std::size_t max_states,
                       std::uint64_t subsample_seed) {
  std::size_t total = 0;
  Eigen::Index dim = -1;
  for (const auto& traj : trajectories) {
    for (const auto& step : traj.steps) {
      if (dim < 0) dim = step.state.size();
      if (step.state.size() != dim) throw std::invalid_argument("build_demo_set: inconsistent state dimensions");
      ++total;
    }
  }
  if (total == 0) throw std::invalid_argument("build_demo_set: no states in the given trajectories");
  if (max_states == 0) throw std::invalid_argument("build_demo_set: max_states must be >= 1");

  std::vector<std::size_t> keep(total);
  std::iota(keep.begin(), keep.end(), std::size_t{0});
  if (total > max_states) {
    std::vector<std::size_t> picked;
    picked.reserve(max_states);
    std::mt19937_64 rng(subsample_seed);
    std::sample(keep.begin(), keep.end(), std::back_inserter(picked), max_states, rng);
    keep = std::move(picked);
  }

  Eigen::MatrixXd states(static_cast<Eigen::Index>(keep.size()), dim);
  std::size_t flat = 0;
  std::size_t next = 0;
  for (const auto& traj : trajectories) {
    for (const auto& step : traj.steps) {
      if (next < keep.size() && keep[next] == flat) {
        states.row(static_cast<Eigen::Index>(next)) = step.state.transpose();
        ++next;
      }
      ++flat;
    }
  }
  return DemoSet(std::move(states), label);
}

// ---------------------------------------------------------------------------
// File format

namespace {

std::string render_rows(const Eigen::MatrixXd& rows, const std::string& label) {
  std::ostringstream out;
  out << "dim=" << rows.cols() << " count=" << rows.rows() << " label=" << label << '\n';
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    for (Eigen::Index c = 0; c < rows.cols(); ++c) {
      if (c > 0) out << ' ';
      out << format_double(rows(r, c));
    }
    out << '\n';
  }
  return out.str();
}

struct ParsedRows {
  Eigen::MatrixXd rows;
  std::string label;
};

ParsedRows parse_rows(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(path.string() + ": missing header line");
  long long dim = -1;
  long long count = -1;
  std::string label;
  for (auto token : split_ws(line)) {
    const auto eq = token.find('=');
    if (eq == std::string_view::npos) throw std::runtime_error(path.string() + ":1: malformed header token");
    const auto key = token.substr(0, eq);
    const auto value = token.substr(eq + 1);
    if (key == "dim") dim = parse_int(value);
    else if (key == "count") count = parse_int(value);
    else if (key == "label") label = std::string(value);
    else throw std::runtime_error(path.string() + ":1: unknown header key '" + std::string(key) + "'");
  }
  if (dim < 1 || count < 0 || label.empty())
    throw std::runtime_error(path.string() + ":1: header must carry dim>=1, count>=0 and label");

  ParsedRows out{Eigen::MatrixXd(count, dim), label};
  long long row = 0;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto tokens = split_ws(line);
    if (tokens.empty()) continue;
    if (row >= count) throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": more rows than count");
    if (static_cast<long long>(tokens.size()) != dim)
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": expected " + std::to_string(dim) +
                               " values, found " + std::to_string(tokens.size()));
    for (long long c = 0; c < dim; ++c) {
      try {
        out.rows(row, c) = parse_double(tokens[static_cast<std::size_t>(c)]);
      } catch (const std::invalid_argument& e) {
        throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
      }
    }
    ++row;
  }
  if (row != count)
    throw std::runtime_error(path.string() + ": header count " + std::to_string(count) + " but found " +
                             std::to_string(row) + " rows");
  return out;
}

}  // namespace

void write_demo_file(const std::filesystem::path& path, const DemoSet& set) {
  if (set.empty()) throw std::invalid_argument("write_demo_file: empty demo set");
  write_text_file(path, render_rows(set.states(), set.label_text()));
}

DemoSet read_demo_file(const std::filesystem::path& path) {
  auto parsed = parse_rows(path);
  if (parsed.rows.rows() < 1) throw std::runtime_error(path.string() + ": demo file has no states");
  return DemoSet(std::move(parsed.rows), demo_label_from_string(parsed.label), parsed.label);
}

void write_demo_pairs(const std::filesystem::path& path, const DemoPairs& pairs, const std::string& label) {
  if (pairs.states.rows() != pairs.actions.rows())
    throw std::invalid_argument("write_demo_pairs: state and action counts differ");
  Eigen::MatrixXd rows(pairs.states.rows(), pairs.states.cols() + pairs.actions.cols());
  rows << pairs.states, pairs.actions;
  write_text_file(path, render_rows(rows, label));
}

DemoPairs read_demo_pairs(const std::filesystem::path& path, int obs_dim) {
  const auto parsed = parse_rows(path);
  if (parsed.rows.cols() <= obs_dim)
    throw std::runtime_error(path.string() + ": pair file dimension " + std::to_string(parsed.rows.cols()) +
                             " leaves no action columns for obs_dim " + std::to_string(obs_dim));
  return {parsed.rows.leftCols(obs_dim), parsed.rows.rightCols(parsed.rows.cols() - obs_dim)};
}

}  // namespace safecor

#include "safecor/policy_net.hpp"

#include "safecor/text_io.hpp"

#include <sstream>

namespace safecor {

Checkpoint make_checkpoint(int obs_dim, int act_dim, int hidden_dim, double log_std_init, std::uint64_t seed) {
  if (obs_dim < 1 || act_dim < 1 || hidden_dim < 1) throw std::invalid_argument("network dimensions must be positive");
  std::mt19937_64 rng(seed);
  Checkpoint ckpt{GaussianPolicy<double>(obs_dim, act_dim, hidden_dim, log_std_init),
                  Mlp<double>({obs_dim, hidden_dim, hidden_dim, 1}), Mlp<double>({obs_dim, hidden_dim, hidden_dim, 1})};
  orthogonal_init(ckpt.policy.mean_net(), rng, 1.0, 0.01);
  orthogonal_init(ckpt.value_reward, rng, 1.0, 1.0);
  orthogonal_init(ckpt.value_cost, rng, 1.0, 1.0);
  return ckpt;
}

namespace {

constexpr const char* kMagic = "safecor-checkpoint 1";

std::string shape_line(const std::string& name, const Mlp<double>& net) {
  std::string line = "network " + name;
  for (int s : net.sizes()) line += " " + std::to_string(s);
  return line;
}

std::vector<int> parse_shape(const std::string& line, const std::string& expected_name) {
  const auto tokens = split_ws(line);
  if (tokens.size() < 4 || tokens[0] != "network" || tokens[1] != expected_name)
    throw std::invalid_argument("expected 'network " + expected_name + " ...'");
  std::vector<int> sizes;
  for (std::size_t i = 2; i < tokens.size(); ++i) sizes.push_back(static_cast<int>(parse_int(tokens[i])));
  return sizes;
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ostringstream out;
  out << kMagic << '\n';
  out << "obs_dim=" << ckpt.obs_dim() << " act_dim=" << ckpt.act_dim() << " hidden_dim=" << ckpt.hidden_dim() << '\n';
  out << "log_std_bounds " << format_double(GaussianPolicy<double>::kLogStdMin) << ' '
      << format_double(GaussianPolicy<double>::kLogStdMax) << '\n';
  out << shape_line("policy", ckpt.policy.mean_net()) << '\n';
  out << shape_line("value_reward", ckpt.value_reward) << '\n';
  out << shape_line("value_cost", ckpt.value_cost) << '\n';
  const Eigen::VectorXd p = ckpt.policy.flatten();
  const Eigen::VectorXd vr = ckpt.value_reward.flatten();
  const Eigen::VectorXd vc = ckpt.value_cost.flatten();
  out << "params " << p.size() + vr.size() + vc.size() << '\n';
  for (const Eigen::VectorXd* block : {&p, &vr, &vc})
    for (Eigen::Index i = 0; i < block->size(); ++i) out << format_double((*block)(i)) << '\n';
  write_text_file(path, out.str());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  auto fail = [&](const std::string& what) -> std::runtime_error {
    return std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": " + what);
  };
  auto next_line = [&]() -> const std::string& {
    if (!std::getline(in, line)) throw fail("truncated checkpoint");
    ++line_no;
    return line;
  };
  try {
    if (next_line() != kMagic) throw fail("bad magic line");
    int obs_dim = -1, act_dim = -1, hidden_dim = -1;
    for (const auto& tok : split_ws(next_line())) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos) throw fail("malformed token '" + tok + "'");
      const int value = static_cast<int>(parse_int(tok.substr(eq + 1)));
      const auto key = tok.substr(0, eq);
      if (key == "obs_dim") obs_dim = value;
      else if (key == "act_dim") act_dim = value;
      else if (key == "hidden_dim") hidden_dim = value;
      else throw fail("unknown key '" + key + "'");
    }
    if (obs_dim < 1 || act_dim < 1 || hidden_dim < 1) throw fail("missing or non-positive dimensions");
    const auto bounds = split_ws(next_line());
    if (bounds.size() != 3 || bounds[0] != "log_std_bounds" ||
        parse_double(bounds[1]) != GaussianPolicy<double>::kLogStdMin ||
        parse_double(bounds[2]) != GaussianPolicy<double>::kLogStdMax)
      throw fail("unsupported log_std bounds");

    const auto policy_sizes = parse_shape(next_line(), "policy");
    if (policy_sizes.size() != 4 || policy_sizes.front() != obs_dim || policy_sizes.back() != act_dim ||
        policy_sizes[1] != hidden_dim || policy_sizes[2] != hidden_dim)
      throw fail("policy shape disagrees with header");
    const auto vr_sizes = parse_shape(next_line(), "value_reward");
    const auto vc_sizes = parse_shape(next_line(), "value_cost");
    for (const auto* sizes : {&vr_sizes, &vc_sizes})
      if (sizes->front() != obs_dim || sizes->back() != 1) throw fail("value head shape disagrees with header");

    Checkpoint ckpt{GaussianPolicy<double>(obs_dim, act_dim, hidden_dim), Mlp<double>(vr_sizes), Mlp<double>(vc_sizes)};
    const auto count_tokens = split_ws(next_line());
    const Eigen::Index np = ckpt.policy.num_params();
    const Eigen::Index nr = ckpt.value_reward.num_params();
    const Eigen::Index nc = ckpt.value_cost.num_params();
    if (count_tokens.size() != 2 || count_tokens[0] != "params" || parse_int(count_tokens[1]) != np + nr + nc)
      throw fail("parameter count disagrees with shapes");
    Eigen::VectorXd flat(np + nr + nc);
    for (Eigen::Index i = 0; i < flat.size(); ++i) flat(i) = parse_double(next_line());
    while (std::getline(in, line)) {
      ++line_no;
      if (!split_ws(line).empty()) throw fail("trailing data");
    }

    ckpt.policy.unflatten(flat.head(np));
    ckpt.value_reward.unflatten(flat.segment(np, nr));
    ckpt.value_cost.unflatten(flat.tail(nc));
    if (!ckpt.policy.all_finite() || !ckpt.value_reward.all_finite() || !ckpt.value_cost.all_finite())
      throw fail("non-finite parameters");
    return ckpt;
  } catch (const std::invalid_argument& e) {
    throw fail(e.what());
  }
}

}  // namespace safecor

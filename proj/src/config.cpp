#include "prefsdm/config.hpp"

#include "prefsdm/error.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <openssl/sha.h>

#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace prefsdm {
namespace {

std::string fmt(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

template <typename T>
std::string join(const std::vector<T>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += ", ";
    if constexpr (std::is_floating_point_v<T>) {
      out += fmt(xs[i]);
    } else {
      out += std::to_string(xs[i]);
    }
  }
  return out;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T parse_number(const std::string& key, std::string_view text) {
  const std::string s = trim(text);
  T v{};
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size() || s.empty()) {
    fail(Errc::config, "config key '" + key + "': cannot parse '" + s + "'");
  }
  return v;
}

template <typename T>
std::vector<T> parse_list(const std::string& key, const std::string& text) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<T>(key, item));
  return out;
}

bool parse_bool(const std::string& key, const std::string& text) {
  const std::string s = trim(text);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  fail(Errc::config, "config key '" + key + "': expected true/false, got '" + s + "'");
}

void apply(ExperimentConfig& c, const std::string& key, const std::string& v) {
  InferenceConfig& inf = c.inference;
  SimulationConstants& sim = c.sim;
  if (key == "profile") {
    c.profile = trim(v);
  } else if (key == "range_levels") {
    c.ranges = parse_list<double>(key, v);
  } else if (key == "prop_random_levels") {
    c.prop_random = parse_list<double>(key, v);
  } else if (key == "n_total_levels") {
    c.n_total = parse_list<int>(key, v);
  } else if (key == "replicates") {
    c.replicates = parse_number<int>(key, v);
  } else if (key == "master_seed") {
    c.master_seed = parse_number<std::uint64_t>(key, v);
  } else if (key == "grid_nodes_x") {
    sim.grid_nx = parse_number<int>(key, v);
  } else if (key == "grid_nodes_y") {
    sim.grid_ny = parse_number<int>(key, v);
  } else if (key == "sim_eta") {
    sim.eta = parse_number<double>(key, v);
  } else if (key == "sim_tau") {
    sim.tau = parse_number<double>(key, v);
  } else if (key == "sim_alpha") {
    sim.alpha = parse_number<double>(key, v);
  } else if (key == "sim_sigma") {
    sim.sigma = parse_number<double>(key, v);
  } else if (key == "matern_nu") {
    sim.nu = parse_number<double>(key, v);
    inf.nu = sim.nu;
  } else if (key == "n_test") {
    sim.n_test = parse_number<int>(key, v);
  } else if (key == "fit_starts") {
    inf.starts = parse_number<int>(key, v);
  } else if (key == "fit_max_evals") {
    inf.max_evals = parse_number<int>(key, v);
  } else if (key == "fit_outer_tol") {
    inf.outer_tol = parse_number<double>(key, v);
  } else if (key == "fit_initial_step") {
    inf.initial_step = parse_number<double>(key, v);
  } else if (key == "fit_start_jitter") {
    inf.start_jitter = parse_number<double>(key, v);
  } else if (key == "fit_inner_tol") {
    inf.newton.grad_tol = parse_number<double>(key, v);
  } else if (key == "fit_inner_max_iter") {
    inf.newton.max_iter = parse_number<int>(key, v);
  } else if (key == "waic_draws") {
    c.waic_draws = parse_number<int>(key, v);
  } else if (key == "archive_datasets") {
    c.archive_datasets = parse_bool(key, v);
  } else if (key == "jobs") {
    c.jobs = parse_number<int>(key, v);
  } else {
    fail(Errc::config, "unknown config key '" + key + "'");
  }
}

}  // namespace

ExperimentConfig ExperimentConfig::full() {
  ExperimentConfig c;
  c.profile = "full";
  c.ranges = {0.2, 0.5, 0.8};
  c.prop_random = {0.10, 0.25, 0.50, 0.75, 0.90};
  c.n_total = {60, 100, 160, 200};
  return c;
}

ExperimentConfig ExperimentConfig::desk() {
  ExperimentConfig c;
  c.profile = "desk";
  c.ranges = {0.2, 0.8};
  c.prop_random = {0.10, 0.90};
  c.n_total = {60, 200};
  return c;
}

ExperimentConfig ExperimentConfig::for_profile(std::string_view profile) {
  if (profile == "desk") return desk();
  if (profile == "full") return full();
  fail(Errc::config, "unknown profile '" + std::string(profile) + "' (expected desk or full)");
}

void ExperimentConfig::validate() const {
  auto bad = [](const std::string& msg) { fail(Errc::config, msg); };
  if (ranges.empty() || prop_random.empty() || n_total.empty()) bad("factor lists must be nonempty");
  for (double r : ranges) {
    if (!(r > 0.0)) bad("range levels must be positive");
  }
  for (double p : prop_random) {
    if (!(p >= 0.0 && p <= 1.0)) bad("prop_random levels must lie in [0, 1]");
  }
  for (int n : n_total) {
    if (n < 1) bad("n_total levels must be >= 1");
  }
  if (replicates < 1) bad("replicates must be >= 1");
  if (sim.grid_nx < 2 || sim.grid_ny < 2) bad("grid needs at least 2 nodes per axis");
  if (!(sim.tau >= 0.0) || !(sim.sigma > 0.0) || !(sim.nu > 0.0)) bad("invalid simulation constants");
  if (sim.n_test < 1) bad("n_test must be >= 1");
  if (inference.starts < 1 || inference.max_evals < 1) bad("invalid inference settings");
  if (waic_draws < 2) bad("waic_draws must be >= 2");
  if (jobs < 1) bad("jobs must be >= 1");
}

std::string ExperimentConfig::to_text() const {
  std::ostringstream os;
  os << "profile = " << profile << '\n'
     << "range_levels = " << join(ranges) << '\n'
     << "prop_random_levels = " << join(prop_random) << '\n'
     << "n_total_levels = " << join(n_total) << '\n'
     << "replicates = " << replicates << '\n'
     << "master_seed = " << master_seed << '\n'
     << "grid_nodes_x = " << sim.grid_nx << '\n'
     << "grid_nodes_y = " << sim.grid_ny << '\n'
     << "sim_eta = " << fmt(sim.eta) << '\n'
     << "sim_tau = " << fmt(sim.tau) << '\n'
     << "sim_alpha = " << fmt(sim.alpha) << '\n'
     << "sim_sigma = " << fmt(sim.sigma) << '\n'
     << "matern_nu = " << fmt(sim.nu) << '\n'
     << "n_test = " << sim.n_test << '\n'
     << "fit_starts = " << inference.starts << '\n'
     << "fit_max_evals = " << inference.max_evals << '\n'
     << "fit_outer_tol = " << fmt(inference.outer_tol) << '\n'
     << "fit_initial_step = " << fmt(inference.initial_step) << '\n'
     << "fit_start_jitter = " << fmt(inference.start_jitter) << '\n'
     << "fit_inner_tol = " << fmt(inference.newton.grad_tol) << '\n'
     << "fit_inner_max_iter = " << inference.newton.max_iter << '\n'
     << "waic_draws = " << waic_draws << '\n'
     << "archive_datasets = " << (archive_datasets ? "true" : "false") << '\n';
  return os.str();
}

std::string ExperimentConfig::hash() const { return sha256_hex(to_text()); }

ExperimentConfig parse_config(std::string_view text, std::string_view base) {
  boost::property_tree::ptree tree;
  std::istringstream is{std::string(text)};
  try {
    boost::property_tree::ini_parser::read_ini(is, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    fail(Errc::config, std::string("malformed config: ") + e.what());
  }
  std::string profile(base);
  for (const auto& [key, node] : tree) {
    if (!node.empty()) fail(Errc::config, "config must be flat; found section [" + key + "]");
    if (key == "profile") profile = trim(node.data());
  }
  ExperimentConfig c = ExperimentConfig::for_profile(profile);
  for (const auto& [key, node] : tree) apply(c, key, node.data());
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path, std::string_view base) {
  std::ifstream in(path);
  if (!in) fail(Errc::config, "cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), base);
}

std::string sha256_hex(std::string_view data) {
  unsigned char digest[SHA256_DIGEST_LENGTH];
  SHA256(reinterpret_cast<const unsigned char*>(data.data()), data.size(), digest);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned char b : digest) {
    out += kHex[b >> 4];
    out += kHex[b & 0xf];
  }
  return out;
}

}  // namespace prefsdm

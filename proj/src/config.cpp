#include "sparsemm/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

#include "sparsemm/text.hpp"

namespace sparsemm {

namespace {

bool parse_bool(std::string_view value, std::string_view key) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw std::invalid_argument(fmt::format("{}: expected true or false, got '{}'", key, value));
}

DesignKind parse_design(std::string_view value) {
  if (value == "orthonormal") return DesignKind::Orthonormal;
  if (value == "correlated") return DesignKind::GaussianCorrelated;
  throw std::invalid_argument(fmt::format("scenario.design: expected orthonormal or correlated, got '{}'", value));
}

using Setter = std::function<void(ExperimentConfig&, std::string_view)>;

const std::map<std::string, Setter, std::less<>>& setters() {
  static const std::map<std::string, Setter, std::less<>> table{
      {"scenario.n_obs", [](auto& c, auto v) { c.scenario.n_obs = static_cast<int>(parse_integer(v, "scenario.n_obs")); }},
      {"scenario.p", [](auto& c, auto v) { c.scenario.p = static_cast<int>(parse_integer(v, "scenario.p")); }},
      {"scenario.beta_true", [](auto& c, auto v) { c.scenario.beta_true = parse_real_list(v, "scenario.beta_true"); }},
      {"scenario.noise_sd", [](auto& c, auto v) { c.scenario.noise_sd = parse_real(v, "scenario.noise_sd"); }},
      {"scenario.design", [](auto& c, auto v) { c.scenario.design = parse_design(v); }},
      {"scenario.rho", [](auto& c, auto v) { c.scenario.rho = parse_real(v, "scenario.rho"); }},
      {"methods",
       [](auto& c, auto v) {
         c.methods.clear();
         for (const auto& name : split_list(v)) c.methods.push_back(parse_method_kind(name));
       }},
      {"lambda_grid", [](auto& c, auto v) { c.lambda_grid = parse_real_list(v, "lambda_grid"); }},
      {"pi", [](auto& c, auto v) { c.pi_grid = parse_real_list(v, "pi"); }},
      {"tau", [](auto& c, auto v) { c.tau_grid = parse_real_list(v, "tau"); }},
      {"k", [](auto& c, auto v) { c.k = static_cast<int>(parse_integer(v, "k")); }},
      {"replicates", [](auto& c, auto v) { c.replicates = static_cast<int>(parse_integer(v, "replicates")); }},
      {"seed",
       [](auto& c, auto v) {
         const long long s = parse_integer(v, "seed");
         if (s < 0) throw std::invalid_argument("seed must be nonnegative");
         c.seed = static_cast<std::uint64_t>(s);
       }},
      {"output", [](auto& c, auto v) { c.output = std::string(v); }},
      {"tol", [](auto& c, auto v) { c.tol = parse_real(v, "tol"); }},
      {"max_iter", [](auto& c, auto v) { c.max_iter = static_cast<int>(parse_integer(v, "max_iter")); }},
      {"scad_a", [](auto& c, auto v) { c.scad_a = parse_real(v, "scad_a"); }},
      {"allow_marginal_approx",
       [](auto& c, auto v) { c.allow_marginal_approx = parse_bool(v, "allow_marginal_approx"); }},
      {"threads", [](auto& c, auto v) { c.threads = static_cast<int>(parse_integer(v, "threads")); }},
  };
  return table;
}

}  // namespace

ExperimentConfig parse_experiment_config(std::string_view text) {
  ExperimentConfig config;
  std::set<std::string, std::less<>> seen;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw std::invalid_argument(fmt::format("config line {}: expected 'key = value'", line_no));
    }
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view value = trim(line.substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) throw std::invalid_argument(fmt::format("config line {}: unknown key '{}'", line_no, key));
    if (!seen.insert(std::string(key)).second) {
      throw std::invalid_argument(fmt::format("config line {}: key '{}' given twice", line_no, key));
    }
    try {
      it->second(config, value);
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument(fmt::format("config line {}: {}", line_no, e.what()));
    }
  }
  return config;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(fmt::format("cannot open '{}'", path));
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

ExperimentConfig load_experiment_config(const std::string& path) { return parse_experiment_config(read_text_file(path)); }

}  // namespace sparsemm

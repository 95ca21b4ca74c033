#pragma once

#include <string>
#include <string_view>

#include "sparsemm/bench.hpp"

namespace sparsemm {

/// Parses `key = value` lines ('#' starts a comment). Recognized keys:
///   scenario.n_obs, scenario.p, scenario.beta_true, scenario.noise_sd,
///   scenario.design (orthonormal | correlated), scenario.rho,
///   methods, lambda_grid, pi, tau, k, replicates, seed, output,
///   tol, max_iter, scad_a, allow_marginal_approx, threads.
/// Unknown or repeated keys throw std::invalid_argument with the line number.
ExperimentConfig parse_experiment_config(std::string_view text);

ExperimentConfig load_experiment_config(const std::string& path);

std::string read_text_file(const std::string& path);

}  // namespace sparsemm

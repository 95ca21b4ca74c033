#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "sparsemm/mm_solver.hpp"

namespace sparsemm {

// Candidate latent densities h(z) whose moment generating function should
// reproduce exp(-g(u)) for one coordinate.

/// All mass at `location`.
struct PointMass {
  double location = 0.0;
};

/// Discretized density: `weights[i]` is the quadrature mass attached to
/// `points[i]` (density value times trapezoid weight), so expectations
/// reduce to weighted sums. Weights are nonnegative and sum to 1.
struct GridDensity {
  std::vector<double> points;
  std::vector<double> weights;
};

/// Z = -E with E ~ Exponential(rate). E[exp(uZ)] = rate / (rate + u).
struct NegExponential {
  double rate = 1.0;
};

using LatentDensity = std::variant<PointMass, GridDensity, NegExponential>;

/// Throws std::invalid_argument when the density breaks its invariants.
void validate(const LatentDensity& h);
std::string describe(const LatentDensity& h);

/// Builds a GridDensity by trapezoid discretization of `density` on `points`,
/// renormalized to unit mass.
GridDensity discretize_density(const std::function<double(double)>& density, std::vector<double> points);

/// Least-squares fit of simplex weights on `points` so that the grid MGF
/// matches exp(-target_g(u)) on `u_grid` (projected gradient). Used to
/// screen candidate penalties that have no closed-form lift.
GridDensity fit_grid_density(const std::function<double(double)>& target_g, std::vector<double> points,
                             std::span<const double> u_grid, int iterations = 5000);

/// Moments of the exponentially tilted density exp(uz) h(z) / M(u).
struct TiltedMoments {
  double log_mgf = 0.0;
  double mgf = 0.0;
  double mean = 0.0;
  double variance = 0.0;
  /// E[log h(Z)] under the tilted law; 0 for a point mass by convention.
  double log_density_mean = 0.0;
};

/// Throws std::domain_error outside the MGF convergence region.
TiltedMoments tilted_moments(const LatentDensity& h, double u);

/// Max over coordinates and u in u_grid of |M_h(u) - exp(-g_j(u))| / exp(-g_j(u)).
/// `h` holds one density per coordinate, or a single density for all of them.
double verify_mgf_representation(const Decomposition& decomp, std::span<const LatentDensity> h,
                                 std::span<const double> u_grid);

/// E(Z | u) = -g'(u) for coordinate j, from the derivative oracle.
double latent_posterior_mean(const Decomposition& decomp, double u, std::size_t j = 0);

/// f(theta) + sum_j |theta_j| E(Z_j | |theta_t,j|) + sum_j E[log h_j(Z_j) | |theta_t,j|].
double em_q(const Decomposition& decomp, std::span<const LatentDensity> h, const Eigen::VectorXd& theta,
            const Eigen::VectorXd& theta_t);

struct ConcavityCertificate {
  bool concave = true;
  /// Largest g'' estimate (second divided differences of g) over the grid.
  double worst_second_derivative = 0.0;
  double worst_at = 0.0;
  /// Max relative gap between g''(u) and -Var(Z | u); only set when a lift is given.
  double variance_identity_max_rel_error = 0.0;
  bool variance_identity_checked = false;
  bool variance_identity_ok = true;
};

/// Necessary-condition screen: g concave on the grid for every coordinate.
/// When a lift is supplied, also compares g'' with -Var(Z|u) on the grid.
ConcavityCertificate concavity_certificate(const Decomposition& decomp, std::span<const double> u_grid,
                                           std::span<const LatentDensity> h = {});

/// Central finite-difference estimate of g_j''(u) from the derivative oracle
/// (one-sided near the origin).
double g_second_derivative(const Decomposition& decomp, std::size_t j, double u);

enum class EquivalenceVerdict { EquivalentUpToConstant, NotEquivalent, MgfInvalid };
std::string to_string(EquivalenceVerdict verdict);

struct EquivalenceReport {
  double max_constant_deviation = 0.0;
  double mgf_max_rel_error = 0.0;
  bool concavity_ok = false;
  double mean_identity_max_error = 0.0;
  EquivalenceVerdict verdict = EquivalenceVerdict::NotEquivalent;
};

struct EquivalenceOptions {
  double constant_tol = 1e-8;
  double mgf_tol = 1e-6;
  /// Grid for the MGF, mean-identity and concavity checks.
  std::vector<double> u_grid;

  static std::vector<double> default_u_grid();
};

/// Compares the EM Q-function with the LLA surrogate over `theta_grid`:
/// D(theta) = em_q(theta | theta_t) - [f(theta) - sum_j g_j'(|theta_t,j|)(|theta_j| - |theta_t,j|)]
/// must be constant in theta.
EquivalenceReport verify_mm_em_equivalence(const Decomposition& decomp, std::span<const LatentDensity> h,
                                           const Eigen::VectorXd& theta_t,
                                           std::span<const Eigen::VectorXd> theta_grid,
                                           const EquivalenceOptions& options = {});

}  // namespace sparsemm

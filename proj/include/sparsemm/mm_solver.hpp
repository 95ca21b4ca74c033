#pragma once

#include <cstddef>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sparsemm/penalty.hpp"

namespace sparsemm {

/// Raised when a numerical subproblem cannot be solved (singular systems,
/// inner iterations that do not settle, failed bracketing).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Gaussian least-squares regression data. The log-likelihood is taken as
/// f(beta) = -||y - X beta||^2 / 2.
class RegressionModel {
 public:
  RegressionModel(Eigen::MatrixXd X, Eigen::VectorXd y);

  const Eigen::MatrixXd& X() const { return X_; }
  const Eigen::VectorXd& y() const { return y_; }
  Eigen::Index n_obs() const { return X_.rows(); }
  Eigen::Index p() const { return X_.cols(); }

 private:
  Eigen::MatrixXd X_;
  Eigen::VectorXd y_;
};

/// L(beta) = f(beta) - g(|beta|), with f concave (Gaussian log-likelihood)
/// and g(u) = sum_j n_j p_j(u_j) on the nonnegative orthant, g(0) = 0.
class Decomposition {
 public:
  Decomposition(std::shared_ptr<const RegressionModel> model, std::vector<PenaltySpec> penalties);

  const RegressionModel& model() const { return *model_; }
  std::shared_ptr<const RegressionModel> model_ptr() const { return model_; }
  const std::vector<PenaltySpec>& penalties() const { return penalties_; }
  std::size_t dim() const { return penalties_.size(); }

  double f(const Eigen::VectorXd& beta) const;
  Eigen::VectorXd grad_f(const Eigen::VectorXd& beta) const;

  /// g(u) for u >= 0 componentwise.
  double g(const Eigen::VectorXd& u) const;
  /// n_j p_j(u) for one coordinate.
  double g_coord(std::size_t j, double u) const;
  /// n_j p_j'(u), using the right limit at u = 0.
  double g_derivative(std::size_t j, double u) const;

  /// f(beta) - g(|beta|).
  double objective(const Eigen::VectorXd& beta) const;

 private:
  std::shared_ptr<const RegressionModel> model_;
  std::vector<PenaltySpec> penalties_;
};

Decomposition decompose(std::shared_ptr<const RegressionModel> model, std::vector<PenaltySpec> penalties);
Decomposition decompose(const RegressionModel& model, const PenaltySpec& penalty);

enum class SurrogateKind { WeightedL1, WeightedRidge };

/// Surrogate Q(theta | anchor) = f(theta) - sum_j w_j |theta_j|        (WeightedL1)
///                          or = f(theta) - sum_j w_j theta_j^2        (WeightedRidge)
///
/// `constant_shift` is Q(anchor | anchor) - objective(anchor); subtracting it
/// turns Q into the minorizer that touches the objective at the anchor.
struct SurrogateProblem {
  SurrogateKind kind = SurrogateKind::WeightedL1;
  Decomposition base;
  Eigen::VectorXd weights;
  Eigen::VectorXd anchor;
  double constant_shift = 0.0;
  /// Coordinates pinned at zero (LQA drop rule). Empty means none.
  std::vector<bool> frozen;

  double value(const Eigen::VectorXd& theta) const;
};

SurrogateProblem lla_surrogate(const Decomposition& decomp, const Eigen::VectorXd& theta_t);

inline constexpr double kDefaultLqaFloor = 1e-8;

SurrogateProblem lqa_surrogate(const Decomposition& decomp, const Eigen::VectorXd& theta_t,
                               double floor = kDefaultLqaFloor, bool drop_below_floor = false);

struct InnerSolverOptions {
  double tol = 1e-10;
  int max_sweeps = 100000;
};

/// Maximizes the surrogate. WeightedL1 runs cyclic coordinate descent in
/// ascending index order, warm-started at the anchor; WeightedRidge solves
/// the normal equations exactly.
Eigen::VectorXd solve_surrogate(const SurrogateProblem& problem, const InnerSolverOptions& options = {});

/// Soft threshold with ties (|z| == w) resolved to exactly 0.
double soft_threshold(double z, double w);

struct FitResult {
  Eigen::VectorXd beta_hat;
  std::vector<std::size_t> support;
  std::vector<double> objective_trace;
  int steps_taken = 0;
  bool converged = false;
};

enum class SurrogateDriver { LLA, LQA };

struct MmOptions {
  SurrogateDriver driver = SurrogateDriver::LLA;
  InnerSolverOptions inner;
  double lqa_floor = kDefaultLqaFloor;
  /// Classical LQA drop rule: once an anchor coordinate falls below the
  /// floor it is fixed at zero.
  bool lqa_drop_below_floor = false;
};

/// OLS when n_obs > p, otherwise ridge with penalty 1e-6.
Eigen::VectorXd default_initial_estimate(const RegressionModel& model, double ridge = 1e-6);

/// Exactly k surrogate steps from theta0. The trace has k + 1 entries.
FitResult k_step(const Decomposition& decomp, const Eigen::VectorXd& theta0, int k, const MmOptions& options = {});

/// Surrogate steps until the max absolute coordinate change drops below tol
/// or max_iter steps were taken.
FitResult iterate(const Decomposition& decomp, const Eigen::VectorXd& theta0, double tol, int max_iter,
                  const MmOptions& options = {});

std::vector<std::size_t> support_of(const Eigen::VectorXd& beta);

}  // namespace sparsemm

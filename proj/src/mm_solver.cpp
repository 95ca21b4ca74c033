#include "sparsemm/mm_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include <fmt/format.h>

namespace sparsemm {

RegressionModel::RegressionModel(Eigen::MatrixXd X, Eigen::VectorXd y) : X_(std::move(X)), y_(std::move(y)) {
  if (X_.rows() < 1 || X_.cols() < 1) throw std::invalid_argument("regression model needs n_obs >= 1 and p >= 1");
  if (X_.rows() != y_.size()) {
    throw std::invalid_argument(
        fmt::format("design has {} rows but response has {} entries", X_.rows(), y_.size()));
  }
  if (!X_.allFinite() || !y_.allFinite()) throw std::invalid_argument("regression data contains non-finite values");
}

Decomposition::Decomposition(std::shared_ptr<const RegressionModel> model, std::vector<PenaltySpec> penalties)
    : model_(std::move(model)), penalties_(std::move(penalties)) {
  if (!model_) throw std::invalid_argument("decomposition needs a model");
  if (static_cast<Eigen::Index>(penalties_.size()) != model_->p()) {
    throw std::invalid_argument(
        fmt::format("penalty vector has length {} but the model has p = {}", penalties_.size(), model_->p()));
  }
  for (const auto& spec : penalties_) spec.validate();
}

double Decomposition::f(const Eigen::VectorXd& beta) const {
  return -0.5 * (model_->y() - model_->X() * beta).squaredNorm();
}

Eigen::VectorXd Decomposition::grad_f(const Eigen::VectorXd& beta) const {
  return model_->X().transpose() * (model_->y() - model_->X() * beta);
}

double Decomposition::g(const Eigen::VectorXd& u) const {
  double total = 0.0;
  for (std::size_t j = 0; j < penalties_.size(); ++j) total += g_coord(j, u[static_cast<Eigen::Index>(j)]);
  return total;
}

double Decomposition::g_coord(std::size_t j, double u) const {
  const auto& spec = penalties_.at(j);
  return spec.n * penalty_value(spec, u);
}

double Decomposition::g_derivative(std::size_t j, double u) const {
  const auto& spec = penalties_.at(j);
  return spec.n * penalty_slope(spec, u);
}

double Decomposition::objective(const Eigen::VectorXd& beta) const { return f(beta) - g(beta.cwiseAbs()); }

Decomposition decompose(std::shared_ptr<const RegressionModel> model, std::vector<PenaltySpec> penalties) {
  return Decomposition(std::move(model), std::move(penalties));
}

Decomposition decompose(const RegressionModel& model, const PenaltySpec& penalty) {
  return Decomposition(std::make_shared<const RegressionModel>(model),
                       std::vector<PenaltySpec>(static_cast<std::size_t>(model.p()), penalty));
}

double SurrogateProblem::value(const Eigen::VectorXd& theta) const {
  const double penalty = kind == SurrogateKind::WeightedL1 ? weights.dot(theta.cwiseAbs())
                                                           : weights.dot(theta.cwiseAbs2());
  return base.f(theta) - penalty;
}

namespace {

void check_anchor(const Decomposition& decomp, const Eigen::VectorXd& theta_t) {
  if (static_cast<std::size_t>(theta_t.size()) != decomp.dim()) {
    throw std::invalid_argument(
        fmt::format("anchor has length {} but the problem has dimension {}", theta_t.size(), decomp.dim()));
  }
  if (!theta_t.allFinite()) throw std::invalid_argument("surrogate anchor must be finite");
}

}  // namespace

SurrogateProblem lla_surrogate(const Decomposition& decomp, const Eigen::VectorXd& theta_t) {
  check_anchor(decomp, theta_t);
  const Eigen::Index p = theta_t.size();
  Eigen::VectorXd w(p);
  for (Eigen::Index j = 0; j < p; ++j) w[j] = decomp.g_derivative(static_cast<std::size_t>(j), std::abs(theta_t[j]));

  SurrogateProblem problem{SurrogateKind::WeightedL1, decomp, std::move(w), theta_t, 0.0, {}};
  problem.constant_shift = decomp.g(theta_t.cwiseAbs()) - problem.weights.dot(theta_t.cwiseAbs());
  return problem;
}

SurrogateProblem lqa_surrogate(const Decomposition& decomp, const Eigen::VectorXd& theta_t, double floor,
                               bool drop_below_floor) {
  if (!(floor > 0.0)) throw std::invalid_argument(fmt::format("LQA floor must be positive, got {}", floor));
  check_anchor(decomp, theta_t);
  const Eigen::Index p = theta_t.size();
  Eigen::VectorXd w(p);
  std::vector<bool> frozen;
  if (drop_below_floor) frozen.assign(static_cast<std::size_t>(p), false);
  for (Eigen::Index j = 0; j < p; ++j) {
    const double u = std::max(std::abs(theta_t[j]), floor);
    w[j] = decomp.g_derivative(static_cast<std::size_t>(j), u) / (2.0 * u);
    if (drop_below_floor && std::abs(theta_t[j]) < floor) frozen[static_cast<std::size_t>(j)] = true;
  }
  SurrogateProblem problem{SurrogateKind::WeightedRidge, decomp, std::move(w), theta_t, 0.0, std::move(frozen)};
  problem.constant_shift = problem.value(theta_t) - decomp.objective(theta_t);
  return problem;
}

double soft_threshold(double z, double w) {
  if (z > w) return z - w;
  if (z < -w) return z + w;
  return 0.0;
}

namespace {

bool is_frozen(const SurrogateProblem& problem, Eigen::Index j) {
  return !problem.frozen.empty() && problem.frozen[static_cast<std::size_t>(j)];
}

Eigen::VectorXd coordinate_descent(const SurrogateProblem& problem, const InnerSolverOptions& options) {
  const auto& X = problem.base.model().X();
  const Eigen::Index p = X.cols();
  Eigen::VectorXd theta = problem.anchor;
  for (Eigen::Index j = 0; j < p; ++j) {
    if (is_frozen(problem, j)) theta[j] = 0.0;
  }
  const Eigen::VectorXd col_sq = X.colwise().squaredNorm().transpose();
  Eigen::VectorXd resid = problem.base.model().y() - X * theta;

  for (int sweep = 0; sweep < options.max_sweeps; ++sweep) {
    double max_change = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      const double old = theta[j];
      double updated = 0.0;
      if (!is_frozen(problem, j) && col_sq[j] > 0.0) {
        const double z = X.col(j).dot(resid) + col_sq[j] * old;
        updated = soft_threshold(z, problem.weights[j]) / col_sq[j];
      }
      const double delta = updated - old;
      if (delta != 0.0) {
        resid.noalias() -= delta * X.col(j);
        theta[j] = updated;
        max_change = std::max(max_change, std::abs(delta));
      }
    }
    if (max_change < options.tol) return theta;
  }
  throw NumericalError(
      fmt::format("coordinate descent did not settle within {} sweeps (tol {})", options.max_sweeps, options.tol));
}

Eigen::VectorXd ridge_solve(const SurrogateProblem& problem) {
  const auto& X = problem.base.model().X();
  const Eigen::Index p = X.cols();
  std::vector<Eigen::Index> active;
  for (Eigen::Index j = 0; j < p; ++j) {
    if (!is_frozen(problem, j)) active.push_back(j);
  }
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(p);
  if (active.empty()) return theta;

  const Eigen::Index m = static_cast<Eigen::Index>(active.size());
  Eigen::MatrixXd Xa(X.rows(), m);
  Eigen::VectorXd wa(m);
  for (Eigen::Index k = 0; k < m; ++k) {
    Xa.col(k) = X.col(active[static_cast<std::size_t>(k)]);
    wa[k] = problem.weights[active[static_cast<std::size_t>(k)]];
  }
  Eigen::MatrixXd A = Xa.transpose() * Xa;
  A.diagonal() += 2.0 * wa;
  const Eigen::VectorXd b = Xa.transpose() * problem.base.model().y();

  Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
  const double rcond = ldlt.info() == Eigen::Success ? ldlt.rcond() : 0.0;
  if (!(rcond > 1e-14) || !ldlt.isPositive()) {
    throw NumericalError(fmt::format("ridge surrogate system is singular (reciprocal condition estimate {:.3g})", rcond));
  }
  const Eigen::VectorXd sol = ldlt.solve(b);
  for (Eigen::Index k = 0; k < m; ++k) theta[active[static_cast<std::size_t>(k)]] = sol[k];
  return theta;
}

}  // namespace

Eigen::VectorXd solve_surrogate(const SurrogateProblem& problem, const InnerSolverOptions& options) {
  if (problem.weights.size() != problem.anchor.size() ||
      static_cast<std::size_t>(problem.anchor.size()) != problem.base.dim()) {
    throw std::invalid_argument("surrogate weights, anchor and model dimension disagree");
  }
  if (!problem.weights.allFinite() || (problem.weights.array() < 0.0).any()) {
    throw std::invalid_argument("surrogate weights must be finite and nonnegative");
  }
  if (!(options.tol > 0.0)) throw std::invalid_argument("inner tolerance must be positive");
  return problem.kind == SurrogateKind::WeightedL1 ? coordinate_descent(problem, options) : ridge_solve(problem);
}

Eigen::VectorXd default_initial_estimate(const RegressionModel& model, double ridge) {
  const auto& X = model.X();
  if (model.n_obs() > model.p()) {
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    if (qr.rank() == model.p()) return qr.solve(model.y());
  }
  Eigen::MatrixXd A = X.transpose() * X;
  A.diagonal().array() += ridge;
  return A.ldlt().solve(X.transpose() * model.y());
}

std::vector<std::size_t> support_of(const Eigen::VectorXd& beta) {
  std::vector<std::size_t> support;
  for (Eigen::Index j = 0; j < beta.size(); ++j) {
    if (beta[j] != 0.0) support.push_back(static_cast<std::size_t>(j));
  }
  return support;
}

namespace {

SurrogateProblem build_surrogate(const Decomposition& decomp, const Eigen::VectorXd& theta, const MmOptions& options) {
  if (options.driver == SurrogateDriver::LLA) return lla_surrogate(decomp, theta);
  return lqa_surrogate(decomp, theta, options.lqa_floor, options.lqa_drop_below_floor);
}

FitResult finish(Eigen::VectorXd theta, std::vector<double> trace, int steps, bool converged) {
  FitResult result;
  result.support = support_of(theta);
  result.beta_hat = std::move(theta);
  result.objective_trace = std::move(trace);
  result.steps_taken = steps;
  result.converged = converged;
  return result;
}

}  // namespace

FitResult k_step(const Decomposition& decomp, const Eigen::VectorXd& theta0, int k, const MmOptions& options) {
  if (k < 1) throw std::invalid_argument(fmt::format("k_step needs k >= 1, got {}", k));
  check_anchor(decomp, theta0);
  Eigen::VectorXd theta = theta0;
  std::vector<double> trace{decomp.objective(theta)};
  double last_change = std::numeric_limits<double>::infinity();
  for (int step = 0; step < k; ++step) {
    Eigen::VectorXd next = solve_surrogate(build_surrogate(decomp, theta, options), options.inner);
    last_change = (next - theta).cwiseAbs().maxCoeff();
    theta = std::move(next);
    trace.push_back(decomp.objective(theta));
  }
  return finish(std::move(theta), std::move(trace), k, last_change < options.inner.tol);
}

FitResult iterate(const Decomposition& decomp, const Eigen::VectorXd& theta0, double tol, int max_iter,
                  const MmOptions& options) {
  if (max_iter < 1) throw std::invalid_argument(fmt::format("iterate needs max_iter >= 1, got {}", max_iter));
  if (!(tol > 0.0)) throw std::invalid_argument("outer tolerance must be positive");
  check_anchor(decomp, theta0);
  Eigen::VectorXd theta = theta0;
  std::vector<double> trace{decomp.objective(theta)};
  for (int step = 1; step <= max_iter; ++step) {
    Eigen::VectorXd next = solve_surrogate(build_surrogate(decomp, theta, options), options.inner);
    const double change = (next - theta).cwiseAbs().maxCoeff();
    theta = std::move(next);
    trace.push_back(decomp.objective(theta));
    if (change < tol) return finish(std::move(theta), std::move(trace), step, true);
  }
  return finish(std::move(theta), std::move(trace), max_iter, false);
}

}  // namespace sparsemm

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace sparsemm {

enum class DesignKind { Orthonormal, GaussianCorrelated };

/// One simulated sparse linear regression setting.
struct Scenario {
  int n_obs = 100;
  int p = 8;
  std::vector<double> beta_true;
  double noise_sd = 1.0;
  DesignKind design = DesignKind::Orthonormal;
  /// AR(1) correlation between columns j and k is rho^|j-k|.
  double rho = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

struct RegressionData {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;
  Eigen::VectorXd beta_true;
  std::vector<std::size_t> true_support;
};

/// y = X beta_true + noise. Orthonormal designs satisfy X^T X = n I; correlated
/// designs draw rows from Normal(0, Sigma) with AR(1) Sigma.
RegressionData generate(const Scenario& scenario);

/// splitmix64 finalizer.
std::uint64_t mix64(std::uint64_t x);
/// Stream seed for replicate `index`: mix64(master + (index + 1) * golden gamma).
std::uint64_t replicate_seed(std::uint64_t master, std::uint64_t index);

enum class FitClass { Correct, OverFit, UnderFit };
std::string to_string(FitClass cls);

/// Correct when equal; UnderFit when any true index is missing; OverFit
/// otherwise (all true indices present plus extras).
FitClass classify_fit(std::span<const std::size_t> estimated, std::span<const std::size_t> truth);

enum class MethodKind { LassoLla, ScadOneStep, ScadKStep, ScadFull, PosteriorMedian };
std::string to_string(MethodKind kind);
MethodKind parse_method_kind(std::string_view name);

/// A method together with its tuning values.
struct MethodSpec {
  MethodKind kind = MethodKind::LassoLla;
  double lambda = 0.0;
  int k = 1;
  double pi = 0.5;
  double tau = 1.0;

  /// e.g. "scad-kstep3/lambda=0.5" or "posterior-median/pi=0.9/tau=1".
  std::string label() const;
  bool penalized() const { return kind != MethodKind::PosteriorMedian; }
};

struct ExperimentConfig {
  Scenario scenario;
  std::vector<MethodKind> methods{MethodKind::LassoLla, MethodKind::ScadOneStep, MethodKind::ScadKStep,
                                  MethodKind::ScadFull, MethodKind::PosteriorMedian};
  std::vector<double> lambda_grid{0.5};
  std::vector<double> pi_grid{0.5};
  std::vector<double> tau_grid{1.0};
  int k = 3;
  int replicates = 100;
  std::uint64_t seed = 1;
  double tol = 1e-8;
  int max_iter = 500;
  double scad_a = 3.7;
  /// Apply the marginal posterior median to correlated designs.
  bool allow_marginal_approx = false;
  int threads = 1;
  /// CSV destination; empty means standard output.
  std::string output;

  void validate() const;
  /// Methods crossed with their tuning grids, in a fixed order.
  std::vector<MethodSpec> expand_methods() const;
};

struct MetricsRow {
  std::string method;
  double correct_fit_rate = 0.0;
  double over_fit_rate = 0.0;
  double under_fit_rate = 0.0;
  double model_error = 0.0;
  double mean_nonzero = 0.0;
  int replicates = 0;
};

struct MetricsTable {
  std::vector<MetricsRow> rows;

  const MetricsRow* find(std::string_view method) const;
};

inline constexpr std::string_view kMetricsHeader = "method,correct,over,under,model_error,mean_nonzero,replicates";

std::string to_csv(const MetricsTable& table);
/// Strict reader: exact header, seven fields per row, fully parsed numbers.
MetricsTable parse_metrics_csv(std::string_view text);

struct MethodOutcome {
  bool ok = false;
  FitClass fit = FitClass::UnderFit;
  double model_error = 0.0;
  std::size_t nonzero = 0;
  /// Penalized objective at the estimate; NaN for the posterior median.
  double objective = 0.0;
  std::string error;
};

struct ReplicateRecord {
  int index = 0;
  std::uint64_t seed = 0;
  /// Parallel to ExperimentResult::methods.
  std::vector<MethodOutcome> outcomes;
};

struct ExperimentResult {
  std::vector<MethodSpec> methods;
  MetricsTable table;
  std::vector<ReplicateRecord> replicates;
  std::vector<std::string> notes;
};

ExperimentResult run_experiment(const ExperimentConfig& config);

/// Fits one method on one data set.
MethodOutcome fit_method(const MethodSpec& method, const RegressionData& data, const ExperimentConfig& config);

/// Lambdas at which scad-full shows a strictly higher over-fit rate than
/// scad-1step.
std::vector<double> overfit_contrast(const ExperimentResult& result);

}  // namespace sparsemm

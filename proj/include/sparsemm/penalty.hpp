#pragma once

#include <span>
#include <string>
#include <string_view>

namespace sparsemm {

/// Penalty families p_lambda(t) on the nonnegative axis.
///
/// `Quadratic` (p(t) = lambda t^2 / 2) is convex. It exists as a negative
/// control for the concavity and MGF screens and is not selectable by the
/// regular family parser.
enum class PenaltyFamily { L1, SCAD, Log, Quadratic };

struct PenaltySpec {
  PenaltyFamily family = PenaltyFamily::L1;
  double lambda = 0.0;
  /// SCAD shape; must exceed 2.
  double a = 3.7;
  /// Second scale of the log penalty, lambda * log(1 + t / log_scale).
  /// Non-positive means "same as lambda".
  double log_scale = 0.0;
  /// Sample-size multiplier entering g(u) = n * sum_j p(u_j).
  int n = 1;

  static PenaltySpec l1(double lambda, int n = 1);
  static PenaltySpec scad(double lambda, double a = 3.7, int n = 1);
  static PenaltySpec log(double lambda, double log_scale = 0.0, int n = 1);
  static PenaltySpec quadratic(double lambda, int n = 1);

  /// Throws std::invalid_argument when an invariant is broken.
  void validate() const;

  double effective_log_scale() const { return log_scale > 0.0 ? log_scale : lambda; }
};

/// "l1", "scad", "log". Anything else throws std::invalid_argument.
PenaltyFamily parse_penalty_family(std::string_view name);
/// Same as above plus "quadratic" for the convex control.
PenaltyFamily parse_penalty_family_with_controls(std::string_view name);
std::string to_string(PenaltyFamily family);

/// p_lambda(t). Throws std::domain_error for t < 0.
double penalty_value(const PenaltySpec& spec, double t);

/// p'_lambda(t) for t > 0. Throws std::domain_error for t <= 0; the origin
/// is a kink and callers use penalty_derivative_at_zero instead.
double penalty_derivative(const PenaltySpec& spec, double t);

/// Right limit p'_lambda(0+).
double penalty_derivative_at_zero(const PenaltySpec& spec);

/// p'(t) for t > 0, p'(0+) for t == 0.
double penalty_slope(const PenaltySpec& spec, double t);

struct ConcavityReport {
  bool concave = true;
  /// Largest second divided difference seen (2 f[x0,x1,x2]).
  double worst_second_difference = 0.0;
  /// Middle grid point where the worst value occurred.
  double worst_at = 0.0;
};

inline constexpr double kConcavityTolerance = 1e-9;

/// Scans second divided differences of penalty_value over an increasing
/// grid of positive points (at least three).
ConcavityReport concave_on_positive_axis(const PenaltySpec& spec, std::span<const double> grid);

}  // namespace sparsemm

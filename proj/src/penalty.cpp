#include "sparsemm/penalty.hpp"

#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

#include "divided_differences.hpp"

namespace sparsemm {

PenaltySpec PenaltySpec::l1(double lambda, int n) {
  PenaltySpec s;
  s.family = PenaltyFamily::L1;
  s.lambda = lambda;
  s.n = n;
  s.validate();
  return s;
}

PenaltySpec PenaltySpec::scad(double lambda, double a, int n) {
  PenaltySpec s;
  s.family = PenaltyFamily::SCAD;
  s.lambda = lambda;
  s.a = a;
  s.n = n;
  s.validate();
  return s;
}

PenaltySpec PenaltySpec::log(double lambda, double log_scale, int n) {
  PenaltySpec s;
  s.family = PenaltyFamily::Log;
  s.lambda = lambda;
  s.log_scale = log_scale;
  s.n = n;
  s.validate();
  return s;
}

PenaltySpec PenaltySpec::quadratic(double lambda, int n) {
  PenaltySpec s;
  s.family = PenaltyFamily::Quadratic;
  s.lambda = lambda;
  s.n = n;
  s.validate();
  return s;
}

void PenaltySpec::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    throw std::invalid_argument(fmt::format("penalty lambda must be finite and >= 0, got {}", lambda));
  }
  if (n < 1) throw std::invalid_argument(fmt::format("penalty multiplier n must be >= 1, got {}", n));
  if (family == PenaltyFamily::SCAD && !(a > 2.0)) {
    throw std::invalid_argument(fmt::format("SCAD shape a must exceed 2, got {}", a));
  }
  if (family == PenaltyFamily::Log && !(effective_log_scale() > 0.0)) {
    throw std::invalid_argument("log penalty needs a positive scale (lambda or log_scale)");
  }
}

PenaltyFamily parse_penalty_family(std::string_view name) {
  if (name == "l1") return PenaltyFamily::L1;
  if (name == "scad") return PenaltyFamily::SCAD;
  if (name == "log") return PenaltyFamily::Log;
  throw std::invalid_argument(fmt::format("unknown penalty family '{}' (expected l1, scad or log)", name));
}

PenaltyFamily parse_penalty_family_with_controls(std::string_view name) {
  if (name == "quadratic") return PenaltyFamily::Quadratic;
  return parse_penalty_family(name);
}

std::string to_string(PenaltyFamily family) {
  switch (family) {
    case PenaltyFamily::L1: return "l1";
    case PenaltyFamily::SCAD: return "scad";
    case PenaltyFamily::Log: return "log";
    case PenaltyFamily::Quadratic: return "quadratic";
  }
  return "unknown";
}

double penalty_value(const PenaltySpec& spec, double t) {
  if (!(t >= 0.0)) throw std::domain_error(fmt::format("penalty_value needs t >= 0, got {}", t));
  const double lam = spec.lambda;
  switch (spec.family) {
    case PenaltyFamily::L1:
      return lam * t;
    case PenaltyFamily::SCAD: {
      // Exact integral of the SCAD derivative from 0.
      const double a = spec.a;
      if (t <= lam) return lam * t;
      if (t <= a * lam) return (2.0 * a * lam * t - t * t - lam * lam) / (2.0 * (a - 1.0));
      return (a + 1.0) * lam * lam / 2.0;
    }
    case PenaltyFamily::Log:
      return lam * std::log1p(t / spec.effective_log_scale());
    case PenaltyFamily::Quadratic:
      return 0.5 * lam * t * t;
  }
  return 0.0;
}

double penalty_derivative(const PenaltySpec& spec, double t) {
  if (!(t > 0.0)) {
    throw std::domain_error(fmt::format("penalty_derivative needs t > 0, got {} (use the right limit at 0)", t));
  }
  const double lam = spec.lambda;
  switch (spec.family) {
    case PenaltyFamily::L1:
      return lam;
    case PenaltyFamily::SCAD: {
      if (t <= lam) return lam;
      const double excess = spec.a * lam - t;
      return excess > 0.0 ? excess / (spec.a - 1.0) : 0.0;
    }
    case PenaltyFamily::Log:
      return lam / (spec.effective_log_scale() + t);
    case PenaltyFamily::Quadratic:
      return lam * t;
  }
  return 0.0;
}

double penalty_derivative_at_zero(const PenaltySpec& spec) {
  switch (spec.family) {
    case PenaltyFamily::L1:
    case PenaltyFamily::SCAD:
      return spec.lambda;
    case PenaltyFamily::Log:
      return spec.lambda / spec.effective_log_scale();
    case PenaltyFamily::Quadratic:
      return 0.0;
  }
  return 0.0;
}

double penalty_slope(const PenaltySpec& spec, double t) {
  if (t == 0.0) return penalty_derivative_at_zero(spec);
  return penalty_derivative(spec, t);
}

ConcavityReport concave_on_positive_axis(const PenaltySpec& spec, std::span<const double> grid) {
  if (!grid.empty() && !(grid.front() > 0.0)) {
    throw std::invalid_argument("concavity grid must lie on the positive axis");
  }
  return detail::scan_second_differences(
      grid, [&](double t) { return penalty_value(spec, t); }, kConcavityTolerance);
}

}  // namespace sparsemm

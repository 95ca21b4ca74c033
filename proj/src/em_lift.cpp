#include "sparsemm/em_lift.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <fmt/format.h>

#include "divided_differences.hpp"

namespace sparsemm {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

constexpr double kVarianceIdentityTol = 1e-4;

const LatentDensity& lift_for(std::span<const LatentDensity> h, std::size_t j) {
  return h.size() == 1 ? h[0] : h[j];
}

void check_lift_count(const Decomposition& decomp, std::span<const LatentDensity> h) {
  if (h.size() != 1 && h.size() != decomp.dim()) {
    throw std::invalid_argument(
        fmt::format("expected 1 or {} latent densities, got {}", decomp.dim(), h.size()));
  }
  for (const auto& density : h) validate(density);
}

}  // namespace

void validate(const LatentDensity& h) {
  std::visit(overloaded{
                 [](const PointMass& pm) {
                   if (!std::isfinite(pm.location)) throw std::invalid_argument("point mass location must be finite");
                 },
                 [](const GridDensity& grid) {
                   if (grid.points.empty() || grid.points.size() != grid.weights.size()) {
                     throw std::invalid_argument("grid density needs matching, nonempty points and weights");
                   }
                   for (std::size_t i = 1; i < grid.points.size(); ++i) {
                     if (!(grid.points[i] > grid.points[i - 1])) {
                       throw std::invalid_argument("grid density points must be strictly increasing");
                     }
                   }
                   double total = 0.0;
                   for (double w : grid.weights) {
                     if (!(w >= 0.0) || !std::isfinite(w)) {
                       throw std::invalid_argument("grid density weights must be finite and nonnegative");
                     }
                     total += w;
                   }
                   if (std::abs(total - 1.0) > 1e-10) {
                     throw std::invalid_argument(fmt::format("grid density weights sum to {}, not 1", total));
                   }
                 },
                 [](const NegExponential& ne) {
                   if (!(ne.rate > 0.0) || !std::isfinite(ne.rate)) {
                     throw std::invalid_argument("negated exponential needs a finite positive rate");
                   }
                 },
             },
             h);
}

std::string describe(const LatentDensity& h) {
  return std::visit(overloaded{
                        [](const PointMass& pm) { return fmt::format("point-mass(location={:.12g})", pm.location); },
                        [](const GridDensity& grid) {
                          return fmt::format("grid({} points on [{:.12g}, {:.12g}])", grid.points.size(),
                                             grid.points.front(), grid.points.back());
                        },
                        [](const NegExponential& ne) { return fmt::format("neg-exponential(rate={:.12g})", ne.rate); },
                    },
                    h);
}

GridDensity discretize_density(const std::function<double(double)>& density, std::vector<double> points) {
  if (points.size() < 2) throw std::invalid_argument("discretization needs at least two points");
  const std::size_t m = points.size();
  std::vector<double> weights(m, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const double left = i > 0 ? points[i] - points[i - 1] : 0.0;
    const double right = i + 1 < m ? points[i + 1] - points[i] : 0.0;
    if (left < 0.0 || right < 0.0) throw std::invalid_argument("discretization points must be increasing");
    weights[i] = density(points[i]) * 0.5 * (left + right);
  }
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(total > 0.0)) throw std::invalid_argument("discretized density has no mass on the grid");
  for (double& w : weights) w /= total;
  GridDensity grid{std::move(points), std::move(weights)};
  validate(grid);
  return grid;
}

namespace {

// Euclidean projection onto the probability simplex.
void project_to_simplex(Eigen::VectorXd& w) {
  std::vector<double> sorted(w.data(), w.data() + w.size());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumulative = 0.0;
  double shift = 0.0;
  for (std::size_t k = 0; k < sorted.size(); ++k) {
    cumulative += sorted[k];
    const double candidate = (cumulative - 1.0) / static_cast<double>(k + 1);
    if (sorted[k] - candidate > 0.0) shift = candidate;
  }
  w = (w.array() - shift).max(0.0).matrix();
}

}  // namespace

GridDensity fit_grid_density(const std::function<double(double)>& target_g, std::vector<double> points,
                             std::span<const double> u_grid, int iterations) {
  if (points.empty() || u_grid.empty()) throw std::invalid_argument("grid fit needs points and a u grid");
  const Eigen::Index m = static_cast<Eigen::Index>(points.size());
  const Eigen::Index k = static_cast<Eigen::Index>(u_grid.size());
  Eigen::MatrixXd A(k, m);
  Eigen::VectorXd target(k);
  for (Eigen::Index r = 0; r < k; ++r) {
    const double u = u_grid[static_cast<std::size_t>(r)];
    target[r] = std::exp(-target_g(u));
    for (Eigen::Index c = 0; c < m; ++c) A(r, c) = std::exp(u * points[static_cast<std::size_t>(c)]);
  }
  // Frobenius norm bounds the spectral norm, so 1 / ||A||_F^2 is a safe step.
  const double step = 1.0 / std::max(A.squaredNorm(), 1e-300);
  Eigen::VectorXd w = Eigen::VectorXd::Constant(m, 1.0 / static_cast<double>(m));
  for (int it = 0; it < iterations; ++it) {
    w -= step * (A.transpose() * (A * w - target));
    project_to_simplex(w);
  }
  w /= w.sum();
  GridDensity grid{std::move(points), std::vector<double>(w.data(), w.data() + w.size())};
  validate(grid);
  return grid;
}

TiltedMoments tilted_moments(const LatentDensity& h, double u) {
  if (!std::isfinite(u)) throw std::domain_error("tilting parameter must be finite");
  return std::visit(
      overloaded{
          [u](const PointMass& pm) {
            TiltedMoments m;
            m.log_mgf = u * pm.location;
            m.mgf = std::exp(m.log_mgf);
            m.mean = pm.location;
            return m;
          },
          [u](const GridDensity& grid) {
            const std::size_t n = grid.points.size();
            std::vector<double> log_terms(n, -std::numeric_limits<double>::infinity());
            double top = -std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < n; ++i) {
              if (grid.weights[i] > 0.0) {
                log_terms[i] = std::log(grid.weights[i]) + u * grid.points[i];
                top = std::max(top, log_terms[i]);
              }
            }
            double total = 0.0;
            std::vector<double> q(n, 0.0);
            for (std::size_t i = 0; i < n; ++i) {
              if (grid.weights[i] > 0.0) {
                q[i] = std::exp(log_terms[i] - top);
                total += q[i];
              }
            }
            TiltedMoments m;
            m.log_mgf = top + std::log(total);
            m.mgf = std::exp(m.log_mgf);
            for (std::size_t i = 0; i < n; ++i) {
              q[i] /= total;
              m.mean += q[i] * grid.points[i];
            }
            for (std::size_t i = 0; i < n; ++i) {
              if (q[i] == 0.0) continue;
              const double d = grid.points[i] - m.mean;
              m.variance += q[i] * d * d;
              m.log_density_mean += q[i] * std::log(grid.weights[i]);
            }
            if (!std::isfinite(m.log_density_mean)) throw NumericalError("grid log-density expectation is not finite");
            return m;
          },
          [u](const NegExponential& ne) {
            // Tilting Exp(rate) on the negative axis by exp(uz) gives Exp(rate + u).
            if (!(ne.rate + u > 0.0)) {
              throw std::domain_error(fmt::format(
                  "u = {} is outside the MGF convergence region (u > {}) of the negated exponential", u, -ne.rate));
            }
            const double tilted = ne.rate + u;
            TiltedMoments m;
            m.log_mgf = std::log(ne.rate) - std::log(tilted);
            m.mgf = ne.rate / tilted;
            m.mean = -1.0 / tilted;
            m.variance = 1.0 / (tilted * tilted);
            m.log_density_mean = std::log(ne.rate) + ne.rate * m.mean;
            return m;
          },
      },
      h);
}

double verify_mgf_representation(const Decomposition& decomp, std::span<const LatentDensity> h,
                                 std::span<const double> u_grid) {
  check_lift_count(decomp, h);
  double worst = 0.0;
  for (std::size_t j = 0; j < decomp.dim(); ++j) {
    for (double u : u_grid) {
      if (!(u >= 0.0)) throw std::domain_error(fmt::format("MGF check needs u >= 0, got {}", u));
      const TiltedMoments m = tilted_moments(lift_for(h, j), u);
      // |M - e^{-g}| / e^{-g} = |exp(log M + g) - 1|, stable when g is large.
      const double rel = std::abs(std::expm1(m.log_mgf + decomp.g_coord(j, u)));
      worst = std::max(worst, std::isnan(rel) ? std::numeric_limits<double>::infinity() : rel);
    }
  }
  return worst;
}

double latent_posterior_mean(const Decomposition& decomp, double u, std::size_t j) {
  if (!(u >= 0.0)) throw std::domain_error(fmt::format("latent posterior mean needs u >= 0, got {}", u));
  return -decomp.g_derivative(j, u);
}

double em_q(const Decomposition& decomp, std::span<const LatentDensity> h, const Eigen::VectorXd& theta,
            const Eigen::VectorXd& theta_t) {
  check_lift_count(decomp, h);
  if (static_cast<std::size_t>(theta.size()) != decomp.dim() || theta_t.size() != theta.size()) {
    throw std::invalid_argument("em_q: theta and anchor must match the problem dimension");
  }
  double value = decomp.f(theta);
  for (std::size_t j = 0; j < decomp.dim(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    const TiltedMoments m = tilted_moments(lift_for(h, j), std::abs(theta_t[jj]));
    value += std::abs(theta[jj]) * m.mean + m.log_density_mean;
  }
  if (!std::isfinite(value)) throw NumericalError("em_q evaluated to a non-finite value");
  return value;
}

double g_second_derivative(const Decomposition& decomp, std::size_t j, double u) {
  if (!(u >= 0.0)) throw std::domain_error("g'' needs u >= 0");
  const double step = 1e-4 * std::max(1.0, u);
  if (u >= step) {
    return (decomp.g_derivative(j, u + step) - decomp.g_derivative(j, u - step)) / (2.0 * step);
  }
  return (-3.0 * decomp.g_derivative(j, u) + 4.0 * decomp.g_derivative(j, u + step) -
          decomp.g_derivative(j, u + 2.0 * step)) /
         (2.0 * step);
}

ConcavityCertificate concavity_certificate(const Decomposition& decomp, std::span<const double> u_grid,
                                           std::span<const LatentDensity> h) {
  if (u_grid.size() < 3) throw std::invalid_argument("concavity certificate needs at least 3 grid points");
  if (!(u_grid.front() >= 0.0)) throw std::invalid_argument("concavity grid must be nonnegative");
  if (!h.empty()) check_lift_count(decomp, h);

  ConcavityCertificate cert;
  cert.worst_second_derivative = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < decomp.dim(); ++j) {
    const ConcavityReport scan = detail::scan_second_differences(
        u_grid, [&](double u) { return decomp.g_coord(j, u); }, kConcavityTolerance);
    if (scan.worst_second_difference > cert.worst_second_derivative) {
      cert.worst_second_derivative = scan.worst_second_difference;
      cert.worst_at = scan.worst_at;
    }
    cert.concave = cert.concave && scan.concave;

    if (h.empty()) continue;
    cert.variance_identity_checked = true;
    for (double u : u_grid) {
      const double curvature = g_second_derivative(decomp, j, u);
      const double variance = tilted_moments(lift_for(h, j), u).variance;
      const double scale = std::max(std::abs(curvature), variance);
      const double rel = scale > 0.0 ? std::abs(curvature + variance) / scale : 0.0;
      cert.variance_identity_max_rel_error = std::max(cert.variance_identity_max_rel_error, rel);
    }
  }
  cert.variance_identity_ok = cert.variance_identity_max_rel_error <= kVarianceIdentityTol;
  return cert;
}

std::string to_string(EquivalenceVerdict verdict) {
  switch (verdict) {
    case EquivalenceVerdict::EquivalentUpToConstant: return "EquivalentUpToConstant";
    case EquivalenceVerdict::NotEquivalent: return "NotEquivalent";
    case EquivalenceVerdict::MgfInvalid: return "MgfInvalid";
  }
  return "Unknown";
}

std::vector<double> EquivalenceOptions::default_u_grid() {
  std::vector<double> grid(101);
  for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = 0.1 * static_cast<double>(i);
  return grid;
}

EquivalenceReport verify_mm_em_equivalence(const Decomposition& decomp, std::span<const LatentDensity> h,
                                           const Eigen::VectorXd& theta_t,
                                           std::span<const Eigen::VectorXd> theta_grid,
                                           const EquivalenceOptions& options) {
  check_lift_count(decomp, h);
  if (theta_grid.empty()) throw std::invalid_argument("equivalence check needs a nonempty theta grid");
  if (static_cast<std::size_t>(theta_t.size()) != decomp.dim() || !theta_t.allFinite()) {
    throw std::invalid_argument("equivalence check needs a finite anchor of the problem dimension");
  }
  const std::vector<double> u_grid = options.u_grid.empty() ? EquivalenceOptions::default_u_grid() : options.u_grid;

  EquivalenceReport report;
  report.mgf_max_rel_error = verify_mgf_representation(decomp, h, u_grid);
  report.concavity_ok = concavity_certificate(decomp, u_grid).concave;

  std::vector<double> anchors(u_grid);
  for (Eigen::Index j = 0; j < theta_t.size(); ++j) anchors.push_back(std::abs(theta_t[j]));
  for (std::size_t j = 0; j < decomp.dim(); ++j) {
    for (double u : anchors) {
      const double gap = std::abs(tilted_moments(lift_for(h, j), u).mean + decomp.g_derivative(j, u));
      report.mean_identity_max_error = std::max(report.mean_identity_max_error, gap);
    }
  }

  const Eigen::VectorXd abs_anchor = theta_t.cwiseAbs();
  Eigen::VectorXd slopes(theta_t.size());
  for (Eigen::Index j = 0; j < theta_t.size(); ++j) {
    slopes[j] = decomp.g_derivative(static_cast<std::size_t>(j), abs_anchor[j]);
  }
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (const auto& theta : theta_grid) {
    if (!theta.allFinite()) throw std::invalid_argument("theta grid must be finite");
    const double linearized = decomp.f(theta) - slopes.dot(theta.cwiseAbs() - abs_anchor);
    const double d = em_q(decomp, h, theta, theta_t) - linearized;
    lo = std::min(lo, d);
    hi = std::max(hi, d);
  }
  report.max_constant_deviation = hi - lo;

  if (!(report.mgf_max_rel_error <= options.mgf_tol)) {
    report.verdict = EquivalenceVerdict::MgfInvalid;
  } else if (report.max_constant_deviation <= options.constant_tol) {
    report.verdict = EquivalenceVerdict::EquivalentUpToConstant;
  } else {
    report.verdict = EquivalenceVerdict::NotEquivalent;
  }
  return report;
}

}  // namespace sparsemm

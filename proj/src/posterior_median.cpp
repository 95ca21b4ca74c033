#include "sparsemm/posterior_median.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <boost/math/distributions/normal.hpp>
#include <fmt/format.h>

#include "sparsemm/mm_solver.hpp"

namespace sparsemm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void validate_normal(const NormalDist& n) {
  if (!std::isfinite(n.mean)) throw std::invalid_argument("normal mean must be finite");
  if (!(n.sd > 0.0) || !std::isfinite(n.sd)) {
    throw std::invalid_argument(fmt::format("normal scale must be finite and positive, got {}", n.sd));
  }
}

void validate_grid(const GridCdf& g) {
  if (g.points.size() < 2 || g.points.size() != g.values.size()) {
    throw std::invalid_argument("grid CDF needs at least two knots with matching values");
  }
  if (g.values.front() != 0.0 || g.values.back() != 1.0) {
    throw std::invalid_argument("grid CDF must run from 0 at the first knot to 1 at the last");
  }
  for (std::size_t i = 1; i < g.points.size(); ++i) {
    if (!(g.points[i] > g.points[i - 1])) throw std::invalid_argument("grid CDF knots must be strictly increasing");
    if (!(g.values[i] > g.values[i - 1])) {
      throw std::invalid_argument(
          fmt::format("grid CDF is flat between {} and {}; the median would not be unique", g.points[i - 1],
                      g.points[i]));
    }
  }
}

double log_normal_density(double x, double mean, double sd) {
  const double z = (x - mean) / sd;
  return -0.5 * z * z - std::log(sd) - 0.5 * std::log(2.0 * M_PI);
}

}  // namespace

ContinuousDist::ContinuousDist(NormalDist normal) : kind_(normal) { validate_normal(normal); }

ContinuousDist::ContinuousDist(GridCdf grid) : kind_(std::move(grid)) { validate_grid(std::get<GridCdf>(kind_)); }

double ContinuousDist::cdf(double x) const {
  if (const auto* n = std::get_if<NormalDist>(&kind_)) {
    if (x == -kInf) return 0.0;
    if (x == kInf) return 1.0;
    return boost::math::cdf(boost::math::normal_distribution<double>(n->mean, n->sd), x);
  }
  const auto& g = std::get<GridCdf>(kind_);
  if (x <= g.points.front()) return 0.0;
  if (x >= g.points.back()) return 1.0;
  const auto it = std::upper_bound(g.points.begin(), g.points.end(), x);
  const std::size_t hi = static_cast<std::size_t>(it - g.points.begin());
  const std::size_t lo = hi - 1;
  const double t = (x - g.points[lo]) / (g.points[hi] - g.points[lo]);
  return g.values[lo] + t * (g.values[hi] - g.values[lo]);
}

double ContinuousDist::quantile(double p) const {
  if (!(p >= 0.0 && p <= 1.0)) throw std::domain_error(fmt::format("quantile needs p in [0, 1], got {}", p));
  if (const auto* n = std::get_if<NormalDist>(&kind_)) {
    if (p == 0.0) return -kInf;
    if (p == 1.0) return kInf;
    return boost::math::quantile(boost::math::normal_distribution<double>(n->mean, n->sd), p);
  }
  const auto& g = std::get<GridCdf>(kind_);
  if (p <= 0.0) return g.points.front();
  if (p >= 1.0) return g.points.back();
  const auto it = std::upper_bound(g.values.begin(), g.values.end(), p);
  const std::size_t hi = static_cast<std::size_t>(it - g.values.begin());
  const std::size_t lo = hi - 1;
  const double t = (p - g.values[lo]) / (g.values[hi] - g.values[lo]);
  return g.points[lo] + t * (g.points[hi] - g.points[lo]);
}

double standard_normal_quantile(double p) { return ContinuousDist::normal(0.0, 1.0).quantile(p); }

PosteriorMixture marginal_posterior(const SpikeSlabPrior& prior, double y, double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw std::invalid_argument(fmt::format("noise scale sigma must be positive, got {}", sigma));
  }
  if (!(prior.pi >= 0.0 && prior.pi <= 1.0)) {
    throw std::invalid_argument(fmt::format("prior atom mass must lie in [0, 1], got {}", prior.pi));
  }
  if (!std::isfinite(y)) throw std::invalid_argument("observation must be finite");
  if (!prior.slab.is_normal()) throw std::invalid_argument("marginal_posterior needs a normal slab");

  const NormalDist& slab = prior.slab.as_normal();
  const double s2 = sigma * sigma;
  const double t2 = slab.sd * slab.sd;

  double pi_y = 0.0;
  if (prior.pi == 1.0) {
    pi_y = 1.0;
  } else if (prior.pi > 0.0) {
    const double log_atom = std::log(prior.pi) + log_normal_density(y, 0.0, sigma);
    const double log_slab = std::log1p(-prior.pi) + log_normal_density(y, slab.mean, std::sqrt(s2 + t2));
    pi_y = 1.0 / (1.0 + std::exp(log_slab - log_atom));
  }
  const double post_mean = (y * t2 + slab.mean * s2) / (s2 + t2);
  const double post_sd = std::sqrt(s2 * t2 / (s2 + t2));
  return PosteriorMixture{pi_y, ContinuousDist::normal(post_mean, post_sd)};
}

double posterior_odds(const PosteriorMixture& mix) {
  if (mix.pi_y >= 1.0) return kInf;
  return mix.pi_y / (1.0 - mix.pi_y);
}

double threshold_delta(const PosteriorMixture& mix) { return std::abs(1.0 - 2.0 * mix.continuous.cdf(0.0)); }

std::string to_string(MedianBranch branch) {
  switch (branch) {
    case MedianBranch::ZeroByOdds: return "ZeroByOdds";
    case MedianBranch::PositiveBranch: return "PositiveBranch";
    case MedianBranch::NegativeBranch: return "NegativeBranch";
    case MedianBranch::ZeroByCenteredSlab: return "ZeroByCenteredSlab";
  }
  return "Unknown";
}

MedianResult median_closed_form(const PosteriorMixture& mix) {
  if (!(mix.pi_y >= 0.0 && mix.pi_y <= 1.0)) {
    throw std::invalid_argument(fmt::format("posterior atom mass must lie in [0, 1], got {}", mix.pi_y));
  }
  MedianResult result;
  result.odds = posterior_odds(mix);
  const double at_zero = mix.continuous.cdf(0.0);
  result.threshold_delta = std::abs(1.0 - 2.0 * at_zero);
  // F_c strictly increasing: Med_c > 0 exactly when F_c(0) < 1/2.
  result.sign_s = at_zero < 0.5 ? 1 : (at_zero > 0.5 ? -1 : 0);

  if (result.sign_s == 0) {
    result.branch = MedianBranch::ZeroByCenteredSlab;
    return result;
  }
  if (result.odds >= result.threshold_delta) {
    result.branch = MedianBranch::ZeroByOdds;
    return result;
  }
  result.median = mix.continuous.quantile((1.0 - result.sign_s * result.odds) / 2.0);
  result.branch = result.sign_s > 0 ? MedianBranch::PositiveBranch : MedianBranch::NegativeBranch;
  return result;
}

double median_location_scale(double med_c, double sigma_c, const std::function<double(double)>& g_quantile,
                             double odds, double delta) {
  if (!(sigma_c > 0.0)) throw std::invalid_argument("location-scale median needs sigma_c > 0");
  if (!(odds >= 0.0)) throw std::invalid_argument("posterior odds must be nonnegative");
  if (!(odds < delta)) {
    throw std::logic_error(
        fmt::format("location-scale form needs odds < delta (got {} >= {}); the median is 0", odds, delta));
  }
  if (med_c == 0.0) throw std::logic_error("location-scale form needs a nonzero continuous median");
  const double shrink = sigma_c * g_quantile((1.0 + odds) / 2.0);
  return med_c > 0.0 ? med_c - shrink : med_c + shrink;
}

double median_oracle(const PosteriorMixture& mix, double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("median oracle needs tol > 0");
  const double pi = mix.pi_y;
  const auto F = [&](double b) { return (b >= 0.0 ? pi : 0.0) + (1.0 - pi) * mix.continuous.cdf(b); };

  const double below_zero = (1.0 - pi) * mix.continuous.cdf(0.0);
  const double at_zero = pi + below_zero;
  if (below_zero <= 0.5 && at_zero >= 0.5) return 0.0;

  // Bracket [lo, hi] with F(lo) < 1/2 <= F(hi), then bisect.
  double lo = 0.0;
  double hi = 0.0;
  if (at_zero < 0.5) {
    hi = 1.0;
    for (int i = 0; F(hi) < 0.5; ++i) {
      if (i > 1100) throw NumericalError("median oracle could not bracket the median from above");
      lo = hi;
      hi *= 2.0;
    }
  } else {
    lo = -1.0;
    for (int i = 0; F(lo) >= 0.5; ++i) {
      if (i > 1100) throw NumericalError("median oracle could not bracket the median from below");
      hi = lo;
      lo *= 2.0;
    }
  }
  for (int i = 0; i < 2000 && hi - lo > tol; ++i) {
    const double mid = lo + 0.5 * (hi - lo);
    if (mid <= lo || mid >= hi) break;
    if (F(mid) >= 0.5) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return lo + 0.5 * (hi - lo);
}

namespace {

ThresholdResult threshold_impl(std::span<const SpikeSlabPrior> priors, std::span<const double> y,
                               std::span<const double> sigmas) {
  if (priors.size() != 1 && priors.size() != y.size()) {
    throw std::invalid_argument(fmt::format("expected 1 or {} priors, got {}", y.size(), priors.size()));
  }
  if (sigmas.size() != 1 && sigmas.size() != y.size()) {
    throw std::invalid_argument(fmt::format("expected 1 or {} noise scales, got {}", y.size(), sigmas.size()));
  }
  ThresholdResult out;
  out.estimate.reserve(y.size());
  out.posteriors.reserve(y.size());
  out.medians.reserve(y.size());
  for (std::size_t j = 0; j < y.size(); ++j) {
    const auto& prior = priors.size() == 1 ? priors[0] : priors[j];
    const double sigma = sigmas.size() == 1 ? sigmas[0] : sigmas[j];
    out.posteriors.push_back(marginal_posterior(prior, y[j], sigma));
    out.medians.push_back(median_closed_form(out.posteriors.back()));
    out.estimate.push_back(out.medians.back().median);
    if (out.estimate.back() != 0.0) out.support.push_back(j);
  }
  return out;
}

}  // namespace

ThresholdResult threshold_vector(std::span<const SpikeSlabPrior> priors, std::span<const double> y, double sigma) {
  return threshold_impl(priors, y, std::span<const double>(&sigma, 1));
}

ThresholdResult threshold_vector(const SpikeSlabPrior& prior, std::span<const double> y, double sigma) {
  return threshold_impl(std::span<const SpikeSlabPrior>(&prior, 1), y, std::span<const double>(&sigma, 1));
}

ThresholdResult threshold_vector(const SpikeSlabPrior& prior, std::span<const double> y,
                                 std::span<const double> sigmas) {
  return threshold_impl(std::span<const SpikeSlabPrior>(&prior, 1), y, sigmas);
}

}  // namespace sparsemm

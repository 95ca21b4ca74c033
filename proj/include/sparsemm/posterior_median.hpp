#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace sparsemm {

struct NormalDist {
  double mean = 0.0;
  double sd = 1.0;
};

/// Piecewise-linear CDF through (points[i], values[i]). Values run from 0 at
/// the first knot to 1 at the last and must be strictly increasing: a flat
/// stretch would make the median ambiguous, so it is rejected.
struct GridCdf {
  std::vector<double> points;
  std::vector<double> values;
};

/// Continuous distribution with a strictly increasing CDF on its support.
class ContinuousDist {
 public:
  ContinuousDist(NormalDist normal);  // NOLINT(google-explicit-constructor)
  ContinuousDist(GridCdf grid);       // NOLINT(google-explicit-constructor)

  static ContinuousDist normal(double mean, double sd) { return ContinuousDist(NormalDist{mean, sd}); }

  double cdf(double x) const;
  /// Inverse CDF; returns -inf / +inf at 0 / 1 for unbounded support.
  double quantile(double p) const;
  double median() const { return quantile(0.5); }

  bool is_normal() const { return std::holds_alternative<NormalDist>(kind_); }
  const NormalDist& as_normal() const { return std::get<NormalDist>(kind_); }

 private:
  std::variant<NormalDist, GridCdf> kind_;
};

/// Standard normal quantile, the G^{-1} of the normal location-scale family.
double standard_normal_quantile(double p);

/// Spike-and-slab prior: atom of mass `pi` at zero plus a continuous slab.
struct SpikeSlabPrior {
  double pi = 0.5;
  ContinuousDist slab = ContinuousDist::normal(0.0, 1.0);

  static SpikeSlabPrior normal_slab(double pi, double tau) { return {pi, ContinuousDist::normal(0.0, tau)}; }
};

/// Marginal posterior of one coefficient: pi_y 1(beta >= 0) + (1 - pi_y) F_c(beta).
struct PosteriorMixture {
  double pi_y = 0.0;
  ContinuousDist continuous = ContinuousDist::normal(0.0, 1.0);
};

/// Gaussian normal-means update for y | beta ~ Normal(beta, sigma^2) under a
/// normal slab. Throws std::invalid_argument for sigma <= 0 or a non-normal slab.
PosteriorMixture marginal_posterior(const SpikeSlabPrior& prior, double y, double sigma);

/// pi_y / (1 - pi_y); +inf when pi_y == 1.
double posterior_odds(const PosteriorMixture& mix);

/// |1 - 2 F_c(0)|.
double threshold_delta(const PosteriorMixture& mix);

enum class MedianBranch { ZeroByOdds, PositiveBranch, NegativeBranch, ZeroByCenteredSlab };
std::string to_string(MedianBranch branch);

struct MedianResult {
  double median = 0.0;
  double odds = 0.0;
  double threshold_delta = 0.0;
  MedianBranch branch = MedianBranch::ZeroByOdds;
  int sign_s = 0;
};

/// Closed-form posterior median of the atom-plus-continuous mixture:
///   F_c^{-1}((1 - S O) / 2)  if O < Delta,
///   0                        if O >= Delta,
/// with O the posterior odds of zero, Delta = |1 - 2 F_c(0)| and S the sign
/// of the continuous median.
MedianResult median_closed_form(const PosteriorMixture& mix);

/// Location-scale form of the nonzero branch:
///   med_c -/+ sigma_c G^{-1}((1 + O) / 2)   for med_c > 0 / med_c < 0.
/// Throws std::logic_error when odds >= delta or med_c == 0; those inputs
/// belong to the zero branch.
double median_location_scale(double med_c, double sigma_c, const std::function<double(double)>& g_quantile,
                             double odds, double delta);

/// Median straight from its definition, F(M) >= 1/2 and F(M-) <= 1/2, by
/// bisection on the mixture CDF. Returns exactly 0 when the atom straddles 1/2.
double median_oracle(const PosteriorMixture& mix, double tol);

struct ThresholdResult {
  std::vector<double> estimate;
  std::vector<std::size_t> support;
  std::vector<PosteriorMixture> posteriors;
  std::vector<MedianResult> medians;
};

/// Coordinatewise marginal posterior median. `priors` holds one prior per
/// coordinate or a single shared prior.
ThresholdResult threshold_vector(std::span<const SpikeSlabPrior> priors, std::span<const double> y, double sigma);
ThresholdResult threshold_vector(const SpikeSlabPrior& prior, std::span<const double> y, double sigma);
/// Per-coordinate noise scales.
ThresholdResult threshold_vector(const SpikeSlabPrior& prior, std::span<const double> y,
                                 std::span<const double> sigmas);

}  // namespace sparsemm

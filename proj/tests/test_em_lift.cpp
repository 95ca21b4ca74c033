#include <doctest.h>

#include <cmath>
#include <memory>
#include <random>
#include <stdexcept>

#include "oracles.hpp"
#include "sparsemm/em_lift.hpp"

using namespace sparsemm;

namespace {

Decomposition scalar(const PenaltySpec& spec) {
  auto model = std::make_shared<const RegressionModel>(Eigen::MatrixXd::Ones(1, 1), Eigen::VectorXd::Constant(1, 0.7));
  return decompose(model, {spec});
}

std::vector<Eigen::VectorXd> theta_grid(int count = 100) {
  std::vector<Eigen::VectorXd> out;
  for (int i = 0; i < count; ++i) out.push_back(Eigen::VectorXd::Constant(1, -5.0 + 10.0 * i / (count - 1)));
  return out;
}

std::vector<double> u_range(double lo, double hi, int count) {
  std::vector<double> out;
  for (int i = 0; i < count; ++i) out.push_back(lo + (hi - lo) * i / (count - 1));
  return out;
}

}  // namespace

TEST_CASE("latent density validation") {
  CHECK_NOTHROW(validate(LatentDensity{PointMass{-1.0}}));
  CHECK_THROWS_AS(validate(LatentDensity{NegExponential{0.0}}), std::invalid_argument);
  CHECK_THROWS_AS(validate(LatentDensity{GridDensity{{0.0, 1.0}, {0.5, 0.6}}}), std::invalid_argument);
  CHECK_THROWS_AS(validate(LatentDensity{GridDensity{{1.0, 0.0}, {0.5, 0.5}}}), std::invalid_argument);
  CHECK_THROWS_AS(validate(LatentDensity{GridDensity{{0.0, 1.0}, {1.5, -0.5}}}), std::invalid_argument);
}

TEST_CASE("discretized density has unit mass") {
  std::vector<double> pts = u_range(-20.0, 0.0, 2001);
  const auto g = discretize_density([](double z) { return std::exp(z); }, pts);
  double total = 0.0;
  for (double w : g.weights) total += w;
  CHECK(std::abs(total - 1.0) <= 1e-10);
}

TEST_CASE("mgf representation") {
  const auto l1 = scalar(PenaltySpec::l1(0.8, 2));
  const std::vector<LatentDensity> point{PointMass{-1.6}};
  CHECK(verify_mgf_representation(l1, point, u_range(0.0, 10.0, 101)) == 0.0);

  const auto logp = scalar(PenaltySpec::log(1.0));
  const std::vector<LatentDensity> ne{NegExponential{1.0}};
  CHECK(verify_mgf_representation(logp, ne, u_range(0.0, 10.0, 101)) <= 1e-12);
  for (double u : {0.0, 0.5, 3.0}) {
    CHECK(tilted_moments(ne[0], u).mgf == doctest::Approx(oracle::negexp_mgf_quadrature(1.0, u)).epsilon(1e-9));
  }

  const auto quad = scalar(PenaltySpec::quadratic(1.0));
  const auto u = u_range(0.0, 10.0, 101);
  const std::vector<LatentDensity> fitted{
      fit_grid_density([&](double t) { return quad.g_coord(0, t); }, u_range(-10.0, 0.0, 201), u)};
  CHECK(verify_mgf_representation(quad, fitted, u) > 0.5);
  CHECK_THROWS_AS(verify_mgf_representation(l1, point, std::vector<double>{-0.1}), std::domain_error);
}

TEST_CASE("tilted moments of the negated exponential") {
  const NegExponential h{2.0};
  for (double u : {0.0, 0.3, 4.0}) {
    const auto m = tilted_moments(h, u);
    CHECK(m.mean == doctest::Approx(-1.0 / (2.0 + u)));
    CHECK(m.variance == doctest::Approx(1.0 / ((2.0 + u) * (2.0 + u))));
  }
  CHECK_THROWS_AS(tilted_moments(LatentDensity{h}, -2.5), std::domain_error);
}

TEST_CASE("latent posterior mean") {
  CHECK(latent_posterior_mean(scalar(PenaltySpec::l1(0.3, 3)), 2.0) == doctest::Approx(-0.9));
  CHECK(latent_posterior_mean(scalar(PenaltySpec::log(1.0)), 1.0) == doctest::Approx(-0.5));
  const auto logp = scalar(PenaltySpec::log(1.0));
  const double fd = oracle::central_difference([&](double u) { return logp.g_coord(0, u); }, 1.0, 1e-5);
  CHECK(latent_posterior_mean(logp, 1.0) == doctest::Approx(-fd).epsilon(1e-8));
  CHECK(latent_posterior_mean(scalar(PenaltySpec::scad(1.0)), 5.0) == 0.0);
  CHECK_THROWS_AS(latent_posterior_mean(logp, -1.0), std::domain_error);
}

TEST_CASE("em q for l1 with a point mass") {
  const auto l1 = scalar(PenaltySpec::l1(0.6));
  const std::vector<LatentDensity> h{PointMass{-0.6}};
  std::mt19937_64 rng(1);
  std::normal_distribution<double> z;
  for (int i = 0; i < 20; ++i) {
    const Eigen::VectorXd theta = Eigen::VectorXd::Constant(1, 2.0 * z(rng));
    const Eigen::VectorXd anchor = Eigen::VectorXd::Constant(1, 2.0 * z(rng));
    CHECK(em_q(l1, h, theta, anchor) - l1.f(theta) == doctest::Approx(-0.6 * std::abs(theta(0))));
    const auto lla = lla_surrogate(l1, anchor);
    const double gap = em_q(l1, h, anchor, anchor) - (lla.value(anchor) - lla.constant_shift);
    CHECK(gap == doctest::Approx(0.0).scale(1.0));
  }
}

TEST_CASE("equivalence verdicts") {
  const auto grid = theta_grid();
  EquivalenceOptions strict;
  strict.constant_tol = 1e-10;
  strict.u_grid = EquivalenceOptions::default_u_grid();
  const auto l1 = scalar(PenaltySpec::l1(0.9, 3));
  const std::vector<LatentDensity> point{PointMass{-2.7}};
  for (double a : {-3.0, -0.2, 0.0, 1.0, 4.5}) {
    const auto r = verify_mm_em_equivalence(l1, point, Eigen::VectorXd::Constant(1, a), grid, strict);
    CHECK(r.verdict == EquivalenceVerdict::EquivalentUpToConstant);
    CHECK(r.max_constant_deviation <= 1e-10);
  }

  EquivalenceOptions loose;
  loose.u_grid = EquivalenceOptions::default_u_grid();
  const auto logp = scalar(PenaltySpec::log(0.5, 0.5, 2));
  const std::vector<LatentDensity> ne{NegExponential{0.5}};
  const auto r = verify_mm_em_equivalence(logp, ne, Eigen::VectorXd::Constant(1, 1.3), grid, loose);
  CHECK(r.verdict == EquivalenceVerdict::EquivalentUpToConstant);
  CHECK(r.mean_identity_max_error <= 1e-6);

  // Wrong rate: the MGF check rejects it.
  const std::vector<LatentDensity> wrong{NegExponential{0.7}};
  CHECK(verify_mm_em_equivalence(logp, wrong, Eigen::VectorXd::Constant(1, 1.3), grid, loose).verdict ==
        EquivalenceVerdict::MgfInvalid);

  const auto quad = scalar(PenaltySpec::quadratic(1.0));
  const std::vector<LatentDensity> fitted{
      fit_grid_density([&](double t) { return quad.g_coord(0, t); }, u_range(-10.0, 0.0, 201), loose.u_grid)};
  const auto q = verify_mm_em_equivalence(quad, fitted, Eigen::VectorXd::Constant(1, 1.0), grid, loose);
  CHECK(q.verdict == EquivalenceVerdict::MgfInvalid);
  CHECK_FALSE(q.concavity_ok);
}

TEST_CASE("grid lift of the log penalty satisfies both identities") {
  const auto logp = scalar(PenaltySpec::log(1.0));
  const auto h = discretize_density([](double z) { return z <= 0.0 ? std::exp(z) : 0.0; }, u_range(-60.0, 0.0, 600001));
  const std::vector<LatentDensity> lift{h};
  const auto u = u_range(0.01, 10.0, 60);
  for (double x : u) {
    const auto m = tilted_moments(lift[0], x);
    CHECK(std::abs(m.mean + logp.g_derivative(0, x)) <= 1e-6);
  }
  const auto cert = concavity_certificate(logp, u, lift);
  CHECK(cert.concave);
  CHECK(cert.variance_identity_checked);
  CHECK(cert.variance_identity_max_rel_error <= 1e-4);
}

TEST_CASE("concavity certificate") {
  const auto u = u_range(0.0, 10.0, 101);
  const std::vector<LatentDensity> point{PointMass{-1.0}};
  const auto l1 = concavity_certificate(scalar(PenaltySpec::l1(1.0)), u, point);
  CHECK(l1.concave);
  CHECK(std::abs(l1.worst_second_derivative) <= 1e-9);
  CHECK(l1.variance_identity_ok);

  const auto logp = scalar(PenaltySpec::log(1.0));
  CHECK(concavity_certificate(logp, u).concave);
  CHECK(g_second_derivative(logp, 0, 0.0) == doctest::Approx(-1.0).epsilon(1e-6));
  CHECK(tilted_moments(NegExponential{1.0}, 0.0).variance == doctest::Approx(1.0));

  CHECK_FALSE(concavity_certificate(scalar(PenaltySpec::quadratic(1.0)), u).concave);
  CHECK_THROWS_AS(concavity_certificate(logp, std::vector<double>{0.0, 1.0}), std::invalid_argument);
}

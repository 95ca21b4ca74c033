// Acceptance suite: one line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "oracles.hpp"
#include "sparsemm/bench.hpp"
#include "sparsemm/em_lift.hpp"
#include "sparsemm/mm_solver.hpp"
#include "sparsemm/penalty.hpp"
#include "sparsemm/posterior_median.hpp"

using namespace sparsemm;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

PosteriorMixture normal_mixture(double pi_y, double m, double s) { return {pi_y, ContinuousDist::normal(m, s)}; }

Outcome median_oracle_equivalence() {
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::uniform_real_distribution<double> loc(-3.0, 3.0);
  std::uniform_real_distribution<double> scale(0.1, 3.0);
  std::uniform_real_distribution<double> nudge(-1e-3, 1e-3);
  double worst = 0.0;
  int zero_branch = 0;
  int near_boundary = 0;
  for (int i = 0; i < 1000; ++i) {
    const double m = loc(rng);
    const double s = scale(rng);
    double pi_y = u01(rng);
    if (i % 10 == 0) {
      // Place O within 1e-3 of Delta.
      const double delta = threshold_delta(normal_mixture(0.0, m, s));
      const double odds = std::max(0.0, delta + nudge(rng));
      pi_y = odds / (1.0 + odds);
    }
    const auto mix = normal_mixture(pi_y, m, s);
    const auto r = median_closed_form(mix);
    if (r.median == 0.0) ++zero_branch;
    if (std::abs(r.odds - r.threshold_delta) <= 1e-3) ++near_boundary;
    worst = std::max(worst, std::abs(r.median - median_oracle(mix, 1e-12)));
  }
  return {worst <= 1e-8 && zero_branch >= 50 && near_boundary >= 50,
          fmt::format("max |closed form - bisection| = {:.3g}; zero branch {}, near O = Delta {}", worst, zero_branch,
                      near_boundary)};
}

Outcome double_shrinkage_identity() {
  std::mt19937_64 rng(202);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::uniform_real_distribution<double> mag(0.05, 3.0);
  std::uniform_real_distribution<double> scale(0.1, 3.0);
  double worst = 0.0;
  int positive = 0;
  int negative = 0;
  for (int i = 0; i < 500; ++i) {
    const double med = (i % 2 ? -1.0 : 1.0) * mag(rng);
    const double s = scale(rng);
    const double delta = threshold_delta(normal_mixture(0.0, med, s));
    const double odds = 0.999 * u01(rng) * delta;
    const auto r = median_closed_form(normal_mixture(odds / (1.0 + odds), med, s));
    const double ls = median_location_scale(med, s, standard_normal_quantile, r.odds, r.threshold_delta);
    (med > 0 ? positive : negative) += 1;
    worst = std::max(worst, std::abs(ls - r.median));
  }
  return {worst <= 1e-10 && positive > 0 && negative > 0,
          fmt::format("max |location-scale - closed form| = {:.3g}; med_c > 0: {}, med_c < 0: {}", worst, positive,
                      negative)};
}

Outcome atom_dominance() {
  std::mt19937_64 rng(303);
  std::uniform_real_distribution<double> heavy(0.5, 1.0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::uniform_real_distribution<double> loc(-3.0, 3.0);
  std::uniform_real_distribution<double> scale(0.1, 3.0);
  int failures = 0;
  for (int i = 0; i < 200; ++i) {
    const double pi_y = i == 0 ? 0.5 : i == 1 ? 1.0 : heavy(rng);
    if (median_closed_form(normal_mixture(pi_y, loc(rng), scale(rng))).median != 0.0) ++failures;
  }
  for (int i = 0; i < 50; ++i) {
    if (median_closed_form(normal_mixture(u01(rng), 0.0, scale(rng))).median != 0.0) ++failures;
  }
  return {failures == 0, fmt::format("{} nonzero medians in 250 cases", failures)};
}

Outcome bayes_oracle() {
  std::mt19937_64 rng(404);
  std::uniform_real_distribution<double> pi_dist(0.05, 0.95);
  std::uniform_real_distribution<double> sigma_dist(0.5, 2.0);
  std::uniform_real_distribution<double> tau_dist(0.5, 3.0);
  std::uniform_real_distribution<double> y_dist(-4.0, 4.0);
  double worst = 0.0;
  const auto rel = [](double a, double b) { return std::abs(a - b) / std::abs(b); };
  for (int i = 0; i < 50; ++i) {
    const double pi = pi_dist(rng);
    const double sigma = sigma_dist(rng);
    const double tau = tau_dist(rng);
    const double y = y_dist(rng);
    const auto mix = marginal_posterior(SpikeSlabPrior::normal_slab(pi, tau), y, sigma);
    const auto q = oracle::bayes_quadrature(pi, sigma, tau, y);
    const auto& c = mix.continuous.as_normal();
    worst = std::max({worst, rel(mix.pi_y, q.pi_y), rel(c.mean, q.slab_mean), rel(c.sd * c.sd, q.slab_variance)});
  }
  return {worst <= 1e-6, fmt::format("max relative error over (pi_y, mean, variance) = {:.3g}", worst)};
}

Outcome mm_em_certificates() {
  auto model = std::make_shared<const RegressionModel>(Eigen::MatrixXd::Ones(1, 1), Eigen::VectorXd::Constant(1, 0.4));
  std::vector<Eigen::VectorXd> grid;
  for (int i = 0; i < 100; ++i) grid.push_back(Eigen::VectorXd::Constant(1, -5.0 + 10.0 * i / 99.0));
  std::mt19937_64 rng(505);
  std::uniform_real_distribution<double> anchor_dist(-4.0, 4.0);
  std::vector<double> anchors(5);
  for (double& a : anchors) a = anchor_dist(rng);

  // (a) L1 with a point mass.
  const auto l1 = decompose(model, {PenaltySpec::l1(0.8, 2)});
  const std::vector<LatentDensity> point{PointMass{-1.6}};
  EquivalenceOptions a_opt;
  a_opt.constant_tol = 1e-10;
  a_opt.u_grid = EquivalenceOptions::default_u_grid();
  bool a_ok = true;
  double a_spread = 0.0;
  for (double a : anchors) {
    const auto r = verify_mm_em_equivalence(l1, point, Eigen::VectorXd::Constant(1, a), grid, a_opt);
    a_ok = a_ok && r.verdict == EquivalenceVerdict::EquivalentUpToConstant && r.max_constant_deviation <= 1e-10;
    a_spread = std::max(a_spread, r.max_constant_deviation);
  }

  // (b) log penalty with a negated exponential, identities on u in [0.01, 10].
  const auto logp = decompose(model, {PenaltySpec::log(1.0)});
  const std::vector<LatentDensity> negexp{NegExponential{1.0}};
  EquivalenceOptions b_opt;
  b_opt.constant_tol = 1e-8;
  for (int i = 0; i < 1000; ++i) b_opt.u_grid.push_back(0.01 + (10.0 - 0.01) * i / 999.0);
  bool b_ok = true;
  double b_spread = 0.0;
  double b_mean = 0.0;
  for (double a : anchors) {
    const auto r = verify_mm_em_equivalence(logp, negexp, Eigen::VectorXd::Constant(1, a), grid, b_opt);
    b_ok = b_ok && r.verdict == EquivalenceVerdict::EquivalentUpToConstant;
    b_spread = std::max(b_spread, r.max_constant_deviation);
    b_mean = std::max(b_mean, r.mean_identity_max_error);
  }
  const auto cert = concavity_certificate(logp, b_opt.u_grid, negexp);
  b_ok = b_ok && b_mean <= 1e-6 && cert.concave && cert.variance_identity_checked &&
         cert.variance_identity_max_rel_error <= 1e-4;

  // (c) convex quadratic with a fitted grid density.
  const auto quad = decompose(model, {PenaltySpec::quadratic(1.0)});
  std::vector<double> zs;
  for (int i = 0; i <= 200; ++i) zs.push_back(-10.0 + 0.05 * i);
  const std::vector<LatentDensity> fitted{
      fit_grid_density([&](double u) { return quad.g_coord(0, u); }, zs, a_opt.u_grid)};
  const auto rc = verify_mm_em_equivalence(quad, fitted, Eigen::VectorXd::Constant(1, 1.0), grid, a_opt);
  const bool c_ok = rc.verdict == EquivalenceVerdict::MgfInvalid && !concavity_certificate(quad, a_opt.u_grid).concave;

  return {a_ok && b_ok && c_ok,
          fmt::format("(a) {} spread {:.3g}; (b) {} spread {:.3g}, mean id {:.3g}, variance id {:.3g}; (c) {} {}",
                      a_ok ? "ok" : "FAIL", a_spread, b_ok ? "ok" : "FAIL", b_spread, b_mean,
                      cert.variance_identity_max_rel_error, c_ok ? "ok" : "FAIL", to_string(rc.verdict))};
}

Outcome mm_ascent() {
  std::mt19937_64 rng(606);
  std::uniform_int_distribution<int> n_dist(5, 50);
  std::uniform_int_distribution<int> p_dist(1, 10);
  std::uniform_real_distribution<double> lambda_dist(0.05, 1.0);
  std::normal_distribution<double> z;
  double worst_drop = 0.0;
  int runs = 0;
  for (int rep = 0; rep < 100; ++rep) {
    const int n = n_dist(rng);
    const int p = p_dist(rng);
    Eigen::MatrixXd X(n, p);
    for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = z(rng);
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
    for (int j = 0; j < std::min(p, 3); ++j) beta(j) = 2.0 * z(rng);
    Eigen::VectorXd y = X * beta;
    for (int i = 0; i < n; ++i) y(i) += z(rng);
    auto model = std::make_shared<const RegressionModel>(X, y);
    const auto decomp = decompose(model, std::vector<PenaltySpec>(static_cast<std::size_t>(p),
                                                                   PenaltySpec::scad(lambda_dist(rng), 3.7, n)));
    const Eigen::VectorXd theta0 = default_initial_estimate(*model);
    for (auto driver : {SurrogateDriver::LLA, SurrogateDriver::LQA}) {
      MmOptions opt;
      opt.driver = driver;
      for (const auto& fit : {iterate(decomp, theta0, 1e-8, 500, opt), k_step(decomp, theta0, 5, opt)}) {
        ++runs;
        for (std::size_t i = 1; i < fit.objective_trace.size(); ++i) {
          worst_drop = std::max(worst_drop, fit.objective_trace[i - 1] - fit.objective_trace[i]);
        }
      }
    }
  }
  return {worst_drop <= 1e-9, fmt::format("{} traces (LLA and LQA), largest single-step decrease {:.3g}", runs,
                                          worst_drop)};
}

Outcome one_step_closed_form() {
  std::mt19937_64 rng(707);
  std::uniform_real_distribution<double> coef(-3.0, 3.0);
  std::uniform_real_distribution<double> lambda_dist(0.05, 1.0);
  double worst = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    Scenario sc;
    sc.n_obs = 30 + rep;
    sc.p = 2 + rep % 7;
    sc.beta_true.resize(static_cast<std::size_t>(sc.p));
    for (double& b : sc.beta_true) b = rep % 3 == 0 ? 0.0 : coef(rng);
    sc.seed = 1000 + static_cast<std::uint64_t>(rep);
    const auto data = generate(sc);
    auto model = std::make_shared<const RegressionModel>(data.X, data.y);
    const double lambda = lambda_dist(rng);
    const auto decomp =
        decompose(model, std::vector<PenaltySpec>(static_cast<std::size_t>(sc.p), PenaltySpec::l1(lambda, sc.n_obs)));
    const auto fit = k_step(decomp, default_initial_estimate(*model), 1);
    const Eigen::VectorXd zstat = data.X.transpose() * data.y / sc.n_obs;
    for (int j = 0; j < sc.p; ++j) {
      worst = std::max(worst, std::abs(fit.beta_hat(j) - oracle::soft_threshold(zstat(j), lambda)));
    }
  }
  std::uniform_real_distribution<double> zd(-2.5, 2.5);
  std::uniform_real_distribution<double> wd(0.0, 1.5);
  double grid_worst = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    const double zv = zd(rng);
    const double w = wd(rng);
    auto model =
        std::make_shared<const RegressionModel>(Eigen::MatrixXd::Ones(1, 1), Eigen::VectorXd::Constant(1, zv));
    const auto decomp = decompose(model, {PenaltySpec::l1(w)});
    const double b = solve_surrogate(lla_surrogate(decomp, Eigen::VectorXd::Constant(1, zv)))(0);
    grid_worst = std::max(grid_worst, std::abs(b - oracle::grid_min_l1(zv, w)));
  }
  return {worst <= 1e-8 && grid_worst <= 2e-4,
          fmt::format("max |one-step - soft threshold| = {:.3g}; max |inner solver - grid search| = {:.3g}", worst,
                      grid_worst)};
}

Outcome derivative_vs_differences() {
  std::mt19937_64 rng(808);
  std::uniform_real_distribution<double> lambda_dist(0.1, 3.0);
  double worst = 0.0;
  int checked = 0;
  for (auto family : {PenaltyFamily::L1, PenaltyFamily::SCAD, PenaltyFamily::Log}) {
    int count = 0;
    while (count < 100) {
      const double lambda = lambda_dist(rng);
      PenaltySpec spec = family == PenaltyFamily::L1     ? PenaltySpec::l1(lambda)
                         : family == PenaltyFamily::SCAD ? PenaltySpec::scad(lambda, 3.7)
                                                         : PenaltySpec::log(lambda);
      const double h = 1e-5;
      std::uniform_real_distribution<double> t_dist(2.0 * h, spec.a * lambda + 5.0);
      const double t = t_dist(rng);
      if (family == PenaltyFamily::SCAD && (std::abs(t - lambda) < 1e-3 || std::abs(t - spec.a * lambda) < 1e-3)) {
        continue;
      }
      const double fd = oracle::central_difference([&](double s) { return penalty_value(spec, s); }, t, h);
      const double d = penalty_derivative(spec, t);
      worst = std::max(worst, d == 0.0 ? std::abs(fd) : std::abs(fd - d) / std::abs(d));
      ++count;
      ++checked;
    }
  }
  return {worst <= 1e-6, fmt::format("{} points, max relative error {:.3g}", checked, worst)};
}

Outcome bench_determinism() {
  bool ok = true;
  std::string detail;
  for (auto design : {DesignKind::Orthonormal, DesignKind::GaussianCorrelated}) {
    ExperimentConfig c;
    c.scenario.n_obs = 50;
    c.scenario.p = 8;
    c.scenario.beta_true = {2.5, 0.0, 1.2, 0.0, 0.0, 0.8, 0.0, 0.0};
    c.scenario.noise_sd = 1.5;
    c.scenario.design = design;
    c.scenario.rho = design == DesignKind::GaussianCorrelated ? 0.5 : 0.0;
    c.lambda_grid = {0.2, 0.5};
    c.pi_grid = {0.5, 0.9};
    c.allow_marginal_approx = true;
    c.replicates = 40;
    c.seed = 77;
    const auto first = run_experiment(c);
    c.threads = 4;
    const auto second = run_experiment(c);
    const bool same = to_csv(first.table) == to_csv(second.table);
    bool counts = true;
    for (std::size_t m = 0; m < first.methods.size(); ++m) {
      int correct = 0;
      int over = 0;
      int under = 0;
      for (const auto& rec : first.replicates) {
        const auto& o = rec.outcomes[m];
        if (!o.ok) continue;
        (o.fit == FitClass::Correct ? correct : o.fit == FitClass::OverFit ? over : under) += 1;
      }
      const auto* row = first.table.find(first.methods[m].label());
      counts = counts && row != nullptr && correct + over + under == c.replicates && row->replicates == c.replicates;
    }
    double worst_gap = 0.0;
    for (const auto& rec : first.replicates) {
      for (std::size_t m = 0; m < first.methods.size(); ++m) {
        if (first.methods[m].kind != MethodKind::ScadFull) continue;
        for (std::size_t o = 0; o < first.methods.size(); ++o) {
          if (first.methods[o].kind == MethodKind::ScadOneStep && first.methods[o].lambda == first.methods[m].lambda) {
            worst_gap = std::max(worst_gap, rec.outcomes[o].objective - rec.outcomes[m].objective);
          }
        }
      }
    }
    const bool dominance = worst_gap <= 1e-9;
    ok = ok && same && counts && dominance;
    detail += fmt::format("{}{}: identical csv {}, accounting {}, one-step minus full objective <= {:.3g}",
                          detail.empty() ? "" : "; ", design == DesignKind::Orthonormal ? "orthonormal" : "correlated",
                          same ? "yes" : "no", counts ? "ok" : "FAIL", worst_gap);
  }
  return {ok, detail};
}

Outcome sparsity_monotonicity() {
  int violations = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Scenario sc;
    sc.n_obs = 64;
    sc.p = 16;
    sc.beta_true.assign(16, 0.0);
    sc.beta_true[0] = 0.6;
    sc.beta_true[3] = -0.3;
    sc.beta_true[7] = 0.15;
    sc.noise_sd = 1.0;
    sc.seed = seed;
    const auto data = generate(sc);
    const Eigen::VectorXd zstat = data.X.transpose() * data.y / sc.n_obs;
    const std::vector<double> z(zstat.data(), zstat.data() + zstat.size());
    const double sigma = sc.noise_sd / std::sqrt(static_cast<double>(sc.n_obs));
    std::size_t previous = z.size() + 1;
    for (double pi : {0.1, 0.3, 0.5, 0.7, 0.9}) {
      const auto r = threshold_vector(SpikeSlabPrior::normal_slab(pi, 1.0), z, sigma);
      if (r.support.size() > previous) ++violations;
      previous = r.support.size();
    }
  }
  return {violations == 0, fmt::format("20 data sets x 5 pi values, {} increases in nonzero count", violations)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"closed-form median matches bisection", median_oracle_equivalence},
      {"location-scale double shrinkage identity", double_shrinkage_identity},
      {"atom mass >= 1/2 or centered slab gives zero", atom_dominance},
      {"marginal posterior matches Bayes quadrature", bayes_oracle},
      {"MM = EM certificates", mm_em_certificates},
      {"MM ascent for LLA and LQA", mm_ascent},
      {"one-step lasso closed form and inner solver", one_step_closed_form},
      {"penalty derivative vs central differences", derivative_vs_differences},
      {"bench determinism and accounting", bench_determinism},
      {"posterior-median sparsity monotone in pi", sparsity_monotonicity},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, fmt::format("exception: {}", e.what())};
    }
    if (!o.pass) ++failed;
    std::printf("criterion %2zu %s: %s (%s)\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first.c_str(),
                o.detail.c_str());
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}

#include "sparsemm/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>

#include <boost/random/mersenne_twister.hpp>
#include <boost/random/normal_distribution.hpp>
#include <fmt/format.h>

#include "sparsemm/mm_solver.hpp"
#include "sparsemm/posterior_median.hpp"
#include "sparsemm/text.hpp"

namespace sparsemm {

void Scenario::validate() const {
  if (n_obs < 1 || p < 1) throw std::invalid_argument("scenario needs n_obs >= 1 and p >= 1");
  if (static_cast<int>(beta_true.size()) != p) {
    throw std::invalid_argument(fmt::format("beta_true has length {} but p = {}", beta_true.size(), p));
  }
  if (!(noise_sd > 0.0) || !std::isfinite(noise_sd)) throw std::invalid_argument("noise_sd must be positive");
  if (!(rho >= 0.0 && rho < 1.0)) throw std::invalid_argument(fmt::format("rho must lie in [0, 1), got {}", rho));
  if (design == DesignKind::Orthonormal && p > n_obs) {
    throw std::invalid_argument(fmt::format("orthonormal design needs p <= n_obs (p = {}, n_obs = {})", p, n_obs));
  }
  for (double b : beta_true) {
    if (!std::isfinite(b)) throw std::invalid_argument("beta_true must be finite");
  }
}

std::uint64_t mix64(std::uint64_t x) {
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t replicate_seed(std::uint64_t master, std::uint64_t index) {
  return mix64(master + (index + 1) * 0x9e3779b97f4a7c15ULL);
}

RegressionData generate(const Scenario& scenario) {
  scenario.validate();
  const Eigen::Index n = scenario.n_obs;
  const Eigen::Index p = scenario.p;
  boost::random::mt19937_64 rng(scenario.seed);
  boost::random::normal_distribution<double> normal(0.0, 1.0);

  Eigen::MatrixXd Z(n, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < p; ++j) Z(i, j) = normal(rng);
  }

  RegressionData data;
  if (scenario.design == DesignKind::Orthonormal) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(Z);
    const Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(n, p);
    data.X = std::sqrt(static_cast<double>(n)) * Q;
  } else {
    Eigen::MatrixXd sigma(p, p);
    for (Eigen::Index j = 0; j < p; ++j) {
      for (Eigen::Index k = 0; k < p; ++k) sigma(j, k) = std::pow(scenario.rho, std::abs(static_cast<double>(j - k)));
    }
    const Eigen::MatrixXd L = sigma.llt().matrixL();
    data.X = Z * L.transpose();
  }

  data.beta_true = Eigen::Map<const Eigen::VectorXd>(scenario.beta_true.data(), p);
  Eigen::VectorXd noise(n);
  for (Eigen::Index i = 0; i < n; ++i) noise[i] = scenario.noise_sd * normal(rng);
  data.y = data.X * data.beta_true + noise;
  data.true_support = support_of(data.beta_true);
  return data;
}

std::string to_string(FitClass cls) {
  switch (cls) {
    case FitClass::Correct: return "Correct";
    case FitClass::OverFit: return "OverFit";
    case FitClass::UnderFit: return "UnderFit";
  }
  return "Unknown";
}

FitClass classify_fit(std::span<const std::size_t> estimated, std::span<const std::size_t> truth) {
  std::vector<std::size_t> est(estimated.begin(), estimated.end());
  std::vector<std::size_t> tru(truth.begin(), truth.end());
  std::sort(est.begin(), est.end());
  est.erase(std::unique(est.begin(), est.end()), est.end());
  std::sort(tru.begin(), tru.end());
  tru.erase(std::unique(tru.begin(), tru.end()), tru.end());
  if (!std::includes(est.begin(), est.end(), tru.begin(), tru.end())) return FitClass::UnderFit;
  return est.size() == tru.size() ? FitClass::Correct : FitClass::OverFit;
}

std::string to_string(MethodKind kind) {
  switch (kind) {
    case MethodKind::LassoLla: return "lasso-lla";
    case MethodKind::ScadOneStep: return "scad-1step";
    case MethodKind::ScadKStep: return "scad-kstep";
    case MethodKind::ScadFull: return "scad-full";
    case MethodKind::PosteriorMedian: return "posterior-median";
  }
  return "unknown";
}

MethodKind parse_method_kind(std::string_view name) {
  for (auto kind : {MethodKind::LassoLla, MethodKind::ScadOneStep, MethodKind::ScadKStep, MethodKind::ScadFull,
                    MethodKind::PosteriorMedian}) {
    if (name == to_string(kind)) return kind;
  }
  throw std::invalid_argument(fmt::format(
      "unknown method '{}' (expected lasso-lla, scad-1step, scad-kstep, scad-full or posterior-median)", name));
}

std::string MethodSpec::label() const {
  switch (kind) {
    case MethodKind::ScadKStep:
      return fmt::format("scad-kstep{}/lambda={}", k, format_real(lambda));
    case MethodKind::PosteriorMedian:
      return fmt::format("posterior-median/pi={}/tau={}", format_real(pi), format_real(tau));
    default:
      return fmt::format("{}/lambda={}", to_string(kind), format_real(lambda));
  }
}

void ExperimentConfig::validate() const {
  scenario.validate();
  if (methods.empty()) throw std::invalid_argument("experiment needs at least one method");
  if (replicates < 1) throw std::invalid_argument("replicates must be >= 1");
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  if (max_iter < 1) throw std::invalid_argument("max_iter must be >= 1");
  if (!(tol > 0.0)) throw std::invalid_argument("tol must be positive");
  if (!(scad_a > 2.0)) throw std::invalid_argument("scad_a must exceed 2");
  if (threads < 1) throw std::invalid_argument("threads must be >= 1");
  const bool any_penalized = std::any_of(methods.begin(), methods.end(),
                                         [](MethodKind m) { return m != MethodKind::PosteriorMedian; });
  const bool any_bayes = std::find(methods.begin(), methods.end(), MethodKind::PosteriorMedian) != methods.end();
  if (any_penalized && lambda_grid.empty()) throw std::invalid_argument("lambda_grid is empty");
  for (double l : lambda_grid) {
    if (!(l >= 0.0) || !std::isfinite(l)) throw std::invalid_argument("lambda values must be finite and >= 0");
  }
  if (any_bayes && (pi_grid.empty() || tau_grid.empty())) throw std::invalid_argument("pi and tau grids are empty");
  for (double v : pi_grid) {
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("pi values must lie in [0, 1]");
  }
  for (double v : tau_grid) {
    if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument("tau values must be positive");
  }
}

std::vector<MethodSpec> ExperimentConfig::expand_methods() const {
  std::vector<MethodSpec> out;
  for (MethodKind kind : methods) {
    if (kind == MethodKind::PosteriorMedian) {
      for (double pi : pi_grid) {
        for (double tau : tau_grid) out.push_back(MethodSpec{kind, 0.0, 1, pi, tau});
      }
    } else {
      for (double lambda : lambda_grid) out.push_back(MethodSpec{kind, lambda, kind == MethodKind::ScadKStep ? k : 1});
    }
  }
  return out;
}

const MetricsRow* MetricsTable::find(std::string_view method) const {
  for (const auto& row : rows) {
    if (row.method == method) return &row;
  }
  return nullptr;
}

std::string to_csv(const MetricsTable& table) {
  std::string out(kMetricsHeader);
  out += '\n';
  for (const auto& row : table.rows) {
    out += fmt::format("{},{},{},{},{},{},{}\n", row.method, format_real(row.correct_fit_rate),
                       format_real(row.over_fit_rate), format_real(row.under_fit_rate), format_real(row.model_error),
                       format_real(row.mean_nonzero), row.replicates);
  }
  return out;
}

MetricsTable parse_metrics_csv(std::string_view text) {
  MetricsTable table;
  std::size_t line_no = 0;
  bool header_seen = false;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!header_seen) {
      if (line != kMetricsHeader) {
        throw std::invalid_argument(fmt::format("metrics CSV header mismatch: expected '{}', got '{}'",
                                                kMetricsHeader, line));
      }
      header_seen = true;
      continue;
    }
    if (line.empty()) {
      if (start >= text.size()) break;
      throw std::invalid_argument(fmt::format("metrics CSV line {} is empty", line_no));
    }
    const auto fields = split_list(line);
    if (fields.size() != 7) {
      throw std::invalid_argument(fmt::format("metrics CSV line {} has {} fields, expected 7", line_no, fields.size()));
    }
    MetricsRow row;
    row.method = fields[0];
    if (row.method.empty()) throw std::invalid_argument(fmt::format("metrics CSV line {} has no method", line_no));
    row.correct_fit_rate = parse_real(fields[1], "correct");
    row.over_fit_rate = parse_real(fields[2], "over");
    row.under_fit_rate = parse_real(fields[3], "under");
    row.model_error = parse_real(fields[4], "model_error");
    row.mean_nonzero = parse_real(fields[5], "mean_nonzero");
    row.replicates = static_cast<int>(parse_integer(fields[6], "replicates"));
    table.rows.push_back(std::move(row));
  }
  if (!header_seen) throw std::invalid_argument("metrics CSV is empty");
  return table;
}

namespace {

double model_error(const Eigen::VectorXd& estimate, const RegressionData& data) {
  const Eigen::VectorXd diff = estimate - data.beta_true;
  const double n = static_cast<double>(data.X.rows());
  return (data.X * diff).squaredNorm() / n;
}

Eigen::VectorXd posterior_median_fit(const MethodSpec& method, const RegressionData& data,
                                     const ExperimentConfig& config) {
  const double n = static_cast<double>(data.X.rows());
  const Eigen::Index p = data.X.cols();
  std::vector<double> z(static_cast<std::size_t>(p));
  std::vector<double> sigmas(static_cast<std::size_t>(p));
  if (config.scenario.design == DesignKind::Orthonormal) {
    const Eigen::VectorXd stats = data.X.transpose() * data.y / n;
    for (Eigen::Index j = 0; j < p; ++j) z[static_cast<std::size_t>(j)] = stats[j];
    std::fill(sigmas.begin(), sigmas.end(), config.scenario.noise_sd / std::sqrt(n));
  } else {
    // Marginal approximation: ridge-adjusted least squares with the diagonal
    // of its covariance as per-coordinate noise.
    Eigen::MatrixXd gram = data.X.transpose() * data.X;
    gram.diagonal().array() += 1e-6 * n;
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
    const Eigen::VectorXd stats = ldlt.solve(data.X.transpose() * data.y);
    const Eigen::MatrixXd cov = ldlt.solve(Eigen::MatrixXd::Identity(p, p));
    for (Eigen::Index j = 0; j < p; ++j) {
      z[static_cast<std::size_t>(j)] = stats[j];
      sigmas[static_cast<std::size_t>(j)] = config.scenario.noise_sd * std::sqrt(std::max(cov(j, j), 0.0));
    }
  }
  const auto result = threshold_vector(SpikeSlabPrior::normal_slab(method.pi, method.tau), z, sigmas);
  return Eigen::Map<const Eigen::VectorXd>(result.estimate.data(), p);
}

}  // namespace

MethodOutcome fit_method(const MethodSpec& method, const RegressionData& data, const ExperimentConfig& config) {
  MethodOutcome outcome;
  try {
    Eigen::VectorXd estimate;
    if (method.kind == MethodKind::PosteriorMedian) {
      estimate = posterior_median_fit(method, data, config);
      outcome.objective = std::numeric_limits<double>::quiet_NaN();
    } else {
      auto model = std::make_shared<const RegressionModel>(data.X, data.y);
      const int n = static_cast<int>(data.X.rows());
      const PenaltySpec penalty = method.kind == MethodKind::LassoLla
                                      ? PenaltySpec::l1(method.lambda, n)
                                      : PenaltySpec::scad(method.lambda, config.scad_a, n);
      const Decomposition decomp =
          decompose(model, std::vector<PenaltySpec>(static_cast<std::size_t>(data.X.cols()), penalty));
      const Eigen::VectorXd theta0 = default_initial_estimate(*model);
      FitResult fit;
      switch (method.kind) {
        case MethodKind::ScadOneStep:
          fit = k_step(decomp, theta0, 1);
          break;
        case MethodKind::ScadKStep:
          fit = k_step(decomp, theta0, method.k);
          break;
        default:
          fit = iterate(decomp, theta0, config.tol, config.max_iter);
          break;
      }
      estimate = std::move(fit.beta_hat);
      outcome.objective = fit.objective_trace.back();
    }
    const auto support = support_of(estimate);
    outcome.fit = classify_fit(support, data.true_support);
    outcome.nonzero = support.size();
    outcome.model_error = model_error(estimate, data);
    outcome.ok = true;
  } catch (const std::exception& e) {
    outcome.ok = false;
    outcome.error = e.what();
  }
  return outcome;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  config.validate();
  ExperimentResult result;
  for (const auto& method : config.expand_methods()) {
    if (method.kind == MethodKind::PosteriorMedian && config.scenario.design != DesignKind::Orthonormal &&
        !config.allow_marginal_approx) {
      result.notes.push_back(fmt::format(
          "{} skipped: correlated design needs --allow-marginal-approx for the marginal posterior median",
          method.label()));
      continue;
    }
    result.methods.push_back(method);
  }

  const std::size_t reps = static_cast<std::size_t>(config.replicates);
  result.replicates.resize(reps);
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t r = next++; r < reps; r = next++) {
      ReplicateRecord& record = result.replicates[r];
      record.index = static_cast<int>(r);
      record.seed = replicate_seed(config.seed, r);
      Scenario scenario = config.scenario;
      scenario.seed = record.seed;
      const RegressionData data = generate(scenario);
      record.outcomes.reserve(result.methods.size());
      for (const auto& method : result.methods) record.outcomes.push_back(fit_method(method, data, config));
    }
  };
  const int workers = std::min<int>(config.threads, config.replicates);
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < workers; ++t) pool.emplace_back(worker);
  }

  // Merge in replicate order so the table does not depend on scheduling.
  for (std::size_t m = 0; m < result.methods.size(); ++m) {
    MetricsRow row;
    row.method = result.methods[m].label();
    int correct = 0;
    int over = 0;
    int under = 0;
    double error_sum = 0.0;
    double nonzero_sum = 0.0;
    for (const auto& record : result.replicates) {
      const auto& outcome = record.outcomes[m];
      if (!outcome.ok) {
        result.notes.push_back(
            fmt::format("{} failed on replicate {}: {}", row.method, record.index, outcome.error));
        continue;
      }
      ++row.replicates;
      switch (outcome.fit) {
        case FitClass::Correct: ++correct; break;
        case FitClass::OverFit: ++over; break;
        case FitClass::UnderFit: ++under; break;
      }
      error_sum += outcome.model_error;
      nonzero_sum += static_cast<double>(outcome.nonzero);
    }
    const double done = row.replicates > 0 ? static_cast<double>(row.replicates)
                                           : std::numeric_limits<double>::quiet_NaN();
    row.correct_fit_rate = correct / done;
    row.over_fit_rate = over / done;
    row.under_fit_rate = under / done;
    row.model_error = error_sum / done;
    row.mean_nonzero = nonzero_sum / done;
    result.table.rows.push_back(std::move(row));
  }
  return result;
}

std::vector<double> overfit_contrast(const ExperimentResult& result) {
  std::vector<double> lambdas;
  for (std::size_t i = 0; i < result.methods.size(); ++i) {
    if (result.methods[i].kind != MethodKind::ScadFull) continue;
    for (std::size_t j = 0; j < result.methods.size(); ++j) {
      if (result.methods[j].kind == MethodKind::ScadOneStep && result.methods[j].lambda == result.methods[i].lambda &&
          result.table.rows[i].over_fit_rate > result.table.rows[j].over_fit_rate) {
        lambdas.push_back(result.methods[i].lambda);
      }
    }
  }
  return lambdas;
}

}  // namespace sparsemm

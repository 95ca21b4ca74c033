#include "sparsemm/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "sparsemm/bench.hpp"
#include "sparsemm/config.hpp"
#include "sparsemm/em_lift.hpp"
#include "sparsemm/mm_solver.hpp"
#include "sparsemm/posterior_median.hpp"
#include "sparsemm/text.hpp"

namespace sparsemm {

namespace {

// Bad flag values and malformed inputs map to exit code 2.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

std::string join_reals(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) out += ',';
    out += format_real(values[i]);
  }
  return out;
}

std::string join_reals(const Eigen::VectorXd& values) {
  return join_reals(std::vector<double>(values.data(), values.data() + values.size()));
}

void emit(const std::string& text, const std::string& path, std::ostream& out) {
  if (path.empty()) {
    out << text;
    return;
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw std::runtime_error(fmt::format("cannot write '{}'", path));
  file << text;
  if (!file) throw std::runtime_error(fmt::format("failed writing '{}'", path));
}

// ---------------------------------------------------------------- fit

struct FitArgs {
  std::string data;
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string penalty;
  double lambda = 0.0;
  double a = 3.7;
  std::optional<int> k;
  double tol = 1e-8;
  int max_iter = 500;
  bool lqa = false;
  std::string out;
};

RegressionModel load_fit_model(const FitArgs& args) {
  if (args.data.empty() == args.config.empty()) throw UsageError("fit needs exactly one of --data or --config");
  if (!args.data.empty()) {
    const RegressionCsv csv = parse_regression_csv(read_text_file(args.data));
    const Eigen::Index n = static_cast<Eigen::Index>(csv.rows.size());
    const Eigen::Index p = static_cast<Eigen::Index>(csv.rows.front().size());
    Eigen::MatrixXd X(n, p);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < p; ++j) X(i, j) = csv.rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
    return RegressionModel(std::move(X), Eigen::Map<const Eigen::VectorXd>(csv.y.data(), n));
  }
  ExperimentConfig config = load_experiment_config(args.config);
  Scenario scenario = config.scenario;
  scenario.seed = args.seed.value_or(config.seed);
  RegressionData data = generate(scenario);
  return RegressionModel(std::move(data.X), std::move(data.y));
}

std::string run_fit(const FitArgs& args) {
  const PenaltyFamily family = parse_penalty_family(args.penalty);
  auto model = std::make_shared<const RegressionModel>(load_fit_model(args));
  const int n = static_cast<int>(model->n_obs());
  PenaltySpec spec;
  spec.family = family;
  spec.lambda = args.lambda;
  spec.a = args.a;
  spec.n = n;
  spec.validate();
  const Decomposition decomp = decompose(model, std::vector<PenaltySpec>(static_cast<std::size_t>(model->p()), spec));

  MmOptions options;
  options.driver = args.lqa ? SurrogateDriver::LQA : SurrogateDriver::LLA;
  const Eigen::VectorXd theta0 = default_initial_estimate(*model);
  const FitResult fit = args.k ? k_step(decomp, theta0, *args.k, options)
                               : iterate(decomp, theta0, args.tol, args.max_iter, options);

  std::string support;
  for (std::size_t i = 0; i < fit.support.size(); ++i) support += (i ? "," : "") + std::to_string(fit.support[i]);
  std::string text;
  text += fmt::format("penalty = {}\n", to_string(family));
  text += fmt::format("lambda = {}\n", format_real(args.lambda));
  text += fmt::format("driver = {}\n", args.lqa ? "lqa" : "lla");
  text += fmt::format("mode = {}\n", args.k ? fmt::format("k-step({})", *args.k) : std::string("iterate"));
  text += fmt::format("steps_taken = {}\n", fit.steps_taken);
  text += fmt::format("converged = {}\n", fit.converged ? "true" : "false");
  text += fmt::format("objective = {}\n", format_real(fit.objective_trace.back()));
  text += fmt::format("objective_trace = {}\n", join_reals(fit.objective_trace));
  text += fmt::format("beta = {}\n", join_reals(fit.beta_hat));
  text += fmt::format("support = {}\n", support);
  return text;
}

// ---------------------------------------------------------------- median

struct MedianArgs {
  double pi = 0.0;
  double sigma = 1.0;
  double tau = 1.0;
  std::vector<double> y;
  std::string out;
};

std::string run_median(const MedianArgs& args) {
  if (!(args.tau > 0.0)) throw UsageError("--tau must be positive");
  if (!(args.sigma > 0.0)) throw UsageError("--sigma must be positive");
  if (!(args.pi >= 0.0 && args.pi <= 1.0)) throw UsageError("--pi must lie in [0, 1]");
  const auto result = threshold_vector(SpikeSlabPrior::normal_slab(args.pi, args.tau), args.y, args.sigma);
  std::string text = "index,y,pi_y,odds,delta,branch,median\n";
  for (std::size_t j = 0; j < args.y.size(); ++j) {
    const auto& m = result.medians[j];
    text += fmt::format("{},{},{},{},{},{},{}\n", j, format_real(args.y[j]), format_real(result.posteriors[j].pi_y),
                        format_real(m.odds), format_real(m.threshold_delta), to_string(m.branch),
                        format_real(m.median));
  }
  return text;
}

// ---------------------------------------------------------------- emlift

struct EmliftArgs {
  std::string penalty;
  double lambda = 1.0;
  double a = 3.7;
  double log_scale = 0.0;
  int n = 1;
  std::string latent = "auto";
  std::vector<double> anchors{0.25, 0.5, 1.0, 2.0, 4.0};
  double tol = 1e-8;
  std::string format = "text";
  std::string out;
};

LatentDensity choose_latent(const EmliftArgs& args, const Decomposition& decomp, const std::vector<double>& u_grid) {
  const PenaltySpec& spec = decomp.penalties().front();
  std::string latent = args.latent;
  if (latent == "auto") {
    latent = spec.family == PenaltyFamily::L1 ? "point" : spec.family == PenaltyFamily::Log ? "negexp" : "grid";
  }
  if (latent == "point") return PointMass{-decomp.g_derivative(0, 0.0)};
  if (latent == "negexp") return NegExponential{spec.family == PenaltyFamily::Log ? spec.effective_log_scale() : 1.0};
  if (latent == "grid") {
    std::vector<double> points(201);
    for (std::size_t i = 0; i < points.size(); ++i) points[i] = -10.0 + 0.05 * static_cast<double>(i);
    return fit_grid_density([&](double u) { return decomp.g_coord(0, u); }, std::move(points), u_grid);
  }
  throw UsageError(fmt::format("--latent: expected auto, point, negexp or grid, got '{}'", args.latent));
}

std::string run_emlift(const EmliftArgs& args) {
  PenaltySpec spec;
  spec.family = parse_penalty_family_with_controls(args.penalty);
  spec.lambda = args.lambda;
  spec.a = args.a;
  spec.log_scale = args.log_scale;
  spec.n = args.n;
  spec.validate();
  if (args.format != "text" && args.format != "json") throw UsageError("--format: expected text or json");
  if (args.anchors.empty()) throw UsageError("--anchor needs at least one value");

  // Scalar model; f cancels in the comparison, so the data only has to be valid.
  auto model = std::make_shared<const RegressionModel>(Eigen::MatrixXd::Ones(1, 1), Eigen::VectorXd::Ones(1));
  const Decomposition decomp = decompose(model, {spec});
  EquivalenceOptions options;
  options.constant_tol = args.tol;
  options.u_grid = EquivalenceOptions::default_u_grid();
  const LatentDensity h = choose_latent(args, decomp, options.u_grid);
  const std::vector<LatentDensity> lifts{h};

  std::vector<Eigen::VectorXd> grid;
  for (int i = 0; i < 100; ++i) grid.push_back(Eigen::VectorXd::Constant(1, -5.0 + 10.0 * i / 99.0));

  EquivalenceReport combined;
  combined.verdict = EquivalenceVerdict::EquivalentUpToConstant;
  for (double anchor : args.anchors) {
    const auto report = verify_mm_em_equivalence(decomp, lifts, Eigen::VectorXd::Constant(1, anchor), grid, options);
    combined.max_constant_deviation = std::max(combined.max_constant_deviation, report.max_constant_deviation);
    combined.mgf_max_rel_error = std::max(combined.mgf_max_rel_error, report.mgf_max_rel_error);
    combined.mean_identity_max_error = std::max(combined.mean_identity_max_error, report.mean_identity_max_error);
    combined.concavity_ok = report.concavity_ok;
    if (static_cast<int>(report.verdict) > static_cast<int>(combined.verdict)) combined.verdict = report.verdict;
  }
  const auto cert = concavity_certificate(decomp, options.u_grid, lifts);

  // Rounded through format_real so text and JSON carry the same 12 digits.
  const auto rounded = [](double v) { return std::isfinite(v) ? std::stod(format_real(v)) : v; };
  nlohmann::ordered_json record;
  record["penalty"] = to_string(spec.family);
  record["latent"] = describe(h);
  record["verdict"] = to_string(combined.verdict);
  record["max_constant_deviation"] = rounded(combined.max_constant_deviation);
  record["mgf_max_rel_error"] = rounded(combined.mgf_max_rel_error);
  record["concavity_ok"] = combined.concavity_ok;
  record["mean_identity_max_error"] = rounded(combined.mean_identity_max_error);
  record["variance_identity_max_rel_error"] = rounded(cert.variance_identity_max_rel_error);
  if (args.format == "json") return record.dump() + "\n";

  std::string text;
  for (const auto& [key, value] : record.items()) {
    text += fmt::format("{} = {}\n", key,
                        value.is_string()    ? value.get<std::string>()
                        : value.is_boolean() ? std::string(value.get<bool>() ? "true" : "false")
                                             : format_real(value.get<double>()));
  }
  return text;
}

// ---------------------------------------------------------------- bench

struct BenchArgs {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  bool allow_marginal_approx = false;
  std::optional<int> threads;
};

std::string run_bench(const BenchArgs& args, std::ostream& err, std::string& out_path) {
  ExperimentConfig config = load_experiment_config(args.config);
  if (args.seed) config.seed = *args.seed;
  if (args.allow_marginal_approx) config.allow_marginal_approx = true;
  if (args.threads) config.threads = *args.threads;
  out_path = args.out.empty() ? config.output : args.out;

  const ExperimentResult result = run_experiment(config);
  for (const auto& note : result.notes) err << "note: " << note << '\n';
  const bool compared = std::any_of(result.methods.begin(), result.methods.end(),
                                    [](const MethodSpec& m) { return m.kind == MethodKind::ScadFull; }) &&
                        std::any_of(result.methods.begin(), result.methods.end(),
                                    [](const MethodSpec& m) { return m.kind == MethodKind::ScadOneStep; });
  if (compared) {
    const auto lambdas = overfit_contrast(result);
    if (lambdas.empty()) {
      err << "overfit contrast (scad-full over-fit rate > scad-1step): not found at desk scale\n";
    } else {
      err << "overfit contrast (scad-full over-fit rate > scad-1step): found at lambda=" << join_reals(lambdas) << '\n';
    }
  }
  return to_csv(result.table);
}

}  // namespace

RegressionCsv parse_regression_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw UsageError("regression CSV is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_list(line);
  if (header.size() < 2 || header[0] != "y") throw UsageError("regression CSV header must be 'y,x1,...,xp'");
  RegressionCsv csv;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto fields = split_list(line);
    if (fields.size() != header.size()) {
      throw UsageError(fmt::format("regression CSV line {} has {} fields, expected {}", line_no, fields.size(),
                                   header.size()));
    }
    csv.y.push_back(parse_real(fields[0], "y"));
    std::vector<double> row;
    for (std::size_t j = 1; j < fields.size(); ++j) row.push_back(parse_real(fields[j], header[j]));
    csv.rows.push_back(std::move(row));
  }
  if (csv.rows.empty()) throw UsageError("regression CSV has no data rows");
  return csv;
}

int parse_and_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sparse regression via MM/LLA, MM-as-EM lift checks and posterior-median thresholding"};
  app.name("sparsemm");
  app.require_subcommand(1);

  FitArgs fit_args;
  auto* fit = app.add_subcommand("fit", "Penalized least-squares fit (one-step, k-step or fully iterated)");
  fit->add_option("--data", fit_args.data, "Regression CSV with header y,x1,...,xp");
  fit->add_option("--config", fit_args.config, "Experiment config; its scenario generates the data");
  fit->add_option("--seed", fit_args.seed, "Seed for --config data generation");
  fit->add_option("--penalty", fit_args.penalty, "Penalty family: l1, scad or log")->required();
  fit->add_option("--lambda", fit_args.lambda, "Regularization scale")->required();
  fit->add_option("--a", fit_args.a, "SCAD shape (> 2)");
  fit->add_option("--k", fit_args.k, "Number of surrogate steps; omit to iterate to convergence");
  fit->add_option("--tol", fit_args.tol, "Outer convergence tolerance (max coordinate change)");
  fit->add_option("--max-iter", fit_args.max_iter, "Maximum outer steps when iterating");
  fit->add_flag("--lqa", fit_args.lqa, "Use the local quadratic surrogate instead of LLA");
  fit->add_option("--out", fit_args.out, "Output path (default: stdout)");

  MedianArgs median_args;
  auto* median = app.add_subcommand("median", "Posterior-median thresholding under a spike-and-slab prior");
  median->add_option("--pi", median_args.pi, "Prior atom mass at zero")->required();
  median->add_option("--sigma", median_args.sigma, "Noise scale of each observation")->required();
  median->add_option("--tau", median_args.tau, "Slab scale")->required();
  median->add_option("--y", median_args.y, "Observations, comma separated")->required()->delimiter(',');
  median->add_option("--out", median_args.out, "Output path (default: stdout)");

  EmliftArgs emlift_args;
  auto* emlift = app.add_subcommand("emlift", "Check that the LLA surrogate is an EM Q-function");
  emlift->add_option("--penalty", emlift_args.penalty, "l1, scad, log, or quadratic (convex control)")->required();
  emlift->add_option("--lambda", emlift_args.lambda, "Regularization scale");
  emlift->add_option("--a", emlift_args.a, "SCAD shape (> 2)");
  emlift->add_option("--log-scale", emlift_args.log_scale, "Second scale of the log penalty");
  emlift->add_option("--n", emlift_args.n, "Sample-size multiplier");
  emlift->add_option("--latent", emlift_args.latent, "auto, point, negexp or grid");
  emlift->add_option("--anchor", emlift_args.anchors, "Anchor values |theta_t|, comma separated")->delimiter(',');
  emlift->add_option("--tol", emlift_args.tol, "Tolerance on the spread of em_q - surrogate");
  emlift->add_option("--format", emlift_args.format, "text or json");
  emlift->add_option("--out", emlift_args.out, "Output path (default: stdout)");

  BenchArgs bench_args;
  auto* bench = app.add_subcommand("bench", "Monte Carlo comparison of penalized and posterior-median estimators");
  bench->add_option("--config", bench_args.config, "Experiment config (key = value lines)")->required();
  bench->add_option("--out", bench_args.out, "CSV output path (default: config output, else stdout)");
  bench->add_option("--seed", bench_args.seed, "Override the master seed");
  bench->add_flag("--allow-marginal-approx", bench_args.allow_marginal_approx,
                  "Apply the marginal posterior median on correlated designs");
  bench->add_option("--threads", bench_args.threads, "Worker threads for replicates");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    err << "run with --help for usage\n";
    return 2;
  }

  try {
    if (fit->parsed()) {
      emit(run_fit(fit_args), fit_args.out, out);
    } else if (median->parsed()) {
      emit(run_median(median_args), median_args.out, out);
    } else if (emlift->parsed()) {
      emit(run_emlift(emlift_args), emlift_args.out, out);
    } else if (bench->parsed()) {
      std::string path;
      const std::string csv = run_bench(bench_args, err, path);
      emit(csv, path, out);
    }
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace sparsemm

// skewt: skew-t fitting, quantile-based initialization, simulation and the
// comparison harness, driven from the command line.
//
// Exit codes: 0 success, 1 numeric failure, 2 usage or parse error.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "skewt/harness.hpp"
#include "skewt/inversion_table.hpp"
#include "skewt/mple.hpp"

namespace {

using nlohmann::json;

constexpr const char* kSchemaVersion = "skewt/1";

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::uint64_t resolve_seed(std::optional<std::uint64_t> flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("SKEWT_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw UsageError("SKEWT_SEED is not an integer");
    }
  }
  return 1;
}

void write_output(const std::string& path, const std::string& payload) {
  if (path.empty() || path == "-") {
    std::cout << payload;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << payload;
}

std::vector<double> parse_double_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    out.push_back(std::stod(tok));
  }
  if (out.empty()) throw UsageError("empty numeric list '" + s + "'");
  return out;
}

skewt::InitMethod parse_method(const std::string& s) {
  if (s == "m0" || s == "M0") return skewt::InitMethod::kM0;
  if (s == "m1" || s == "M1" || s == "m2" || s == "M2") return skewt::InitMethod::kM1;
  if (s == "m3" || s == "M3") return skewt::InitMethod::kM3;
  throw UsageError("unknown method '" + s + "' (expected m0, m2 or m3)");
}

struct Dataset {
  Eigen::VectorXd y;
  Eigen::MatrixXd Y;  // multivariate responses, possibly empty
  Eigen::MatrixXd X;
  bool multivariate = false;
};

Dataset load_dataset(const std::string& path, const std::string& response,
                     const std::string& responses, const std::string& covariates) {
  const skewt::CsvTable table = skewt::read_csv_file(path);
  const auto n = static_cast<Eigen::Index>(table.rows());
  if (n == 0) throw skewt::CsvParseError("no data rows", 2);
  Dataset ds;
  std::vector<std::string> ynames;
  if (!responses.empty()) {
    std::stringstream ss(responses);
    std::string tok;
    while (std::getline(ss, tok, ','))
      if (!tok.empty()) ynames.push_back(tok);
    ds.multivariate = ynames.size() > 1;
  } else {
    ynames.push_back(response);
  }
  if (ds.multivariate) {
    ds.Y.resize(n, static_cast<Eigen::Index>(ynames.size()));
    for (std::size_t j = 0; j < ynames.size(); ++j) {
      const auto& col = table.column(ynames[j]);
      for (Eigen::Index i = 0; i < n; ++i)
        ds.Y(i, static_cast<Eigen::Index>(j)) = col[static_cast<std::size_t>(i)];
    }
  } else {
    const auto& col = table.column(ynames[0]);
    ds.y.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) ds.y[i] = col[static_cast<std::size_t>(i)];
  }
  std::vector<std::string> xnames;
  if (!covariates.empty()) {
    std::stringstream ss(covariates);
    std::string tok;
    while (std::getline(ss, tok, ','))
      if (!tok.empty()) xnames.push_back(tok);
  }
  ds.X.resize(n, 1 + static_cast<Eigen::Index>(xnames.size()));
  ds.X.col(0).setOnes();
  for (std::size_t j = 0; j < xnames.size(); ++j) {
    const auto& col = table.column(xnames[j]);
    for (Eigen::Index i = 0; i < n; ++i)
      ds.X(i, 1 + static_cast<Eigen::Index>(j)) = col[static_cast<std::size_t>(i)];
  }
  return ds;
}

json estimate_to_json(const skewt::PreliminaryEstimate& est) {
  json j;
  j["method"] = skewt::to_string(est.method);
  j["beta"] = std::vector<double>(est.beta.data(), est.beta.data() + est.beta.size());
  j["omega"] = est.omega;
  j["lambda"] = est.lambda;
  j["nu"] = est.nu;
  j["m_clamped"] = est.m_clamped;
  j["g_clamped"] = est.g_clamped;
  return j;
}

json fit_to_json(const skewt::FitResult& fit, const char* method_name) {
  json j;
  j["method"] = method_name;
  j["params"] = {
      {"beta", std::vector<double>(fit.beta.data(), fit.beta.data() + fit.beta.size())},
      {"omega", fit.omega},
      {"lambda", fit.lambda},
      {"nu", fit.nu}};
  j["loglik"] = fit.loglik;
  j["penalized_loglik"] = fit.penalized_loglik;
  j["converged"] = fit.converged;
  j["iterations"] = fit.iterations;
  j["elapsed_seconds"] = fit.elapsed_seconds;
  j["start"] = estimate_to_json(fit.start);
  return j;
}

json mst_fit_to_json(const skewt::MstFitResult& fit, const char* method_name) {
  json j;
  j["method"] = method_name;
  const auto& p = fit.params;
  std::vector<std::vector<double>> beta, omega;
  for (Eigen::Index i = 0; i < p.beta.rows(); ++i)
    beta.emplace_back(p.beta.row(i).begin(), p.beta.row(i).end());
  for (Eigen::Index i = 0; i < p.omega.rows(); ++i)
    omega.emplace_back(p.omega.row(i).begin(), p.omega.row(i).end());
  j["params"] = {
      {"beta", beta},
      {"omega", omega},
      {"alpha", std::vector<double>(p.alpha.data(), p.alpha.data() + p.alpha.size())},
      {"nu", p.nu}};
  j["loglik"] = fit.loglik;
  j["penalized_loglik"] = fit.penalized_loglik;
  j["converged"] = fit.converged;
  j["iterations"] = fit.iterations;
  j["elapsed_seconds"] = fit.elapsed_seconds;
  return j;
}

const char* fit_method_name(skewt::InitMethod m) {
  switch (m) {
    case skewt::InitMethod::kM0: return "M0";
    case skewt::InitMethod::kM1: return "M2";  // MPLE from the M1 start
    case skewt::InitMethod::kM3: return "M3";
  }
  return "?";
}

int cmd_fit(const std::string& input, const std::string& response, const std::string& responses,
            const std::string& covariates, const std::string& methods_flag, bool no_penalty,
            int max_iterations, const std::string& out) {
  const Dataset ds = load_dataset(input, response, responses, covariates);
  skewt::FitOptions options;
  options.penalized = !no_penalty;
  options.max_iterations = max_iterations;
  std::vector<skewt::InitMethod> methods;
  {
    std::stringstream ss(methods_flag);
    std::string tok;
    while (std::getline(ss, tok, ','))
      if (!tok.empty()) methods.push_back(parse_method(tok));
  }
  if (methods.empty()) throw UsageError("no method given");

  json out_json;
  out_json["schema_version"] = kSchemaVersion;
  out_json["command"] = "fit";
  out_json["penalized"] = options.penalized;
  json fits = json::array();
  double best = -std::numeric_limits<double>::infinity();
  std::string best_name;
  for (skewt::InitMethod m : methods) {
    if (ds.multivariate) {
      const skewt::MstPreliminary start = m == skewt::InitMethod::kM0
                                              ? skewt::detail::mst_cumulant_start(ds.Y, ds.X)
                                              : skewt::init_multivariate(ds.Y, ds.X, m);
      const skewt::MstFitResult fit = skewt::fit_mple_mst(start, ds.Y, ds.X, options);
      fits.push_back(mst_fit_to_json(fit, fit_method_name(m)));
      if (fit.penalized_loglik > best) {
        best = fit.penalized_loglik;
        best_name = fit_method_name(m);
      }
    } else {
      const skewt::PreliminaryEstimate start = m == skewt::InitMethod::kM0
                                                   ? skewt::cumulant_start(ds.y, ds.X)
                                                   : skewt::init_regression(ds.y, ds.X, m);
      const skewt::FitResult fit = skewt::fit_mple(start, ds.y, ds.X, options);
      fits.push_back(fit_to_json(fit, fit_method_name(m)));
      if (fit.penalized_loglik > best) {
        best = fit.penalized_loglik;
        best_name = fit_method_name(m);
      }
    }
  }
  out_json["fits"] = fits;
  out_json["best"] = best_name;
  write_output(out, out_json.dump(2) + "\n");
  return 0;
}

int cmd_init(const std::string& input, const std::string& response, const std::string& responses,
             const std::string& covariates, const std::string& method_flag,
             const std::string& out) {
  const Dataset ds = load_dataset(input, response, responses, covariates);
  const skewt::InitMethod method = parse_method(method_flag);
  json j;
  j["schema_version"] = kSchemaVersion;
  j["command"] = "init";
  if (ds.multivariate) {
    const skewt::MstPreliminary start = method == skewt::InitMethod::kM0
                                            ? skewt::detail::mst_cumulant_start(ds.Y, ds.X)
                                            : skewt::init_multivariate(ds.Y, ds.X, method);
    json est;
    est["method"] = skewt::to_string(start.method);
    std::vector<std::vector<double>> beta, omega;
    for (Eigen::Index i = 0; i < start.params.beta.rows(); ++i)
      beta.emplace_back(start.params.beta.row(i).begin(), start.params.beta.row(i).end());
    for (Eigen::Index i = 0; i < start.params.omega.rows(); ++i)
      omega.emplace_back(start.params.omega.row(i).begin(), start.params.omega.row(i).end());
    est["beta"] = beta;
    est["omega"] = omega;
    est["alpha"] = std::vector<double>(start.params.alpha.data(),
                                       start.params.alpha.data() + start.params.alpha.size());
    est["nu"] = start.params.nu;
    est["shrink_passes"] = start.shrink_passes;
    j["estimate"] = est;
  } else {
    const skewt::PreliminaryEstimate est = method == skewt::InitMethod::kM0
                                               ? skewt::cumulant_start(ds.y, ds.X)
                                               : skewt::init_regression(ds.y, ds.X, method);
    j["estimate"] = estimate_to_json(est);
  }
  write_output(out, j.dump(2) + "\n");
  return 0;
}

int cmd_simulate(long n, double xi, double omega, double lambda, double nu,
                 std::optional<std::uint64_t> seed_flag, const std::string& out) {
  if (n < 0) throw UsageError("--n must be nonnegative");
  const skewt::StParams p{xi, omega, lambda, nu};
  p.validate();
  const std::uint64_t seed = resolve_seed(seed_flag);
  const std::vector<double> draws = skewt::st_sample(static_cast<std::size_t>(n), p, seed);
  std::ostringstream os;
  os << "y\n";
  for (double v : draws) os << skewt::format_double(v) << '\n';
  write_output(out, os.str());
  return 0;
}

int cmd_table(const std::string& out) {
  std::ostringstream os;
  os << "nu,moors_delta0,eta1,eta2,eta3\n";
  char buf[128];
  for (const auto& row : skewt::kInversionTable) {
    if (std::isinf(row.nu)) {
      std::snprintf(buf, sizeof(buf), "inf,%.3f,,,\n", row.m0);
    } else {
      std::snprintf(buf, sizeof(buf), "%.2f,%.3f,%.6f,%.6f,%.6f\n", row.nu, row.m0, row.eta1,
                    row.eta2, row.eta3);
    }
    os << buf;
  }
  write_output(out, os.str());
  return 0;
}

int cmd_profile(const std::string& input, const std::string& response,
                const std::string& covariates, double lambda_min, double lambda_max,
                int lambda_steps, double nu_min, double nu_max, int nu_steps,
                const std::string& out) {
  const Dataset ds = load_dataset(input, response, "", covariates);
  if (lambda_steps < 1 || nu_steps < 1) throw UsageError("grid steps must be >= 1");
  if (!(nu_min > 0.0) || !(nu_max >= nu_min)) throw UsageError("invalid nu grid");
  std::vector<double> lambda_grid(static_cast<std::size_t>(lambda_steps));
  for (int i = 0; i < lambda_steps; ++i)
    lambda_grid[static_cast<std::size_t>(i)] =
        lambda_steps == 1 ? lambda_min
                          : lambda_min + (lambda_max - lambda_min) * i / (lambda_steps - 1.0);
  std::vector<double> nu_grid(static_cast<std::size_t>(nu_steps));
  const double lmin = std::log(nu_min), lmax = std::log(nu_max);
  for (int i = 0; i < nu_steps; ++i)
    nu_grid[static_cast<std::size_t>(i)] =
        std::exp(nu_steps == 1 ? lmin : lmin + (lmax - lmin) * i / (nu_steps - 1.0));

  const skewt::DevianceGrid grid = skewt::deviance_grid(ds.y, ds.X, lambda_grid, nu_grid);
  std::ostringstream os;
  os << "lambda,log_nu,deviance\n";
  for (std::size_t i = 0; i < grid.lambda_grid.size(); ++i)
    for (std::size_t j = 0; j < grid.nu_grid.size(); ++j)
      os << skewt::format_double(grid.lambda_grid[i]) << ','
         << skewt::format_double(std::log(grid.nu_grid[j])) << ','
         << skewt::format_double(
                grid.deviance(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)))
         << '\n';
  // global-fit coordinates, a zero-deviance point by construction
  os << skewt::format_double(grid.lambda_hat) << ','
     << skewt::format_double(std::log(grid.nu_hat)) << ",0\n";
  write_output(out, os.str());
  std::cerr << "fit: lambda=" << grid.lambda_hat << " nu=" << grid.nu_hat
            << " max penalized loglik=" << grid.max_penalized_loglik << "\n";
  return 0;
}

int cmd_compare(const std::string& family_flag, const std::string& lambdas,
                const std::string& nus, const std::string& ns, int replicates,
                std::optional<std::uint64_t> seed_flag, const std::string& methods_flag,
                const std::string& out_dir, int jobs, bool full_scale) {
  skewt::ExperimentConfig config;
  const auto family = skewt::family_from_string(family_flag);
  if (!family) throw UsageError("unknown family '" + family_flag + "'");
  config.family = *family;
  config.lambda_list = parse_double_list(lambdas);
  config.nu_list = parse_double_list(nus);
  config.n_list.clear();
  for (double v : parse_double_list(ns)) config.n_list.push_back(static_cast<Eigen::Index>(v));
  config.replicates = full_scale ? 2000 : replicates;
  config.seed = resolve_seed(seed_flag);
  config.jobs = jobs;
  config.methods.clear();
  {
    std::stringstream ss(methods_flag);
    std::string tok;
    while (std::getline(ss, tok, ','))
      if (!tok.empty()) config.methods.push_back(parse_method(tok));
  }
  if (config.methods.empty()) throw UsageError("no methods given");
  try {
    config.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  const std::vector<skewt::ComparisonRecord> records = skewt::run_experiment(config);

  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  std::ofstream(fs::path(out_dir) / "records.csv", std::ios::binary)
      << skewt::records_to_csv(records);

  std::vector<int> method_ids;
  for (skewt::InitMethod m : config.methods) method_ids.push_back(skewt::method_id(m));
  std::sort(method_ids.begin(), method_ids.end());
  const std::vector<std::pair<int, int>> pairs{{2, 0}, {2, 3}, {3, 0}};
  for (const auto& [h, k] : pairs) {
    const bool have = std::count(method_ids.begin(), method_ids.end(), h) &&
                      std::count(method_ids.begin(), method_ids.end(), k);
    if (!have) continue;
    for (const char* group : {"n", "nu"}) {
      const skewt::FrequencyTable table = std::string(group) == "n"
                                              ? skewt::dhk_by_n(records, h, k)
                                              : skewt::dhk_by_nu(records, h, k);
      const std::string name =
          "d" + std::to_string(h) + std::to_string(k) + "_by_" + group + ".csv";
      std::ofstream(fs::path(out_dir) / name, std::ios::binary) << table.to_csv();
      std::cout << table.to_text() << "\n";
    }
  }
  const skewt::FrequencyTable timing = skewt::timing_table(records, method_ids);
  std::ofstream(fs::path(out_dir) / "timing.csv", std::ios::binary) << timing.to_csv();
  std::cout << timing.to_text() << "\n";
  std::cout << "records: " << records.size() << " replicates -> " << out_dir << "/records.csv\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"skew-t distribution fitting with quantile-based initialization"};
  app.require_subcommand(1);

  std::string input, response = "y", responses, covariates, out, out_dir = "skewt-compare";
  std::string methods = "m2", family = "simple";
  std::string lambdas = "0,2,8", nus = "1,3,8", ns = "50,100,250,500";
  bool no_penalty = false, full_scale = false;
  int max_iterations = 500, jobs = 1, replicates = 200;
  long sim_n = 100;
  double xi = 0.0, omega = 1.0, lambda = 0.0, nu = 1.0;
  double lambda_min = -2.0, lambda_max = 15.0, nu_min = 0.3, nu_max = 1000.0;
  int lambda_steps = 51, nu_steps = 51;
  std::optional<std::uint64_t> seed;

  auto* fit = app.add_subcommand("fit", "fit a skew-t model by maximum penalized likelihood");
  fit->add_option("--input", input, "input CSV")->required();
  fit->add_option("--response", response, "response column (default y)");
  fit->add_option("--responses", responses, "comma list of response columns (multivariate)");
  fit->add_option("--covariates", covariates, "comma list of covariate columns");
  fit->add_option("--method", methods, "comma list from m0, m2, m3 (default m2)");
  fit->add_flag("--no-penalty", no_penalty, "maximize the plain likelihood");
  fit->add_option("--max-iterations", max_iterations, "optimizer iteration cap");
  fit->add_option("--out", out, "output file (default stdout)");

  auto* init = app.add_subcommand("init", "preliminary estimate only");
  init->add_option("--input", input, "input CSV")->required();
  init->add_option("--response", response, "response column (default y)");
  init->add_option("--responses", responses, "comma list of response columns (multivariate)");
  init->add_option("--covariates", covariates, "comma list of covariate columns");
  init->add_option("--method", methods, "m0, m1 or m3 (default m1)")->default_str("m1");
  init->add_option("--out", out, "output file (default stdout)");

  auto* simulate = app.add_subcommand("simulate", "draw a skew-t sample as CSV");
  simulate->add_option("--n", sim_n, "sample size")->required();
  simulate->add_option("--xi", xi, "location");
  simulate->add_option("--omega", omega, "scale");
  simulate->add_option("--lambda", lambda, "slant");
  simulate->add_option("--nu", nu, "degrees of freedom")->required();
  simulate->add_option("--seed", seed, "RNG seed (falls back to SKEWT_SEED, then 1)");
  simulate->add_option("--out", out, "output file (default stdout)");

  auto* compare = app.add_subcommand("compare", "replicated M0/M2/M3 comparison study");
  compare->add_option("--family", family, "simple, regression-A/B/C or bivariate");
  compare->add_option("--lambda-list", lambdas, "comma list (default 0,2,8)");
  compare->add_option("--nu-list", nus, "comma list (default 1,3,8)");
  compare->add_option("--n-list", ns, "comma list (default 50,100,250,500)");
  compare->add_option("--replicates", replicates, "replicates per cell (default 200)");
  compare->add_flag("--full-scale", full_scale, "run 2000 replicates per cell");
  compare->add_option("--seed", seed, "base seed (falls back to SKEWT_SEED, then 1)");
  compare->add_option("--methods", methods, "comma list (default m0,m2,m3)")
      ->default_str("m0,m2,m3");
  compare->add_option("--out-dir", out_dir, "output directory");
  compare->add_option("--jobs", jobs, "parallel replicate workers");

  auto* profile = app.add_subcommand("profile", "profile deviance grid over (lambda, log nu)");
  profile->add_option("--input", input, "input CSV")->required();
  profile->add_option("--response", response, "response column (default y)");
  profile->add_option("--covariates", covariates, "comma list of covariate columns");
  profile->add_option("--lambda-min", lambda_min, "grid minimum (default -2)");
  profile->add_option("--lambda-max", lambda_max, "grid maximum (default 15)");
  profile->add_option("--lambda-steps", lambda_steps, "grid points (default 51)");
  profile->add_option("--nu-min", nu_min, "grid minimum (default 0.3)");
  profile->add_option("--nu-max", nu_max, "grid maximum (default 1000)");
  profile->add_option("--nu-steps", nu_steps, "grid points, log spaced (default 51)");
  profile->add_option("--out", out, "output file (default stdout)");

  auto* table = app.add_subcommand("table", "export the inversion coefficient table as CSV");
  table->add_option("--out", out, "output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
    app.exit(e);
    return 2;
  }

  try {
    if (fit->parsed())
      return cmd_fit(input, response, responses, covariates, methods, no_penalty,
                     max_iterations, out);
    if (init->parsed()) {
      const std::string m = init->count("--method") ? methods : "m1";
      return cmd_init(input, response, responses, covariates, m, out);
    }
    if (simulate->parsed()) return cmd_simulate(sim_n, xi, omega, lambda, nu, seed, out);
    if (compare->parsed()) {
      const std::string m = compare->count("--methods") ? methods : "m0,m2,m3";
      return cmd_compare(family, lambdas, nus, ns, replicates, seed, m, out_dir, jobs,
                         full_scale);
    }
    if (profile->parsed())
      return cmd_profile(input, response, covariates, lambda_min, lambda_max, lambda_steps,
                         nu_min, nu_max, nu_steps, out);
    if (table->parsed()) return cmd_table(out);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const skewt::CsvParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

// Experiment harness: simulation designs, the M0/M2/M3 comparison runs,
// frequency tables of log-likelihood differences and timings, and the small
// CSV layer shared with the command-line tool.

#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "skewt/mple.hpp"

namespace skewt {

// ---------------------------------------------------------------------------
// CSV layer. Dialect: comma-separated, mandatory header row, '.' decimal,
// UTF-8, numerics unquoted.

struct CsvParseError : std::runtime_error {
  explicit CsvParseError(const std::string& what, std::size_t line)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_number(line) {}
  std::size_t line_number;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> columns;

  std::size_t rows() const { return columns.empty() ? 0 : columns.front().size(); }

  const std::vector<double>& column(const std::string& name) const {
    for (std::size_t j = 0; j < header.size(); ++j)
      if (header[j] == name) return columns[j];
    throw std::invalid_argument("CSV has no column named '" + name + "'");
  }
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(cur);
  return out;
}

inline CsvTable read_csv(std::istream& in) {
  CsvTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() && in.peek() == EOF) break;
    const auto cells = split_csv_line(line);
    if (line_no == 1) {
      table.header = cells;
      if (table.header.empty() || (table.header.size() == 1 && table.header[0].empty()))
        throw CsvParseError("empty header", line_no);
      table.columns.resize(table.header.size());
      continue;
    }
    if (cells.size() != table.header.size())
      throw CsvParseError("expected " + std::to_string(table.header.size()) + " fields, got " +
                              std::to_string(cells.size()),
                          line_no);
    for (std::size_t j = 0; j < cells.size(); ++j) {
      try {
        std::size_t pos = 0;
        const double v = std::stod(cells[j], &pos);
        if (pos != cells[j].size()) throw std::invalid_argument("trailing characters");
        table.columns[j].push_back(v);
      } catch (const std::exception&) {
        throw CsvParseError("cannot parse numeric field '" + cells[j] + "'", line_no);
      }
    }
  }
  if (table.header.empty()) throw CsvParseError("empty file", 1);
  return table;
}

inline CsvTable read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  return read_csv(in);
}

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// ---------------------------------------------------------------------------
// Simulation designs.

enum class Family { kSimple, kRegressionA, kRegressionB, kRegressionC, kBivariate };

inline const char* to_string(Family f) {
  switch (f) {
    case Family::kSimple: return "simple";
    case Family::kRegressionA: return "regression-A";
    case Family::kRegressionB: return "regression-B";
    case Family::kRegressionC: return "regression-C";
    case Family::kBivariate: return "bivariate";
  }
  return "?";
}

inline std::optional<Family> family_from_string(const std::string& s) {
  for (Family f : {Family::kSimple, Family::kRegressionA, Family::kRegressionB,
                   Family::kRegressionC, Family::kBivariate})
    if (s == to_string(f)) return f;
  return std::nullopt;
}

/// Design matrix of a family at sample size n; covariate x runs over n
/// equally spaced interior points of (-1, 1). All regression coefficients
/// are 1 in the simulation studies.
inline Eigen::MatrixXd design_matrix(Family family, Eigen::Index n) {
  Eigen::VectorXd x(n);
  for (Eigen::Index i = 0; i < n; ++i)
    x[i] = -1.0 + (2.0 * static_cast<double>(i) + 1.0) / static_cast<double>(n);
  switch (family) {
    case Family::kSimple:
    case Family::kBivariate:
      return Eigen::MatrixXd::Ones(n, 1);
    case Family::kRegressionA: {
      Eigen::MatrixXd X(n, 3);
      X.col(0).setOnes();
      X.col(1) = x;
      X.col(2) = (x.array() + 1.0).sqrt();
      return X;
    }
    case Family::kRegressionB: {
      Eigen::MatrixXd X(n, 3);
      X.col(0).setOnes();
      X.col(1) = x;
      X.col(2) = (3.0 * x.array()).sin();
      return X;
    }
    case Family::kRegressionC: {
      Eigen::MatrixXd X(n, 4);
      X.col(0).setOnes();
      X.col(1) = x;
      X.col(2) = (3.0 * x.array()).sin();
      X.col(3) = x.array() / (1.0 + 0.8 * x.array());
      return X;
    }
  }
  throw std::logic_error("design_matrix: unknown family");
}

// Bivariate study parameters: unit scales with off-diagonal 1/2, and slant
// alpha = lambda * (1, 2)'.
inline MstParams bivariate_study_params(double lambda, double nu) {
  MstParams p;
  p.beta = Eigen::MatrixXd::Zero(1, 2);
  p.omega = Eigen::MatrixXd::Identity(2, 2);
  p.omega(0, 1) = p.omega(1, 0) = 0.5;
  p.alpha = Eigen::VectorXd(2);
  p.alpha << lambda, 2.0 * lambda;
  p.nu = nu;
  return p;
}

// ---------------------------------------------------------------------------
// Comparison runs.

struct ExperimentConfig {
  Family family = Family::kSimple;
  std::vector<double> lambda_list{0.0, 2.0, 8.0};
  std::vector<double> nu_list{1.0, 3.0, 8.0};
  std::vector<Eigen::Index> n_list{50, 100, 250, 500};
  int replicates = 200;  // desk-scale default; the full studies used 2000
  std::uint64_t seed = 1;
  std::vector<InitMethod> methods{InitMethod::kM0, InitMethod::kM1, InitMethod::kM3};
  int jobs = 1;

  void validate() const {
    if (replicates < 1) throw std::invalid_argument("config: replicates must be >= 1");
    if (family == Family::kBivariate)
      for (Eigen::Index n : n_list)
        if (n <= 50)
          throw std::invalid_argument("config: the bivariate study excludes n <= 50");
  }
};

struct MethodOutcome {
  double penalized_loglik = std::numeric_limits<double>::quiet_NaN();
  double loglik = std::numeric_limits<double>::quiet_NaN();
  bool converged = false;
  int iterations = 0;
  double elapsed_seconds = 0.0;
  bool failed = false;
};

struct ComparisonRecord {
  Family family = Family::kSimple;
  double lambda = 0.0;
  double nu = 1.0;
  Eigen::Index n = 0;
  int replicate = 0;
  std::uint64_t seed = 0;
  // indexed 0 = M0, 2 = M2, 3 = M3
  std::map<int, MethodOutcome> outcomes;
};

inline int method_id(InitMethod m) {
  switch (m) {
    case InitMethod::kM0: return 0;
    case InitMethod::kM1: return 2;  // M2 = MPLE from the M1 start
    case InitMethod::kM3: return 3;
  }
  return -1;
}

namespace detail {

inline MethodOutcome run_univariate_method(InitMethod method, const Eigen::VectorXd& y,
                                           const Eigen::MatrixXd& X, const FitOptions& options) {
  MethodOutcome out;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    PreliminaryEstimate start = method == InitMethod::kM0 ? cumulant_start(y, X)
                                                          : init_regression(y, X, method);
    const FitResult fit = fit_mple(start, y, X, options);
    out.penalized_loglik = fit.penalized_loglik;
    out.loglik = fit.loglik;
    out.converged = fit.converged;
    out.iterations = fit.iterations;
  } catch (const std::exception&) {
    out.failed = true;
  }
  out.elapsed_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

// Multivariate cumulant-style default start: least-squares location, the
// residual correlation for the scale, and per-column cumulant inversions
// pooled the same way as the quantile route; full fallback is alpha = 0,
// nu = 10 on the least-squares fit.
inline MstPreliminary mst_cumulant_start(const Eigen::MatrixXd& y, const Eigen::MatrixXd& X) {
  const Eigen::Index d = y.cols();
  MstPreliminary out;
  out.method = InitMethod::kM0;
  Eigen::MatrixXd beta(X.cols(), d);
  std::vector<PreliminaryEstimate> cols;
  bool all_ok = true;
  for (Eigen::Index j = 0; j < d; ++j) {
    PreliminaryEstimate est = cumulant_start(y.col(j), X);
    all_ok = all_ok && !(est.lambda == 0.0 && est.nu == 10.0);
    beta.col(j) = est.beta;
    cols.push_back(std::move(est));
  }
  const Eigen::MatrixXd resid = y - X * beta;
  Eigen::MatrixXd cov = resid.transpose() * resid / static_cast<double>(y.rows());
  const Eigen::VectorXd sd = cov.diagonal().cwiseSqrt();
  Eigen::MatrixXd corr = sd.cwiseInverse().asDiagonal() * cov * sd.cwiseInverse().asDiagonal();
  if (all_ok) {
    Eigen::VectorXd delta(d);
    std::vector<double> nus;
    for (Eigen::Index j = 0; j < d; ++j) {
      delta[j] = delta_of_lambda(cols[static_cast<std::size_t>(j)].lambda);
      nus.push_back(cols[static_cast<std::size_t>(j)].nu);
    }
    std::sort(nus.begin(), nus.end());
    const std::size_t h = nus.size() / 2;
    const double nu = nus.size() % 2 == 1 ? nus[h] : 0.5 * (nus[h - 1] + nus[h]);
    FeasibilityResult feas = feasibility_adjust(corr, delta);
    out.params.beta = beta;
    out.params.alpha = delta_to_alpha(feas.omega_bar, feas.delta);
    out.params.omega = sd.asDiagonal() * feas.omega_bar * sd.asDiagonal();
    out.params.nu = nu;
    out.shrink_passes = feas.shrink_passes;
    return out;
  }
  out.params.beta = beta;
  out.params.alpha = Eigen::VectorXd::Zero(d);
  out.params.omega = cov;
  out.params.nu = 10.0;
  return out;
}

inline MethodOutcome run_bivariate_method(InitMethod method, const Eigen::MatrixXd& y,
                                          const Eigen::MatrixXd& X, const FitOptions& options) {
  MethodOutcome out;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    MstPreliminary start = method == InitMethod::kM0 ? mst_cumulant_start(y, X)
                                                     : init_multivariate(y, X, method);
    const MstFitResult fit = fit_mple_mst(start, y, X, options);
    out.penalized_loglik = fit.penalized_loglik;
    out.loglik = fit.loglik;
    out.converged = fit.converged;
    out.iterations = fit.iterations;
  } catch (const std::exception&) {
    out.failed = true;
  }
  out.elapsed_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

}  // namespace detail

/// One replicate of a configuration cell, fully determined by the derived
/// seed, so parallel and serial runs agree record by record.
inline ComparisonRecord run_replicate(const ExperimentConfig& config, double lambda, double nu,
                                      Eigen::Index n, int replicate,
                                      const FitOptions& options = {}) {
  ComparisonRecord rec;
  rec.family = config.family;
  rec.lambda = lambda;
  rec.nu = nu;
  rec.n = n;
  rec.replicate = replicate;
  std::uint64_t cell_tag =
      detail::splitmix64(static_cast<std::uint64_t>(n) * 1000003u +
                         static_cast<std::uint64_t>(lambda * 8.0 + 64.0) * 131u +
                         static_cast<std::uint64_t>(nu * 8.0));
  rec.seed = detail::derive_seed(config.seed ^ cell_tag, static_cast<std::uint64_t>(replicate));
  if (config.family == Family::kBivariate) {
    const MstParams truth = bivariate_study_params(lambda, nu);
    const Eigen::MatrixXd y = mst_sample(static_cast<std::size_t>(n), truth, rec.seed);
    const Eigen::MatrixXd X = design_matrix(config.family, n);
    for (InitMethod m : config.methods)
      rec.outcomes[method_id(m)] = detail::run_bivariate_method(m, y, X, options);
    return rec;
  }
  const Eigen::MatrixXd X = design_matrix(config.family, n);
  const StParams noise{0.0, 1.0, lambda, nu};
  const std::vector<double> z = st_sample(static_cast<std::size_t>(n), noise, rec.seed);
  Eigen::VectorXd y = X.rowwise().sum();  // all regression coefficients are 1
  for (Eigen::Index i = 0; i < n; ++i) y[i] += z[static_cast<std::size_t>(i)];
  for (InitMethod m : config.methods)
    rec.outcomes[method_id(m)] = detail::run_univariate_method(m, y, X, options);
  return rec;
}

inline std::vector<ComparisonRecord> run_experiment(const ExperimentConfig& config,
                                                    const FitOptions& options = {}) {
  config.validate();
  struct Cell {
    double lambda, nu;
    Eigen::Index n;
    int replicate;
  };
  std::vector<Cell> cells;
  for (double lambda : config.lambda_list)
    for (double nu : config.nu_list)
      for (Eigen::Index n : config.n_list)
        for (int r = 0; r < config.replicates; ++r) cells.push_back({lambda, nu, n, r});
  std::vector<ComparisonRecord> records(cells.size());
  const int jobs = std::max(1, config.jobs);
  if (jobs == 1) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const Cell& c = cells[i];
      records[i] = run_replicate(config, c.lambda, c.nu, c.n, c.replicate, options);
    }
  } else {
    std::vector<std::thread> pool;
    std::atomic<std::size_t> next{0};
    for (int t = 0; t < jobs; ++t)
      pool.emplace_back([&] {
        for (;;) {
          const std::size_t i = next.fetch_add(1);
          if (i >= cells.size()) return;
          const Cell& c = cells[i];
          records[i] = run_replicate(config, c.lambda, c.nu, c.n, c.replicate, options);
        }
      });
    for (auto& th : pool) th.join();
  }
  return records;
}

// ---------------------------------------------------------------------------
// Aggregation: D_hk = logL_h - logL_k frequency tables and timing tables.

inline constexpr std::array<double, 7> kDhkBinEdges{-20.0, -2.0, -0.2, 0.0, 0.2, 2.0, 20.0};
inline constexpr std::array<const char*, 8> kDhkBinLabels{
    "(-inf,-20]", "(-20,-2]", "(-2,-0.2]", "(-0.2,0]",
    "(0,0.2]",    "(0.2,2]",  "(2,20]",    "(20,inf]"};

inline constexpr std::array<double, 7> kTimeBinEdges{-0.25, -0.1, -0.05, 0.0, 0.05, 0.1, 0.25};
inline constexpr std::array<const char*, 8> kTimeBinLabels{
    "(-inf,-0.25]", "(-0.25,-0.1]", "(-0.1,-0.05]", "(-0.05,0]",
    "(0,0.05]",     "(0.05,0.1]",   "(0.1,0.25]",   "(0.25,inf]"};

inline std::size_t bin_index(double v, const std::array<double, 7>& edges) {
  std::size_t b = 0;
  while (b < edges.size() && v > edges[b]) ++b;
  return b;
}

struct FrequencyTable {
  std::string title;
  std::vector<std::string> row_labels;
  std::array<const char*, 8> bin_labels{};
  std::vector<std::array<long, 8>> counts;

  std::string to_csv() const {
    std::ostringstream os;
    os << "group";
    for (const char* b : bin_labels) os << ',' << b;
    os << '\n';
    for (std::size_t i = 0; i < row_labels.size(); ++i) {
      os << row_labels[i];
      for (long c : counts[i]) os << ',' << c;
      os << '\n';
    }
    return os.str();
  }

  std::string to_text() const {
    std::ostringstream os;
    os << title << '\n';
    os << "  group";
    for (const char* b : bin_labels) os << ' ' << std::setw(13) << b;
    os << '\n';
    for (std::size_t i = 0; i < row_labels.size(); ++i) {
      os << std::setw(7) << row_labels[i];
      for (long c : counts[i]) os << ' ' << std::setw(13) << c;
      os << '\n';
    }
    return os.str();
  }
};

/// Differences D_hk for one (h, k) method pair; NaN when either side failed.
inline std::vector<double> dhk_values(const std::vector<ComparisonRecord>& records, int h,
                                      int k) {
  std::vector<double> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    const auto ih = r.outcomes.find(h);
    const auto ik = r.outcomes.find(k);
    if (ih == r.outcomes.end() || ik == r.outcomes.end() || ih->second.failed ||
        ik->second.failed) {
      out.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    out.push_back(ih->second.penalized_loglik - ik->second.penalized_loglik);
  }
  return out;
}

template <class GroupKey>
inline FrequencyTable dhk_table(const std::vector<ComparisonRecord>& records, int h, int k,
                                const std::string& group_name, GroupKey&& key) {
  FrequencyTable table;
  table.title = "Frequencies of D_" + std::to_string(h * 10 + k) + " x " + group_name;
  table.bin_labels = kDhkBinLabels;
  const std::vector<double> d = dhk_values(records, h, k);
  std::map<double, std::array<long, 8>> by_group;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (std::isnan(d[i])) continue;
    auto& row = by_group[key(records[i])];
    ++row[bin_index(d[i], kDhkBinEdges)];
  }
  for (const auto& [g, row] : by_group) {
    std::ostringstream os;
    os << g;
    table.row_labels.push_back(os.str());
    table.counts.push_back(row);
  }
  return table;
}

inline FrequencyTable dhk_by_n(const std::vector<ComparisonRecord>& records, int h, int k) {
  return dhk_table(records, h, k, "n",
                   [](const ComparisonRecord& r) { return static_cast<double>(r.n); });
}

inline FrequencyTable dhk_by_nu(const std::vector<ComparisonRecord>& records, int h, int k) {
  return dhk_table(records, h, k, "nu", [](const ComparisonRecord& r) { return r.nu; });
}

/// Timing table: one row per method with elapsed seconds binned, then one
/// row per method pair with the differences binned. M2 and M3 timings
/// include their initialization, which fit_mple folds into elapsed time.
inline FrequencyTable timing_table(const std::vector<ComparisonRecord>& records,
                                   const std::vector<int>& methods) {
  FrequencyTable table;
  table.title = "Frequencies of computing time";
  table.bin_labels = kTimeBinLabels;
  for (int m : methods) {
    std::array<long, 8> row{};
    for (const auto& r : records) {
      const auto it = r.outcomes.find(m);
      if (it == r.outcomes.end() || it->second.failed) continue;
      ++row[bin_index(it->second.elapsed_seconds, kTimeBinEdges)];
    }
    table.row_labels.push_back("t" + std::to_string(m));
    table.counts.push_back(row);
  }
  for (std::size_t a = 0; a < methods.size(); ++a)
    for (std::size_t b = a + 1; b < methods.size(); ++b) {
      std::array<long, 8> row{};
      for (const auto& r : records) {
        const auto ia = r.outcomes.find(methods[a]);
        const auto ib = r.outcomes.find(methods[b]);
        if (ia == r.outcomes.end() || ib == r.outcomes.end() || ia->second.failed ||
            ib->second.failed)
          continue;
        ++row[bin_index(ia->second.elapsed_seconds - ib->second.elapsed_seconds, kTimeBinEdges)];
      }
      table.row_labels.push_back("t" + std::to_string(methods[a]) + "-t" +
                                 std::to_string(methods[b]));
      table.counts.push_back(row);
    }
  return table;
}

// ---------------------------------------------------------------------------
// Record persistence. Aggregation is a pure function of this CSV.

inline std::vector<ComparisonRecord> records_from_csv(std::istream& in) {
  std::vector<ComparisonRecord> out;
  std::map<std::string, std::size_t> index;  // (family,lambda,nu,n,replicate) -> slot
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (line_no == 1) {
      header = cells;
      if (header.size() != 13) throw CsvParseError("unexpected record header", line_no);
      continue;
    }
    if (cells.size() != 13) throw CsvParseError("bad record row", line_no);
    const std::string key =
        cells[0] + '|' + cells[1] + '|' + cells[2] + '|' + cells[3] + '|' + cells[4];
    auto [it, inserted] = index.try_emplace(key, out.size());
    if (inserted) {
      ComparisonRecord r;
      const auto fam = family_from_string(cells[0]);
      if (!fam) throw CsvParseError("unknown family '" + cells[0] + "'", line_no);
      r.family = *fam;
      r.lambda = std::stod(cells[1]);
      r.nu = std::stod(cells[2]);
      r.n = static_cast<Eigen::Index>(std::stol(cells[3]));
      r.replicate = std::stoi(cells[4]);
      r.seed = std::stoull(cells[5]);
      out.push_back(std::move(r));
    }
    MethodOutcome o;
    o.penalized_loglik = std::stod(cells[7]);
    o.loglik = std::stod(cells[8]);
    o.converged = cells[9] == "1";
    o.iterations = std::stoi(cells[10]);
    o.elapsed_seconds = std::stod(cells[11]);
    o.failed = cells[12] == "1";
    out[it->second].outcomes[std::stoi(cells[6])] = o;
  }
  return out;
}

inline std::string records_to_csv(const std::vector<ComparisonRecord>& records) {
  std::ostringstream os;
  os << "family,lambda,nu,n,replicate,seed,method,penalized_loglik,loglik,converged,"
        "iterations,elapsed_seconds,failed\n";
  for (const auto& r : records)
    for (const auto& [m, o] : r.outcomes) {
      os << to_string(r.family) << ',' << format_double(r.lambda) << ',' << format_double(r.nu)
         << ',' << r.n << ',' << r.replicate << ',' << r.seed << ',' << m << ','
         << format_double(o.penalized_loglik) << ',' << format_double(o.loglik) << ','
         << (o.converged ? 1 : 0) << ',' << o.iterations << ','
         << format_double(o.elapsed_seconds) << ',' << (o.failed ? 1 : 0) << '\n';
    }
  return os.str();
}

}  // namespace skewt

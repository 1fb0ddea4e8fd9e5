#include <doctest.h>

#include <cmath>
#include <sstream>

#include "skewt/harness.hpp"

using namespace skewt;

TEST_SUITE_BEGIN("harness");

TEST_CASE("CSV round trip and parse errors") {
  std::istringstream good("a,b\n1,2\n3.5,-4e2\n");
  const CsvTable t = read_csv(good);
  CHECK(t.rows() == 2);
  CHECK(t.column("b")[1] == doctest::Approx(-400.0));
  CHECK_THROWS_AS(t.column("missing"), std::invalid_argument);

  std::istringstream bad_field("a,b\n1,zzz\n");
  try {
    read_csv(bad_field);
    CHECK(false);
  } catch (const CsvParseError& e) {
    CHECK(e.line_number == 2);
  }
  std::istringstream short_row("a,b\n1\n");
  CHECK_THROWS_AS(read_csv(short_row), CsvParseError);
  std::istringstream empty("");
  CHECK_THROWS_AS(read_csv(empty), CsvParseError);
}

TEST_CASE("design matrices") {
  CHECK(design_matrix(Family::kSimple, 10).cols() == 1);
  const Eigen::MatrixXd Xc = design_matrix(Family::kRegressionC, 100);
  CHECK(Xc.cols() == 4);
  CHECK(Xc.col(0).minCoeff() == 1.0);
  // covariate points stay inside (-1, 1)
  Eigen::VectorXd x(100);
  for (int i = 0; i < 100; ++i) x[i] = Xc(i, 1);
  CHECK(x.minCoeff() > -1.0);
  CHECK(x.maxCoeff() < 1.0);
  CHECK(Xc.col(2).isApprox((3.0 * x.array()).sin().matrix()));
  CHECK(Xc.col(3).isApprox((x.array() / (1.0 + 0.8 * x.array())).matrix()));
  const Eigen::MatrixXd Xa = design_matrix(Family::kRegressionA, 50);
  CHECK(Xa.cols() == 3);
}

TEST_CASE("config validation") {
  ExperimentConfig config;
  config.family = Family::kBivariate;
  config.n_list = {50, 100};
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);
  config.n_list = {100};
  CHECK_NOTHROW(config.validate());
  config.replicates = 0;
  CHECK_THROWS_AS(config.validate(), std::invalid_argument);
}

TEST_CASE("bin indexing matches the published interval layout") {
  CHECK(bin_index(-25.0, kDhkBinEdges) == 0);
  CHECK(bin_index(-20.0, kDhkBinEdges) == 0);  // (-inf, -20]
  CHECK(bin_index(-5.0, kDhkBinEdges) == 1);
  CHECK(bin_index(-0.2, kDhkBinEdges) == 2);   // (-2, -0.2]
  CHECK(bin_index(0.0, kDhkBinEdges) == 3);    // (-0.2, 0]
  CHECK(bin_index(0.1, kDhkBinEdges) == 4);
  CHECK(bin_index(1.0, kDhkBinEdges) == 5);
  CHECK(bin_index(10.0, kDhkBinEdges) == 6);
  CHECK(bin_index(100.0, kDhkBinEdges) == 7);
}

TEST_CASE("experiment records, tables and persistence" * doctest::timeout(600)) {
  ExperimentConfig config;
  config.family = Family::kSimple;
  config.lambda_list = {2.0};
  config.nu_list = {1.0, 3.0};
  config.n_list = {50};
  config.replicates = 5;
  config.seed = 99;
  config.methods = {InitMethod::kM0, InitMethod::kM1, InitMethod::kM3};
  const auto records = run_experiment(config);
  CHECK(records.size() == 10);

  // row sums of every frequency table equal the replicate count per row
  const FrequencyTable by_nu = dhk_by_nu(records, 2, 0);
  CHECK(by_nu.row_labels.size() == 2);
  for (const auto& row : by_nu.counts) {
    long total = 0;
    for (long c : row) total += c;
    CHECK(total == 5);
  }

  // aggregation is a pure function of the persisted CSV
  const std::string csv = records_to_csv(records);
  std::istringstream in(csv);
  const auto reloaded = records_from_csv(in);
  CHECK(reloaded.size() == records.size());
  const FrequencyTable again = dhk_by_nu(reloaded, 2, 0);
  CHECK(again.counts == by_nu.counts);
  const FrequencyTable timing = timing_table(records, {0, 2, 3});
  CHECK(timing.row_labels.size() == 6);  // three methods, three differences

  // identical config and seed give identical results; elapsed wall-clock
  // times are the one column that legitimately differs between runs
  auto strip_elapsed = [](const std::string& s) {
    std::istringstream is(s);
    std::string line, out;
    while (std::getline(is, line)) {
      const auto cells = split_csv_line(line);
      for (std::size_t i = 0; i + 1 < cells.size(); ++i)
        if (i != 11) out += cells[i] + ',';
      out += cells.back() + '\n';
    }
    return out;
  };
  const auto records2 = run_experiment(config);
  CHECK(strip_elapsed(records_to_csv(records2)) == strip_elapsed(csv));

  // parallel run agrees with the serial one record by record
  ExperimentConfig par = config;
  par.jobs = 3;
  const auto records3 = run_experiment(par);
  CHECK(strip_elapsed(records_to_csv(records3)) == strip_elapsed(csv));
}

TEST_CASE("methods subset leaves other tables empty") {
  ExperimentConfig config;
  config.family = Family::kSimple;
  config.lambda_list = {0.0};
  config.nu_list = {3.0};
  config.n_list = {50};
  config.replicates = 3;
  config.seed = 7;
  config.methods = {InitMethod::kM1};  // M2 only
  const auto records = run_experiment(config);
  const auto d20 = dhk_values(records, 2, 0);
  for (double v : d20) CHECK(std::isnan(v));
  const FrequencyTable table = dhk_by_n(records, 2, 0);
  CHECK(table.row_labels.empty());
  const FrequencyTable timing = timing_table(records, {2});
  CHECK(timing.row_labels.size() == 1);
  long total = 0;
  for (long c : timing.counts[0]) total += c;
  CHECK(total == 3);
}

TEST_SUITE_END();

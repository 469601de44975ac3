#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "otsm/sweep.hpp"
#include "test_support.hpp"

using namespace otsm;

namespace {

std::string temp_path(const char* name) {
  return std::string("/tmp/otsm_sweep_") + name;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

// Strips the trailing wall_* columns, the only nondeterministic ones.
std::string strip_wall_columns(const std::string& line) {
  std::size_t pos = line.size();
  for (int k = 0; k < 3; ++k) pos = line.rfind(',', pos - 1);
  return line.substr(0, pos);
}

SweepConfig small_config(const std::string& out) {
  SweepConfig config;
  config.m_values = {4, 6};
  config.d = 2;
  config.r = 2;
  config.sigma_values = {0.0, 0.3};
  config.trials_per_cell = 3;
  config.base_seed = 11;
  config.run_sdp = true;
  config.output_path = out;
  return config;
}

void cleanup(const std::string& out) {
  std::remove(out.c_str());
  std::remove(summary_path_for(out).c_str());
}

}  // namespace

TEST_CASE("trial seeds depend on the full key") {
  CHECK(trial_seed(1, 4, 0, 0) != trial_seed(1, 4, 0, 1));
  CHECK(trial_seed(1, 4, 0, 0) != trial_seed(1, 4, 1, 0));
  CHECK(trial_seed(1, 4, 0, 0) != trial_seed(1, 6, 0, 0));
  CHECK(trial_seed(1, 4, 0, 0) != trial_seed(2, 4, 0, 0));
  CHECK(trial_seed(1, 4, 0, 0) == trial_seed(1, 4, 0, 0));
}

TEST_CASE("trial rows survive the CSV round trip") {
  const TrialRecord rec = run_trial(5, 2, 2, 0.2, 1, 3, 42, true);
  const TrialRecord back = parse_trial_csv_row(trial_csv_row(rec));
  CHECK(back.m == rec.m);
  CHECK(back.seed == rec.seed);
  CHECK(back.sigma == rec.sigma);
  CHECK(back.solver_objective == rec.solver_objective);
  CHECK(back.cert_valid == rec.cert_valid);
  CHECK(back.lambda_complement == rec.lambda_complement);
  CHECK(back.l5_bound2_min_slack == rec.l5_bound2_min_slack);
  CHECK(back.sdp_gap == rec.sdp_gap);
  CHECK(back.sdp_skip_reason == rec.sdp_skip_reason);
  CHECK(back.wall_sdp_ms == rec.wall_sdp_ms);
}

TEST_CASE("flags are re-derivable from stored scalars") {
  for (int trial = 0; trial < 4; ++trial) {
    const TrialRecord rec = run_trial(6, 2, 2, 0.25 * trial, trial, 0, 7, false);
    CHECK(rec.solver_converged == (rec.solver_stationarity <= rec.stat_tol));
    if (rec.cert_ran) {
      CHECK(rec.cert_valid == (rec.lambda_min_blocks > rec.shift_c &&
                               rec.lambda_complement < -rec.eps_c &&
                               rec.symmetry_residual <= rec.stat_tol));
      CHECK(rec.l5_bound1_ok == (rec.l5_bound1 - rec.l5_t1_dev >= -kBoundSlack));
      CHECK(rec.l5_bound2_ok == (rec.l5_bound2_min_slack >= -kBoundSlack));
    }
    CHECK(rec.eq4_as_stated_holds == (rec.eq4_lhs > rec.eq4_as_stated_rhs));
    CHECK(rec.eq4_lemma7_holds == (rec.eq4_lhs > rec.eq4_lemma7_rhs));
    CHECK(rec.l7_global_ok ==
          (rec.l7_global_bound - rec.l7_global_lhs >= -kBoundSlack));
    CHECK(rec.l7_wv_ok == (rec.l7_wv_bound - rec.l7_wv_lhs >= -kBoundSlack));
  }
}

TEST_CASE("sweep output is deterministic across thread counts") {
  const std::string out1 = temp_path("det1.csv");
  const std::string out2 = temp_path("det2.csv");
  SweepConfig c1 = small_config(out1);
  c1.max_threads = 1;
  SweepConfig c2 = small_config(out2);
  c2.max_threads = 4;
  run_sweep(c1);
  run_sweep(c2);

  const auto lines1 = read_lines(out1);
  const auto lines2 = read_lines(out2);
  REQUIRE(lines1.size() == lines2.size());
  REQUIRE(lines1.size() == 1 + 2 * 2 * 3);
  for (std::size_t k = 0; k < lines1.size(); ++k) {
    CHECK(strip_wall_columns(lines1[k]) == strip_wall_columns(lines2[k]));
  }

  // Summaries are fully deterministic.
  CHECK(read_lines(summary_path_for(out1)) == read_lines(summary_path_for(out2)));
  cleanup(out1);
  cleanup(out2);
}

TEST_CASE("summary equals recomputation from the trial rows") {
  const std::string out = temp_path("sum.csv");
  SweepConfig config = small_config(out);
  const std::vector<TrialRecord> records = run_sweep(config);

  std::vector<TrialRecord> parsed;
  const auto lines = read_lines(out);
  for (std::size_t k = 1; k < lines.size(); ++k) {
    parsed.push_back(parse_trial_csv_row(lines[k]));
  }
  const auto direct = summarize(config, records);
  const auto recomputed = summarize(config, parsed);
  REQUIRE(direct.size() == recomputed.size());
  for (std::size_t k = 0; k < direct.size(); ++k) {
    CHECK(summary_csv_row(direct[k]) == summary_csv_row(recomputed[k]));
  }

  const auto summary_lines = read_lines(summary_path_for(out));
  REQUIRE(summary_lines.size() == 1 + direct.size());
  for (std::size_t k = 0; k < direct.size(); ++k) {
    CHECK(summary_lines[k + 1] == summary_csv_row(direct[k]));
  }
  cleanup(out);
}

TEST_CASE("clean cells always certify and success decays with noise") {
  const std::string out = temp_path("rates.csv");
  SweepConfig config;
  config.m_values = {8};
  config.d = 1;
  config.r = 1;
  config.sigma_values = {0.0, 1.0, 5.0};
  config.trials_per_cell = 40;
  config.base_seed = 3;
  config.output_path = out;
  run_sweep(config);

  const auto lines = read_lines(summary_path_for(out));
  REQUIRE(lines.size() == 4);
  std::vector<double> rates;
  for (std::size_t k = 1; k < lines.size(); ++k) {
    std::istringstream in(lines[k]);
    std::string field;
    for (int col = 0; col <= 6; ++col) std::getline(in, field, ',');
    rates.push_back(std::stod(field));
  }
  CHECK(rates[0] == 1.0);
  // Non-increasing within one trial of sampling noise.
  const double slack = 1.0 / 40.0;
  CHECK(rates[1] <= rates[0] + slack);
  CHECK(rates[2] <= rates[1] + slack);
  CHECK(rates[2] < rates[0]);
  cleanup(out);
}

TEST_CASE("resume keeps finished rows and completes the rest") {
  const std::string out = temp_path("resume.csv");
  SweepConfig config = small_config(out);
  config.run_sdp = false;
  run_sweep(config);
  const auto full = read_lines(out);

  // Truncate to the header plus four rows, as if interrupted.
  {
    std::ofstream trunc(out, std::ios::trunc);
    for (std::size_t k = 0; k < 5; ++k) trunc << full[k] << '\n';
  }
  SweepConfig again = config;
  again.resume = true;
  run_sweep(again);
  const auto resumed = read_lines(out);
  REQUIRE(resumed.size() == full.size());
  for (std::size_t k = 0; k < full.size(); ++k) {
    if (k < 5) {
      CHECK(resumed[k] == full[k]);  // kept verbatim, wall times included
    } else {
      CHECK(strip_wall_columns(resumed[k]) == strip_wall_columns(full[k]));
    }
  }
  cleanup(out);
}

TEST_CASE("sweep validates its configuration") {
  SweepConfig config;
  config.output_path = temp_path("bad.csv");
  CHECK_THROWS_AS(run_sweep(config), std::invalid_argument);
  config.m_values = {4};
  config.sigma_values = {0.1};
  config.trials_per_cell = 0;
  CHECK_THROWS_AS(run_sweep(config), std::invalid_argument);
  config.trials_per_cell = 1;
  config.output_path = "/nonexistent/dir/x.csv";
  CHECK_THROWS_AS(run_sweep(config), std::runtime_error);
}

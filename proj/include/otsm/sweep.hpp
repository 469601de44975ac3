#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "otsm/certificate.hpp"
#include "otsm/sdp.hpp"
#include "otsm/solver.hpp"

namespace otsm {

struct SweepConfig {
  std::vector<int> m_values;
  int d = 2;
  int r = 2;
  std::vector<double> sigma_values;
  int trials_per_cell = 1;
  std::uint64_t base_seed = 0;
  bool run_sdp = false;  // SDP cross-checks are skipped when D > 300 regardless
  std::string output_path;
  // 0 means: OTSM_THREADS if set, otherwise hardware concurrency.
  int max_threads = 0;
  bool resume = false;
  SolverConfig solver;
};

// Everything measured on one trial. Every boolean is recomputable from the
// scalars stored next to it; slack-based flags use kBoundSlack.
struct TrialRecord {
  int m = 0, d = 0, r = 0;
  double sigma = 0.0;
  int sigma_index = 0, trial_index = 0;
  std::uint64_t seed = 0;

  double solver_objective = 0.0;
  int solver_sweeps = 0;
  double solver_stationarity = 0.0;
  bool solver_converged = false;

  bool cert_ran = false;
  bool cert_valid = false;
  double lambda_min_blocks = 0.0;
  double shift_c = 0.0;
  double eps_c = 0.0;
  double lambda_complement = 0.0;
  double symmetry_residual = 0.0;
  double stat_tol = 0.0;

  bool eq4_as_stated_holds = false;
  double eq4_lhs = 0.0;
  double eq4_as_stated_rhs = 0.0;
  bool eq4_lemma7_holds = false;
  double eq4_lemma7_rhs = 0.0;
  double sigma_star = 0.0;

  double align_err_fro = 0.0;        // ||aligned - V||_F
  double align_err_block_max = 0.0;  // max_i ||aligned_i - V_i||_F

  double l7_global_lhs = 0.0, l7_global_bound = 0.0;
  bool l7_global_ok = false;
  double l7_wv_lhs = 0.0, l7_wv_bound = 0.0;
  bool l7_wv_ok = false;
  double l5_t1_dev = 0.0, l5_bound1 = 0.0;
  bool l5_bound1_ok = false;
  double l5_bound2_min_slack = 0.0;
  bool l5_bound2_ok = false;

  bool sdp_ran = false;
  std::string sdp_skip_reason;
  int sdp_iterations = 0;
  bool sdp_converged = false;
  double sdp_primal_residual = 0.0;
  double sdp_dual_residual = 0.0;
  double sdp_gap = 0.0;
  int sdp_rank = 0;

  double wall_solve_ms = 0.0;
  double wall_cert_ms = 0.0;
  double wall_sdp_ms = 0.0;
};

// Slack allowed when turning a bound comparison into a flag:
// ok <=> bound - lhs >= -kBoundSlack.
inline constexpr double kBoundSlack = 1e-8;

// Per-trial seeds are hash(base_seed, m, sigma_index, trial_index), so a trial
// is reproducible in isolation and independent of execution order.
std::uint64_t trial_seed(std::uint64_t base_seed, int m, int sigma_index,
                         int trial_index);

// Generates the instance for the given cell, runs solve / align / certify,
// evaluates both condition variants and all perturbation bounds, and
// optionally cross-checks against the SDP reference.
TrialRecord run_trial(int m, int d, int r, double sigma, int sigma_index,
                      int trial_index, std::uint64_t base_seed, bool run_sdp,
                      const SolverConfig& solver_config = {});

// CSV layout shared by the writer, the resume parser, and the tests. The
// wall_* columns come last and are the only nondeterministic ones.
std::string trial_csv_header();
std::string trial_csv_row(const TrialRecord& record);
TrialRecord parse_trial_csv_row(const std::string& line);

struct SweepSummaryRow {
  int m = 0, d = 0, r = 0;
  double sigma = 0.0;
  int sigma_index = 0;
  int trials = 0;
  double cert_valid_rate = 0.0;
  double eq4_as_stated_rate = 0.0;
  double eq4_lemma7_rate = 0.0;
  double converged_rate = 0.0;
  int sdp_trials = 0;
  double sdp_mean_gap = 0.0;
  double sdp_rank_r_rate = 0.0;
};

std::vector<SweepSummaryRow> summarize(const SweepConfig& config,
                                       const std::vector<TrialRecord>& records);
std::string summary_csv_header();
std::string summary_csv_row(const SweepSummaryRow& row);

// Derived from the output path: "x.csv" -> "x.summary.csv".
std::string summary_path_for(const std::string& output_path);

// Runs every (m, sigma, trial) cell, streaming rows to the output CSV in
// trial order as they complete, then writes the per-cell summary. Trials run
// in parallel; each owns its RNG streams so the rows match a serial run.
// With resume = true, rows already present in the output are kept verbatim.
std::vector<TrialRecord> run_sweep(const SweepConfig& config);

}  // namespace otsm

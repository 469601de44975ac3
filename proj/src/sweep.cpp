#include "otsm/sweep.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "otsm/rng.hpp"

namespace otsm {

namespace {

double elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                   start)
      .count();
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double max_block_fro(const BlockPartition& p, const Matrix& M) {
  double worst = 0.0;
  for (int i = 0; i < p.num_blocks(); ++i) {
    worst = std::max(worst, M.middleRows(p.offset(i), p.block_dim(i)).norm());
  }
  return worst;
}

int resolve_threads(int max_threads, int n_trials) {
  int threads = max_threads;
  if (threads <= 0) {
    if (const char* env = std::getenv("OTSM_THREADS")) {
      threads = std::atoi(env);
    }
  }
  if (threads <= 0) {
    threads = static_cast<int>(std::thread::hardware_concurrency());
  }
  if (threads < 1) threads = 1;
  return std::min(threads, std::max(1, n_trials));
}

}  // namespace

std::uint64_t trial_seed(std::uint64_t base_seed, int m, int sigma_index,
                         int trial_index) {
  return stream_seed(base_seed, {static_cast<std::uint64_t>(m),
                                 static_cast<std::uint64_t>(sigma_index),
                                 static_cast<std::uint64_t>(trial_index)});
}

TrialRecord run_trial(int m, int d, int r, double sigma, int sigma_index,
                      int trial_index, std::uint64_t base_seed, bool run_sdp,
                      const SolverConfig& solver_config) {
  TrialRecord rec;
  rec.m = m;
  rec.d = d;
  rec.r = r;
  rec.sigma = sigma;
  rec.sigma_index = sigma_index;
  rec.trial_index = trial_index;
  rec.seed = trial_seed(base_seed, m, sigma_index, trial_index);
  rec.stat_tol = solver_config.stat_tol;

  const BlockPartition partition = BlockPartition::uniform(m, d, r);
  const ProblemInstance instance = make_instance(partition, sigma, rec.seed);
  const GroundTruth& truth = *instance.truth();
  const BlockSymMatrix& W = *instance.noise();

  auto t0 = std::chrono::steady_clock::now();
  const SolverResult res = solve(instance, solver_config);
  rec.wall_solve_ms = elapsed_ms(t0);
  rec.solver_objective = res.objective;
  rec.solver_sweeps = res.sweeps;
  rec.solver_stationarity = res.stationarity;
  rec.solver_converged = res.converged;

  const StiefelStack aligned = align(truth, res.O);
  const Matrix dV = aligned.stacked() - truth.stacked();
  rec.align_err_fro = dV.norm();
  rec.align_err_block_max = max_block_fro(partition, dV);

  t0 = std::chrono::steady_clock::now();
  if (res.converged) {
    rec.cert_ran = true;
    const Certificate cert = certify(instance.S(), aligned, solver_config.stat_tol);
    rec.cert_valid = cert.valid;
    rec.lambda_min_blocks = cert.lambda_min_blocks;
    rec.shift_c = cert.c;
    rec.eps_c = cert.eps_c;
    rec.lambda_complement = cert.lambda_complement;
    rec.symmetry_residual = cert.symmetry_residual;

    // Deviation of the constructed split from its noiseless closed form.
    const Decomposition dec =
        build_decomposition(instance.S(), aligned, solver_config.stat_tol);
    const BlockSymMatrix clean = clean_certificate(truth);
    rec.l5_t1_dev = operator_norm(
        symmetrize(partition, clean.matrix() - dec.T1.matrix()));

    const Lemma5Bounds l5 = lemma5_bounds(W, truth, aligned);
    rec.l5_bound1 = l5.bound1;
    rec.l5_bound1_ok = l5.bound1 - rec.l5_t1_dev >= -kBoundSlack;
    double min_slack = std::numeric_limits<double>::infinity();
    for (int i = 0; i < m; ++i) {
      const double lhs = operator_norm(
          (dec.Lambda[static_cast<std::size_t>(i)] -
           static_cast<double>(m - 1) * Matrix::Identity(r, r))
              .eval());
      min_slack = std::min(min_slack, l5.bound2[static_cast<std::size_t>(i)] - lhs);
    }
    rec.l5_bound2_min_slack = min_slack;
    rec.l5_bound2_ok = min_slack >= -kBoundSlack;
  }
  rec.wall_cert_ms = elapsed_ms(t0);

  const ConditionReport as_stated =
      deterministic_condition(W, truth, ConditionVariant::kAsStated);
  const ConditionReport lemma7_variant =
      deterministic_condition(W, truth, ConditionVariant::kLemma7Consistent);
  rec.eq4_lhs = as_stated.lhs;
  rec.eq4_as_stated_rhs = as_stated.rhs;
  rec.eq4_as_stated_holds = as_stated.holds;
  rec.eq4_lemma7_rhs = lemma7_variant.rhs;
  rec.eq4_lemma7_holds = lemma7_variant.holds;
  rec.sigma_star = corollary_condition(m, d, r, sigma).sigma_star;

  const Lemma7Bounds l7 = lemma7_bounds(W, truth, aligned);
  rec.l7_global_lhs = rec.align_err_fro;
  rec.l7_global_bound = l7.global_bound;
  rec.l7_global_ok = l7.global_bound - rec.l7_global_lhs >= -kBoundSlack;
  rec.l7_wv_lhs = max_block_fro(partition, W.matrix() * aligned.stacked());
  rec.l7_wv_bound = l7.wv_bound;
  rec.l7_wv_ok = l7.wv_bound - rec.l7_wv_lhs >= -kBoundSlack;

  if (!run_sdp) {
    rec.sdp_skip_reason = "disabled";
  } else if (partition.total_dim() > 300) {
    rec.sdp_skip_reason = "D>300";
  } else {
    t0 = std::chrono::steady_clock::now();
    const SdpSolution sdp = solve_sdp(instance, SdpConfig{}, &res.O);
    rec.wall_sdp_ms = elapsed_ms(t0);
    rec.sdp_ran = true;
    rec.sdp_iterations = sdp.iterations;
    rec.sdp_converged = sdp.converged;
    rec.sdp_primal_residual = sdp.primal_residual;
    rec.sdp_dual_residual = sdp.dual_residual;
    rec.sdp_gap = tightness_gap(sdp.U, res.O);
    rec.sdp_rank = sdp.numerical_rank;
  }
  return rec;
}

// ---------------------------------------------------------------------------
// CSV layout
// ---------------------------------------------------------------------------

std::string trial_csv_header() {
  return "m,d,r,sigma,sigma_index,trial_index,seed,"
         "solver_objective,solver_sweeps,solver_stationarity,solver_converged,"
         "cert_ran,cert_valid,lambda_min_blocks,shift_c,eps_c,lambda_complement,"
         "symmetry_residual,stat_tol,"
         "eq4_as_stated_holds,eq4_lhs,eq4_as_stated_rhs,eq4_lemma7_holds,"
         "eq4_lemma7_rhs,sigma_star,"
         "align_err_fro,align_err_block_max,"
         "l7_global_lhs,l7_global_bound,l7_global_ok,"
         "l7_wv_lhs,l7_wv_bound,l7_wv_ok,"
         "l5_t1_dev,l5_bound1,l5_bound1_ok,l5_bound2_min_slack,l5_bound2_ok,"
         "sdp_ran,sdp_skip_reason,sdp_iterations,sdp_converged,"
         "sdp_primal_residual,sdp_dual_residual,sdp_gap,sdp_rank,"
         "wall_solve_ms,wall_cert_ms,wall_sdp_ms";
}

std::string trial_csv_row(const TrialRecord& r) {
  std::ostringstream out;
  out << r.m << ',' << r.d << ',' << r.r << ',' << fmt_double(r.sigma) << ','
      << r.sigma_index << ',' << r.trial_index << ',' << r.seed << ','
      << fmt_double(r.solver_objective) << ',' << r.solver_sweeps << ','
      << fmt_double(r.solver_stationarity) << ',' << int(r.solver_converged) << ','
      << int(r.cert_ran) << ',' << int(r.cert_valid) << ','
      << fmt_double(r.lambda_min_blocks) << ',' << fmt_double(r.shift_c) << ','
      << fmt_double(r.eps_c) << ',' << fmt_double(r.lambda_complement) << ','
      << fmt_double(r.symmetry_residual) << ',' << fmt_double(r.stat_tol) << ','
      << int(r.eq4_as_stated_holds) << ',' << fmt_double(r.eq4_lhs) << ','
      << fmt_double(r.eq4_as_stated_rhs) << ',' << int(r.eq4_lemma7_holds) << ','
      << fmt_double(r.eq4_lemma7_rhs) << ',' << fmt_double(r.sigma_star) << ','
      << fmt_double(r.align_err_fro) << ',' << fmt_double(r.align_err_block_max)
      << ',' << fmt_double(r.l7_global_lhs) << ',' << fmt_double(r.l7_global_bound)
      << ',' << int(r.l7_global_ok) << ',' << fmt_double(r.l7_wv_lhs) << ','
      << fmt_double(r.l7_wv_bound) << ',' << int(r.l7_wv_ok) << ','
      << fmt_double(r.l5_t1_dev) << ',' << fmt_double(r.l5_bound1) << ','
      << int(r.l5_bound1_ok) << ',' << fmt_double(r.l5_bound2_min_slack) << ','
      << int(r.l5_bound2_ok) << ',' << int(r.sdp_ran) << ',' << r.sdp_skip_reason
      << ',' << r.sdp_iterations << ',' << int(r.sdp_converged) << ','
      << fmt_double(r.sdp_primal_residual) << ',' << fmt_double(r.sdp_dual_residual)
      << ',' << fmt_double(r.sdp_gap) << ',' << r.sdp_rank << ','
      << fmt_double(r.wall_solve_ms) << ',' << fmt_double(r.wall_cert_ms) << ','
      << fmt_double(r.wall_sdp_ms);
  return out.str();
}

TrialRecord parse_trial_csv_row(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  if (fields.size() != 49) {
    throw std::runtime_error("trial CSV row has " + std::to_string(fields.size()) +
                             " fields, expected 49");
  }
  auto num = [&](std::size_t k) { return std::stod(fields[k]); };
  auto integer = [&](std::size_t k) { return std::stoi(fields[k]); };
  auto flag = [&](std::size_t k) { return fields[k] == "1"; };

  TrialRecord r;
  r.m = integer(0);
  r.d = integer(1);
  r.r = integer(2);
  r.sigma = num(3);
  r.sigma_index = integer(4);
  r.trial_index = integer(5);
  r.seed = std::stoull(fields[6]);
  r.solver_objective = num(7);
  r.solver_sweeps = integer(8);
  r.solver_stationarity = num(9);
  r.solver_converged = flag(10);
  r.cert_ran = flag(11);
  r.cert_valid = flag(12);
  r.lambda_min_blocks = num(13);
  r.shift_c = num(14);
  r.eps_c = num(15);
  r.lambda_complement = num(16);
  r.symmetry_residual = num(17);
  r.stat_tol = num(18);
  r.eq4_as_stated_holds = flag(19);
  r.eq4_lhs = num(20);
  r.eq4_as_stated_rhs = num(21);
  r.eq4_lemma7_holds = flag(22);
  r.eq4_lemma7_rhs = num(23);
  r.sigma_star = num(24);
  r.align_err_fro = num(25);
  r.align_err_block_max = num(26);
  r.l7_global_lhs = num(27);
  r.l7_global_bound = num(28);
  r.l7_global_ok = flag(29);
  r.l7_wv_lhs = num(30);
  r.l7_wv_bound = num(31);
  r.l7_wv_ok = flag(32);
  r.l5_t1_dev = num(33);
  r.l5_bound1 = num(34);
  r.l5_bound1_ok = flag(35);
  r.l5_bound2_min_slack = num(36);
  r.l5_bound2_ok = flag(37);
  r.sdp_ran = flag(38);
  r.sdp_skip_reason = fields[39];
  r.sdp_iterations = integer(40);
  r.sdp_converged = flag(41);
  r.sdp_primal_residual = num(42);
  r.sdp_dual_residual = num(43);
  r.sdp_gap = num(44);
  r.sdp_rank = integer(45);
  r.wall_solve_ms = num(46);
  r.wall_cert_ms = num(47);
  r.wall_sdp_ms = num(48);
  return r;
}

std::vector<SweepSummaryRow> summarize(const SweepConfig& config,
                                       const std::vector<TrialRecord>& records) {
  std::vector<SweepSummaryRow> rows;
  for (int m : config.m_values) {
    for (std::size_t si = 0; si < config.sigma_values.size(); ++si) {
      SweepSummaryRow row;
      row.m = m;
      row.d = config.d;
      row.r = config.r;
      row.sigma = config.sigma_values[si];
      row.sigma_index = static_cast<int>(si);
      double gap_sum = 0.0;
      int rank_ok = 0;
      for (const TrialRecord& rec : records) {
        if (rec.m != m || rec.sigma_index != static_cast<int>(si)) continue;
        ++row.trials;
        row.cert_valid_rate += rec.cert_valid ? 1.0 : 0.0;
        row.eq4_as_stated_rate += rec.eq4_as_stated_holds ? 1.0 : 0.0;
        row.eq4_lemma7_rate += rec.eq4_lemma7_holds ? 1.0 : 0.0;
        row.converged_rate += rec.solver_converged ? 1.0 : 0.0;
        if (rec.sdp_ran) {
          ++row.sdp_trials;
          gap_sum += rec.sdp_gap;
          if (rec.sdp_rank == rec.r) ++rank_ok;
        }
      }
      if (row.trials > 0) {
        row.cert_valid_rate /= row.trials;
        row.eq4_as_stated_rate /= row.trials;
        row.eq4_lemma7_rate /= row.trials;
        row.converged_rate /= row.trials;
      }
      if (row.sdp_trials > 0) {
        row.sdp_mean_gap = gap_sum / row.sdp_trials;
        row.sdp_rank_r_rate = static_cast<double>(rank_ok) / row.sdp_trials;
      }
      rows.push_back(row);
    }
  }
  return rows;
}

std::string summary_csv_header() {
  return "m,d,r,sigma,sigma_index,trials,cert_valid_rate,eq4_as_stated_rate,"
         "eq4_lemma7_rate,converged_rate,sdp_trials,sdp_mean_gap,sdp_rank_r_rate";
}

std::string summary_csv_row(const SweepSummaryRow& row) {
  std::ostringstream out;
  out << row.m << ',' << row.d << ',' << row.r << ',' << fmt_double(row.sigma) << ','
      << row.sigma_index << ',' << row.trials << ','
      << fmt_double(row.cert_valid_rate) << ',' << fmt_double(row.eq4_as_stated_rate)
      << ',' << fmt_double(row.eq4_lemma7_rate) << ','
      << fmt_double(row.converged_rate) << ',' << row.sdp_trials << ','
      << fmt_double(row.sdp_mean_gap) << ',' << fmt_double(row.sdp_rank_r_rate);
  return out.str();
}

std::string summary_path_for(const std::string& output_path) {
  const std::string suffix = ".csv";
  if (output_path.size() > suffix.size() &&
      output_path.compare(output_path.size() - suffix.size(), suffix.size(),
                          suffix) == 0) {
    return output_path.substr(0, output_path.size() - suffix.size()) +
           ".summary.csv";
  }
  return output_path + ".summary.csv";
}

namespace {

struct TrialKey {
  int m, sigma_index, trial_index;
  bool operator<(const TrialKey& o) const {
    if (m != o.m) return m < o.m;
    if (sigma_index != o.sigma_index) return sigma_index < o.sigma_index;
    return trial_index < o.trial_index;
  }
};

// Raw rows already on disk, keyed by (m, sigma_index, trial_index). Kept
// verbatim so resumed runs keep previous wall times byte for byte.
std::map<TrialKey, std::string> read_existing_rows(const std::string& path) {
  std::map<TrialKey, std::string> rows;
  std::ifstream in(path);
  if (!in) return rows;
  std::string line;
  if (!std::getline(in, line)) return rows;  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      const TrialRecord rec = parse_trial_csv_row(line);
      rows[{rec.m, rec.sigma_index, rec.trial_index}] = line;
    } catch (const std::exception&) {
      // Incomplete final line from an interrupted run; recompute that trial.
    }
  }
  return rows;
}

}  // namespace

std::vector<TrialRecord> run_sweep(const SweepConfig& config) {
  if (config.m_values.empty() || config.sigma_values.empty()) {
    throw std::invalid_argument("run_sweep: m and sigma grids must be non-empty");
  }
  if (config.trials_per_cell < 1) {
    throw std::invalid_argument("run_sweep: trials_per_cell must be >= 1");
  }
  if (config.output_path.empty()) {
    throw std::invalid_argument("run_sweep: output_path is required");
  }

  struct Task {
    TrialKey key;
    double sigma;
  };
  std::vector<Task> tasks;
  for (int m : config.m_values) {
    for (std::size_t si = 0; si < config.sigma_values.size(); ++si) {
      for (int t = 0; t < config.trials_per_cell; ++t) {
        tasks.push_back({{m, static_cast<int>(si), t}, config.sigma_values[si]});
      }
    }
  }
  const int n = static_cast<int>(tasks.size());

  std::map<TrialKey, std::string> existing;
  if (config.resume) existing = read_existing_rows(config.output_path);

  std::ofstream out(config.output_path, std::ios::trunc);
  if (!out) {
    throw std::runtime_error("cannot open '" + config.output_path +
                             "' for writing");
  }
  out << trial_csv_header() << '\n';

  std::vector<std::string> rows(static_cast<std::size_t>(n));
  std::vector<TrialRecord> records(static_cast<std::size_t>(n));
  std::vector<char> done(static_cast<std::size_t>(n), 0);

  std::mutex flush_mutex;
  int next_to_write = 0;
  auto flush_ready = [&]() {
    // Called with flush_mutex held; writes the completed prefix so an
    // interrupted run leaves a loadable file behind.
    while (next_to_write < n && done[static_cast<std::size_t>(next_to_write)]) {
      out << rows[static_cast<std::size_t>(next_to_write)] << '\n';
      ++next_to_write;
    }
    out.flush();
  };

  std::atomic<int> cursor{0};
  auto worker = [&]() {
    while (true) {
      const int k = cursor.fetch_add(1);
      if (k >= n) return;
      const Task& task = tasks[static_cast<std::size_t>(k)];
      const auto found = existing.find(task.key);
      if (found != existing.end()) {
        records[static_cast<std::size_t>(k)] = parse_trial_csv_row(found->second);
        rows[static_cast<std::size_t>(k)] = found->second;
      } else {
        const TrialRecord rec = run_trial(
            task.key.m, config.d, config.r, task.sigma, task.key.sigma_index,
            task.key.trial_index, config.base_seed, config.run_sdp, config.solver);
        records[static_cast<std::size_t>(k)] = rec;
        rows[static_cast<std::size_t>(k)] = trial_csv_row(rec);
      }
      std::lock_guard<std::mutex> lock(flush_mutex);
      done[static_cast<std::size_t>(k)] = 1;
      flush_ready();
    }
  };

  const int threads = resolve_threads(config.max_threads, n);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }
  out.close();

  std::ofstream summary(summary_path_for(config.output_path), std::ios::trunc);
  if (!summary) {
    throw std::runtime_error("cannot open summary CSV for writing");
  }
  summary << summary_csv_header() << '\n';
  for (const SweepSummaryRow& row : summarize(config, records)) {
    summary << summary_csv_row(row) << '\n';
  }
  return records;
}

}  // namespace otsm

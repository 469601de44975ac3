#pragma once

#include <cstdint>
#include <vector>

#include "otsm/model.hpp"

namespace otsm {

enum class InitMethod { kSpectral, kTruth, kRandom };

struct SolverConfig {
  int max_sweeps = 500;
  // Relative per-sweep objective increase below which the objective counts as
  // stalled. Stopping requires both the stall and the stationarity test, so a
  // flat objective alone never ends a run with a large residual.
  double obj_tol = 1e-10;
  // Stationarity residual threshold; also gates the converged flag.
  double stat_tol = 1e-8;
  InitMethod init = InitMethod::kSpectral;
  std::uint64_t init_seed = 0;   // used by kRandom
  bool randomize_order = false;  // shuffle the block update order each sweep
  std::uint64_t order_seed = 0;
};

struct SolverResult {
  StiefelStack O;
  double objective = 0.0;
  std::vector<double> trajectory;  // objective after each sweep
  int sweeps = 0;
  bool converged = false;
  double stationarity = 0.0;
};

// tr(O^T S O); equals the pairwise trace sum because S has zero diagonal
// blocks.
double objective(const BlockSymMatrix& S, const StiefelStack& O);

// Orthonormal polar factor: for M = A Sigma B^T returns A B^T, the maximizer
// of tr(Q^T M) over frames Q. Rank-deficient inputs are completed
// deterministically: null directions of the left/right factors are rebuilt by
// QR completion, sign-fixed (largest-magnitude entry positive), and paired in
// index order.
Matrix polar_factor(const Matrix& M);

// Top-r eigenvectors of S scaled by sqrt(m), then block-wise polar factors.
StiefelStack spectral_init(const ProblemInstance& instance);

// One cyclic pass: O_i <- polar(sum_{j != i} S_ij O_j), using already-updated
// blocks. Never decreases the objective.
StiefelStack bca_sweep(const BlockSymMatrix& S, const StiefelStack& O);

// max_i || [S O]_i - O_i sym(O_i^T [S O]_i) ||_F, zero exactly at first-order
// critical points.
double stationarity_residual(const BlockSymMatrix& S, const StiefelStack& O);

// Block-coordinate ascent with the configured initialization. Non-convergence
// is reported through the flags, never thrown.
SolverResult solve(const ProblemInstance& instance, const SolverConfig& config = {});

// Right-multiplies O by the orthogonal Procrustes factor of V^T O so that
// V^T O becomes symmetric positive semidefinite; fixes the gauge freedom of
// factorizations.
StiefelStack align(const GroundTruth& truth, const StiefelStack& O);

}  // namespace otsm

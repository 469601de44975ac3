#pragma once

#include "otsm/model.hpp"
#include "otsm/solver.hpp"

namespace otsm {

struct SdpConfig {
  double rho = 1.0;
  int max_iters = 20000;
  // Residual thresholds, scaled by 1 + ||S||_F at run time.
  double primal_tol = 1e-7;
  double dual_tol = 1e-7;
  // Residual-balancing rho adaptation; off by default for reproducibility.
  bool adaptive_rho = false;
};

struct SdpSolution {
  BlockSymMatrix U;
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  double objective = 0.0;  // <S, U>
  int numerical_rank = 0;
  bool converged = false;
};

// Alternating-direction splitting for the relaxation: the PSD cone on one
// side, the block constraints {Z_ii <= I, tr(Z_ii) = r} on the other (both
// projections are closed-form). Returns the Z-iterate, feasible for the block
// constraints exactly and PSD up to the primal residual. If a warm start is
// given, X and Z begin at O O^T.
SdpSolution solve_sdp(const ProblemInstance& instance, const SdpConfig& config = {},
                      const StiefelStack* warm_start = nullptr);

// Count of eigenvalues above threshold * lambda_max(U).
int numerical_rank(const BlockSymMatrix& U, double threshold = 1e-5);

// || U - O O^T ||_F.
double tightness_gap(const BlockSymMatrix& U, const StiefelStack& O);

}  // namespace otsm

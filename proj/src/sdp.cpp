#include "otsm/sdp.hpp"

#include <cmath>
#include <stdexcept>

namespace otsm {

SdpSolution solve_sdp(const ProblemInstance& instance, const SdpConfig& config,
                      const StiefelStack* warm_start) {
  if (config.rho <= 0.0) throw std::invalid_argument("solve_sdp: rho must be positive");
  if (config.max_iters < 1) {
    throw std::invalid_argument("solve_sdp: max_iters must be >= 1");
  }
  if (config.primal_tol <= 0.0 || config.dual_tol <= 0.0) {
    throw std::invalid_argument("solve_sdp: tolerances must be positive");
  }

  const BlockPartition& p = instance.partition();
  const int D = p.total_dim();
  const Matrix& S = instance.S().matrix();
  const double scale = 1.0 + S.norm();

  double rho = config.rho;
  Matrix X, Z;
  if (warm_start != nullptr) {
    if (warm_start->partition() != p) {
      throw std::invalid_argument("solve_sdp: warm start partition mismatch");
    }
    const Matrix stacked = warm_start->stacked();
    Z = stacked * stacked.transpose();
    Z = ((Z + Z.transpose()) / 2.0).eval();
    X = Z;
  } else {
    X = Matrix::Zero(D, D);
    Z = Matrix::Zero(D, D);
  }
  Matrix Y = Matrix::Zero(D, D);  // scaled dual variable

  double primal = 0.0, dual = 0.0;
  int iter = 0;
  bool converged = false;
  while (iter < config.max_iters) {
    ++iter;
    X = proj_psd(((Z - Y + (Z - Y).transpose()) / 2.0).eval());

    const Matrix Zprev = Z;
    Matrix M = X + Y + S / rho;
    M = ((M + M.transpose()) / 2.0).eval();
    Z = M;
    for (int i = 0; i < p.num_blocks(); ++i) {
      const int d = p.block_dim(i);
      Z.block(p.offset(i), p.offset(i), d, d) =
          proj_block_cap(M.block(p.offset(i), p.offset(i), d, d), p.rank());
    }

    Y += X - Z;

    primal = (X - Z).norm();
    dual = rho * (Z - Zprev).norm();
    if (primal <= config.primal_tol * scale && dual <= config.dual_tol * scale) {
      converged = true;
      break;
    }

    if (config.adaptive_rho && iter % 50 == 0) {
      if (primal > 10.0 * dual) {
        rho *= 2.0;
        Y /= 2.0;
      } else if (dual > 10.0 * primal) {
        rho /= 2.0;
        Y *= 2.0;
      }
    }
  }

  SdpSolution out{BlockSymMatrix(p, std::move(Z)), iter, primal, dual, 0.0, 0,
                  converged};
  out.objective = (S.cwiseProduct(out.U.matrix())).sum();
  out.numerical_rank = otsm::numerical_rank(out.U);
  return out;
}

int numerical_rank(const BlockSymMatrix& U, double threshold) {
  const Vector lam = spectral_decomp(U).eigenvalues;
  const double top = lam(0);
  if (top <= 0.0) return 0;
  int count = 0;
  for (Index k = 0; k < lam.size(); ++k) {
    if (lam(k) > threshold * top) ++count;
  }
  return count;
}

double tightness_gap(const BlockSymMatrix& U, const StiefelStack& O) {
  if (U.partition() != O.partition()) {
    throw std::invalid_argument("tightness_gap: partition mismatch");
  }
  const Matrix stacked = O.stacked();
  return (U.matrix() - stacked * stacked.transpose()).norm();
}

}  // namespace otsm

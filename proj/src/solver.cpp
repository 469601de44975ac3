#include "otsm/solver.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "otsm/rng.hpp"

namespace otsm {

namespace {

// Deterministic orthonormal complement: the trailing columns of the full Q
// factor of X, which is well defined because X has orthonormal columns.
Matrix orthonormal_complement(const Matrix& X, Index n, Index want) {
  if (X.cols() == 0) {
    return Matrix::Identity(n, n).leftCols(want);
  }
  Eigen::HouseholderQR<Matrix> qr(X);
  Matrix Q = qr.householderQ();
  return Q.rightCols(n - X.cols()).leftCols(want);
}

void sign_fix_columns(Matrix& M) {
  for (Index col = 0; col < M.cols(); ++col) {
    Index arg = 0;
    M.col(col).cwiseAbs().maxCoeff(&arg);
    if (M(arg, col) < 0.0) M.col(col) = -M.col(col);
  }
}

Matrix block_gradient(const BlockSymMatrix& S, const std::vector<Matrix>& blocks,
                      int i) {
  const BlockPartition& p = S.partition();
  Matrix G = Matrix::Zero(p.block_dim(i), p.rank());
  for (int j = 0; j < p.num_blocks(); ++j) {
    if (j == i) continue;
    G.noalias() += S.block(i, j) * blocks[static_cast<std::size_t>(j)];
  }
  return G;
}

void sweep_in_place(const BlockSymMatrix& S, std::vector<Matrix>& blocks,
                    const std::vector<int>& order) {
  for (int i : order) {
    blocks[static_cast<std::size_t>(i)] = polar_factor(block_gradient(S, blocks, i));
  }
}

void check_partitions(const BlockPartition& a, const BlockPartition& b,
                      const char* where) {
  if (a != b) {
    throw std::invalid_argument(std::string(where) + ": partition mismatch");
  }
}

}  // namespace

double objective(const BlockSymMatrix& S, const StiefelStack& O) {
  check_partitions(S.partition(), O.partition(), "objective");
  const Matrix stacked = O.stacked();
  return (stacked.cwiseProduct(S.matrix() * stacked)).sum();
}

Matrix polar_factor(const Matrix& M) {
  const Index d = M.rows();
  const Index r = M.cols();
  if (d < r) throw std::invalid_argument("polar_factor: need rows >= cols");

  Eigen::JacobiSVD<Matrix> svd(M, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  const double cutoff = s.size() > 0
                            ? s(0) * static_cast<double>(std::max(d, r)) *
                                  std::numeric_limits<double>::epsilon()
                            : 0.0;
  Index k = 0;
  while (k < r && s(k) > cutoff && s(k) > 0.0) ++k;

  if (k == r) {
    return svd.matrixU() * svd.matrixV().transpose();
  }
  const Matrix U1 = svd.matrixU().leftCols(k);
  const Matrix V1 = svd.matrixV().leftCols(k);
  Matrix U0 = orthonormal_complement(U1, d, r - k);
  Matrix V0 = orthonormal_complement(V1, r, r - k);
  sign_fix_columns(U0);
  sign_fix_columns(V0);
  return U1 * V1.transpose() + U0 * V0.transpose();
}

StiefelStack spectral_init(const ProblemInstance& instance) {
  const BlockPartition& p = instance.partition();
  const Matrix Phi = leading_eigvecs(instance.S(), p.rank()) *
                     std::sqrt(static_cast<double>(p.num_blocks()));
  std::vector<Matrix> blocks;
  blocks.reserve(static_cast<std::size_t>(p.num_blocks()));
  for (int i = 0; i < p.num_blocks(); ++i) {
    blocks.push_back(polar_factor(Phi.middleRows(p.offset(i), p.block_dim(i))));
  }
  return StiefelStack(p, std::move(blocks));
}

StiefelStack bca_sweep(const BlockSymMatrix& S, const StiefelStack& O) {
  check_partitions(S.partition(), O.partition(), "bca_sweep");
  std::vector<Matrix> blocks = O.blocks();
  std::vector<int> order(static_cast<std::size_t>(O.num_blocks()));
  std::iota(order.begin(), order.end(), 0);
  sweep_in_place(S, blocks, order);
  return StiefelStack(S.partition(), std::move(blocks));
}

double stationarity_residual(const BlockSymMatrix& S, const StiefelStack& O) {
  check_partitions(S.partition(), O.partition(), "stationarity_residual");
  const BlockPartition& p = S.partition();
  const Matrix G = S.matrix() * O.stacked();
  double worst = 0.0;
  for (int i = 0; i < p.num_blocks(); ++i) {
    const Matrix Gi = G.middleRows(p.offset(i), p.block_dim(i));
    const Matrix OtG = O.block(i).transpose() * Gi;
    const Matrix residual = Gi - O.block(i) * ((OtG + OtG.transpose()) / 2.0);
    worst = std::max(worst, residual.norm());
  }
  return worst;
}

SolverResult solve(const ProblemInstance& instance, const SolverConfig& config) {
  if (config.max_sweeps < 1) {
    throw std::invalid_argument("solve: max_sweeps must be >= 1");
  }
  if (config.obj_tol <= 0.0 || config.stat_tol <= 0.0) {
    throw std::invalid_argument("solve: tolerances must be positive");
  }
  const BlockPartition& p = instance.partition();
  const BlockSymMatrix& S = instance.S();

  std::vector<Matrix> blocks;
  switch (config.init) {
    case InitMethod::kSpectral:
      blocks = spectral_init(instance).blocks();
      break;
    case InitMethod::kTruth:
      if (!instance.truth()) {
        throw std::invalid_argument("solve: init=truth requires an instance with truth");
      }
      blocks = instance.truth()->stack().blocks();
      break;
    case InitMethod::kRandom:
      blocks = random_stiefel(p, config.init_seed).stack().blocks();
      break;
  }

  std::vector<int> order(static_cast<std::size_t>(p.num_blocks()));
  std::iota(order.begin(), order.end(), 0);
  SplitMix64 shuffle(config.order_seed);

  SolverResult result{StiefelStack(p, blocks), 0.0, {}, 0, false, 0.0};
  double prev = objective(S, result.O);
  double stat = stationarity_residual(S, result.O);

  for (int sweep = 0; sweep < config.max_sweeps; ++sweep) {
    if (config.randomize_order) {
      for (std::size_t k = order.size(); k > 1; --k) {
        const std::size_t j = static_cast<std::size_t>(shuffle.next() % k);
        std::swap(order[k - 1], order[j]);
      }
    }
    sweep_in_place(S, blocks, order);
    StiefelStack current(p, blocks);
    const double obj = objective(S, current);
    result.trajectory.push_back(obj);
    stat = stationarity_residual(S, current);
    result.O = std::move(current);

    const double rel_increase = (obj - prev) / (1.0 + std::abs(obj));
    prev = obj;
    if (rel_increase < config.obj_tol && stat <= config.stat_tol) break;
  }

  result.objective = prev;
  result.sweeps = static_cast<int>(result.trajectory.size());
  result.stationarity = stat;
  result.converged = stat <= config.stat_tol;
  return result;
}

StiefelStack align(const GroundTruth& truth, const StiefelStack& O) {
  check_partitions(truth.partition(), O.partition(), "align");
  const Matrix P = truth.stacked().transpose() * O.stacked();
  Eigen::JacobiSVD<Matrix> svd(P, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Matrix Q = svd.matrixV() * svd.matrixU().transpose();
  std::vector<Matrix> blocks;
  blocks.reserve(static_cast<std::size_t>(O.num_blocks()));
  for (int i = 0; i < O.num_blocks(); ++i) {
    blocks.push_back(O.block(i) * Q);
  }
  return StiefelStack(O.partition(), std::move(blocks));
}

}  // namespace otsm

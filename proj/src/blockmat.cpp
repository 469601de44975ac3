#include "otsm/blockmat.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>

namespace otsm {

BlockPartition::BlockPartition(std::vector<int> dims, int r)
    : dims_(std::move(dims)), r_(r) {
  if (dims_.size() < 2) {
    throw std::invalid_argument("BlockPartition: need at least two blocks");
  }
  if (r_ < 1) {
    throw std::invalid_argument("BlockPartition: rank must be positive");
  }
  offsets_.reserve(dims_.size());
  for (int d : dims_) {
    if (d < r_) {
      throw std::invalid_argument(
          "BlockPartition: every block size d_i must satisfy d_i >= r (got d=" +
          std::to_string(d) + ", r=" + std::to_string(r_) + ")");
    }
    offsets_.push_back(total_);
    total_ += d;
  }
}

BlockPartition BlockPartition::uniform(int m, int d, int r) {
  if (m < 2) throw std::invalid_argument("BlockPartition: need m >= 2 blocks");
  return BlockPartition(std::vector<int>(static_cast<std::size_t>(m), d), r);
}

BlockSymMatrix::BlockSymMatrix(BlockPartition partition, Matrix entries)
    : partition_(std::move(partition)), entries_(std::move(entries)) {
  const int D = partition_.total_dim();
  if (entries_.rows() != D || entries_.cols() != D) {
    throw std::invalid_argument("BlockSymMatrix: matrix side " +
                                std::to_string(entries_.rows()) +
                                " does not match partition dimension " +
                                std::to_string(D));
  }
  const double scale = 1.0 + entries_.cwiseAbs().maxCoeff();
  const double asym = (entries_ - entries_.transpose()).cwiseAbs().maxCoeff();
  if (asym > Tolerances::symmetry * scale) {
    throw std::invalid_argument("BlockSymMatrix: input is not symmetric (max "
                                "asymmetry " + std::to_string(asym) + ")");
  }
}

BlockSymMatrix BlockSymMatrix::zero(const BlockPartition& partition) {
  return BlockSymMatrix(partition,
                        Matrix::Zero(partition.total_dim(), partition.total_dim()));
}

BlockSymMatrix symmetrize(const BlockPartition& partition, const Matrix& A) {
  if (A.rows() != A.cols() || A.rows() != partition.total_dim()) {
    throw std::invalid_argument("symmetrize: matrix side does not match partition");
  }
  return BlockSymMatrix(partition, ((A + A.transpose()) / 2.0).eval());
}

SpectralDecomp spectral_decomp(const Matrix& A) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(A);
  if (es.info() != Eigen::Success) {
    throw std::runtime_error("spectral_decomp: eigensolver failed to converge");
  }
  SpectralDecomp out;
  out.eigenvalues = es.eigenvalues().reverse();
  out.eigenvectors = es.eigenvectors().rowwise().reverse();
  return out;
}

SpectralDecomp spectral_decomp(const BlockSymMatrix& A) {
  return spectral_decomp(A.matrix());
}

double operator_norm(const Matrix& A) {
  if (A.rows() == 0 || A.cols() == 0) return 0.0;
  Eigen::BDCSVD<Matrix> svd(A);
  return svd.singularValues()(0);
}

double operator_norm(const BlockSymMatrix& A) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(A.matrix(), Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) {
    throw std::runtime_error("operator_norm: eigensolver failed to converge");
  }
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

Matrix leading_eigvecs(const BlockSymMatrix& A, int k) {
  const int D = A.partition().total_dim();
  if (k < 1 || k > D) {
    throw std::invalid_argument("leading_eigvecs: k must lie in [1, D]");
  }
  return spectral_decomp(A).eigenvectors.leftCols(k);
}

Matrix proj_psd(const Matrix& A) {
  SpectralDecomp d = spectral_decomp(A);
  const Vector clipped = d.eigenvalues.cwiseMax(0.0);
  Matrix P = d.eigenvectors * clipped.asDiagonal() * d.eigenvectors.transpose();
  return ((P + P.transpose()) / 2.0).eval();
}

BlockSymMatrix proj_psd(const BlockSymMatrix& A) {
  return BlockSymMatrix(A.partition(), proj_psd(A.matrix()));
}

Matrix proj_block_cap(const Matrix& A, int r, double tol) {
  const Index d = A.rows();
  if (A.cols() != d) throw std::invalid_argument("proj_block_cap: input not square");
  if (r < 1 || r > d) {
    throw std::invalid_argument("proj_block_cap: need 1 <= r <= d");
  }
  SpectralDecomp dec = spectral_decomp(A);
  const Vector& lam = dec.eigenvalues;

  // sum_k min(1, lambda_k + t) is nondecreasing in t; the interval below
  // brackets the root by construction.
  double lo = static_cast<double>(r) / static_cast<double>(d) - lam.maxCoeff() - 1.0;
  double hi = 1.0 - lam.minCoeff();
  double t = 0.0;
  for (int iter = 0; iter < 200; ++iter) {
    t = 0.5 * (lo + hi);
    const double s = (lam.array() + t).min(1.0).sum();
    if (std::abs(s - static_cast<double>(r)) <= tol) break;
    if (s < static_cast<double>(r)) {
      lo = t;
    } else {
      hi = t;
    }
  }
  const Vector x = (lam.array() + t).min(1.0);
  Matrix P = dec.eigenvectors * x.asDiagonal() * dec.eigenvectors.transpose();
  return ((P + P.transpose()) / 2.0).eval();
}

namespace {
void check_orthonormal(const Matrix& frame) {
  const Index k = frame.cols();
  const Matrix gram = frame.transpose() * frame;
  const double dev = (gram - Matrix::Identity(k, k)).cwiseAbs().maxCoeff();
  if (dev > Tolerances::orthonormal) {
    throw std::invalid_argument("proj_span: frame is not orthonormal (deviation " +
                                std::to_string(dev) + ")");
  }
}
}  // namespace

Matrix proj_span(const Matrix& frame) {
  check_orthonormal(frame);
  return frame * frame.transpose();
}

Matrix proj_span_perp(const Matrix& frame) {
  check_orthonormal(frame);
  const Index n = frame.rows();
  return Matrix::Identity(n, n) - frame * frame.transpose();
}

}  // namespace otsm

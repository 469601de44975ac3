#pragma once

#include <vector>

#include "otsm/types.hpp"

namespace otsm {

// Block row/column sizes (d_1, ..., d_m) of a D x D matrix, plus the rank
// parameter r shared by all frames living on the blocks. Requires m >= 2 and
// d_i >= r for every block.
class BlockPartition {
 public:
  BlockPartition(std::vector<int> dims, int r);

  static BlockPartition uniform(int m, int d, int r);

  int num_blocks() const { return static_cast<int>(dims_.size()); }
  int block_dim(int i) const { return dims_[static_cast<std::size_t>(i)]; }
  int offset(int i) const { return offsets_[static_cast<std::size_t>(i)]; }
  int total_dim() const { return total_; }
  int rank() const { return r_; }
  const std::vector<int>& dims() const { return dims_; }

  bool operator==(const BlockPartition& other) const {
    return r_ == other.r_ && dims_ == other.dims_;
  }
  bool operator!=(const BlockPartition& other) const { return !(*this == other); }

 private:
  std::vector<int> dims_;
  std::vector<int> offsets_;
  int r_ = 0;
  int total_ = 0;
};

// Dense symmetric D x D matrix addressed by partition blocks. Immutable after
// construction; the constructor rejects inputs whose asymmetry exceeds
// Tolerances::symmetry relative to the largest entry.
class BlockSymMatrix {
 public:
  BlockSymMatrix(BlockPartition partition, Matrix entries);

  static BlockSymMatrix zero(const BlockPartition& partition);

  const BlockPartition& partition() const { return partition_; }
  const Matrix& matrix() const { return entries_; }

  // The d_i x d_j submatrix at the partition offsets.
  Eigen::Block<const Matrix> block(int i, int j) const {
    return entries_.block(partition_.offset(i), partition_.offset(j),
                          partition_.block_dim(i), partition_.block_dim(j));
  }

 private:
  BlockPartition partition_;
  Matrix entries_;
};

// Wraps (A + A^T)/2 with the partition. A must be D x D.
BlockSymMatrix symmetrize(const BlockPartition& partition, const Matrix& A);

struct SpectralDecomp {
  Vector eigenvalues;   // descending
  Matrix eigenvectors;  // orthonormal columns, matching order
};

// Full eigendecomposition A = Q diag(lambda) Q^T with descending eigenvalues.
// Throws if the eigensolver does not converge.
SpectralDecomp spectral_decomp(const BlockSymMatrix& A);
SpectralDecomp spectral_decomp(const Matrix& A);

// Largest singular value (general rectangular input).
double operator_norm(const Matrix& A);
// max |eigenvalue| for symmetric input.
double operator_norm(const BlockSymMatrix& A);

// Eigenvectors of the k largest eigenvalues, as a D x k orthonormal matrix.
Matrix leading_eigvecs(const BlockSymMatrix& A, int k);

// Frobenius-nearest positive semidefinite matrix (eigenvalue clipping).
BlockSymMatrix proj_psd(const BlockSymMatrix& A);
Matrix proj_psd(const Matrix& A);

// Frobenius projection of a symmetric d x d block onto
// {B = B^T : B <= I, tr(B) = r}. Eigenvalues are mapped to
// min(1, lambda_k + t) with t located by monotone bisection until
// |sum_k min(1, lambda_k + t) - r| <= tol.
Matrix proj_block_cap(const Matrix& A, int r, double tol = Tolerances::bisection);

// Orthogonal projector B B^T onto the span of an orthonormal frame, and its
// complement I - B B^T. Throws if B^T B deviates from the identity by more
// than Tolerances::orthonormal.
Matrix proj_span(const Matrix& frame);
Matrix proj_span_perp(const Matrix& frame);

}  // namespace otsm

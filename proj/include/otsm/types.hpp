#pragma once

#include <Eigen/Dense>

namespace otsm {

using Scalar = double;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Central numeric tolerances. Every module-level check below refers to these
// defaults; solver/SDP stopping thresholds live in their own config structs.
struct Tolerances {
  // Relative symmetry bound enforced by every BlockSymMatrix constructor:
  // max |A_pq - A_qp| <= symmetry * (1 + max |A|).
  static constexpr double symmetry = 1e-12;
  // Eigendecomposition reconstruction residual, relative to 1 + ||A||_F.
  static constexpr double eig_residual = 1e-9;
  // Orthonormality of projector frames and ground-truth blocks.
  static constexpr double orthonormal = 1e-10;
  // Orthonormality of general Stiefel stacks (solver iterates).
  static constexpr double stack_orthonormal = 1e-9;
  // Trace bisection target in proj_block_cap.
  static constexpr double bisection = 1e-10;
  // Relative support-condition residual for certificate decompositions.
  static constexpr double support = 1e-7;
};

}  // namespace otsm

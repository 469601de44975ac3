#pragma once

#include <string>
#include <utility>
#include <vector>

#include "otsm/model.hpp"

namespace otsm {

// The split S = T1 + T2 at a stationary stack: T1 carries the off-diagonal
// data blocks and -V_i Lambda_i V_i^T on the diagonal, T2 is block diagonal
// with the negated diagonal of T1, so T1 + T2 = S exactly.
struct Decomposition {
  BlockSymMatrix T1;
  BlockSymMatrix T2;
  std::vector<Matrix> Lambda;  // r x r symmetric multiplier blocks
  // max_i Frobenius norm of the skew part of V_i^T (sum_j S_ij V_j); zero
  // exactly at first-order critical points.
  double symmetry_residual = 0.0;
};

struct Certificate {
  std::vector<Matrix> Lambda;
  double c = 0.0;                  // spectral shift applied to the split
  double eps_c = 0.0;              // strictness margin used to pick c
  double lambda_min_blocks = 0.0;  // min_i lambda_min(Lambda_i)
  double lambda_complement = 0.0;  // top eigenvalue of the shifted T1 on span(V)^perp
  double symmetry_residual = 0.0;
  bool valid = false;
};

struct ConditionReport {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
  std::vector<std::pair<std::string, double>> terms;
};

// The noise-smallness condition comes in two printed forms that disagree by a
// sqrt(r) inside the blockwise term; both are evaluated and reported.
enum class ConditionVariant { kAsStated, kLemma7Consistent };

struct CorollaryReport {
  ConditionReport condition;
  // Lower bound on the probability that the condition holds, evaluated
  // verbatim from the closed-form expression.
  double probability_bound = 0.0;
  // Closed-form noise threshold sigma* = m^{1/4} / (16 r^{3/4} d^{1/2}).
  double sigma_star = 0.0;
};

struct Lemma5Bounds {
  double bound1 = 0.0;          // deviation bound for the constructed T1
  std::vector<double> bound2;   // per-block multiplier deviation bounds
};

struct Lemma7Bounds {
  double global_bound = 0.0;     // on ||aligned - V||_F
  double wv_bound = 0.0;         // on max_i ||[W aligned]_i||_F
  double blockwise_bound = 0.0;  // on max_i ||aligned_i - V_i||_F; +inf if vacuous
};

// Builds the split at a stationary stack. Throws if the multiplier symmetry
// residual exceeds stat_tol (the split is undefined off stationary points).
Decomposition build_decomposition(const BlockSymMatrix& S, const StiefelStack& V,
                                  double stat_tol = 1e-8);

// Closed form of T1 in the noiseless case: block (i,j) = V_i V_j^T off the
// diagonal and -(m-1) V_i V_i^T on it. Spectrum: -m with multiplicity rm - r,
// zero with multiplicity D - rm + r.
BlockSymMatrix clean_certificate(const GroundTruth& truth);

// Top eigenvalue of T1 - c * blockdiag(I - V_i V_i^T) compressed onto an
// orthonormal basis of span(V)^perp. Nonincreasing in c.
double complement_lambda_max(const BlockSymMatrix& T1, const StiefelStack& V,
                             double c);

// Global-optimality certificate at a stationary stack: picks the largest
// admissible shift c = min_i lambda_min(Lambda_i) - eps_c and tests that the
// shifted T1 is negative definite on span(V)^perp. valid == true certifies
// that V V^T is the unique solution of the relaxation.
Certificate certify(const BlockSymMatrix& S, const StiefelStack& V,
                    double stat_tol = 1e-8);

// Deterministic noise-smallness condition on (W, V), with a full term
// breakdown. Reports holds = false when the denominator m - 4 ||W|| sqrt(r)
// is not positive.
ConditionReport deterministic_condition(const BlockSymMatrix& W,
                                        const GroundTruth& truth,
                                        ConditionVariant variant);

// Closed-form Gaussian-noise counterpart for equal block sizes d, evaluated
// exactly as printed together with its probability lower bound and the
// threshold sigma*.
CorollaryReport corollary_condition(int m, int d, int r, double sigma);

// Perturbation bounds on the constructed split, evaluated at an aligned
// stationary stack (truth^T aligned symmetric PSD).
Lemma5Bounds lemma5_bounds(const BlockSymMatrix& W, const GroundTruth& truth,
                           const StiefelStack& aligned);

// A-priori perturbation bounds depending on (W, V) only; the aligned stack is
// the object they bound.
Lemma7Bounds lemma7_bounds(const BlockSymMatrix& W, const GroundTruth& truth,
                           const StiefelStack& aligned);

}  // namespace otsm

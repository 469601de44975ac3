#include "otsm/certificate.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace otsm {

namespace {

void check_partitions(const BlockPartition& a, const BlockPartition& b,
                      const char* where) {
  if (a != b) {
    throw std::invalid_argument(std::string(where) + ": partition mismatch");
  }
}

Matrix sym(const Matrix& A) { return ((A + A.transpose()) / 2.0).eval(); }

double lambda_min(const Matrix& A) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(A, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) {
    throw std::runtime_error("lambda_min: eigensolver failed to converge");
  }
  return es.eigenvalues()(0);
}

double lambda_max(const Matrix& A) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(A, Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) {
    throw std::runtime_error("lambda_max: eigensolver failed to converge");
  }
  return es.eigenvalues()(A.rows() - 1);
}

// Orthonormal basis of span(stacked)^perp via full QR completion.
Matrix complement_basis(const Matrix& stacked) {
  Eigen::HouseholderQR<Matrix> qr(stacked);
  Matrix Q = qr.householderQ();
  return Q.rightCols(stacked.rows() - stacked.cols());
}

// max_i Frobenius norm of block i of W * X.
double max_block_fro(const BlockPartition& p, const Matrix& WX) {
  double worst = 0.0;
  for (int i = 0; i < p.num_blocks(); ++i) {
    worst = std::max(worst, WX.middleRows(p.offset(i), p.block_dim(i)).norm());
  }
  return worst;
}

double max_block_opnorm(const BlockPartition& p, const Matrix& WX) {
  double worst = 0.0;
  for (int i = 0; i < p.num_blocks(); ++i) {
    worst = std::max(
        worst, operator_norm(WX.middleRows(p.offset(i), p.block_dim(i)).eval()));
  }
  return worst;
}

}  // namespace

Decomposition build_decomposition(const BlockSymMatrix& S, const StiefelStack& V,
                                  double stat_tol) {
  check_partitions(S.partition(), V.partition(), "build_decomposition");
  const BlockPartition& p = S.partition();
  const int m = p.num_blocks();
  const int D = p.total_dim();

  std::vector<Matrix> Lambda;
  Lambda.reserve(static_cast<std::size_t>(m));
  double residual = 0.0;
  for (int i = 0; i < m; ++i) {
    Matrix G = Matrix::Zero(p.block_dim(i), p.rank());
    for (int j = 0; j < m; ++j) {
      if (j == i) continue;
      G.noalias() += S.block(i, j) * V.block(j);
    }
    const Matrix raw = V.block(i).transpose() * G;
    residual = std::max(residual, ((raw - raw.transpose()) / 2.0).norm());
    Lambda.push_back(sym(raw));
  }
  if (residual > stat_tol) {
    throw std::invalid_argument(
        "build_decomposition: stack is not stationary (multiplier symmetry "
        "residual " + std::to_string(residual) + " exceeds " +
        std::to_string(stat_tol) + ")");
  }

  Matrix T1 = S.matrix();
  Matrix T2 = Matrix::Zero(D, D);
  for (int i = 0; i < m; ++i) {
    const Matrix diag =
        sym(V.block(i) * Lambda[static_cast<std::size_t>(i)] * V.block(i).transpose());
    T1.block(p.offset(i), p.offset(i), p.block_dim(i), p.block_dim(i)) = -diag;
    T2.block(p.offset(i), p.offset(i), p.block_dim(i), p.block_dim(i)) = diag;
  }
  return Decomposition{BlockSymMatrix(p, std::move(T1)),
                       BlockSymMatrix(p, std::move(T2)), std::move(Lambda),
                       residual};
}

BlockSymMatrix clean_certificate(const GroundTruth& truth) {
  const BlockPartition& p = truth.partition();
  const int m = p.num_blocks();
  const Matrix stacked = truth.stacked();
  Matrix T = stacked * stacked.transpose();  // block (i,j) = V_i V_j^T
  for (int i = 0; i < m; ++i) {
    const Matrix diag = sym(truth.block(i) * truth.block(i).transpose());
    T.block(p.offset(i), p.offset(i), p.block_dim(i), p.block_dim(i)) =
        -static_cast<double>(m - 1) * diag;
  }
  return symmetrize(p, T);
}

double complement_lambda_max(const BlockSymMatrix& T1, const StiefelStack& V,
                             double c) {
  const BlockPartition& p = T1.partition();
  Matrix shifted = T1.matrix();
  for (int i = 0; i < p.num_blocks(); ++i) {
    const int d = p.block_dim(i);
    shifted.block(p.offset(i), p.offset(i), d, d) -=
        c * (Matrix::Identity(d, d) - V.block(i) * V.block(i).transpose());
  }
  const Matrix B = complement_basis(V.stacked());
  return lambda_max(sym(B.transpose() * shifted * B));
}

Certificate certify(const BlockSymMatrix& S, const StiefelStack& V,
                    double stat_tol) {
  Decomposition dec = build_decomposition(S, V, stat_tol);

  double lmb = std::numeric_limits<double>::infinity();
  for (const Matrix& L : dec.Lambda) lmb = std::min(lmb, lambda_min(L));

  Certificate cert;
  cert.Lambda = std::move(dec.Lambda);
  cert.symmetry_residual = dec.symmetry_residual;
  cert.lambda_min_blocks = lmb;
  cert.eps_c = 1e-6 * (1.0 + std::abs(lmb));
  cert.c = lmb - cert.eps_c;
  // Weyl monotonicity in c makes the largest admissible shift the only one
  // worth testing.
  cert.lambda_complement = complement_lambda_max(dec.T1, V, cert.c);
  cert.valid = cert.lambda_min_blocks > cert.c &&
               cert.lambda_complement < -cert.eps_c &&
               cert.symmetry_residual <= stat_tol;
  return cert;
}

ConditionReport deterministic_condition(const BlockSymMatrix& W,
                                        const GroundTruth& truth,
                                        ConditionVariant variant) {
  check_partitions(W.partition(), truth.partition(), "deterministic_condition");
  const BlockPartition& p = W.partition();
  const double m = static_cast<double>(p.num_blocks());
  const double r = static_cast<double>(p.rank());

  const double noise_opnorm = operator_norm(W);
  const double max_wv = max_block_fro(p, W.matrix() * truth.stacked());
  const double wv_bound = max_wv + 4.0 * noise_opnorm * noise_opnorm * std::sqrt(r / m);
  const double denominator = m - 4.0 * noise_opnorm * std::sqrt(r);
  const double numerator =
      variant == ConditionVariant::kLemma7Consistent ? wv_bound + std::sqrt(r)
                                                     : wv_bound;

  ConditionReport report;
  report.lhs = m - 1.0;
  report.terms = {{"noise_opnorm", noise_opnorm},
                  {"max_wv_block_fro", max_wv},
                  {"perturbed_wv_bound", wv_bound},
                  {"denominator", denominator}};
  if (denominator <= 0.0) {
    report.rhs = std::numeric_limits<double>::infinity();
    report.holds = false;
    return report;
  }
  const double term_blockwise = 2.0 * m * (2.0 * numerator) / denominator;
  const double term_wv = 2.0 * wv_bound;
  const double term_global = 4.0 * noise_opnorm * std::sqrt(r / m);
  report.terms.emplace_back("term_blockwise", term_blockwise);
  report.terms.emplace_back("term_wv", term_wv);
  report.terms.emplace_back("term_global", term_global);
  report.rhs = term_blockwise + term_wv + term_global;
  report.holds = report.lhs > report.rhs;
  return report;
}

CorollaryReport corollary_condition(int m, int d, int r, double sigma) {
  if (m < 2 || d < 1 || r < 1 || sigma < 0.0) {
    throw std::invalid_argument("corollary_condition: arguments out of range");
  }
  const double md = static_cast<double>(m);
  const double rd = static_cast<double>(r);
  const double D = static_cast<double>(m) * static_cast<double>(d);
  const double delta = 2.0 * std::log(md);

  const double noise_term = sigma * std::sqrt(md) * (rd * rd + delta);
  const double spectral_term = 48.0 * D * sigma * sigma * std::sqrt(rd / md);
  const double combined = noise_term + spectral_term;
  const double denominator = md - 16.0 * sigma * std::sqrt(D * rd);

  CorollaryReport out;
  out.condition.lhs = md - 1.0;
  out.condition.terms = {{"noise_term", noise_term},
                         {"spectral_term", spectral_term},
                         {"denominator", denominator}};
  if (denominator <= 0.0) {
    out.condition.rhs = std::numeric_limits<double>::infinity();
    out.condition.holds = false;
  } else {
    const double term_blockwise = 2.0 * md * (2.0 * combined) / denominator;
    const double term_wv = 2.0 * combined;
    const double term_global = 16.0 * sigma * std::sqrt(D * rd / md);
    out.condition.terms.emplace_back("term_blockwise", term_blockwise);
    out.condition.terms.emplace_back("term_wv", term_wv);
    out.condition.terms.emplace_back("term_global", term_global);
    out.condition.rhs = term_blockwise + term_wv + term_global;
    out.condition.holds = out.condition.lhs > out.condition.rhs;
  }

  out.probability_bound = 1.0 -
                          std::pow(rd * rd / (rd * rd + delta), -rd * rd / 2.0) -
                          2.0 * std::exp(-D / 8.0);
  out.sigma_star = std::pow(md, 0.25) /
                   (16.0 * std::pow(rd, 0.75) * std::sqrt(static_cast<double>(d)));
  return out;
}

Lemma5Bounds lemma5_bounds(const BlockSymMatrix& W, const GroundTruth& truth,
                           const StiefelStack& aligned) {
  check_partitions(W.partition(), truth.partition(), "lemma5_bounds");
  check_partitions(W.partition(), aligned.partition(), "lemma5_bounds");
  const BlockPartition& p = W.partition();
  const int m = p.num_blocks();
  const int r = p.rank();

  const Matrix WVt = W.matrix() * aligned.stacked();
  const Matrix gram =
      truth.stacked().transpose() * aligned.stacked() -
      static_cast<double>(m) * Matrix::Identity(r, r);
  const double gram_opnorm = operator_norm(gram);
  const double max_wvt = max_block_opnorm(p, WVt);

  double max_dv = 0.0;
  for (int i = 0; i < m; ++i) {
    max_dv = std::max(max_dv, operator_norm((aligned.block(i) - truth.block(i)).eval()));
  }

  Lemma5Bounds out;
  out.bound1 = static_cast<double>(m) * max_dv + max_wvt + gram_opnorm;
  out.bound2.reserve(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    const double wvt_i =
        operator_norm(WVt.middleRows(p.offset(i), p.block_dim(i)).eval());
    const double gram_i = operator_norm(
        (aligned.block(i).transpose() * truth.block(i) - Matrix::Identity(r, r))
            .eval());
    out.bound2.push_back(wvt_i + static_cast<double>(m) * gram_i + gram_opnorm);
  }
  return out;
}

Lemma7Bounds lemma7_bounds(const BlockSymMatrix& W, const GroundTruth& truth,
                           const StiefelStack& aligned) {
  check_partitions(W.partition(), truth.partition(), "lemma7_bounds");
  check_partitions(W.partition(), aligned.partition(), "lemma7_bounds");
  const BlockPartition& p = W.partition();
  const double m = static_cast<double>(p.num_blocks());
  const double r = static_cast<double>(p.rank());

  const double noise_opnorm = operator_norm(W);
  const double max_wv = max_block_fro(p, W.matrix() * truth.stacked());

  Lemma7Bounds out;
  out.global_bound = 4.0 * noise_opnorm * std::sqrt(r / m);
  out.wv_bound = max_wv + 4.0 * noise_opnorm * noise_opnorm * std::sqrt(r / m);
  const double denominator = m - 4.0 * noise_opnorm * std::sqrt(r);
  out.blockwise_bound =
      denominator > 0.0
          ? 2.0 * (out.wv_bound + std::sqrt(r)) / denominator
          : std::numeric_limits<double>::infinity();
  return out;
}

}  // namespace otsm

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "otsm/certificate.hpp"
#include "otsm/sdp.hpp"
#include "test_support.hpp"

using namespace otsm;
using namespace otsm::testing;

TEST_CASE("clean instance recovers the rank-r factor") {
  const BlockPartition p = BlockPartition::uniform(6, 2, 2);
  const GroundTruth V = random_stiefel(p, 1);
  const ProblemInstance inst = assemble(V, BlockSymMatrix::zero(p));
  const SdpSolution sol = solve_sdp(inst);
  CHECK(sol.converged);
  const Matrix VV = V.stacked() * V.stacked().transpose();
  CHECK((sol.U.matrix() - VV).norm() <= 1e-4);
  CHECK(sol.numerical_rank == 2);
}

TEST_CASE("two-block hand solution") {
  const BlockPartition p({1, 1}, 1);
  Matrix S(2, 2);
  S << 0, 1, 1, 0;
  const ProblemInstance inst(BlockSymMatrix(p, S), std::nullopt, std::nullopt,
                             std::nullopt, 0);
  const SdpSolution sol = solve_sdp(inst);
  CHECK(sol.converged);
  Matrix expected(2, 2);
  expected << 1, 1, 1, 1;
  CHECK((sol.U.matrix() - expected).cwiseAbs().maxCoeff() < 1e-5);
  CHECK(sol.objective == doctest::Approx(2.0).epsilon(1e-5));
}

TEST_CASE("exit feasibility") {
  const BlockPartition p = BlockPartition::uniform(5, 3, 2);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const ProblemInstance inst = make_instance(p, 0.3, 100 + seed);
    const SdpSolution sol = solve_sdp(inst);
    REQUIRE(sol.converged);
    CHECK(spectral_decomp(sol.U).eigenvalues.minCoeff() >= -1e-6);
    for (int i = 0; i < p.num_blocks(); ++i) {
      const Matrix block = sol.U.block(i, i);
      CHECK(spectral_decomp(block.eval()).eigenvalues.maxCoeff() <= 1.0 + 1e-6);
      CHECK(std::abs(block.trace() - 2.0) <= 1e-6);
    }
  }
}

TEST_CASE("relaxation objective dominates the factored one") {
  const BlockPartition p = BlockPartition::uniform(6, 2, 2);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const ProblemInstance inst = make_instance(p, 0.4, 200 + seed);
    const SolverResult res = solve(inst);
    const SdpSolution sol = solve_sdp(inst, SdpConfig{}, &res.O);
    CHECK(sol.objective >=
          objective(inst.S(), res.O) - 1e-4 * (1.0 + std::abs(sol.objective)));
  }
}

TEST_CASE("certified instances are tight") {
  const BlockPartition p = BlockPartition::uniform(6, 2, 2);
  const ProblemInstance inst = make_instance(p, 0.1, 300);
  const SolverResult res = solve(inst);
  REQUIRE(res.converged);
  const StiefelStack aligned = align(*inst.truth(), res.O);
  REQUIRE(certify(inst.S(), aligned).valid);

  const SdpSolution warm = solve_sdp(inst, SdpConfig{}, &res.O);
  CHECK(tightness_gap(warm.U, res.O) <= 1e-3);
  CHECK(warm.numerical_rank == 2);

  const SdpSolution cold = solve_sdp(inst);
  CHECK((warm.U.matrix() - cold.U.matrix()).norm() <= 1e-4);
}

TEST_CASE("numerical rank") {
  const BlockPartition p = BlockPartition::uniform(4, 3, 2);
  const GroundTruth V = random_stiefel(p, 5);
  const Matrix VV = V.stacked() * V.stacked().transpose();
  CHECK(numerical_rank(symmetrize(p, VV)) == 2);
  CHECK(numerical_rank(BlockSymMatrix::zero(p)) == 0);
}

TEST_CASE("tightness gap") {
  const BlockPartition p = BlockPartition::uniform(4, 3, 2);
  const GroundTruth V = random_stiefel(p, 6);
  const Matrix VV = V.stacked() * V.stacked().transpose();
  CHECK(tightness_gap(symmetrize(p, VV), V.stack()) == doctest::Approx(0.0));

  // Feasible rank-(r+1) point: gap to any rank-r factor is at least the
  // smallest extra eigenvalue.
  std::vector<Matrix> extended;
  for (int i = 0; i < 4; ++i) {
    const Matrix G = random_matrix(3, 3, 60 + static_cast<std::uint64_t>(i));
    Eigen::HouseholderQR<Matrix> qr(
        (Matrix(3, 3) << V.block(i), G.col(0)).finished());
    Matrix Q = qr.householderQ();
    Matrix C(3, 3);
    C << V.block(i), Q.col(2);
    extended.push_back(C);
  }
  Matrix stacked(12, 3);
  for (int i = 0; i < 4; ++i) stacked.middleRows(3 * i, 3) = extended[static_cast<std::size_t>(i)];
  Vector weights(3);
  weights << 0.75, 0.75, 0.5;  // per-block trace 2, caps below 1
  const Matrix U = stacked * weights.asDiagonal() * stacked.transpose();
  const BlockSymMatrix wrapped = symmetrize(p, U);
  CHECK(numerical_rank(wrapped) == 3);
  CHECK(tightness_gap(wrapped, V.stack()) >= 0.5 - 1e-9);
}

TEST_CASE("iteration cap reports non-convergence") {
  const BlockPartition p = BlockPartition::uniform(5, 2, 2);
  const ProblemInstance inst = make_instance(p, 0.3, 400);
  SdpConfig config;
  config.max_iters = 3;
  const SdpSolution sol = solve_sdp(inst, config);
  CHECK_FALSE(sol.converged);
  CHECK(sol.iterations == 3);
  CHECK(sol.primal_residual > 0.0);
}

TEST_CASE("adaptive rho still converges") {
  const BlockPartition p = BlockPartition::uniform(5, 2, 2);
  const ProblemInstance inst = make_instance(p, 0.2, 500);
  SdpConfig config;
  config.adaptive_rho = true;
  const SdpSolution sol = solve_sdp(inst, config);
  CHECK(sol.converged);
  const SdpSolution plain = solve_sdp(inst);
  CHECK((sol.U.matrix() - plain.U.matrix()).norm() <= 1e-4 * (1.0 + plain.U.matrix().norm()));
}

TEST_CASE("config validation") {
  const BlockPartition p = BlockPartition::uniform(4, 2, 2);
  const ProblemInstance inst = make_instance(p, 0.1, 600);
  SdpConfig bad;
  bad.rho = 0.0;
  CHECK_THROWS_AS(solve_sdp(inst, bad), std::invalid_argument);
  bad = SdpConfig{};
  bad.max_iters = 0;
  CHECK_THROWS_AS(solve_sdp(inst, bad), std::invalid_argument);
}

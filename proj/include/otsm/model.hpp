#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "otsm/blockmat.hpp"

namespace otsm {

// Stacked frames O_i in R^{d_i x r}, each with orthonormal columns. The
// constructor rejects blocks whose Gram deviation from the identity exceeds
// Tolerances::stack_orthonormal in Frobenius norm.
class StiefelStack {
 public:
  StiefelStack(BlockPartition partition, std::vector<Matrix> blocks);

  // Splits a D x r matrix into partition blocks.
  static StiefelStack from_stacked(const BlockPartition& partition,
                                   const Matrix& stacked);

  const BlockPartition& partition() const { return partition_; }
  int num_blocks() const { return partition_.num_blocks(); }
  const Matrix& block(int i) const { return blocks_[static_cast<std::size_t>(i)]; }
  const std::vector<Matrix>& blocks() const { return blocks_; }

  // The D x r vertical concatenation of the blocks.
  Matrix stacked() const;

 private:
  BlockPartition partition_;
  std::vector<Matrix> blocks_;
};

// Ground-truth frames V_i with the tighter orthonormality tolerance.
class GroundTruth {
 public:
  explicit GroundTruth(StiefelStack V);

  const BlockPartition& partition() const { return V_.partition(); }
  const StiefelStack& stack() const { return V_; }
  const Matrix& block(int i) const { return V_.block(i); }
  Matrix stacked() const { return V_.stacked(); }

 private:
  StiefelStack V_;
};

// A problem instance: the symmetric data matrix S with exactly zero diagonal
// blocks, plus optional generating data (ground truth, noise, sigma) and the
// seed it was drawn from. Immutable after construction.
class ProblemInstance {
 public:
  ProblemInstance(BlockSymMatrix S, std::optional<GroundTruth> truth,
                  std::optional<BlockSymMatrix> noise, std::optional<double> sigma,
                  std::uint64_t seed);

  const BlockPartition& partition() const { return S_.partition(); }
  const BlockSymMatrix& S() const { return S_; }
  const std::optional<GroundTruth>& truth() const { return truth_; }
  const std::optional<BlockSymMatrix>& noise() const { return noise_; }
  std::optional<double> sigma() const { return sigma_; }
  std::uint64_t seed() const { return seed_; }

 private:
  BlockSymMatrix S_;
  std::optional<GroundTruth> truth_;
  std::optional<BlockSymMatrix> noise_;
  std::optional<double> sigma_;
  std::uint64_t seed_ = 0;
};

// Each V_i is the orthonormal factor of a d_i x r standard Gaussian draw
// (Householder QR with the diagonal of R sign-fixed to be nonnegative).
// Deterministic in the seed; block i uses its own substream.
GroundTruth random_stiefel(const BlockPartition& partition, std::uint64_t seed);

// V_i = [I_r; 0], exactly.
GroundTruth canonical_stiefel(const BlockPartition& partition);

// Symmetric noise with W_ij i.i.d. N(0, sigma^2) for i > j, W_ji = W_ij^T and
// exactly zero diagonal blocks. The (i, j) block has its own substream, so the
// result does not depend on sampling order.
BlockSymMatrix sample_noise(const BlockPartition& partition, double sigma,
                            std::uint64_t seed);

// S_ij = V_i V_j^T + W_ij for i != j, S_ii = 0. W must be symmetric with zero
// diagonal blocks and share the partition.
ProblemInstance assemble(const GroundTruth& truth, const BlockSymMatrix& W,
                         std::optional<double> sigma = std::nullopt,
                         std::uint64_t seed = 0);

// random_stiefel + sample_noise + assemble under a single seed.
ProblemInstance make_instance(const BlockPartition& partition, double sigma,
                              std::uint64_t seed);

// Binary container (.otsm): header (magic, version, flags, m, r, dims, sigma,
// seed, generator tag, payload length), block-major little-endian float64
// payload, trailing 64-bit checksum. Minor version bumps may append payload
// sections; loaders skip what they do not know.
void save_instance(const std::string& path, const ProblemInstance& instance);
ProblemInstance load_instance(const std::string& path);

// Whitespace-separated debug export with a one-line JSON-style header.
void save_instance_text(const std::string& path, const ProblemInstance& instance);

}  // namespace otsm

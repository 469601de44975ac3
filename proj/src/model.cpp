#include "otsm/model.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <utility>

#include "otsm/rng.hpp"

namespace otsm {

namespace {
// Substream purpose tags; keep stable, instance files depend on them.
constexpr std::uint64_t kStiefelTag = 0x5354494546454cull;  // "STIEFEL"
constexpr std::uint64_t kNoiseTag = 0x4e4f495345ull;        // "NOISE"
}  // namespace

StiefelStack::StiefelStack(BlockPartition partition, std::vector<Matrix> blocks)
    : partition_(std::move(partition)), blocks_(std::move(blocks)) {
  if (static_cast<int>(blocks_.size()) != partition_.num_blocks()) {
    throw std::invalid_argument("StiefelStack: block count does not match partition");
  }
  const int r = partition_.rank();
  for (int i = 0; i < partition_.num_blocks(); ++i) {
    const Matrix& B = blocks_[static_cast<std::size_t>(i)];
    if (B.rows() != partition_.block_dim(i) || B.cols() != r) {
      throw std::invalid_argument("StiefelStack: block " + std::to_string(i) +
                                  " has wrong shape");
    }
    const double dev = (B.transpose() * B - Matrix::Identity(r, r)).norm();
    if (dev > Tolerances::stack_orthonormal) {
      throw std::invalid_argument("StiefelStack: block " + std::to_string(i) +
                                  " is not orthonormal (deviation " +
                                  std::to_string(dev) + ")");
    }
  }
}

StiefelStack StiefelStack::from_stacked(const BlockPartition& partition,
                                        const Matrix& stacked) {
  if (stacked.rows() != partition.total_dim() || stacked.cols() != partition.rank()) {
    throw std::invalid_argument("StiefelStack: stacked matrix has wrong shape");
  }
  std::vector<Matrix> blocks;
  blocks.reserve(static_cast<std::size_t>(partition.num_blocks()));
  for (int i = 0; i < partition.num_blocks(); ++i) {
    blocks.push_back(
        stacked.middleRows(partition.offset(i), partition.block_dim(i)));
  }
  return StiefelStack(partition, std::move(blocks));
}

Matrix StiefelStack::stacked() const {
  Matrix out(partition_.total_dim(), partition_.rank());
  for (int i = 0; i < partition_.num_blocks(); ++i) {
    out.middleRows(partition_.offset(i), partition_.block_dim(i)) =
        blocks_[static_cast<std::size_t>(i)];
  }
  return out;
}

GroundTruth::GroundTruth(StiefelStack V) : V_(std::move(V)) {
  const int r = V_.partition().rank();
  for (int i = 0; i < V_.num_blocks(); ++i) {
    const Matrix& B = V_.block(i);
    const double dev = (B.transpose() * B - Matrix::Identity(r, r)).norm();
    if (dev > Tolerances::orthonormal) {
      throw std::invalid_argument("GroundTruth: block " + std::to_string(i) +
                                  " is not orthonormal to ground-truth tolerance");
    }
  }
}

ProblemInstance::ProblemInstance(BlockSymMatrix S, std::optional<GroundTruth> truth,
                                 std::optional<BlockSymMatrix> noise,
                                 std::optional<double> sigma, std::uint64_t seed)
    : S_(std::move(S)),
      truth_(std::move(truth)),
      noise_(std::move(noise)),
      sigma_(sigma),
      seed_(seed) {
  const BlockPartition& p = S_.partition();
  for (int i = 0; i < p.num_blocks(); ++i) {
    if (S_.block(i, i).cwiseAbs().maxCoeff() != 0.0) {
      throw std::invalid_argument("ProblemInstance: diagonal block " +
                                  std::to_string(i) + " of S is not exactly zero");
    }
  }
  if (truth_ && truth_->partition() != p) {
    throw std::invalid_argument("ProblemInstance: truth partition mismatch");
  }
  if (noise_ && noise_->partition() != p) {
    throw std::invalid_argument("ProblemInstance: noise partition mismatch");
  }
  if (truth_ && noise_) {
    const double scale = 1.0 + S_.matrix().cwiseAbs().maxCoeff();
    for (int i = 0; i < p.num_blocks(); ++i) {
      for (int j = 0; j < p.num_blocks(); ++j) {
        if (i == j) continue;
        const Matrix expected =
            truth_->block(i) * truth_->block(j).transpose() + noise_->block(i, j);
        const double dev = (S_.block(i, j) - expected).cwiseAbs().maxCoeff();
        if (dev > 1e-12 * scale) {
          throw std::invalid_argument(
              "ProblemInstance: S does not match V_i V_j^T + W_ij at block (" +
              std::to_string(i) + ", " + std::to_string(j) + ")");
        }
      }
    }
  }
}

GroundTruth random_stiefel(const BlockPartition& partition, std::uint64_t seed) {
  const int r = partition.rank();
  std::vector<Matrix> blocks;
  blocks.reserve(static_cast<std::size_t>(partition.num_blocks()));
  for (int i = 0; i < partition.num_blocks(); ++i) {
    const int d = partition.block_dim(i);
    SplitMix64 gen(stream_seed(seed, {kStiefelTag, static_cast<std::uint64_t>(i)}));
    Matrix G(d, r);
    for (int row = 0; row < d; ++row) {
      for (int col = 0; col < r; ++col) {
        G(row, col) = gen.next_gaussian();
      }
    }
    Eigen::HouseholderQR<Matrix> qr(G);
    Matrix Q = qr.householderQ() * Matrix::Identity(d, r);
    const Matrix R = qr.matrixQR().topRows(r).triangularView<Eigen::Upper>();
    for (int k = 0; k < r; ++k) {
      if (R(k, k) < 0.0) Q.col(k) = -Q.col(k);
    }
    blocks.push_back(std::move(Q));
  }
  return GroundTruth(StiefelStack(partition, std::move(blocks)));
}

GroundTruth canonical_stiefel(const BlockPartition& partition) {
  const int r = partition.rank();
  std::vector<Matrix> blocks;
  blocks.reserve(static_cast<std::size_t>(partition.num_blocks()));
  for (int i = 0; i < partition.num_blocks(); ++i) {
    Matrix B = Matrix::Zero(partition.block_dim(i), r);
    B.topRows(r) = Matrix::Identity(r, r);
    blocks.push_back(std::move(B));
  }
  return GroundTruth(StiefelStack(partition, std::move(blocks)));
}

BlockSymMatrix sample_noise(const BlockPartition& partition, double sigma,
                            std::uint64_t seed) {
  if (sigma < 0.0) throw std::invalid_argument("sample_noise: sigma must be >= 0");
  const int D = partition.total_dim();
  Matrix W = Matrix::Zero(D, D);
  if (sigma > 0.0) {
    for (int i = 1; i < partition.num_blocks(); ++i) {
      for (int j = 0; j < i; ++j) {
        SplitMix64 gen(stream_seed(seed, {kNoiseTag, static_cast<std::uint64_t>(i),
                                          static_cast<std::uint64_t>(j)}));
        const int di = partition.block_dim(i);
        const int dj = partition.block_dim(j);
        Matrix B(di, dj);
        for (int row = 0; row < di; ++row) {
          for (int col = 0; col < dj; ++col) {
            B(row, col) = sigma * gen.next_gaussian();
          }
        }
        W.block(partition.offset(i), partition.offset(j), di, dj) = B;
        W.block(partition.offset(j), partition.offset(i), dj, di) = B.transpose();
      }
    }
  }
  return BlockSymMatrix(partition, std::move(W));
}

ProblemInstance assemble(const GroundTruth& truth, const BlockSymMatrix& W,
                         std::optional<double> sigma, std::uint64_t seed) {
  const BlockPartition& p = truth.partition();
  if (W.partition() != p) {
    throw std::invalid_argument("assemble: partition mismatch between truth and noise");
  }
  for (int i = 0; i < p.num_blocks(); ++i) {
    if (W.block(i, i).cwiseAbs().maxCoeff() != 0.0) {
      throw std::invalid_argument("assemble: noise diagonal block " +
                                  std::to_string(i) + " is nonzero");
    }
  }
  const int D = p.total_dim();
  Matrix S = Matrix::Zero(D, D);
  for (int i = 0; i < p.num_blocks(); ++i) {
    for (int j = i + 1; j < p.num_blocks(); ++j) {
      const Matrix B = truth.block(i) * truth.block(j).transpose() + W.block(i, j);
      S.block(p.offset(i), p.offset(j), p.block_dim(i), p.block_dim(j)) = B;
      S.block(p.offset(j), p.offset(i), p.block_dim(j), p.block_dim(i)) =
          B.transpose();
    }
  }
  return ProblemInstance(BlockSymMatrix(p, std::move(S)), truth, W, sigma, seed);
}

ProblemInstance make_instance(const BlockPartition& partition, double sigma,
                              std::uint64_t seed) {
  return assemble(random_stiefel(partition, seed),
                  sample_noise(partition, sigma, seed), sigma, seed);
}

// ---------------------------------------------------------------------------
// Instance file format
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'O', 'T', 'S', 'M'};
constexpr std::uint16_t kVersionMajor = 1;
constexpr std::uint16_t kVersionMinor = 0;
constexpr std::uint32_t kFlagTruth = 1u << 0;
constexpr std::uint32_t kFlagNoise = 1u << 1;
constexpr std::uint32_t kFlagSigma = 1u << 2;
constexpr std::size_t kRngTagLen = 24;
constexpr char kRngTag[] = "splitmix64-invcdf";

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
  for (int k = 0; k < 8; ++k) out.push_back(static_cast<char>((v >> (8 * k)) & 0xff));
}

void put_f64(std::string& out, double v) {
  put_u64(out, std::bit_cast<std::uint64_t>(v));
}

class Reader {
 public:
  Reader(const std::string& data, std::size_t pos) : data_(data), pos_(pos) {}

  std::uint16_t u16() { return static_cast<std::uint16_t>(u(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(u(4)); }
  std::uint64_t u64() { return u(8); }
  double f64() { return std::bit_cast<double>(u(8)); }

  void raw(char* dst, std::size_t n) {
    need(n);
    std::memcpy(dst, data_.data() + pos_, n);
    pos_ += n;
  }

  void skip(std::size_t n) {
    need(n);
    pos_ += n;
  }

  std::size_t pos() const { return pos_; }

 private:
  std::uint64_t u(std::size_t bytes) {
    need(bytes);
    std::uint64_t v = 0;
    for (std::size_t k = 0; k < bytes; ++k) {
      v |= static_cast<std::uint64_t>(
               static_cast<unsigned char>(data_[pos_ + k]))
           << (8 * k);
    }
    pos_ += bytes;
    return v;
  }

  void need(std::size_t n) const {
    if (pos_ + n > data_.size()) {
      throw std::runtime_error("instance file is truncated");
    }
  }

  const std::string& data_;
  std::size_t pos_;
};

std::uint64_t fnv1a(const std::string& data) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (char c : data) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

void append_block_rowmajor(std::string& out, const Eigen::Ref<const Matrix>& B) {
  for (Index row = 0; row < B.rows(); ++row) {
    for (Index col = 0; col < B.cols(); ++col) {
      put_f64(out, B(row, col));
    }
  }
}

void read_block_rowmajor(Reader& in, Eigen::Ref<Matrix> B) {
  for (Index row = 0; row < B.rows(); ++row) {
    for (Index col = 0; col < B.cols(); ++col) {
      B(row, col) = in.f64();
    }
  }
}

}  // namespace

void save_instance(const std::string& path, const ProblemInstance& instance) {
  const BlockPartition& p = instance.partition();
  const int m = p.num_blocks();

  std::string payload;
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      append_block_rowmajor(payload, instance.S().block(i, j));
    }
  }
  if (instance.truth()) {
    for (int i = 0; i < m; ++i) {
      append_block_rowmajor(payload, instance.truth()->block(i));
    }
  }
  if (instance.noise()) {
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < m; ++j) {
        append_block_rowmajor(payload, instance.noise()->block(i, j));
      }
    }
  }

  std::uint32_t flags = 0;
  if (instance.truth()) flags |= kFlagTruth;
  if (instance.noise()) flags |= kFlagNoise;
  if (instance.sigma()) flags |= kFlagSigma;

  std::string out;
  out.append(kMagic, 4);
  put_u16(out, kVersionMajor);
  put_u16(out, kVersionMinor);
  put_u32(out, flags);
  put_u32(out, static_cast<std::uint32_t>(m));
  put_u32(out, static_cast<std::uint32_t>(p.rank()));
  for (int d : p.dims()) put_u32(out, static_cast<std::uint32_t>(d));
  put_f64(out, instance.sigma().value_or(0.0));
  put_u64(out, instance.seed());
  char tag[kRngTagLen] = {};
  std::memcpy(tag, kRngTag, sizeof(kRngTag));
  out.append(tag, kRngTagLen);
  put_u64(out, payload.size());
  out += payload;
  put_u64(out, fnv1a(payload));

  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw std::runtime_error("cannot open '" + path + "' for writing");
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) throw std::runtime_error("failed to write '" + path + "'");
}

ProblemInstance load_instance(const std::string& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw std::runtime_error("cannot open '" + path + "' for reading");
  std::string data((std::istreambuf_iterator<char>(file)),
                   std::istreambuf_iterator<char>());

  if (data.size() < 4 || std::memcmp(data.data(), kMagic, 4) != 0) {
    throw std::runtime_error("'" + path + "' is not an otsm instance file");
  }
  Reader in(data, 4);
  const std::uint16_t major = in.u16();
  in.u16();  // minor: newer minors only append payload sections, safe to load
  if (major != kVersionMajor) {
    throw std::runtime_error("unsupported instance format version " +
                             std::to_string(major));
  }
  const std::uint32_t flags = in.u32();
  const std::uint32_t m = in.u32();
  const std::uint32_t r = in.u32();
  if (m < 2 || m > 100000 || r < 1) {
    throw std::runtime_error("instance header is malformed");
  }
  std::vector<int> dims(m);
  for (std::uint32_t i = 0; i < m; ++i) dims[i] = static_cast<int>(in.u32());
  const double sigma = in.f64();
  const std::uint64_t seed = in.u64();
  char tag[kRngTagLen];
  in.raw(tag, kRngTagLen);
  const std::uint64_t payload_bytes = in.u64();

  const std::size_t payload_start = in.pos();
  if (payload_start + payload_bytes + 8 > data.size()) {
    throw std::runtime_error("instance file is truncated");
  }
  const std::string payload = data.substr(payload_start, payload_bytes);
  Reader body(payload, 0);

  BlockPartition partition(dims, static_cast<int>(r));
  const int D = partition.total_dim();

  Matrix S(D, D);
  for (int i = 0; i < partition.num_blocks(); ++i) {
    for (int j = 0; j < partition.num_blocks(); ++j) {
      Matrix B(partition.block_dim(i), partition.block_dim(j));
      read_block_rowmajor(body, B);
      S.block(partition.offset(i), partition.offset(j), B.rows(), B.cols()) = B;
    }
  }
  std::optional<GroundTruth> truth;
  if (flags & kFlagTruth) {
    std::vector<Matrix> blocks;
    for (int i = 0; i < partition.num_blocks(); ++i) {
      Matrix B(partition.block_dim(i), partition.rank());
      read_block_rowmajor(body, B);
      blocks.push_back(std::move(B));
    }
    truth.emplace(StiefelStack(partition, std::move(blocks)));
  }
  std::optional<BlockSymMatrix> noise;
  if (flags & kFlagNoise) {
    Matrix W(D, D);
    for (int i = 0; i < partition.num_blocks(); ++i) {
      for (int j = 0; j < partition.num_blocks(); ++j) {
        Matrix B(partition.block_dim(i), partition.block_dim(j));
        read_block_rowmajor(body, B);
        W.block(partition.offset(i), partition.offset(j), B.rows(), B.cols()) = B;
      }
    }
    noise.emplace(partition, std::move(W));
  }
  // Anything after the known sections belongs to a newer minor version.

  Reader tail(data, payload_start + payload_bytes);
  const std::uint64_t stored = tail.u64();
  if (stored != fnv1a(payload)) {
    throw std::runtime_error("instance file checksum mismatch");
  }

  std::optional<double> sigma_opt;
  if (flags & kFlagSigma) sigma_opt = sigma;
  return ProblemInstance(BlockSymMatrix(partition, std::move(S)), std::move(truth),
                         std::move(noise), sigma_opt, seed);
}

void save_instance_text(const std::string& path, const ProblemInstance& instance) {
  const BlockPartition& p = instance.partition();
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");

  std::fprintf(f, "{\"format\":\"otsm-text\",\"version\":[%u,%u],\"m\":%d,\"dims\":[",
               kVersionMajor, kVersionMinor, p.num_blocks());
  for (int i = 0; i < p.num_blocks(); ++i) {
    std::fprintf(f, "%s%d", i ? "," : "", p.block_dim(i));
  }
  std::fprintf(f, "],\"r\":%d,", p.rank());
  if (instance.sigma()) {
    std::fprintf(f, "\"sigma\":%.17g,", *instance.sigma());
  } else {
    std::fprintf(f, "\"sigma\":null,");
  }
  std::fprintf(f, "\"seed\":%llu,\"has_truth\":%s,\"has_noise\":%s,\"rng\":\"%s\"}\n",
               static_cast<unsigned long long>(instance.seed()),
               instance.truth() ? "true" : "false",
               instance.noise() ? "true" : "false", kRngTag);

  auto write_matrix = [&](const Matrix& M) {
    for (Index row = 0; row < M.rows(); ++row) {
      for (Index col = 0; col < M.cols(); ++col) {
        std::fprintf(f, "%s%.17g", col ? " " : "", M(row, col));
      }
      std::fprintf(f, "\n");
    }
  };
  write_matrix(instance.S().matrix());
  if (instance.truth()) write_matrix(instance.truth()->stacked());
  if (instance.noise()) write_matrix(instance.noise()->matrix());

  if (std::fclose(f) != 0) throw std::runtime_error("failed to write '" + path + "'");
}

}  // namespace otsm

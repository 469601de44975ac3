#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "otsm/model.hpp"
#include "otsm/rng.hpp"
#include "test_support.hpp"

using namespace otsm;
using namespace otsm::testing;

namespace {
std::string temp_path(const char* name) {
  return std::string("/tmp/otsm_test_") + name;
}
}  // namespace

TEST_CASE("random stiefel blocks are orthonormal and deterministic") {
  const BlockPartition square({3, 3, 3}, 3);
  const GroundTruth V = random_stiefel(square, 42);
  for (int i = 0; i < 3; ++i) {
    const Matrix gram = V.block(i).transpose() * V.block(i);
    CHECK((gram - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-10);
  }

  const GroundTruth again = random_stiefel(square, 42);
  for (int i = 0; i < 3; ++i) {
    CHECK((V.block(i) - again.block(i)).cwiseAbs().maxCoeff() == 0.0);
  }
  const GroundTruth other = random_stiefel(square, 43);
  CHECK((V.block(0) - other.block(0)).cwiseAbs().maxCoeff() > 0.0);

  const BlockPartition thin({3, 3}, 1);
  const GroundTruth u = random_stiefel(thin, 7);
  CHECK(std::abs(u.block(0).norm() - 1.0) < 1e-12);
}

TEST_CASE("canonical stiefel is exact") {
  const BlockPartition p({3, 3}, 2);
  const GroundTruth V = canonical_stiefel(p);
  Matrix expected(3, 2);
  expected << 1, 0, 0, 1, 0, 0;
  CHECK((V.block(0) - expected).cwiseAbs().maxCoeff() == 0.0);
  CHECK((V.block(0).transpose() * V.block(0) - Matrix::Identity(2, 2))
            .cwiseAbs()
            .maxCoeff() == 0.0);

  const BlockPartition square({2, 2}, 2);
  CHECK((canonical_stiefel(square).block(1) - Matrix::Identity(2, 2))
            .cwiseAbs()
            .maxCoeff() == 0.0);
}

TEST_CASE("noise sampling") {
  const BlockPartition p({2, 2, 2}, 2);
  CHECK(sample_noise(p, 0.0, 5).matrix().cwiseAbs().maxCoeff() == 0.0);

  const BlockSymMatrix W = sample_noise(p, 0.7, 5);
  for (int i = 0; i < 3; ++i) {
    CHECK(W.block(i, i).cwiseAbs().maxCoeff() == 0.0);
    for (int j = 0; j < i; ++j) {
      CHECK((Matrix(W.block(j, i)) - Matrix(W.block(i, j)).transpose())
                .cwiseAbs()
                .maxCoeff() == 0.0);
    }
  }
  CHECK_THROWS_AS(sample_noise(p, -1.0, 5), std::invalid_argument);
}

TEST_CASE("noise entry variance is near sigma^2") {
  const BlockPartition p(std::vector<int>(40, 2), 2);
  const BlockSymMatrix W = sample_noise(p, 1.0, 99);
  double sum = 0.0, sum_sq = 0.0;
  int count = 0;
  for (int i = 1; i < 40; ++i) {
    for (int j = 0; j < i; ++j) {
      const Matrix B = W.block(i, j);
      sum += B.sum();
      sum_sq += B.squaredNorm();
      count += static_cast<int>(B.size());
    }
  }
  const double mean = sum / count;
  const double variance = sum_sq / count - mean * mean;
  CHECK(variance > 0.9);
  CHECK(variance < 1.1);
}

TEST_CASE("noise operator norm scales like sigma sqrt(D)") {
  const BlockPartition p(std::vector<int>(40, 2), 2);  // D = 80
  const double sigma = 0.6;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const double ratio =
        operator_norm(sample_noise(p, sigma, seed)) / (sigma * std::sqrt(80.0));
    CHECK(ratio > 1.5);
    CHECK(ratio < 2.5);
  }
}

TEST_CASE("assemble reproduces the additive model") {
  const BlockPartition tiny({1, 1}, 1);
  const GroundTruth ones = canonical_stiefel(tiny);
  const ProblemInstance inst = assemble(ones, BlockSymMatrix::zero(tiny));
  Matrix expected(2, 2);
  expected << 0, 1, 1, 0;
  CHECK((inst.S().matrix() - expected).cwiseAbs().maxCoeff() == 0.0);

  const BlockPartition p({3, 2, 4}, 2);
  const GroundTruth V = random_stiefel(p, 3);
  const ProblemInstance clean = assemble(V, BlockSymMatrix::zero(p));
  const Matrix full = V.stacked() * V.stacked().transpose();
  Matrix blockdiag = Matrix::Zero(9, 9);
  for (int i = 0; i < 3; ++i) {
    blockdiag.block(p.offset(i), p.offset(i), p.block_dim(i), p.block_dim(i)) =
        V.block(i) * V.block(i).transpose();
  }
  CHECK((clean.S().matrix() - (full - blockdiag)).cwiseAbs().maxCoeff() < 1e-14);

  const BlockSymMatrix W = sample_noise(p, 0.4, 17);
  const ProblemInstance noisy = assemble(V, W, 0.4, 17);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      if (i == j) continue;
      const Matrix diff = Matrix(noisy.S().block(i, j)) -
                          V.block(i) * V.block(j).transpose() -
                          Matrix(W.block(i, j));
      CHECK(diff.cwiseAbs().maxCoeff() == 0.0);
    }
  }
  CHECK(noisy.sigma().has_value());
  CHECK(*noisy.sigma() == 0.4);
}

TEST_CASE("assemble rejects bad input") {
  const BlockPartition p({2, 2}, 1);
  const BlockPartition q({2, 2, 2}, 1);
  CHECK_THROWS_AS(assemble(random_stiefel(p, 0), BlockSymMatrix::zero(q)),
                  std::invalid_argument);

  Matrix bad = Matrix::Zero(4, 4);
  bad(0, 0) = 1.0;
  CHECK_THROWS_AS(assemble(random_stiefel(p, 0), BlockSymMatrix(p, bad)),
                  std::invalid_argument);
}

TEST_CASE("clean canonical instance satisfies the exact identity") {
  const BlockPartition p({3, 3, 3}, 2);
  const GroundTruth V = canonical_stiefel(p);
  const ProblemInstance inst = assemble(V, BlockSymMatrix::zero(p));
  Matrix blockdiag = Matrix::Zero(9, 9);
  for (int i = 0; i < 3; ++i) {
    blockdiag.block(p.offset(i), p.offset(i), 3, 3) =
        V.block(i) * V.block(i).transpose();
  }
  const Matrix residual =
      inst.S().matrix() + blockdiag - V.stacked() * V.stacked().transpose();
  CHECK(operator_norm(residual) <= 1e-12);
}

TEST_CASE("instance files round-trip exactly") {
  const BlockPartition p({3, 2, 2}, 2);
  const ProblemInstance inst = make_instance(p, 0.3, 12345);
  const std::string path = temp_path("roundtrip.otsm");
  save_instance(path, inst);
  const ProblemInstance loaded = load_instance(path);

  CHECK(loaded.partition() == p);
  CHECK(loaded.seed() == 12345);
  CHECK(loaded.sigma().has_value());
  CHECK(*loaded.sigma() == 0.3);
  CHECK((loaded.S().matrix() - inst.S().matrix()).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE(loaded.truth().has_value());
  CHECK((loaded.truth()->stacked() - inst.truth()->stacked()).cwiseAbs().maxCoeff() ==
        0.0);
  REQUIRE(loaded.noise().has_value());
  CHECK((loaded.noise()->matrix() - inst.noise()->matrix()).cwiseAbs().maxCoeff() ==
        0.0);
  std::remove(path.c_str());
}

TEST_CASE("gen twice gives identical bytes") {
  const BlockPartition p({2, 2}, 2);
  const std::string a = temp_path("det_a.otsm");
  const std::string b = temp_path("det_b.otsm");
  save_instance(a, make_instance(p, 0.5, 9));
  save_instance(b, make_instance(p, 0.5, 9));
  std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
  const std::string da((std::istreambuf_iterator<char>(fa)),
                       std::istreambuf_iterator<char>());
  const std::string db((std::istreambuf_iterator<char>(fb)),
                       std::istreambuf_iterator<char>());
  CHECK(da == db);
  CHECK(!da.empty());
  std::remove(a.c_str());
  std::remove(b.c_str());
}

TEST_CASE("truncated and corrupted files fail cleanly") {
  const BlockPartition p({2, 2}, 1);
  const std::string path = temp_path("trunc.otsm");
  save_instance(path, make_instance(p, 0.2, 4));

  std::ifstream in(path, std::ios::binary);
  std::string data((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  in.close();

  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(data.data(), static_cast<std::streamsize>(data.size() / 2));
  }
  CHECK_THROWS_WITH_AS(load_instance(path), "instance file is truncated",
                       std::runtime_error);

  {
    std::string corrupt = data;
    corrupt[corrupt.size() / 2] = static_cast<char>(corrupt[corrupt.size() / 2] ^ 0x40);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(corrupt.data(), static_cast<std::streamsize>(corrupt.size()));
  }
  CHECK_THROWS_AS(load_instance(path), std::runtime_error);

  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << "not an instance";
  }
  CHECK_THROWS_AS(load_instance(path), std::runtime_error);
  CHECK_THROWS_AS(load_instance("/nonexistent/dir/x.otsm"), std::runtime_error);
  std::remove(path.c_str());
}

TEST_CASE("files from newer minor versions still load") {
  // Committed fixture: written with minor version 1 and one extra payload
  // section appended after the known ones.
  const ProblemInstance fixture = load_instance("data/minor_bump.otsm");
  CHECK(fixture.partition() == BlockPartition({2, 2}, 1));
  CHECK(fixture.seed() == 77);
  REQUIRE(fixture.sigma().has_value());
  CHECK(*fixture.sigma() == 0.25);
  REQUIRE(fixture.truth().has_value());
  REQUIRE(fixture.noise().has_value());
  const ProblemInstance expected =
      make_instance(BlockPartition({2, 2}, 1), 0.25, 77);
  CHECK((fixture.S().matrix() - expected.S().matrix()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("text export writes a header and the matrices") {
  const BlockPartition p({2, 2}, 1);
  const ProblemInstance inst = make_instance(p, 0.1, 3);
  const std::string path = temp_path("export.txt");
  save_instance_text(path, inst);

  std::ifstream in(path);
  std::string header;
  REQUIRE(std::getline(in, header));
  CHECK(header.find("\"format\":\"otsm-text\"") != std::string::npos);
  CHECK(header.find("\"m\":2") != std::string::npos);
  CHECK(header.find("\"has_truth\":true") != std::string::npos);
  int data_lines = 0;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) ++data_lines;
  }
  CHECK(data_lines == 4 + 4 + 4);  // S, stacked truth, W
  std::remove(path.c_str());
}

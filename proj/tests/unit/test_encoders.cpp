#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

#include <nlohmann/json.hpp>

#include "fscil/benchmark.hpp"
#include "fscil/binary_io.hpp"
#include "fscil/encoders.hpp"
#include "fscil/error.hpp"
#include "fscil/geometry.hpp"
#include "fscil/projection.hpp"
#include "fscil/rng.hpp"

using namespace fscil;

namespace {

DepthMapSet render_shape(const std::string& name, std::uint64_t seed) {
  const auto pc = normalize_unit_sphere(gen_synthetic(name, 200, seed));
  return render_views(pc, default_camera_set(6, 2.0, 32, 32), 1);
}

std::string hex(const std::array<std::uint8_t, 32>& d) {
  static const char* digits = "0123456789abcdef";
  std::string s;
  for (auto b : d) {
    s += digits[b >> 4];
    s += digits[b & 15];
  }
  return s;
}

}  // namespace

TEST(DepthEncoder, ZeroMapGivesZeroRow) {
  DepthMapSet set;
  set.cameras = default_camera_set(1, 2.0, 32, 32);
  set.maps.push_back(DepthMap{32, 32, std::vector<double>(1024, 0.0)});
  const RowMatrix f = DepthEncoder(16, 3).encode(set);
  EXPECT_EQ(f.rows(), 1);
  EXPECT_EQ(f.norm(), 0.0);
}

TEST(DepthEncoder, LinearInTheMap) {
  const auto set = render_shape("cube", 1);
  auto doubled = set;
  for (auto& m : doubled.maps)
    for (auto& v : m.pixels) v *= 0.5;  // stays inside [0, 1]
  const DepthEncoder enc(32, 5);
  const RowMatrix a = enc.encode(set);
  const RowMatrix b = enc.encode(doubled);
  EXPECT_LT((a - 2.0 * b).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(DepthEncoder, PoolsTo16x16ThenProjects) {
  const auto set = render_shape("torus", 2);
  const DepthEncoder enc(8, 11);
  const RowMatrix f = enc.encode(set);
  ASSERT_EQ(f.rows(), 6);
  ASSERT_EQ(enc.weights().rows(), 256);
  for (Eigen::Index v = 0; v < 6; ++v) {
    // 32x32 maps pool as 2x2 blocks
    Eigen::RowVectorXd pooled(256);
    const DepthMap& m = set.maps[static_cast<std::size_t>(v)];
    for (int i = 0; i < 16; ++i)
      for (int j = 0; j < 16; ++j)
        pooled(i * 16 + j) = 0.25 * (m.at(2 * i, 2 * j) + m.at(2 * i + 1, 2 * j) + m.at(2 * i, 2 * j + 1) +
                                     m.at(2 * i + 1, 2 * j + 1));
    EXPECT_LT((pooled * enc.weights() - f.row(v)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(DepthEncoder, DeterministicPerSeed) {
  const auto set = render_shape("cone", 3);
  EXPECT_EQ(encode_depth_toy(set, 32, 7).rows, encode_depth_toy(set, 32, 7).rows);
  EXPECT_NE(encode_depth_toy(set, 32, 7).rows, encode_depth_toy(set, 32, 8).rows);
  EXPECT_EQ(encode_depth_toy(set, 32, 7).keys.size(), 6u);
}

TEST(DepthEncoder, RejectsTinyMaps) {
  DepthMapSet set;
  set.cameras = default_camera_set(1, 2.0, 8, 8);
  set.maps.push_back(DepthMap{8, 8, std::vector<double>(64, 0.0)});
  EXPECT_THROW(DepthEncoder(4, 0).encode(set), ShapeError);
}

TEST(PointEncoder, PermutationInvariant) {
  const auto pc = normalize_unit_sphere(gen_synthetic("helix", 128, 4));
  const PointEncoder enc(64, 9);
  const Vector reference = enc.encode(pc);
  SplitMix64 rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    PointCloud shuffled = pc;
    for (std::size_t i = shuffled.size(); i > 1; --i) std::swap(shuffled.points[i - 1], shuffled.points[rng.below(i)]);
    EXPECT_EQ(enc.encode(shuffled), reference) << trial;
  }
}

TEST(PointEncoder, SinglePointIsReluOfLift) {
  const PointEncoder enc(16, 2);
  const Vec3 p(0.3, -0.2, 0.9);
  PointCloud pc;
  pc.points.push_back(p);
  const Vector expected = (enc.weights() * p + enc.bias()).cwiseMax(0.0);
  EXPECT_LT((enc.encode(pc) - expected).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(PointEncoder, Deterministic) {
  const auto pc = normalize_unit_sphere(gen_synthetic("ring", 64, 1));
  EXPECT_EQ(encode_points_toy(pc, 64, 3), encode_points_toy(pc, 64, 3));
}

TEST(TextEncoder, Sha256MatchesReference) {
  EXPECT_EQ(hex(sha256("")), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(hex(sha256(text_prompt("chair"))), "d0bacb9ba4b72ed4913a7616ea06fff53e83d097f1e3b6d35b50770b9e4f8ef3");
  EXPECT_EQ(text_prompt("chair"), "an image or projection or sketch of a chair");
}

TEST(TextEncoder, SeedFromDigestThenGaussiansThenNormalize) {
  const auto d = sha256(text_prompt("chair"));
  std::uint64_t seed = 0;
  for (int i = 0; i < 8; ++i) seed = (seed << 8) | d[static_cast<std::size_t>(i)];
  EXPECT_EQ(seed, 0xd0bacb9ba4b72ed4ULL);
  SplitMix64 rng(seed);
  Vector expected(32);
  for (int i = 0; i < 32; ++i) expected(i) = rng.gaussian();
  expected.normalize();
  EXPECT_LT((encode_text_toy("chair", 32) - expected).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(TextEncoder, UnitNormAndDeterministic) {
  for (const char* name : {"airplane", "xbox", "suitcase"}) {
    EXPECT_NEAR(encode_text_toy(name, 32).norm(), 1.0, 1e-9);
    EXPECT_NEAR(encode_text_toy(name, 512).norm(), 1.0, 1e-9);
    EXPECT_EQ(encode_text_toy(name, 32), encode_text_toy(name, 32));
  }
}

TEST(TextEncoder, EmptyNameThrows) { EXPECT_THROW(encode_text_toy("", 32), ConfigError); }

TEST(TextEncoder, AllBenchmarkClassesDistinct) {
  std::set<std::string> names;
  for (const char* suite : {"s2s", "s2r"}) {
    const auto b = shipped_benchmark(suite);
    for (const auto& n : b.base.class_names()) names.insert(n);
    for (const auto& n : b.inc.class_names()) names.insert(n);
  }
  ASSERT_GE(names.size(), 96u);
  for (Eigen::Index dim : {32, 512}) {
    const std::vector<std::string> list(names.begin(), names.end());
    const auto bank = PrototypeBank::build(list, dim);
    double worst = 0.0;
    for (Eigen::Index i = 0; i < bank.rows.rows(); ++i)
      for (Eigen::Index j = i + 1; j < bank.rows.rows(); ++j) {
        const double c = bank.rows.row(i).dot(bank.rows.row(j));
        worst = std::max(worst, std::abs(c));
        ASSERT_NE(bank.rows.row(i), bank.rows.row(j));
      }
    EXPECT_LT(worst, 0.9) << "dim " << dim;
  }
}

TEST(PrototypeBank, UnitRowsAndUniqueNames) {
  const std::vector<std::string> names{"a", "b", "c"};
  const auto bank = PrototypeBank::build(names, 16);
  for (Eigen::Index k = 0; k < 3; ++k) EXPECT_NEAR(bank.rows.row(k).norm(), 1.0, 1e-12);
  const std::vector<std::string> dup{"a", "a"};
  EXPECT_THROW(PrototypeBank::build(dup, 16), DataError);
}

TEST(Emb1, TwoRowRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "fscil_emb_test";
  std::filesystem::create_directories(dir);
  EmbeddingMatrix m;
  m.rows = RowMatrix(2, 8);
  for (int i = 0; i < 16; ++i) m.rows(i / 8, i % 8) = 0.25 * i - 1.0;  // exact in float32
  m.keys = {"s/0", "s/1"};
  write_embedding_manifest(m, dir / "emb.json");
  const auto back = load_embeddings(dir / "emb.json", 8);
  EXPECT_EQ(back.rows, m.rows);
  EXPECT_EQ(back.keys, m.keys);
  EXPECT_THROW(load_embeddings(dir / "emb.json", 4), FormatError);

  // write(load(x)) is byte-identical
  const auto first = io::read_file(dir / "emb.emb1");
  write_embedding_manifest(back, dir / "emb.json");
  EXPECT_EQ(io::read_file(dir / "emb.emb1"), first);
  std::filesystem::remove_all(dir);
}

TEST(Emb1, KeyCountMismatch) {
  const auto dir = std::filesystem::temp_directory_path() / "fscil_emb_mismatch";
  std::filesystem::create_directories(dir);
  io::write_file(dir / "x.emb1", encode_emb1(RowMatrix::Zero(2, 4)));
  io::write_text_file(dir / "x.keys.json", R"({"keys": ["a", "b", "c"]})");
  EXPECT_THROW(read_embeddings(dir / "x.emb1", dir / "x.keys.json"), FormatError);
  std::filesystem::remove_all(dir);
}

TEST(Emb1, HeaderLayout) {
  const auto bytes = encode_emb1(RowMatrix::Zero(3, 5));
  ASSERT_EQ(bytes.size(), 12u + 3 * 5 * 4);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "EMB1");
  EXPECT_EQ(bytes[4], 5);
  EXPECT_EQ(bytes[8], 3);
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(decode_emb1(bad), FormatError);
}

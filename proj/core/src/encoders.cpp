#include "fscil/encoders.hpp"

#include <cmath>
#include <limits>
#include <set>

#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "fscil/error.hpp"
#include "fscil/rng.hpp"

namespace fscil {

namespace {

constexpr io::Magic kEmbMagic{'E', 'M', 'B', '1'};

RowMatrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols, double sigma, SplitMix64& rng) {
  RowMatrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = sigma * rng.gaussian();
  }
  return m;
}

// Bin edges for pooling `size` pixels into kPool cells.
int bin_edge(int cell, int size) { return cell * size / DepthEncoder::kPool; }

}  // namespace

void EmbeddingMatrix::validate() const {
  if (static_cast<std::size_t>(rows.rows()) != keys.size()) {
    throw FormatError("embedding row count " + std::to_string(rows.rows()) + " differs from key count " +
                      std::to_string(keys.size()));
  }
  if (!rows.allFinite()) throw DataError("embedding matrix has non-finite entries");
}

PrototypeBank PrototypeBank::build(std::span<const std::string> class_names, Eigen::Index dim) {
  PrototypeBank bank;
  bank.class_names.assign(class_names.begin(), class_names.end());
  bank.rows.resize(static_cast<Eigen::Index>(class_names.size()), dim);
  for (std::size_t k = 0; k < class_names.size(); ++k) {
    bank.rows.row(static_cast<Eigen::Index>(k)) = encode_text_toy(class_names[k], dim).transpose();
  }
  bank.validate();
  return bank;
}

void PrototypeBank::validate() const {
  if (static_cast<std::size_t>(rows.rows()) != class_names.size()) throw ShapeError("prototype count mismatch");
  std::set<std::string> seen;
  for (const auto& name : class_names) {
    if (!seen.insert(name).second) throw DataError("duplicate prototype class '" + name + "'");
  }
  for (Eigen::Index k = 0; k < rows.rows(); ++k) {
    if (!(rows.row(k).norm() > 0.0)) throw DegenerateError("prototype '" + class_names[k] + "' has zero norm");
  }
}

DepthEncoder::DepthEncoder(Eigen::Index dim, std::uint64_t seed) {
  if (dim <= 0) throw ConfigError("depth encoder dimension must be positive");
  SplitMix64 rng(derive_seed(seed, "encoder.depth"));
  projection_ = gaussian_matrix(kPool * kPool, dim, 1.0 / kPool, rng);
}

RowMatrix DepthEncoder::encode(const DepthMapSet& maps) const {
  maps.validate();
  RowMatrix out(static_cast<Eigen::Index>(maps.size()), dim());
  Eigen::Matrix<double, 1, Eigen::Dynamic> pooled(kPool * kPool);
  for (std::size_t v = 0; v < maps.size(); ++v) {
    const DepthMap& m = maps.maps[v];
    if (m.height < kPool || m.width < kPool) {
      throw ShapeError("depth maps must be at least " + std::to_string(kPool) + "x" + std::to_string(kPool));
    }
    for (int bi = 0; bi < kPool; ++bi) {
      const int r0 = bin_edge(bi, m.height);
      const int r1 = bin_edge(bi + 1, m.height);
      for (int bj = 0; bj < kPool; ++bj) {
        const int c0 = bin_edge(bj, m.width);
        const int c1 = bin_edge(bj + 1, m.width);
        double sum = 0.0;
        for (int r = r0; r < r1; ++r) {
          for (int c = c0; c < c1; ++c) sum += m.at(r, c);
        }
        pooled(bi * kPool + bj) = sum / static_cast<double>((r1 - r0) * (c1 - c0));
      }
    }
    out.row(static_cast<Eigen::Index>(v)) = pooled * projection_;
  }
  return out;
}

PointEncoder::PointEncoder(Eigen::Index dim, std::uint64_t seed) {
  if (dim <= 0) throw ConfigError("point encoder dimension must be positive");
  SplitMix64 rng(derive_seed(seed, "encoder.points"));
  lift_ = gaussian_matrix(dim, 3, 1.0, rng);
  bias_.resize(dim);
  for (Eigen::Index i = 0; i < dim; ++i) bias_(i) = 0.1 * rng.gaussian();
}

Vector PointEncoder::encode(const PointCloud& pc) const {
  pc.validate();
  Vector out = Vector::Constant(dim(), -std::numeric_limits<double>::infinity());
  for (const auto& p : pc.points) {
    const Vector h = (lift_ * p + bias_).cwiseMax(0.0);
    out = out.cwiseMax(h);
  }
  return out;
}

EmbeddingMatrix encode_depth_toy(const DepthMapSet& maps, Eigen::Index dim, std::uint64_t seed) {
  EmbeddingMatrix m;
  m.rows = DepthEncoder(dim, seed).encode(maps);
  for (std::size_t v = 0; v < maps.size(); ++v) m.keys.push_back("view" + std::to_string(v));
  return m;
}

Vector encode_points_toy(const PointCloud& pc, Eigen::Index dim, std::uint64_t seed) {
  return PointEncoder(dim, seed).encode(pc);
}

std::string text_prompt(std::string_view class_name) {
  return "an image or projection or sketch of a " + std::string(class_name);
}

std::array<std::uint8_t, 32> sha256(std::string_view data) {
  std::array<std::uint8_t, 32> digest{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1 || len != 32) {
    throw Error("SHA-256 digest failed");
  }
  return digest;
}

Vector encode_text_toy(std::string_view class_name, Eigen::Index dim) {
  if (class_name.empty()) throw ConfigError("class name must be non-empty");
  if (dim <= 0) throw ConfigError("text encoder dimension must be positive");
  const auto digest = sha256(text_prompt(class_name));
  std::uint64_t seed = 0;
  for (int i = 0; i < 8; ++i) seed = (seed << 8) | digest[i];

  SplitMix64 rng(seed);
  Vector v(dim);
  for (Eigen::Index i = 0; i < dim; ++i) v(i) = rng.gaussian();
  return v / v.norm();
}

io::Bytes encode_emb1(const RowMatrix& rows) {
  io::Bytes out;
  out.reserve(12 + 4 * static_cast<std::size_t>(rows.size()));
  io::put_magic(out, kEmbMagic);
  io::put_u32(out, static_cast<std::uint32_t>(rows.cols()));
  io::put_u32(out, static_cast<std::uint32_t>(rows.rows()));
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    for (Eigen::Index j = 0; j < rows.cols(); ++j) io::put_f32(out, static_cast<float>(rows(i, j)));
  }
  return out;
}

RowMatrix decode_emb1(std::span<const std::uint8_t> bytes) {
  io::Reader reader(bytes);
  reader.expect_magic(kEmbMagic, "embedding file");
  const std::uint32_t dim = reader.u32();
  const std::uint32_t count = reader.u32();
  if (reader.remaining() != std::size_t{dim} * count * 4) throw FormatError("EMB1 payload size does not match header");
  RowMatrix rows(count, dim);
  for (std::uint32_t i = 0; i < count; ++i) {
    for (std::uint32_t j = 0; j < dim; ++j) rows(i, j) = reader.f32();
  }
  return rows;
}

void write_embeddings(const EmbeddingMatrix& m, const std::filesystem::path& emb_path,
                      const std::filesystem::path& sidecar_path) {
  m.validate();
  io::write_file(emb_path, encode_emb1(m.rows));
  const nlohmann::json sidecar{{"keys", m.keys}};
  io::write_text_file(sidecar_path, sidecar.dump(2) + "\n");
}

EmbeddingMatrix read_embeddings(const std::filesystem::path& emb_path, const std::filesystem::path& sidecar_path,
                                std::optional<Eigen::Index> expected_dim) {
  EmbeddingMatrix m;
  m.rows = decode_emb1(io::read_file(emb_path));
  nlohmann::json sidecar;
  try {
    sidecar = nlohmann::json::parse(io::read_text_file(sidecar_path));
    m.keys = sidecar.at("keys").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("bad embedding sidecar " + sidecar_path.string() + ": " + e.what());
  }
  if (expected_dim && m.dim() != *expected_dim) {
    throw FormatError("embedding dimension " + std::to_string(m.dim()) + " does not match expected " +
                      std::to_string(*expected_dim));
  }
  m.validate();
  return m;
}

void write_embedding_manifest(const EmbeddingMatrix& m, const std::filesystem::path& manifest_path) {
  const std::string stem = manifest_path.stem().string();
  const std::filesystem::path dir = manifest_path.parent_path();
  const std::string emb_name = stem + ".emb1";
  const std::string sidecar_name = stem + ".keys.json";
  write_embeddings(m, dir / emb_name, dir / sidecar_name);
  const nlohmann::json manifest{{"format", "EMB1"}, {"file", emb_name}, {"sidecar", sidecar_name}};
  io::write_text_file(manifest_path, manifest.dump(2) + "\n");
}

EmbeddingMatrix load_embeddings(const std::filesystem::path& manifest_path, std::optional<Eigen::Index> expected_dim) {
  nlohmann::json manifest;
  std::string file;
  std::string sidecar;
  try {
    manifest = nlohmann::json::parse(io::read_text_file(manifest_path));
    if (manifest.value("format", std::string("EMB1")) != "EMB1") throw FormatError("embedding manifest format is not EMB1");
    file = manifest.at("file").get<std::string>();
    sidecar = manifest.at("sidecar").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("bad embedding manifest " + manifest_path.string() + ": " + e.what());
  }
  const std::filesystem::path dir = manifest_path.parent_path();
  return read_embeddings(dir / file, dir / sidecar, expected_dim);
}

}  // namespace fscil

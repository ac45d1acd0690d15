#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fscil/binary_io.hpp"
#include "fscil/geometry.hpp"
#include "fscil/linalg.hpp"
#include "fscil/projection.hpp"

namespace fscil {

/// Row-stacked features with one identifier per row.
struct EmbeddingMatrix {
  RowMatrix rows;
  std::vector<std::string> keys;

  Eigen::Index dim() const { return rows.cols(); }
  Eigen::Index count() const { return rows.rows(); }

  /// Throws FormatError on a key-count mismatch, DataError on non-finite entries.
  void validate() const;
};

/// Text prototypes, one unit-norm row per visible class.
struct PrototypeBank {
  RowMatrix rows;
  std::vector<std::string> class_names;

  static PrototypeBank build(std::span<const std::string> class_names, Eigen::Index dim);
  void validate() const;
};

// Frozen stand-ins for the pre-trained encoders. Weights are drawn once at
// construction from the seed and never change afterwards.

/// Average-pools each depth map to 16x16 and multiplies the flattened 256
/// vector by a fixed Gaussian 256 x dim matrix (entries N(0, 1/256)); no bias,
/// no nonlinearity.
class DepthEncoder {
 public:
  static constexpr int kPool = 16;

  DepthEncoder(Eigen::Index dim, std::uint64_t seed);

  /// One row per view, in camera order.
  RowMatrix encode(const DepthMapSet& maps) const;

  Eigen::Index dim() const { return projection_.cols(); }
  const RowMatrix& weights() const { return projection_; }

 private:
  RowMatrix projection_;  // 256 x dim
};

/// Per-point lift ReLU(W p + b) followed by a coordinate-wise max over points.
class PointEncoder {
 public:
  PointEncoder(Eigen::Index dim, std::uint64_t seed);

  Vector encode(const PointCloud& pc) const;

  Eigen::Index dim() const { return bias_.size(); }
  const RowMatrix& weights() const { return lift_; }
  const Vector& bias() const { return bias_; }

 private:
  RowMatrix lift_;  // dim x 3
  Vector bias_;
};

EmbeddingMatrix encode_depth_toy(const DepthMapSet& maps, Eigen::Index dim, std::uint64_t seed);
Vector encode_points_toy(const PointCloud& pc, Eigen::Index dim, std::uint64_t seed);

/// Prompt used for every class prototype.
std::string text_prompt(std::string_view class_name);

/// SHA-256 of the prompt; the first 8 digest bytes (big-endian) seed a
/// SplitMix64 stream, `dim` Box-Muller gaussians are drawn, and the vector is
/// normalized to unit length.
Vector encode_text_toy(std::string_view class_name, Eigen::Index dim);

/// Raw SHA-256 digest, exposed for tests.
std::array<std::uint8_t, 32> sha256(std::string_view data);

// ---------------------------------------------------------------------------
// EMB1: "EMB1", u32 LE dim, u32 LE rows, rows*dim float32 LE row-major.
// A JSON sidecar {"keys": [...]} names the rows. A manifest JSON
// {"format": "EMB1", "file": ..., "sidecar": ...} ties both together; paths
// are relative to the manifest.

io::Bytes encode_emb1(const RowMatrix& rows);
RowMatrix decode_emb1(std::span<const std::uint8_t> bytes);

void write_embeddings(const EmbeddingMatrix& m, const std::filesystem::path& emb_path,
                      const std::filesystem::path& sidecar_path);
EmbeddingMatrix read_embeddings(const std::filesystem::path& emb_path, const std::filesystem::path& sidecar_path,
                                std::optional<Eigen::Index> expected_dim = std::nullopt);

/// Writes EMB1 + sidecar + manifest next to `manifest_path` (stem-based names).
void write_embedding_manifest(const EmbeddingMatrix& m, const std::filesystem::path& manifest_path);
EmbeddingMatrix load_embeddings(const std::filesystem::path& manifest_path,
                                std::optional<Eigen::Index> expected_dim = std::nullopt);

}  // namespace fscil

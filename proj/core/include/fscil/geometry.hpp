#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "fscil/binary_io.hpp"

namespace fscil {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

struct PointCloud {
  std::vector<Vec3> points;
  std::string class_name;
  std::string sample_id;

  std::size_t size() const { return points.size(); }

  /// Throws DataError on an empty cloud or non-finite coordinates.
  void validate() const;
};

/// Sampling ranges for the training-time augmentation. Each axis angle is
/// drawn uniformly from [rotation_lo[a], rotation_hi[a]); the camera distance
/// multiplier from [scale_lo, scale_hi].
struct AugmentationConfig {
  std::array<double, 3> rotation_lo{0.0, 0.0, 0.0};
  std::array<double, 3> rotation_hi{2 * std::numbers::pi, 2 * std::numbers::pi, 2 * std::numbers::pi};
  double scale_lo = 0.9;
  double scale_hi = 1.1;

  /// Zero-width ranges pinned at the given values.
  static AugmentationConfig fixed(const std::array<double, 3>& angles, double scale = 1.0);

  /// Throws ConfigError for inverted or non-finite ranges, or a non-positive scale.
  void validate() const;
};

struct AugmentationRecord {
  std::array<double, 3> rotation{};
  double view_distance_scale = 1.0;
  std::uint64_t seed = 0;
};

/// Centers the cloud on its centroid and scales the farthest point to norm 1.
PointCloud normalize_unit_sphere(const PointCloud& pc);

/// Rotation applying the x angle first, then y, then z (R = Rz * Ry * Rx).
Mat3 rotation_xyz(const std::array<double, 3>& angles);

PointCloud rotate(const PointCloud& pc, const Mat3& rotation);

std::pair<PointCloud, AugmentationRecord> augment(const PointCloud& pc, std::uint64_t seed,
                                                  const AugmentationConfig& config);

// ---------------------------------------------------------------------------
// Synthetic shapes

enum class NoiseProfile {
  clean,  // gaussian jitter sigma = 0.02
  noisy,  // sigma = 0.08 plus 5% uniform outliers in [-1, 1]^3
};

inline constexpr double kCleanJitter = 0.02;
inline constexpr double kNoisyJitter = 0.08;
inline constexpr double kNoisyOutlierFraction = 0.05;

/// The ten parametric base shapes.
const std::vector<std::string>& synthetic_shapes();

/// Class names available to gen_synthetic: the ten base shapes followed by
/// their "-stretched" variants (x axis scaled by 2). Throws ConfigError if
/// more than 20 are requested.
std::vector<std::string> synthetic_class_names(std::size_t count);

/// Points sampled on the named surface plus seeded jitter. The result is not
/// normalized; a unit sphere sample has norms close to 1.
PointCloud gen_synthetic(std::string_view class_name, std::size_t n_points, std::uint64_t seed,
                         NoiseProfile noise = NoiseProfile::clean);

/// Symmetric mean nearest-neighbour distance.
double chamfer_distance(const PointCloud& a, const PointCloud& b);

// ---------------------------------------------------------------------------
// PCB1: "PCB1", u32 LE count, then count * (x, y, z) float32 LE.

io::Bytes encode_pcb1(const PointCloud& pc);
PointCloud decode_pcb1(std::span<const std::uint8_t> bytes);
void write_pcb1(const std::filesystem::path& path, const PointCloud& pc);

/// One "x y z" triple per line; blank lines and '#' comments are skipped.
PointCloud parse_xyz(std::string_view text);

/// Reads PCB1 (by magic) or ASCII xyz.
PointCloud load_point_cloud(const std::filesystem::path& path);

}  // namespace fscil

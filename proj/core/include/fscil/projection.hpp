#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include "fscil/geometry.hpp"

namespace fscil {

/// Pinhole camera looking at `look_at`. `distance` is kept equal to
/// |position - look_at| by the factory functions.
struct Camera {
  Vec3 position = Vec3(0.0, 0.0, 2.0);
  Vec3 look_at = Vec3::Zero();
  Vec3 up = Vec3::UnitY();
  double distance = 2.0;
  int height = 32;
  int width = 32;
  double fov_deg = 60.0;

  /// Throws ConfigError when position == look_at, up is parallel to the view
  /// direction, distance disagrees with the geometry, or the image is empty.
  void validate() const;
};

struct RenderConfig {
  std::size_t n_views = 6;
  double distance = 2.0;
  int resolution = 32;
  double fov_deg = 60.0;
  int point_radius_px = 1;
};

/// Background pixels are 0; hit pixels hold normalized inverse depth in [kFarDepthValue, 1].
struct DepthMap {
  int height = 0;
  int width = 0;
  std::vector<double> pixels;  // row-major

  double at(int row, int col) const { return pixels[static_cast<std::size_t>(row) * width + col]; }
  std::size_t nonzero_count() const;
};

struct DepthMapSet {
  std::vector<DepthMap> maps;
  std::vector<Camera> cameras;

  std::size_t size() const { return maps.size(); }
  void validate() const;
};

inline constexpr double kFarDepthValue = 0.05;

/// Six views on +x, -x, +y, -y, +z, -z for n_views == 6; a single +z view for
/// n_views == 1; otherwise a Fibonacci-sphere layout. n_views must be in 1..26.
std::vector<Camera> default_camera_set(std::size_t n_views, double distance, int height, int width,
                                       double fov_deg = 60.0);

inline std::vector<Camera> default_camera_set(const RenderConfig& cfg) {
  return default_camera_set(cfg.n_views, cfg.distance, cfg.resolution, cfg.resolution, cfg.fov_deg);
}

/// Moves every camera along its view ray so that distance becomes distance * scale.
std::vector<Camera> scale_camera_distance(const std::vector<Camera>& cameras, double scale);

/// Applies `rotation` to camera position, target and up vector.
std::vector<Camera> rotate_cameras(const std::vector<Camera>& cameras, const Mat3& rotation);

/// Maps a view-axis depth to the stored pixel value for a camera at `distance`:
/// linear in 1/z with the nearest admissible depth (distance - 1) at 1 and the
/// far plane (2 * distance) at kFarDepthValue.
double depth_to_value(double depth, double distance);

/// Perspective z-buffer splatting. Each point covers the pixel containing it
/// plus every pixel whose center lies within point_radius_px of the projected
/// position. Views are rendered concurrently and stored in camera order.
DepthMapSet render_views(const PointCloud& pc, const std::vector<Camera>& cameras, int point_radius_px);

/// Debug export as binary PGM (P5), 8-bit quantized.
void write_pgm(const std::filesystem::path& path, const DepthMap& map);

}  // namespace fscil

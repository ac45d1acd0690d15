#include "fscil/projection.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include <Eigen/Geometry>

#include "fscil/error.hpp"
#include "fscil/parallel.hpp"

namespace fscil {

namespace {

constexpr std::size_t kMaxViews = 26;

Vec3 default_up(const Vec3& view_dir) {
  // World z is the up vector unless the camera looks along it.
  return std::abs(view_dir.normalized().z()) > 0.99 ? Vec3::UnitY() : Vec3::UnitZ();
}

Camera make_camera(const Vec3& direction, double distance, int height, int width, double fov_deg) {
  Camera cam;
  const Vec3 unit = direction.normalized();
  cam.position = unit * distance;
  cam.look_at = Vec3::Zero();
  cam.up = default_up(-unit);
  cam.distance = distance;
  cam.height = height;
  cam.width = width;
  cam.fov_deg = fov_deg;
  return cam;
}

DepthMap render_one(const PointCloud& pc, const Camera& cam, int radius) {
  const Vec3 forward = (cam.look_at - cam.position).normalized();
  const Vec3 right = forward.cross(cam.up).normalized();
  const Vec3 true_up = right.cross(forward);
  const double focal = 0.5 * cam.width / std::tan(0.5 * cam.fov_deg * std::numbers::pi / 180.0);

  const std::size_t n_pixels = static_cast<std::size_t>(cam.height) * cam.width;
  std::vector<double> zbuf(n_pixels, std::numeric_limits<double>::infinity());
  const double r2 = static_cast<double>(radius) * radius;

  for (const auto& p : pc.points) {
    const Vec3 d = p - cam.position;
    const double z = d.dot(forward);
    if (z <= 1e-9) continue;  // behind or on the camera plane
    const double px = 0.5 * cam.width + focal * d.dot(right) / z;
    const double py = 0.5 * cam.height - focal * d.dot(true_up) / z;

    const int col0 = static_cast<int>(std::floor(px));
    const int row0 = static_cast<int>(std::floor(py));
    for (int row = row0 - radius; row <= row0 + radius; ++row) {
      if (row < 0 || row >= cam.height) continue;
      for (int col = col0 - radius; col <= col0 + radius; ++col) {
        if (col < 0 || col >= cam.width) continue;
        const double dx = col + 0.5 - px;
        const double dy = row + 0.5 - py;
        const bool own_pixel = row == row0 && col == col0;
        if (!own_pixel && dx * dx + dy * dy > r2) continue;
        double& slot = zbuf[static_cast<std::size_t>(row) * cam.width + col];
        slot = std::min(slot, z);
      }
    }
  }

  DepthMap map{.height = cam.height, .width = cam.width, .pixels = std::vector<double>(n_pixels, 0.0)};
  for (std::size_t i = 0; i < n_pixels; ++i) {
    if (std::isfinite(zbuf[i])) map.pixels[i] = depth_to_value(zbuf[i], cam.distance);
  }
  return map;
}

}  // namespace

void Camera::validate() const {
  const Vec3 view = look_at - position;
  if (!(view.norm() > 0.0)) throw ConfigError("camera position coincides with look_at");
  if (up.norm() == 0.0 || up.normalized().cross(view.normalized()).norm() < 1e-9) {
    throw ConfigError("camera up vector is parallel to the view direction");
  }
  if (std::abs(view.norm() - distance) > 1e-9) throw ConfigError("camera distance disagrees with its position");
  if (distance <= 0.0) throw ConfigError("camera distance must be positive");
  if (height <= 0 || width <= 0) throw ConfigError("camera resolution must be positive");
  if (!(fov_deg > 0.0 && fov_deg < 180.0)) throw ConfigError("camera field of view must be in (0, 180)");
}

std::size_t DepthMap::nonzero_count() const {
  return static_cast<std::size_t>(std::count_if(pixels.begin(), pixels.end(), [](double v) { return v != 0.0; }));
}

void DepthMapSet::validate() const {
  if (maps.size() != cameras.size()) throw ShapeError("depth map count differs from camera count");
  if (maps.empty()) throw ShapeError("depth map set is empty");
  for (const auto& m : maps) {
    if (m.pixels.size() != static_cast<std::size_t>(m.height) * m.width) throw ShapeError("depth map size mismatch");
    for (double v : m.pixels) {
      if (!(v >= 0.0 && v <= 1.0)) throw DataError("depth map value outside [0, 1]");
    }
  }
}

std::vector<Camera> default_camera_set(std::size_t n_views, double distance, int height, int width,
                                       double fov_deg) {
  if (n_views < 1 || n_views > kMaxViews) {
    throw ConfigError("n_views must be in 1.." + std::to_string(kMaxViews) + ", got " + std::to_string(n_views));
  }
  if (!(distance > 0.0)) throw ConfigError("camera distance must be positive");
  if (height <= 0 || width <= 0) throw ConfigError("camera resolution must be positive");

  std::vector<Camera> cams;
  cams.reserve(n_views);
  if (n_views == 1) {
    cams.push_back(make_camera(Vec3::UnitZ(), distance, height, width, fov_deg));
  } else if (n_views == 6) {
    const std::array<Vec3, 6> axes{Vec3(1, 0, 0), Vec3(-1, 0, 0), Vec3(0, 1, 0),
                                   Vec3(0, -1, 0), Vec3(0, 0, 1), Vec3(0, 0, -1)};
    for (const Vec3& axis : axes) {
      cams.push_back(make_camera(axis, distance, height, width, fov_deg));
    }
  } else {
    const double golden_angle = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (std::size_t i = 0; i < n_views; ++i) {
      const double z = 1.0 - 2.0 * (static_cast<double>(i) + 0.5) / static_cast<double>(n_views);
      const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      const double phi = golden_angle * static_cast<double>(i);
      cams.push_back(make_camera(Vec3(r * std::cos(phi), r * std::sin(phi), z), distance, height, width, fov_deg));
    }
  }
  return cams;
}

std::vector<Camera> scale_camera_distance(const std::vector<Camera>& cameras, double scale) {
  if (!(scale > 0.0)) throw ConfigError("view distance scale must be positive");
  std::vector<Camera> out = cameras;
  if (scale == 1.0) return out;
  for (auto& cam : out) {
    cam.position = cam.look_at + (cam.position - cam.look_at) * scale;
    cam.distance *= scale;
  }
  return out;
}

std::vector<Camera> rotate_cameras(const std::vector<Camera>& cameras, const Mat3& rotation) {
  std::vector<Camera> out = cameras;
  for (auto& cam : out) {
    cam.position = rotation * cam.position;
    cam.look_at = rotation * cam.look_at;
    cam.up = rotation * cam.up;
  }
  return out;
}

double depth_to_value(double depth, double distance) {
  const double z_near = std::max(distance - 1.0, 1e-3 * distance);
  const double z_far = 2.0 * distance;
  const double t = (1.0 / depth - 1.0 / z_far) / (1.0 / z_near - 1.0 / z_far);
  return std::clamp(kFarDepthValue + (1.0 - kFarDepthValue) * t, kFarDepthValue, 1.0);
}

DepthMapSet render_views(const PointCloud& pc, const std::vector<Camera>& cameras, int point_radius_px) {
  if (pc.points.empty()) throw DegenerateError("cannot render an empty point cloud");
  if (point_radius_px < 0) throw ConfigError("point radius must be non-negative");
  for (const auto& cam : cameras) cam.validate();

  DepthMapSet out;
  out.cameras = cameras;
  out.maps.resize(cameras.size());
  parallel_for(cameras.size(), [&](std::size_t v) { out.maps[v] = render_one(pc, cameras[v], point_radius_px); });
  return out;
}

void write_pgm(const std::filesystem::path& path, const DepthMap& map) {
  const std::string header = "P5\n" + std::to_string(map.width) + " " + std::to_string(map.height) + "\n255\n";
  io::Bytes bytes(header.begin(), header.end());
  for (double v : map.pixels) bytes.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
  io::write_file(path, bytes);
}

}  // namespace fscil

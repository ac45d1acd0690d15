#include "fscil/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Geometry>

#include "fscil/error.hpp"
#include "fscil/rng.hpp"

namespace fscil {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr io::Magic kPcbMagic{'P', 'C', 'B', '1'};
constexpr std::string_view kStretchedSuffix = "-stretched";

bool finite(const Vec3& p) { return p.allFinite(); }

// Point on a triangle, uniform by area.
Vec3 on_triangle(const Vec3& a, const Vec3& b, const Vec3& c, SplitMix64& rng) {
  double u = rng.uniform();
  double v = rng.uniform();
  if (u + v > 1.0) {
    u = 1.0 - u;
    v = 1.0 - v;
  }
  return a + u * (b - a) + v * (c - a);
}

Vec3 sample_sphere(SplitMix64& rng) {
  for (;;) {
    Vec3 g(rng.gaussian(), rng.gaussian(), rng.gaussian());
    const double n = g.norm();
    if (n > 1e-12) return g / n;
  }
}

Vec3 sample_cube(SplitMix64& rng) {
  constexpr double h = 0.6;
  const auto face = rng.below(6);
  const double s = rng.uniform(-h, h);
  const double t = rng.uniform(-h, h);
  const double sign = (face % 2 == 0) ? h : -h;
  switch (face / 2) {
    case 0: return {sign, s, t};
    case 1: return {s, sign, t};
    default: return {s, t, sign};
  }
}

Vec3 sample_cylinder(SplitMix64& rng) {
  constexpr double r = 0.5;
  constexpr double half_h = 0.8;
  const double side_area = 2 * kPi * r * 2 * half_h;
  const double cap_area = kPi * r * r;
  const double pick = rng.uniform() * (side_area + 2 * cap_area);
  const double theta = rng.uniform(0.0, 2 * kPi);
  if (pick < side_area) {
    return {r * std::cos(theta), r * std::sin(theta), rng.uniform(-half_h, half_h)};
  }
  const double rr = r * std::sqrt(rng.uniform());
  const double z = pick < side_area + cap_area ? half_h : -half_h;
  return {rr * std::cos(theta), rr * std::sin(theta), z};
}

Vec3 sample_cone(SplitMix64& rng) {
  constexpr double base_r = 0.6;
  constexpr double z_base = -0.7;
  constexpr double z_apex = 0.8;
  // Lateral area grows linearly with distance from the apex.
  const double t = std::sqrt(rng.uniform());
  const double theta = rng.uniform(0.0, 2 * kPi);
  const double radius = base_r * t;
  return {radius * std::cos(theta), radius * std::sin(theta), z_apex + (z_base - z_apex) * t};
}

Vec3 sample_torus(SplitMix64& rng) {
  constexpr double big_r = 0.7;
  constexpr double small_r = 0.25;
  const double u = rng.uniform(0.0, 2 * kPi);
  const double v = rng.uniform(0.0, 2 * kPi);
  const double w = big_r + small_r * std::cos(v);
  return {w * std::cos(u), w * std::sin(u), small_r * std::sin(v)};
}

Vec3 sample_plane(SplitMix64& rng) {
  return {rng.uniform(-0.9, 0.9), rng.uniform(-0.9, 0.9), 0.0};
}

Vec3 sample_pyramid(SplitMix64& rng) {
  constexpr double h = 0.7;
  const Vec3 apex(0.0, 0.0, 0.8);
  const std::array<Vec3, 4> base{Vec3(-h, -h, -0.5), Vec3(h, -h, -0.5), Vec3(h, h, -0.5), Vec3(-h, h, -0.5)};
  const double side_area = 0.5 * ((base[1] - base[0]).cross(apex - base[0])).norm();
  const double base_area = (2 * h) * (2 * h);
  const double pick = rng.uniform() * (4 * side_area + base_area);
  if (pick < 4 * side_area) {
    const auto k = std::min<std::size_t>(3, static_cast<std::size_t>(pick / side_area));
    return on_triangle(base[k], base[(k + 1) % 4], apex, rng);
  }
  return {rng.uniform(-h, h), rng.uniform(-h, h), -0.5};
}

Vec3 sample_helix(SplitMix64& rng) {
  constexpr double turns = 3.0;
  const double t = rng.uniform();
  const double angle = 2 * kPi * turns * t;
  return {0.6 * std::cos(angle), 0.6 * std::sin(angle), -0.9 + 1.8 * t};
}

Vec3 sample_cross(SplitMix64& rng) {
  const double along = rng.uniform(-0.9, 0.9);
  const double a = rng.uniform(-0.15, 0.15);
  const double b = rng.uniform(-0.15, 0.15);
  if (rng.below(2) == 0) return {along, a, b};
  return {a, along, b};
}

Vec3 sample_ring(SplitMix64& rng) {
  constexpr double inner = 0.6;
  constexpr double outer = 0.9;
  const double r = std::sqrt(rng.uniform() * (outer * outer - inner * inner) + inner * inner);
  const double theta = rng.uniform(0.0, 2 * kPi);
  return {r * std::cos(theta), r * std::sin(theta), 0.0};
}

using Sampler = Vec3 (*)(SplitMix64&);

Sampler sampler_for(std::string_view shape) {
  if (shape == "sphere") return sample_sphere;
  if (shape == "cube") return sample_cube;
  if (shape == "cylinder") return sample_cylinder;
  if (shape == "cone") return sample_cone;
  if (shape == "torus") return sample_torus;
  if (shape == "plane") return sample_plane;
  if (shape == "pyramid") return sample_pyramid;
  if (shape == "helix") return sample_helix;
  if (shape == "cross") return sample_cross;
  if (shape == "ring") return sample_ring;
  return nullptr;
}

}  // namespace

void PointCloud::validate() const {
  if (points.empty()) throw DataError("point cloud '" + sample_id + "' is empty");
  for (const auto& p : points) {
    if (!finite(p)) throw DataError("point cloud '" + sample_id + "' has non-finite coordinates");
  }
}

AugmentationConfig AugmentationConfig::fixed(const std::array<double, 3>& angles, double scale) {
  AugmentationConfig cfg;
  cfg.rotation_lo = angles;
  cfg.rotation_hi = angles;
  cfg.scale_lo = scale;
  cfg.scale_hi = scale;
  return cfg;
}

void AugmentationConfig::validate() const {
  for (int a = 0; a < 3; ++a) {
    if (!std::isfinite(rotation_lo[a]) || !std::isfinite(rotation_hi[a]) || rotation_lo[a] > rotation_hi[a]) {
      throw ConfigError("augmentation rotation range for axis " + std::to_string(a) + " is empty");
    }
  }
  if (!std::isfinite(scale_lo) || !std::isfinite(scale_hi) || scale_lo > scale_hi) {
    throw ConfigError("augmentation view-distance range is empty");
  }
  if (scale_lo <= 0.0) throw ConfigError("augmentation view-distance scale must be positive");
}

PointCloud normalize_unit_sphere(const PointCloud& pc) {
  pc.validate();
  Vec3 centroid = Vec3::Zero();
  for (const auto& p : pc.points) centroid += p;
  centroid /= static_cast<double>(pc.size());

  double max_norm = 0.0;
  for (const auto& p : pc.points) max_norm = std::max(max_norm, (p - centroid).norm());
  if (!(max_norm > 0.0)) throw DegenerateError("point cloud '" + pc.sample_id + "' has zero extent");

  PointCloud out{.points = {}, .class_name = pc.class_name, .sample_id = pc.sample_id};
  out.points.reserve(pc.size());
  for (const auto& p : pc.points) out.points.push_back((p - centroid) / max_norm);
  return out;
}

Mat3 rotation_xyz(const std::array<double, 3>& angles) {
  const Mat3 rx = Eigen::AngleAxisd(angles[0], Vec3::UnitX()).toRotationMatrix();
  const Mat3 ry = Eigen::AngleAxisd(angles[1], Vec3::UnitY()).toRotationMatrix();
  const Mat3 rz = Eigen::AngleAxisd(angles[2], Vec3::UnitZ()).toRotationMatrix();
  return rz * ry * rx;
}

PointCloud rotate(const PointCloud& pc, const Mat3& rotation) {
  PointCloud out{.points = {}, .class_name = pc.class_name, .sample_id = pc.sample_id};
  out.points.reserve(pc.size());
  for (const auto& p : pc.points) out.points.push_back(rotation * p);
  return out;
}

std::pair<PointCloud, AugmentationRecord> augment(const PointCloud& pc, std::uint64_t seed,
                                                  const AugmentationConfig& config) {
  config.validate();
  pc.validate();
  SplitMix64 rng(seed);
  AugmentationRecord record;
  record.seed = seed;
  for (int a = 0; a < 3; ++a) record.rotation[a] = rng.uniform(config.rotation_lo[a], config.rotation_hi[a]);
  record.view_distance_scale = rng.uniform(config.scale_lo, config.scale_hi);

  const bool identity = record.rotation == std::array<double, 3>{0.0, 0.0, 0.0};
  PointCloud out = identity ? pc : rotate(pc, rotation_xyz(record.rotation));
  return {std::move(out), record};
}

const std::vector<std::string>& synthetic_shapes() {
  static const std::vector<std::string> shapes{"sphere", "cube",    "cylinder", "cone",  "torus",
                                               "plane",  "pyramid", "helix",    "cross", "ring"};
  return shapes;
}

std::vector<std::string> synthetic_class_names(std::size_t count) {
  const auto& shapes = synthetic_shapes();
  if (count > 2 * shapes.size()) {
    throw ConfigError("at most " + std::to_string(2 * shapes.size()) + " synthetic classes are available");
  }
  std::vector<std::string> names;
  names.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    names.push_back(i < shapes.size() ? shapes[i] : shapes[i - shapes.size()] + std::string(kStretchedSuffix));
  }
  return names;
}

PointCloud gen_synthetic(std::string_view class_name, std::size_t n_points, std::uint64_t seed,
                         NoiseProfile noise) {
  std::string_view shape = class_name;
  bool stretched = false;
  if (shape.ends_with(kStretchedSuffix)) {
    shape.remove_suffix(kStretchedSuffix.size());
    stretched = true;
  }
  const Sampler sampler = sampler_for(shape);
  if (sampler == nullptr) throw UnknownShapeError("unknown synthetic shape '" + std::string(class_name) + "'");
  if (n_points == 0) throw ConfigError("synthetic cloud needs at least one point");

  SplitMix64 rng(derive_seed(seed, class_name));
  const double sigma = noise == NoiseProfile::clean ? kCleanJitter : kNoisyJitter;

  PointCloud pc;
  pc.class_name = std::string(class_name);
  pc.sample_id = std::string(class_name) + "#" + std::to_string(seed);
  pc.points.reserve(n_points);
  for (std::size_t i = 0; i < n_points; ++i) {
    Vec3 p = sampler(rng);
    if (stretched) p.x() *= 2.0;
    p += sigma * Vec3(rng.gaussian(), rng.gaussian(), rng.gaussian());
    if (noise == NoiseProfile::noisy && rng.uniform() < kNoisyOutlierFraction) {
      p = Vec3(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
    }
    pc.points.push_back(p);
  }
  return pc;
}

double chamfer_distance(const PointCloud& a, const PointCloud& b) {
  a.validate();
  b.validate();
  auto one_way = [](const PointCloud& from, const PointCloud& to) {
    double total = 0.0;
    for (const auto& p : from.points) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& q : to.points) best = std::min(best, (p - q).squaredNorm());
      total += std::sqrt(best);
    }
    return total / static_cast<double>(from.size());
  };
  return 0.5 * (one_way(a, b) + one_way(b, a));
}

io::Bytes encode_pcb1(const PointCloud& pc) {
  io::Bytes out;
  out.reserve(8 + 12 * pc.size());
  io::put_magic(out, kPcbMagic);
  io::put_u32(out, static_cast<std::uint32_t>(pc.size()));
  for (const auto& p : pc.points) {
    for (int k = 0; k < 3; ++k) io::put_f32(out, static_cast<float>(p[k]));
  }
  return out;
}

PointCloud decode_pcb1(std::span<const std::uint8_t> bytes) {
  io::Reader reader(bytes);
  reader.expect_magic(kPcbMagic, "point cloud");
  const std::uint32_t count = reader.u32();
  if (reader.remaining() != std::size_t{count} * 12) throw FormatError("PCB1 payload size does not match point count");
  PointCloud pc;
  pc.points.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const double x = reader.f32();
    const double y = reader.f32();
    const double z = reader.f32();
    pc.points.emplace_back(x, y, z);
  }
  return pc;
}

void write_pcb1(const std::filesystem::path& path, const PointCloud& pc) { io::write_file(path, encode_pcb1(pc)); }

PointCloud parse_xyz(std::string_view text) {
  PointCloud pc;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream fields(line);
    double x = 0, y = 0, z = 0;
    if (!(fields >> x >> y >> z)) throw FormatError("xyz line " + std::to_string(line_no) + " is not 'x y z'");
    pc.points.emplace_back(x, y, z);
  }
  return pc;
}

PointCloud load_point_cloud(const std::filesystem::path& path) {
  const io::Bytes bytes = io::read_file(path);
  if (io::Reader(bytes).peek_magic(kPcbMagic)) return decode_pcb1(bytes);
  return parse_xyz(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

}  // namespace fscil

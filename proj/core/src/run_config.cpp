#include "fscil/run_config.hpp"

#include <cmath>
#include <string>

#include "fscil/binary_io.hpp"
#include "fscil/error.hpp"

namespace fscil {

namespace {

void positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string(name) + " must be positive");
}

void non_negative(double v, const char* name) {
  if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError(std::string(name) + " must be non-negative");
}

const char* target_name(RfeTarget t) { return t == RfeTarget::global ? "global" : "depth"; }

RfeTarget parse_target(const std::string& s) {
  if (s == "global") return RfeTarget::global;
  if (s == "depth") return RfeTarget::depth;
  throw ConfigError("rfe_target must be 'global' or 'depth', got '" + s + "'");
}

}  // namespace

void RunConfig::validate() const {
  positive(lr, "lr");
  non_negative(weight_decay, "weight_decay");
  positive(tau, "tau");
  non_negative(alpha, "alpha");
  for (auto [v, name] : {std::pair{base_epochs, "base_epochs"}, {inc_epochs, "inc_epochs"}, {shots, "shots"},
                         {memory_per_class, "memory_per_class"}, {batch_size, "batch_size"}, {n_aug, "n_aug"},
                         {n_views, "n_views"}, {feature_dim, "feature_dim"}, {point_dim, "point_dim"},
                         {resolution, "resolution"}, {point_radius_px, "point_radius_px"}}) {
    positive(v, name);
  }
  non_negative(hidden, "hidden");
  non_negative(point_hidden, "point_hidden");
  positive(camera_distance, "camera_distance");
  if (!(fov_deg > 0.0 && fov_deg < 180.0)) throw ConfigError("fov_deg must lie in (0, 180)");
  if (!(energy_fraction > 0.0 && energy_fraction <= 1.0)) throw ConfigError("energy_fraction must lie in (0, 1]");
  if (resolution < 16) throw ConfigError("resolution must be at least 16");
  augmentation.validate();
}

HeadsDims RunConfig::heads_dims() const {
  HeadsDims d;
  d.n_views = n_views;
  d.feature_dim = feature_dim;
  d.hidden = hidden > 0 ? hidden : feature_dim;
  d.point_dim = point_dim;
  d.point_hidden = point_hidden > 0 ? point_hidden : feature_dim;
  return d;
}

RenderConfig RunConfig::render_config() const {
  RenderConfig r;
  r.n_views = static_cast<std::size_t>(n_views);
  r.distance = camera_distance;
  r.resolution = resolution;
  r.fov_deg = fov_deg;
  r.point_radius_px = point_radius_px;
  return r;
}

AdamConfig RunConfig::adam_config() const {
  AdamConfig a;
  a.lr = lr;
  a.weight_decay = weight_decay;
  return a;
}

nlohmann::json config_to_json(const RunConfig& c) {
  return {
      {"lr", c.lr},
      {"weight_decay", c.weight_decay},
      {"tau", c.tau},
      {"alpha", c.alpha},
      {"base_epochs", c.base_epochs},
      {"inc_epochs", c.inc_epochs},
      {"shots", c.shots},
      {"memory_per_class", c.memory_per_class},
      {"batch_size", c.batch_size},
      {"n_aug", c.n_aug},
      {"n_views", c.n_views},
      {"feature_dim", c.feature_dim},
      {"point_dim", c.point_dim},
      {"hidden", c.hidden},
      {"point_hidden", c.point_hidden},
      {"resolution", c.resolution},
      {"camera_distance", c.camera_distance},
      {"fov_deg", c.fov_deg},
      {"point_radius_px", c.point_radius_px},
      {"energy_fraction", c.energy_fraction},
      {"rfe_enabled", c.rfe_enabled},
      {"snc_enabled", c.snc_enabled},
      {"cl_enabled", c.cl_enabled},
      {"rfe_target", target_name(c.rfe_target)},
      {"contrastive_rcs", c.contrastive_rcs},
      {"augmentation",
       {{"rotation_lo", c.augmentation.rotation_lo},
        {"rotation_hi", c.augmentation.rotation_hi},
        {"scale_lo", c.augmentation.scale_lo},
        {"scale_hi", c.augmentation.scale_hi}}},
      {"master_seed", c.master_seed},
  };
}

RunConfig merge_config(const RunConfig& base, const nlohmann::json& overrides) {
  if (!overrides.is_object()) throw ConfigError("configuration must be a JSON object");
  RunConfig c = base;
  // Round-trip through JSON so every key shares one parsing path.
  nlohmann::json merged = config_to_json(base);
  for (const auto& [key, value] : overrides.items()) {
    if (!merged.contains(key)) throw ConfigError("unknown configuration key '" + key + "'");
    if (key == "augmentation") {
      if (!value.is_object()) throw ConfigError("augmentation must be an object");
      for (const auto& [k, v] : value.items()) {
        if (!merged["augmentation"].contains(k)) throw ConfigError("unknown augmentation key '" + k + "'");
        merged["augmentation"][k] = v;
      }
    } else {
      merged[key] = value;
    }
  }
  try {
    c.lr = merged.at("lr").get<double>();
    c.weight_decay = merged.at("weight_decay").get<double>();
    c.tau = merged.at("tau").get<double>();
    c.alpha = merged.at("alpha").get<double>();
    c.base_epochs = merged.at("base_epochs").get<int>();
    c.inc_epochs = merged.at("inc_epochs").get<int>();
    c.shots = merged.at("shots").get<int>();
    c.memory_per_class = merged.at("memory_per_class").get<int>();
    c.batch_size = merged.at("batch_size").get<int>();
    c.n_aug = merged.at("n_aug").get<int>();
    c.n_views = merged.at("n_views").get<int>();
    c.feature_dim = merged.at("feature_dim").get<int>();
    c.point_dim = merged.at("point_dim").get<int>();
    c.hidden = merged.at("hidden").get<int>();
    c.point_hidden = merged.at("point_hidden").get<int>();
    c.resolution = merged.at("resolution").get<int>();
    c.camera_distance = merged.at("camera_distance").get<double>();
    c.fov_deg = merged.at("fov_deg").get<double>();
    c.point_radius_px = merged.at("point_radius_px").get<int>();
    c.energy_fraction = merged.at("energy_fraction").get<double>();
    c.rfe_enabled = merged.at("rfe_enabled").get<bool>();
    c.snc_enabled = merged.at("snc_enabled").get<bool>();
    c.cl_enabled = merged.at("cl_enabled").get<bool>();
    c.rfe_target = parse_target(merged.at("rfe_target").get<std::string>());
    c.contrastive_rcs = merged.at("contrastive_rcs").get<bool>();
    const auto& aug = merged.at("augmentation");
    c.augmentation.rotation_lo = aug.at("rotation_lo").get<std::array<double, 3>>();
    c.augmentation.rotation_hi = aug.at("rotation_hi").get<std::array<double, 3>>();
    c.augmentation.scale_lo = aug.at("scale_lo").get<double>();
    c.augmentation.scale_hi = aug.at("scale_hi").get<double>();
    c.master_seed = merged.at("master_seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad configuration value: ") + e.what());
  }
  c.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(io::read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("cannot parse config " + path.string() + ": " + e.what());
  }
  return merge_config(RunConfig{}, doc);
}

}  // namespace fscil

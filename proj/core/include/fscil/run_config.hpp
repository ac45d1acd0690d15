#pragma once

#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

#include "fscil/geometry.hpp"
#include "fscil/heads.hpp"
#include "fscil/optimizer.hpp"
#include "fscil/projection.hpp"

namespace fscil {

/// Which feature the eliminator and classifier act on.
enum class RfeTarget {
  global,  // the fused feature (or the depth feature when SNC is off)
  depth    // always the merged depth feature
};

struct RunConfig {
  double lr = 1e-3;
  double weight_decay = 1e-4;
  double tau = 0.1;
  double alpha = 1.0;
  int base_epochs = 10;
  int inc_epochs = 20;
  int shots = 5;
  int memory_per_class = 1;
  int batch_size = 32;
  int n_aug = 2;

  int n_views = 6;
  int feature_dim = 32;   // C
  int point_dim = 64;     // D3
  int hidden = 0;         // H; 0 means "same as C"
  int point_hidden = 0;   // H3; 0 means "same as C"
  int resolution = 32;
  double camera_distance = 2.0;
  double fov_deg = 60.0;
  int point_radius_px = 1;

  double energy_fraction = 0.95;
  bool rfe_enabled = true;
  bool snc_enabled = true;
  bool cl_enabled = true;
  RfeTarget rfe_target = RfeTarget::global;
  bool contrastive_rcs = false;  // pass contrastive similarities through the basis

  AugmentationConfig augmentation;
  std::uint64_t master_seed = 0;

  /// Throws ConfigError for non-positive sizes, rates out of range or bad
  /// augmentation ranges.
  void validate() const;

  HeadsDims heads_dims() const;
  RenderConfig render_config() const;
  AdamConfig adam_config() const;
};

nlohmann::json config_to_json(const RunConfig& cfg);

/// Applies every key in `overrides` on top of `base`. Unknown keys and
/// wrongly typed values raise ConfigError.
RunConfig merge_config(const RunConfig& base, const nlohmann::json& overrides);

RunConfig load_config(const std::filesystem::path& path);

}  // namespace fscil

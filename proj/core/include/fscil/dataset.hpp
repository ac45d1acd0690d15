#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "fscil/benchmark.hpp"
#include "fscil/geometry.hpp"

namespace fscil {

/// Sample path for an on-the-fly synthetic cloud:
/// "synth:<class>:<seed>:<n_points>" with an optional ":noisy" suffix.
std::string synthetic_path(std::string_view class_name, std::uint64_t seed, std::size_t n_points,
                           NoiseProfile noise = NoiseProfile::clean);

struct SyntheticSpec {
  std::size_t n_base = 10;
  std::size_t n_inc = 6;
  std::size_t train_per_class = 10;
  std::size_t test_per_class = 5;
  std::size_t n_points = 256;
  NoiseProfile inc_noise = NoiseProfile::clean;
  std::uint64_t seed = 0;
};

struct SyntheticBenchmark {
  DatasetManifest base;
  DatasetManifest inc;
};

/// Base classes are the first n_base synthetic class names, incremental
/// classes the next n_inc. Sample ids read "<class>/<split>/<i>".
SyntheticBenchmark make_synthetic_benchmark(const SyntheticSpec& spec);

/// Resolves sample ids from one or more manifests to normalized point clouds.
class SampleStore {
 public:
  struct Entry {
    std::string class_name;
    std::string path;
    std::filesystem::path base_dir;
  };

  SampleStore() = default;
  explicit SampleStore(std::initializer_list<const DatasetManifest*> manifests);

  /// Throws ManifestError if a sample id is already registered.
  void add(const DatasetManifest& manifest);

  bool contains(const std::string& sample_id) const { return entries_.contains(sample_id); }
  const Entry& entry(const std::string& sample_id) const;
  std::size_t size() const { return entries_.size(); }

  /// Loads (or generates) the cloud and normalizes it to the unit sphere.
  PointCloud load(const std::string& sample_id) const;

 private:
  std::map<std::string, Entry> entries_;
};

}  // namespace fscil

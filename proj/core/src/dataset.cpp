#include "fscil/dataset.hpp"

#include <sstream>
#include <vector>

#include <spdlog/fmt/fmt.h>

#include "fscil/error.hpp"
#include "fscil/rng.hpp"

namespace fscil {

namespace {

constexpr std::string_view kSynthPrefix = "synth:";

struct SynthSpec {
  std::string class_name;
  std::uint64_t seed = 0;
  std::size_t n_points = 0;
  NoiseProfile noise = NoiseProfile::clean;
};

SynthSpec parse_synth(const std::string& path) {
  std::vector<std::string> parts;
  std::stringstream ss(path.substr(kSynthPrefix.size()));
  std::string part;
  while (std::getline(ss, part, ':')) parts.push_back(part);
  if (parts.size() < 3 || parts.size() > 4 || (parts.size() == 4 && parts[3] != "noisy")) {
    throw ManifestError("bad synthetic sample path '" + path + "'");
  }
  SynthSpec s;
  s.class_name = parts[0];
  try {
    s.seed = std::stoull(parts[1]);
    s.n_points = std::stoull(parts[2]);
  } catch (const std::exception&) {
    throw ManifestError("bad synthetic sample path '" + path + "'");
  }
  if (parts.size() == 4) s.noise = NoiseProfile::noisy;
  return s;
}

DatasetManifest make_manifest(const std::string& name, const std::vector<std::string>& classes,
                              const SyntheticSpec& spec, NoiseProfile noise) {
  DatasetManifest m;
  m.name = name;
  for (const auto& cls : classes) {
    ClassEntry c{cls, {}};
    for (const auto& [split, count] : {std::pair{"train", spec.train_per_class}, {"test", spec.test_per_class}}) {
      for (std::size_t i = 0; i < count; ++i) {
        const std::uint64_t seed = derive_seed(spec.seed, "data", {fnv1a64(cls), fnv1a64(split), i});
        c.samples.push_back({fmt::format("{}/{}/{}", cls, split, i), split, synthetic_path(cls, seed, spec.n_points, noise)});
      }
    }
    m.classes.push_back(std::move(c));
  }
  m.validate();
  return m;
}

}  // namespace

std::string synthetic_path(std::string_view class_name, std::uint64_t seed, std::size_t n_points, NoiseProfile noise) {
  return fmt::format("{}{}:{}:{}{}", kSynthPrefix, class_name, seed, n_points,
                     noise == NoiseProfile::noisy ? ":noisy" : "");
}

SyntheticBenchmark make_synthetic_benchmark(const SyntheticSpec& spec) {
  if (spec.n_base == 0) throw ConfigError("synthetic benchmark needs at least one base class");
  if (spec.train_per_class == 0 || spec.test_per_class == 0) {
    throw ConfigError("synthetic benchmark needs train and test samples for every class");
  }
  if (spec.n_points == 0) throw ConfigError("synthetic clouds need at least one point");
  const auto names = synthetic_class_names(spec.n_base + spec.n_inc);
  const std::vector<std::string> base(names.begin(), names.begin() + static_cast<std::ptrdiff_t>(spec.n_base));
  const std::vector<std::string> inc(names.begin() + static_cast<std::ptrdiff_t>(spec.n_base), names.end());
  SyntheticBenchmark b;
  b.base = make_manifest("synthetic-base", base, spec, NoiseProfile::clean);
  b.inc = make_manifest("synthetic-inc", inc, spec, spec.inc_noise);
  return b;
}

SampleStore::SampleStore(std::initializer_list<const DatasetManifest*> manifests) {
  for (const auto* m : manifests) add(*m);
}

void SampleStore::add(const DatasetManifest& manifest) {
  for (const auto& c : manifest.classes) {
    for (const auto& s : c.samples) {
      if (!entries_.emplace(s.id, Entry{c.name, s.path, manifest.base_dir}).second) {
        throw ManifestError("sample id '" + s.id + "' is registered twice");
      }
    }
  }
}

const SampleStore::Entry& SampleStore::entry(const std::string& sample_id) const {
  const auto it = entries_.find(sample_id);
  if (it == entries_.end()) throw ProtocolError("unknown sample id '" + sample_id + "'");
  return it->second;
}

PointCloud SampleStore::load(const std::string& sample_id) const {
  const Entry& e = entry(sample_id);
  PointCloud pc;
  if (e.path.starts_with(kSynthPrefix)) {
    const SynthSpec s = parse_synth(e.path);
    pc = gen_synthetic(s.class_name, s.n_points, s.seed, s.noise);
  } else {
    pc = load_point_cloud(e.base_dir / e.path);
  }
  pc = normalize_unit_sphere(pc);
  pc.class_name = e.class_name;
  pc.sample_id = sample_id;
  return pc;
}

}  // namespace fscil

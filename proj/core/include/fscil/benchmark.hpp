#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace fscil {

struct SampleEntry {
  std::string id;
  std::string split;  // "train" or "test"
  std::string path;   // file path relative to the manifest, or a "synth:" spec
};

struct ClassEntry {
  std::string name;
  std::vector<SampleEntry> samples;
};

/// Ordered class list with optional samples. Class order is significant: it
/// fixes the order of incremental partitions.
struct DatasetManifest {
  std::string name;
  std::vector<ClassEntry> classes;
  std::filesystem::path base_dir;  // where relative sample paths resolve

  std::vector<std::string> class_names() const;

  /// Throws ManifestError on unnormalized or duplicate class names, duplicate
  /// sample ids or an unknown split.
  void validate() const;
};

/// Lowercase, '_' to space, runs of whitespace collapsed, ends trimmed.
std::string normalize_name(std::string_view name);

/// Accepts {"name", "classes": [...]} where each class is either a plain
/// string or {"name", "samples": [{"id", "split", "path"}]}. Names are
/// normalized on load.
DatasetManifest parse_manifest(const nlohmann::json& doc, const std::filesystem::path& base_dir);
DatasetManifest load_manifest(const std::filesystem::path& path);
nlohmann::json manifest_to_json(const DatasetManifest& manifest);
void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);

/// Unordered name pairs treated as the same class across datasets.
using AliasMap = std::vector<std::pair<std::string, std::string>>;

/// {"aliases": [["a", "b"], ...]}
AliasMap load_aliases(const std::filesystem::path& path);

/// Incremental classes minus exact or aliased matches against the base list,
/// keeping the original order.
std::vector<std::string> exclude_overlap(const std::vector<std::string>& inc_classes,
                                         const std::vector<std::string>& base_classes, const AliasMap& aliases);

/// Consecutive chunks of `per_session`; the last chunk may be short.
std::vector<std::vector<std::string>> partition_sessions(const std::vector<std::string>& classes,
                                                         std::size_t per_session);

struct Session {
  std::size_t index = 0;  // 1-based; session 1 is the base task
  std::vector<std::string> classes;
  std::vector<std::string> train;
  std::vector<std::string> test;
};

struct SessionSchedule {
  std::vector<Session> sessions;

  std::size_t size() const { return sessions.size(); }
  const Session& session(std::size_t index) const;

  /// Session in which `class_name` first appears; throws ProtocolError if absent.
  std::size_t intro_session(const std::string& class_name) const;

  /// Classes of sessions 1..b, in order.
  std::vector<std::string> visible_classes(std::size_t b) const;

  /// Throws ProtocolError on overlapping label sets, a repeated sample id or
  /// out-of-order indices.
  void validate() const;
};

SessionSchedule build_schedule(const DatasetManifest& base, const DatasetManifest& inc, std::size_t per_session,
                               const AliasMap& aliases);

nlohmann::json schedule_to_json(const SessionSchedule& schedule);
SessionSchedule schedule_from_json(const nlohmann::json& doc);

/// Pretty-printed JSON with a trailing newline; byte-stable across runs.
std::string schedule_text(const SessionSchedule& schedule);
void write_schedule(const std::filesystem::path& path, const SessionSchedule& schedule);
SessionSchedule load_schedule(const std::filesystem::path& path);

/// Directory holding benchmarks/*.json. FSCIL_FORGE_DATA_DIR overrides the
/// built-in location.
std::filesystem::path shipped_data_dir();

/// Shipped manifests and alias maps for the two published task suites.
struct ShippedBenchmark {
  DatasetManifest base;
  DatasetManifest inc;
  AliasMap aliases;
  std::size_t per_session = 4;
};
ShippedBenchmark shipped_benchmark(std::string_view suite);  // "s2s" or "s2r"

}  // namespace fscil

#include "fscil/benchmark.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <set>

#include "fscil/binary_io.hpp"
#include "fscil/error.hpp"

namespace fscil {

namespace {

nlohmann::json parse_json_file(const std::filesystem::path& path, const char* what) {
  const std::string text = io::read_text_file(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ManifestError(std::string("bad ") + what + " " + path.string() + ": " + e.what());
  }
}

void require_unique(const std::vector<std::string>& names, const char* what) {
  std::set<std::string> seen;
  for (const auto& n : names) {
    if (!seen.insert(n).second) throw ManifestError(std::string("duplicate class '") + n + "' in " + what);
  }
}

}  // namespace

std::string normalize_name(std::string_view name) {
  std::string out;
  bool pending_space = false;
  for (char ch : name) {
    if (ch == '_') ch = ' ';
    if (std::isspace(static_cast<unsigned char>(ch))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
  }
  return out;
}

std::vector<std::string> DatasetManifest::class_names() const {
  std::vector<std::string> out;
  out.reserve(classes.size());
  for (const auto& c : classes) out.push_back(c.name);
  return out;
}

void DatasetManifest::validate() const {
  std::set<std::string> ids;
  for (const auto& c : classes) {
    if (c.name.empty() || normalize_name(c.name) != c.name) {
      throw ManifestError("class name '" + c.name + "' in manifest '" + name + "' is not normalized");
    }
    for (const auto& s : c.samples) {
      if (s.id.empty()) throw ManifestError("empty sample id in class '" + c.name + "'");
      if (s.split != "train" && s.split != "test") {
        throw ManifestError("sample '" + s.id + "' has unknown split '" + s.split + "'");
      }
      if (!ids.insert(s.id).second) throw ManifestError("duplicate sample id '" + s.id + "'");
    }
  }
  require_unique(class_names(), ("manifest '" + name + "'").c_str());
}

DatasetManifest parse_manifest(const nlohmann::json& doc, const std::filesystem::path& base_dir) {
  DatasetManifest m;
  m.base_dir = base_dir;
  try {
    m.name = doc.value("name", std::string());
    for (const auto& entry : doc.at("classes")) {
      ClassEntry c;
      if (entry.is_string()) {
        c.name = normalize_name(entry.get<std::string>());
      } else {
        c.name = normalize_name(entry.at("name").get<std::string>());
        if (entry.contains("samples")) {
          for (const auto& s : entry.at("samples")) {
            c.samples.push_back({s.at("id").get<std::string>(), s.at("split").get<std::string>(),
                                 s.at("path").get<std::string>()});
          }
        }
      }
      m.classes.push_back(std::move(c));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ManifestError("malformed manifest: " + std::string(e.what()));
  }
  m.validate();
  return m;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  return parse_manifest(parse_json_file(path, "manifest"), path.parent_path());
}

nlohmann::json manifest_to_json(const DatasetManifest& manifest) {
  nlohmann::json classes = nlohmann::json::array();
  for (const auto& c : manifest.classes) {
    if (c.samples.empty()) {
      classes.push_back(c.name);
      continue;
    }
    nlohmann::json samples = nlohmann::json::array();
    for (const auto& s : c.samples) samples.push_back({{"id", s.id}, {"split", s.split}, {"path", s.path}});
    classes.push_back({{"name", c.name}, {"samples", std::move(samples)}});
  }
  return {{"name", manifest.name}, {"classes", std::move(classes)}};
}

void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
  io::write_text_file(path, manifest_to_json(manifest).dump(2) + "\n");
}

AliasMap load_aliases(const std::filesystem::path& path) {
  const nlohmann::json doc = parse_json_file(path, "alias map");
  AliasMap out;
  try {
    for (const auto& pair : doc.at("aliases")) {
      if (!pair.is_array() || pair.size() != 2) throw ManifestError("alias entries must be name pairs");
      out.emplace_back(normalize_name(pair[0].get<std::string>()), normalize_name(pair[1].get<std::string>()));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ManifestError("malformed alias map " + path.string() + ": " + e.what());
  }
  return out;
}

std::vector<std::string> exclude_overlap(const std::vector<std::string>& inc_classes,
                                         const std::vector<std::string>& base_classes, const AliasMap& aliases) {
  require_unique(inc_classes, "incremental class list");
  require_unique(base_classes, "base class list");
  const std::set<std::string> base(base_classes.begin(), base_classes.end());
  auto overlaps = [&](const std::string& name) {
    if (base.contains(name)) return true;
    return std::any_of(aliases.begin(), aliases.end(), [&](const auto& pair) {
      return (pair.first == name && base.contains(pair.second)) || (pair.second == name && base.contains(pair.first));
    });
  };
  std::vector<std::string> out;
  for (const auto& name : inc_classes) {
    if (!overlaps(name)) out.push_back(name);
  }
  return out;
}

std::vector<std::vector<std::string>> partition_sessions(const std::vector<std::string>& classes,
                                                         std::size_t per_session) {
  if (per_session == 0) throw ConfigError("classes per session must be at least 1");
  if (classes.empty()) throw ManifestError("cannot partition an empty class list");
  std::vector<std::vector<std::string>> out;
  for (std::size_t i = 0; i < classes.size(); i += per_session) {
    const std::size_t end = std::min(classes.size(), i + per_session);
    out.emplace_back(classes.begin() + static_cast<std::ptrdiff_t>(i), classes.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

const Session& SessionSchedule::session(std::size_t index) const {
  if (index < 1 || index > sessions.size()) {
    throw ProtocolError("session " + std::to_string(index) + " out of range 1.." + std::to_string(sessions.size()));
  }
  return sessions[index - 1];
}

std::size_t SessionSchedule::intro_session(const std::string& class_name) const {
  for (const auto& s : sessions) {
    if (std::find(s.classes.begin(), s.classes.end(), class_name) != s.classes.end()) return s.index;
  }
  throw ProtocolError("class '" + class_name + "' is not part of the schedule");
}

std::vector<std::string> SessionSchedule::visible_classes(std::size_t b) const {
  session(b);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < b; ++i) out.insert(out.end(), sessions[i].classes.begin(), sessions[i].classes.end());
  return out;
}

void SessionSchedule::validate() const {
  if (sessions.empty()) throw ProtocolError("schedule has no sessions");
  std::set<std::string> classes;
  std::set<std::string> samples;
  for (std::size_t i = 0; i < sessions.size(); ++i) {
    const Session& s = sessions[i];
    if (s.index != i + 1) throw ProtocolError("session indices must run 1..B in order");
    if (s.classes.empty()) throw ProtocolError("session " + std::to_string(s.index) + " has no classes");
    for (const auto& c : s.classes) {
      if (!classes.insert(c).second) {
        throw ProtocolError("class '" + c + "' appears in more than one session");
      }
    }
    for (const auto* refs : {&s.train, &s.test}) {
      for (const auto& id : *refs) {
        if (!samples.insert(id).second) throw ProtocolError("sample '" + id + "' appears more than once");
      }
    }
  }
}

SessionSchedule build_schedule(const DatasetManifest& base, const DatasetManifest& inc, std::size_t per_session,
                               const AliasMap& aliases) {
  base.validate();
  inc.validate();
  SessionSchedule schedule;
  auto add_session = [&](const std::vector<std::string>& names, const DatasetManifest& source) {
    Session s;
    s.index = schedule.sessions.size() + 1;
    s.classes = names;
    for (const auto& name : names) {
      const auto it = std::find_if(source.classes.begin(), source.classes.end(),
                                   [&](const ClassEntry& c) { return c.name == name; });
      for (const auto& sample : it->samples) (sample.split == "train" ? s.train : s.test).push_back(sample.id);
    }
    schedule.sessions.push_back(std::move(s));
  };

  if (base.classes.empty()) throw ManifestError("base manifest has no classes");
  add_session(base.class_names(), base);
  const auto kept = exclude_overlap(inc.class_names(), base.class_names(), aliases);
  if (!kept.empty()) {
    for (const auto& chunk : partition_sessions(kept, per_session)) add_session(chunk, inc);
  }
  schedule.validate();
  return schedule;
}

nlohmann::json schedule_to_json(const SessionSchedule& schedule) {
  nlohmann::json sessions = nlohmann::json::array();
  for (const auto& s : schedule.sessions) {
    sessions.push_back({{"index", s.index}, {"classes", s.classes}, {"train", s.train}, {"test", s.test}});
  }
  return {{"sessions", std::move(sessions)}};
}

SessionSchedule schedule_from_json(const nlohmann::json& doc) {
  SessionSchedule schedule;
  try {
    for (const auto& s : doc.at("sessions")) {
      schedule.sessions.push_back({s.at("index").get<std::size_t>(), s.at("classes").get<std::vector<std::string>>(),
                                   s.value("train", std::vector<std::string>{}),
                                   s.value("test", std::vector<std::string>{})});
    }
  } catch (const nlohmann::json::exception& e) {
    throw ManifestError("malformed schedule: " + std::string(e.what()));
  }
  schedule.validate();
  return schedule;
}

std::string schedule_text(const SessionSchedule& schedule) { return schedule_to_json(schedule).dump(2) + "\n"; }

void write_schedule(const std::filesystem::path& path, const SessionSchedule& schedule) {
  io::write_text_file(path, schedule_text(schedule));
}

SessionSchedule load_schedule(const std::filesystem::path& path) {
  return schedule_from_json(parse_json_file(path, "schedule"));
}

std::filesystem::path shipped_data_dir() {
  if (const char* env = std::getenv("FSCIL_FORGE_DATA_DIR"); env != nullptr && *env != '\0') return env;
#ifdef FSCIL_BUILD_DATA_DIR
  if (std::filesystem::exists(FSCIL_BUILD_DATA_DIR)) return FSCIL_BUILD_DATA_DIR;
#endif
#ifdef FSCIL_INSTALL_DATA_DIR
  return FSCIL_INSTALL_DATA_DIR;
#else
  return "data";
#endif
}

ShippedBenchmark shipped_benchmark(std::string_view suite) {
  const std::filesystem::path dir = shipped_data_dir() / "benchmarks";
  ShippedBenchmark b;
  b.base = load_manifest(dir / "shapenet55.json");
  if (suite == "s2s") {
    b.inc = load_manifest(dir / "modelnet40.json");
    b.aliases = load_aliases(dir / "aliases_s2s.json");
  } else if (suite == "s2r") {
    b.inc = load_manifest(dir / "co3d50.json");
    b.aliases = load_aliases(dir / "aliases_s2r.json");
  } else {
    throw ConfigError("unknown benchmark suite '" + std::string(suite) + "' (expected s2s or s2r)");
  }
  return b;
}

}  // namespace fscil

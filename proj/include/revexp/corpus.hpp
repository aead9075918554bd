#pragma once

// Canonical data model and the line-delimited record format shared by every
// pipeline stage.

#include <array>
#include <cstdint>
#include <iterator>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "revexp/checksum.hpp"
#include "revexp/error.hpp"
#include "revexp/quadrant.hpp"
#include "revexp/timestamp.hpp"
#include "revexp/version.hpp"

namespace revexp {

using json = nlohmann::json;

enum class DatasetSplit { Train, Validation, Test };

inline constexpr std::array<DatasetSplit, 3> kAllSplits = {DatasetSplit::Train,
                                                           DatasetSplit::Validation,
                                                           DatasetSplit::Test};

inline std::string_view split_name(DatasetSplit s) {
  switch (s) {
    case DatasetSplit::Train: return "train";
    case DatasetSplit::Validation: return "validation";
    case DatasetSplit::Test: return "test";
  }
  return "train";
}

inline DatasetSplit parse_split(std::string_view name) {
  for (auto s : kAllSplits)
    if (split_name(s) == name) return s;
  throw ParseError("unknown split '" + std::string(name) + "'");
}

// Ownership scores attached by the experience stage.
struct ExperienceTag {
  double aco = 0.0;
  double rso = 0.0;
  ExperienceClass quadrant;

  friend bool operator==(const ExperienceTag&, const ExperienceTag&) = default;
};

struct ExampleKey {
  std::string repo;
  std::int64_t pr_id = 0;
  std::int64_t comment_id = 0;

  friend auto operator<=>(const ExampleKey&, const ExampleKey&) = default;
};

inline std::string to_string(const ExampleKey& k) {
  return k.repo + "#" + std::to_string(k.pr_id) + "/" + std::to_string(k.comment_id);
}

struct ReviewExample {
  std::string repo;  // owner/name
  std::int64_t pr_id = 0;
  std::int64_t comment_id = 0;
  std::string reviewer;  // empty until mined
  std::optional<Timestamp> created_at;
  std::string m_pre;
  std::string r_nl;
  std::string m_post;
  std::string language;
  DatasetSplit split = DatasetSplit::Train;
  std::optional<ExperienceTag> experience;

  ExampleKey key() const { return {repo, pr_id, comment_id}; }

  friend bool operator==(const ReviewExample&, const ReviewExample&) = default;
};

inline std::pair<std::string, std::string> split_repo(std::string_view repo) {
  const auto slash = repo.find('/');
  if (slash == std::string_view::npos || slash == 0 || slash + 1 == repo.size() ||
      repo.find('/', slash + 1) != std::string_view::npos)
    throw ValidationError("repository must be owner/name, got '" + std::string(repo) + "'");
  return {std::string(repo.substr(0, slash)), std::string(repo.substr(slash + 1))};
}

namespace detail {

inline const json& require(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(std::string("missing field ") + key);
  return *it;
}

inline std::string get_string(const json& v, const char* key) {
  if (!v.is_string()) throw ParseError(std::string("field ") + key + ": expected string");
  return v.get<std::string>();
}

inline std::int64_t get_integer(const json& v, const char* key) {
  if (!v.is_number_integer()) throw ParseError(std::string("field ") + key + ": expected integer");
  return v.get<std::int64_t>();
}

inline double get_number(const json& v, const char* key) {
  if (!v.is_number()) throw ParseError(std::string("field ") + key + ": expected number");
  return v.get<double>();
}

}  // namespace detail

inline json to_json(const ReviewExample& e) {
  json j = json::object();
  j["repo"] = e.repo;
  j["pr_id"] = e.pr_id;
  j["comment_id"] = e.comment_id;
  j["reviewer"] = e.reviewer;
  j["created_at"] = e.created_at ? json(format_timestamp(*e.created_at)) : json(nullptr);
  j["m_pre"] = e.m_pre;
  j["r_nl"] = e.r_nl;
  j["m_post"] = e.m_post;
  j["language"] = e.language;
  j["split"] = std::string(split_name(e.split));
  if (e.experience) {
    j["aco"] = e.experience->aco;
    j["rso"] = e.experience->rso;
    j["quadrant"] = quadrant_name(e.experience->quadrant);
  }
  return j;
}

inline ReviewExample example_from_json(const json& j) {
  using namespace detail;
  if (!j.is_object()) throw ParseError("malformed record: expected an object");
  ReviewExample e;
  e.repo = get_string(require(j, "repo"), "repo");
  split_repo(e.repo);
  e.pr_id = get_integer(require(j, "pr_id"), "pr_id");
  if (e.pr_id <= 0) throw ParseError("field pr_id: must be positive");
  e.comment_id = get_integer(require(j, "comment_id"), "comment_id");
  e.m_pre = get_string(require(j, "m_pre"), "m_pre");
  if (e.m_pre.empty()) throw ParseError("field m_pre: must be non-empty");
  e.r_nl = get_string(require(j, "r_nl"), "r_nl");
  e.split = parse_split(get_string(require(j, "split"), "split"));

  if (auto it = j.find("reviewer"); it != j.end()) e.reviewer = get_string(*it, "reviewer");
  if (auto it = j.find("created_at"); it != j.end() && !it->is_null())
    e.created_at = parse_timestamp(get_string(*it, "created_at"));
  if (auto it = j.find("m_post"); it != j.end()) e.m_post = get_string(*it, "m_post");
  if (auto it = j.find("language"); it != j.end()) e.language = get_string(*it, "language");

  const bool has_aco = j.contains("aco"), has_rso = j.contains("rso"),
             has_quadrant = j.contains("quadrant");
  if (has_aco || has_rso || has_quadrant) {
    ExperienceTag tag;
    tag.aco = get_number(require(j, "aco"), "aco");
    tag.rso = get_number(require(j, "rso"), "rso");
    const auto qname = get_string(require(j, "quadrant"), "quadrant");
    auto q = parse_quadrant(qname);
    if (!q) throw ParseError("field quadrant: unknown value '" + qname + "'");
    tag.quadrant = *q;
    e.experience = tag;
  }
  return e;
}

inline ReviewExample parse_example(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& err) {
    throw ParseError(std::string("malformed record: ") + err.what());
  }
  return example_from_json(j);
}

// One line, keys in alphabetical order, newlines escaped.
inline std::string serialize_example(const ReviewExample& e) { return to_json(e).dump(); }

inline std::vector<ReviewExample> read_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open corpus " + path.string());
  std::vector<ReviewExample> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(parse_example(line));
    } catch (const ParseError& err) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " + err.what());
    }
  }
  return out;
}

template <typename Range>
void write_lines(const std::filesystem::path& path, const Range& lines) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& l : lines) out << l << '\n';
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
}

inline void write_corpus(const std::filesystem::path& path,
                         const std::vector<ReviewExample>& examples) {
  std::vector<std::string> lines;
  lines.reserve(examples.size());
  for (const auto& e : examples) lines.push_back(serialize_example(e));
  write_lines(path, lines);
}

inline void write_text(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  out.flush();
  if (!out) throw IoError("write failed for " + path.string());
}

inline std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

struct ManifestFile {
  std::string sha256;
  std::size_t records = 0;
};

// Written next to every stage output. `files` maps a file name relative to the
// output directory to its checksum and record count.
struct CorpusManifest {
  std::string stage;
  std::string tool_version = kToolVersion;
  std::uint64_t seed = 0;
  std::map<std::string, std::size_t> split_counts;
  std::map<std::string, ManifestFile> files;
  std::map<std::string, std::string> inputs;  // input path -> sha256
  json config = json::object();
};

inline constexpr const char* kManifestName = "manifest.json";

inline json to_json(const CorpusManifest& m) {
  json j;
  j["stage"] = m.stage;
  j["tool_version"] = m.tool_version;
  j["seed"] = m.seed;
  j["split_counts"] = m.split_counts;
  json files = json::object();
  for (const auto& [name, f] : m.files) files[name] = {{"sha256", f.sha256}, {"records", f.records}};
  j["files"] = files;
  j["inputs"] = m.inputs;
  j["config"] = m.config;
  j["config_hash"] = sha256_hex(m.config.dump());
  return j;
}

inline CorpusManifest manifest_from_json(const json& j) {
  CorpusManifest m;
  try {
    m.stage = j.at("stage").get<std::string>();
    m.tool_version = j.at("tool_version").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.split_counts = j.at("split_counts").get<std::map<std::string, std::size_t>>();
    for (const auto& [name, f] : j.at("files").items())
      m.files[name] = {f.at("sha256").get<std::string>(), f.at("records").get<std::size_t>()};
    m.inputs = j.at("inputs").get<std::map<std::string, std::string>>();
    m.config = j.at("config");
  } catch (const json::exception& err) {
    throw ParseError(std::string("malformed manifest: ") + err.what());
  }
  return m;
}

inline std::size_t count_lines(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::size_t n = 0;
  std::string line;
  while (std::getline(in, line))
    if (!line.empty()) ++n;
  return n;
}

// Records checksum and line count of `name` inside `dir`.
inline void add_manifest_file(CorpusManifest& m, const std::filesystem::path& dir,
                              const std::string& name) {
  m.files[name] = {sha256_file(dir / name), count_lines(dir / name)};
}

inline void write_manifest(const std::filesystem::path& dir, const CorpusManifest& m) {
  write_text(dir / kManifestName, to_json(m).dump(2) + "\n");
}

// Loads the manifest of a stage directory and checks every listed file against
// its recorded checksum.
inline CorpusManifest verify_manifest(const std::filesystem::path& dir) {
  const auto path = dir / kManifestName;
  if (!std::filesystem::exists(path))
    throw ValidationError("missing manifest " + path.string());
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::parse_error& err) {
    throw ParseError("malformed manifest " + path.string() + ": " + err.what());
  }
  auto m = manifest_from_json(j);
  for (const auto& [name, f] : m.files) {
    if (!std::filesystem::exists(dir / name))
      throw ValidationError("manifest lists missing file " + (dir / name).string());
    if (sha256_file(dir / name) != f.sha256)
      throw ValidationError("checksum mismatch for " + (dir / name).string());
  }
  return m;
}

}  // namespace revexp

#pragma once

#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>

#include "revexp/corpus.hpp"
#include "revexp/github/transport.hpp"
#include "revexp/timestamp.hpp"

namespace revexp::github {

struct CacheEntry {
  CacheKey key;
  int status = 200;
  std::string body;  // raw response bytes
  Timestamp fetched_at;
};

// On-disk response cache. Entries never expire; `invalidate` removes them.
// Each entry is `<id>.json` (raw body) plus `<id>.meta` (status, fetch time).
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

  const std::filesystem::path& dir() const { return dir_; }

  std::optional<CacheEntry> lookup(const CacheKey& key) const {
    std::shared_lock lk(mutex_);
    const auto base = dir_ / key_path(key);
    auto meta_path = base;
    meta_path += ".meta";
    if (!std::filesystem::exists(meta_path)) return std::nullopt;
    CacheEntry e;
    e.key = key;
    try {
      const auto meta = json::parse(read_text(meta_path));
      e.status = meta.at("status").get<int>();
      e.fetched_at = parse_timestamp(meta.at("fetched_at").get<std::string>());
    } catch (const json::exception&) {
      return std::nullopt;
    }
    auto body_path = base;
    body_path += ".json";
    if (std::filesystem::exists(body_path)) e.body = read_text(body_path);
    return e;
  }

  void store(const CacheEntry& entry) {
    std::unique_lock lk(mutex_);
    const auto base = dir_ / key_path(entry.key);
    std::filesystem::create_directories(base.parent_path());
    auto body_path = base;
    body_path += ".json";
    auto meta_path = base;
    meta_path += ".meta";
    atomic_write(body_path, entry.body);
    json meta = {{"status", entry.status}, {"fetched_at", format_timestamp(entry.fetched_at)}};
    atomic_write(meta_path, meta.dump() + "\n");
  }

  // Removes one entry; returns whether it existed.
  bool invalidate(const CacheKey& key) {
    std::unique_lock lk(mutex_);
    const auto base = dir_ / key_path(key);
    auto body_path = base;
    body_path += ".json";
    auto meta_path = base;
    meta_path += ".meta";
    const bool existed = std::filesystem::remove(meta_path);
    std::filesystem::remove(body_path);
    return existed;
  }

  // Removes everything, or one endpoint kind / repository subtree.
  std::uintmax_t invalidate_all(const std::string& kind = {}, const std::string& repo = {}) {
    std::unique_lock lk(mutex_);
    auto root = dir_;
    if (!kind.empty()) {
      root /= kind;
      if (!repo.empty()) {
        auto [owner, name] = split_repo(repo);
        root = root / owner / name;
      }
    }
    if (!std::filesystem::exists(root)) return 0;
    if (root == dir_) {
      std::uintmax_t n = 0;
      for (const auto& child : std::filesystem::directory_iterator(dir_))
        n += std::filesystem::remove_all(child.path());
      return n;
    }
    return std::filesystem::remove_all(root);
  }

 private:
  static void atomic_write(const std::filesystem::path& path, const std::string& data) {
    auto tmp = path;
    tmp += ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw IoError("cannot write cache file " + tmp.string());
      out << data;
      if (!out.flush()) throw IoError("cannot write cache file " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
  }

  std::filesystem::path dir_;
  mutable std::shared_mutex mutex_;
};

}  // namespace revexp::github

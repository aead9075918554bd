#pragma once

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "revexp/corpus.hpp"
#include "revexp/error.hpp"

namespace revexp::github {

// Identifies one raw API response: endpoint kind, repository, and an
// endpoint-specific identifier such as `42/page-1`.
struct CacheKey {
  std::string kind;
  std::string repo;
  std::string identifier;

  friend auto operator<=>(const CacheKey&, const CacheKey&) = default;
};

// Relative location of a key inside a cache or fixture directory, without extension.
inline std::filesystem::path key_path(const CacheKey& key) {
  auto [owner, name] = split_repo(key.repo);
  std::filesystem::path id(key.identifier);
  for (const auto& part : id)
    if (part == ".." || part == ".") throw ValidationError("invalid cache identifier " + key.identifier);
  if (key.kind.empty() || key.identifier.empty() || id.is_absolute())
    throw ValidationError("invalid cache key");
  return std::filesystem::path(key.kind) / owner / name / id;
}

struct HttpRequest {
  std::string path;  // API path with query string
  CacheKey key;
};

struct HttpResponse {
  int status = 0;
  std::string body;
  std::map<std::string, std::string> headers;
};

class Transport {
 public:
  virtual ~Transport() = default;
  // Throws TransportError on connection-level failure.
  virtual HttpResponse get(const HttpRequest& request) = 0;
};

// Plays back recorded bodies from `<dir>/<kind>/<owner>/<name>/<identifier>.json`.
// A sibling `.status` file overrides the status code; a missing body is a 404.
class FixtureTransport final : public Transport {
 public:
  explicit FixtureTransport(std::filesystem::path dir) : dir_(std::move(dir)) {}

  HttpResponse get(const HttpRequest& request) override {
    ++requests_;
    const auto base = dir_ / key_path(request.key);
    auto body_path = base;
    body_path += ".json";
    auto status_path = base;
    status_path += ".status";
    HttpResponse resp;
    resp.status = 404;
    if (std::filesystem::exists(body_path)) {
      resp.status = 200;
      resp.body = read_text(body_path);
    }
    if (std::filesystem::exists(status_path)) resp.status = std::stoi(read_text(status_path));
    return resp;
  }

  std::size_t requests() const { return requests_; }

 private:
  std::filesystem::path dir_;
  std::atomic<std::size_t> requests_{0};
};

}  // namespace revexp::github

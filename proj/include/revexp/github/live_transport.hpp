#pragma once

#include <cstdlib>
#include <string>

#include <httplib.h>

#include "revexp/github/history.hpp"
#include "revexp/github/transport.hpp"

namespace revexp::github {

class HttpTransport final : public Transport {
 public:
  explicit HttpTransport(std::string host = "https://api.github.com") : client_(host) {
    if (const char* token = std::getenv("GITHUB_TOKEN"); token && *token)
      token_ = token;
    client_.set_connection_timeout(10);
    client_.set_read_timeout(30);
    client_.set_follow_location(true);
  }

  HttpResponse get(const HttpRequest& request) override {
    httplib::Headers headers{{"Accept", "application/vnd.github+json"},
                             {"User-Agent", "revexp"},
                             {"X-GitHub-Api-Version", "2022-11-28"}};
    if (!token_.empty()) headers.emplace("Authorization", "Bearer " + token_);
    auto res = client_.Get(request.path, headers);
    if (!res) throw TransportError("request failed: " + httplib::to_string(res.error()));
    HttpResponse out;
    out.status = res->status;
    out.body = res->body;
    for (const auto& [k, v] : res->headers) out.headers[to_lower(k)] = v;
    return out;
  }

  bool has_token() const { return !token_.empty(); }

 private:
  httplib::Client client_;
  std::string token_;
};

}  // namespace revexp::github

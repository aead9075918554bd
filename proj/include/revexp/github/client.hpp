#pragma once

// Review-metadata retrieval against the forge REST API (or recorded fixtures).

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "revexp/corpus.hpp"
#include "revexp/error.hpp"
#include "revexp/github/cache.hpp"
#include "revexp/github/history.hpp"
#include "revexp/github/rate_budget.hpp"
#include "revexp/github/transport.hpp"

namespace revexp::github {

struct CandidateComment {
  std::int64_t comment_id = 0;
  std::string body;
  std::string author;
  Timestamp created_at;
};

// Trims surrounding whitespace and folds CRLF / CR line endings to LF.
inline std::string normalize_comment_body(std::string_view body) {
  std::string out;
  out.reserve(body.size());
  for (std::size_t i = 0; i < body.size(); ++i) {
    if (body[i] == '\r') {
      out.push_back('\n');
      if (i + 1 < body.size() && body[i + 1] == '\n') ++i;
    } else {
      out.push_back(body[i]);
    }
  }
  constexpr std::string_view ws = " \t\n\v\f";
  const auto first = out.find_first_not_of(ws);
  if (first == std::string::npos) return {};
  const auto last = out.find_last_not_of(ws);
  return out.substr(first, last - first + 1);
}

inline std::optional<CandidateComment> match_review_comment(
    const std::vector<CandidateComment>& candidates, std::string_view target_body) {
  const auto target = normalize_comment_body(target_body);
  if (target.empty()) throw ValidationError("target comment body is empty");
  std::vector<const CandidateComment*> hits;
  for (const auto& c : candidates)
    if (normalize_comment_body(c.body) == target) hits.push_back(&c);
  if (hits.empty()) return std::nullopt;
  if (hits.size() > 1) {
    std::string ids;
    for (const auto* h : hits) ids += (ids.empty() ? "" : ", ") + std::to_string(h->comment_id);
    throw AmbiguousMatchError("ambiguous review comment match: comment ids " + ids);
  }
  return *hits.front();
}

struct Found {
  std::string reviewer;
  Timestamp created_at;
  std::int64_t comment_id = 0;

  friend bool operator==(const Found&, const Found&) = default;
};

struct Deleted {
  friend bool operator==(const Deleted&, const Deleted&) = default;
};

using FetchResult = std::variant<Found, Deleted>;

struct ClientOptions {
  int max_retries = 4;
  std::chrono::milliseconds base_backoff{500};
  int per_page = 100;
  std::size_t max_pages = 1000;
};

class GithubClient {
 public:
  GithubClient(Transport& transport, ResponseCache* cache, RateBudget& budget,
               ClientOptions options = {})
      : transport_(transport), cache_(cache), budget_(budget), options_(options) {}

  // Cache first, then the transport under the rate budget. 200 and 404
  // responses are cached; rate-limit and 5xx responses are retried with
  // exponential backoff up to `max_retries` times.
  HttpResponse fetch(const HttpRequest& request) {
    if (cache_) {
      if (auto hit = cache_->lookup(request.key)) return {hit->status, std::move(hit->body), {}};
    }
    std::string last_error = "no attempt made";
    for (int attempt = 0; attempt <= options_.max_retries; ++attempt) {
      if (attempt > 0) budget_.clock().sleep_for(options_.base_backoff * (1 << (attempt - 1)));
      HttpResponse resp;
      {
        auto permit = budget_.acquire();
        try {
          resp = transport_.get(request);
        } catch (const TransportError& err) {
          last_error = err.what();
          continue;
        }
      }
      observe_rate_headers(resp);
      if (is_rate_limited(resp)) {
        last_error = "rate limited";
        continue;
      }
      if (resp.status >= 500) {
        last_error = "server error " + std::to_string(resp.status);
        continue;
      }
      if (resp.status != 200 && resp.status != 404)
        throw TransportError("unexpected status " + std::to_string(resp.status) + " for " +
                             request.path);
      if (cache_) cache_->store({request.key, resp.status, resp.body, budget_.clock().now()});
      return resp;
    }
    throw TransportError("giving up on " + request.path + " after " +
                         std::to_string(options_.max_retries + 1) + " attempts: " + last_error);
  }

  // All review comments on a PR, or nullopt when the PR no longer exists.
  std::optional<std::vector<CandidateComment>> pr_review_comments(const std::string& repo,
                                                                  std::int64_t pr_id) {
    std::vector<CandidateComment> out;
    for (std::size_t page = 1; page <= options_.max_pages; ++page) {
      const HttpRequest req{"/repos/" + repo + "/pulls/" + std::to_string(pr_id) +
                                "/comments?per_page=" + std::to_string(options_.per_page) +
                                "&page=" + std::to_string(page),
                            {"pr-comments", repo, std::to_string(pr_id) + "/page-" + std::to_string(page)}};
      const auto resp = fetch(req);
      if (resp.status == 404) {
        if (page == 1) return std::nullopt;
        break;
      }
      const auto items = parse_array(resp.body, req.path);
      for (const auto& c : items) out.push_back(parse_comment(c));
      if (items.size() < static_cast<std::size_t>(options_.per_page)) break;
    }
    return out;
  }

  FetchResult fetch_review_meta(const std::string& repo, std::int64_t pr_id,
                                std::string_view target_body) {
    auto comments = pr_review_comments(repo, pr_id);
    if (!comments) return Deleted{};
    auto match = match_review_comment(*comments, target_body);
    if (!match || match->author.empty()) return Deleted{};
    return Found{match->author, match->created_at, match->comment_id};
  }

  // Closed PRs of a repository with the logins that left review comments.
  PrParticipation fetch_participation(const std::string& repo) {
    std::vector<PullRequestRecord> prs;
    for (std::size_t page = 1; page <= options_.max_pages; ++page) {
      const HttpRequest req{"/repos/" + repo + "/pulls?state=closed&sort=created&direction=asc&per_page=" +
                                std::to_string(options_.per_page) + "&page=" + std::to_string(page),
                            {"pulls-closed", repo, "page-" + std::to_string(page)}};
      const auto resp = fetch(req);
      if (resp.status == 404) break;
      const auto items = parse_array(resp.body, req.path);
      for (const auto& item : items) {
        PullRequestRecord pr;
        try {
          pr.number = item.at("number").get<std::int64_t>();
          pr.submitted_at = parse_timestamp(item.at("created_at").get<std::string>());
        } catch (const json::exception& err) {
          throw ParseError(req.path + ": " + err.what());
        }
        if (auto comments = pr_review_comments(repo, pr.number))
          for (const auto& c : *comments)
            if (!c.author.empty()) pr.participants.insert(c.author);
        prs.push_back(std::move(pr));
      }
      if (items.size() < static_cast<std::size_t>(options_.per_page)) break;
    }
    return PrParticipation(std::move(prs));
  }

 private:
  static json parse_array(const std::string& body, const std::string& where) {
    json j;
    try {
      j = json::parse(body);
    } catch (const json::parse_error& err) {
      throw ParseError(where + ": " + err.what());
    }
    if (!j.is_array()) throw ParseError(where + ": expected a JSON array");
    return j;
  }

  static CandidateComment parse_comment(const json& c) {
    CandidateComment out;
    try {
      out.comment_id = c.at("id").get<std::int64_t>();
      out.body = c.value("body", "");
      if (auto u = c.find("user"); u != c.end() && u->is_object())
        out.author = u->value("login", "");
      out.created_at = parse_timestamp(c.at("created_at").get<std::string>());
    } catch (const json::exception& err) {
      throw ParseError(std::string("malformed review comment: ") + err.what());
    }
    return out;
  }

  void observe_rate_headers(const HttpResponse& resp) {
    std::optional<long> remaining;
    std::optional<Timestamp> reset;
    if (auto it = resp.headers.find("x-ratelimit-remaining"); it != resp.headers.end())
      remaining = std::stol(it->second);
    if (auto it = resp.headers.find("x-ratelimit-reset"); it != resp.headers.end())
      reset = from_unix(std::stoll(it->second));
    if (auto it = resp.headers.find("retry-after"); it != resp.headers.end()) {
      remaining = 0;
      reset = budget_.clock().now() + std::chrono::seconds(std::stoll(it->second));
    }
    budget_.observe(remaining, reset);
  }

  static bool is_rate_limited(const HttpResponse& resp) {
    if (resp.status == 429) return true;
    if (resp.status != 403) return false;
    auto it = resp.headers.find("x-ratelimit-remaining");
    return (it != resp.headers.end() && it->second == "0") || resp.headers.count("retry-after");
  }

  Transport& transport_;
  ResponseCache* cache_;
  RateBudget& budget_;
  ClientOptions options_;
};

}  // namespace revexp::github

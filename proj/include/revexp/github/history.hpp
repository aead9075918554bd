#pragma once

// Raw event histories behind the ownership metrics, and the pure counting
// operations over them.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "revexp/corpus.hpp"
#include "revexp/error.hpp"
#include "revexp/timestamp.hpp"

namespace revexp::github {

inline std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

inline bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() && to_lower(a) == to_lower(b);
}

struct AuthorIdentity {
  std::string login;  // forge login; empty when unresolved
  std::string name;
  std::string email;

  friend bool operator==(const AuthorIdentity&, const AuthorIdentity&) = default;
};

// Login embedded in a forge noreply address, e.g. `123+alice@users.noreply.github.com`.
inline std::optional<std::string> noreply_login(std::string_view email) {
  constexpr std::string_view suffix = "@users.noreply.github.com";
  const auto lower = to_lower(email);
  if (lower.size() <= suffix.size() || lower.compare(lower.size() - suffix.size(), suffix.size(), suffix) != 0)
    return std::nullopt;
  std::string local(email.substr(0, email.size() - suffix.size()));
  if (auto plus = local.find('+'); plus != std::string::npos) local = local.substr(plus + 1);
  if (local.empty()) return std::nullopt;
  return local;
}

// Login comparison when both logins resolve; otherwise exact (name, email).
inline bool same_author(const AuthorIdentity& commit_author, const AuthorIdentity& who) {
  auto resolved = [](const AuthorIdentity& a) -> std::optional<std::string> {
    if (!a.login.empty()) return a.login;
    return noreply_login(a.email);
  };
  const auto a = resolved(commit_author);
  const auto b = resolved(who);
  if (a && b) return iequals(*a, *b);
  if (who.name.empty() && who.email.empty()) return false;
  return commit_author.name == who.name && commit_author.email == who.email;
}

struct CommitEvent {
  AuthorIdentity author;
  Timestamp time;
};

// Commits of one repository, ordered non-decreasing by time.
class CommitHistory {
 public:
  CommitHistory() = default;
  explicit CommitHistory(std::vector<CommitEvent> events) : events_(std::move(events)) {
    std::stable_sort(events_.begin(), events_.end(),
                     [](const CommitEvent& a, const CommitEvent& b) { return a.time < b.time; });
  }

  const std::vector<CommitEvent>& events() const { return events_; }

  // Events strictly before `cutoff`.
  std::span<const CommitEvent> before(Timestamp cutoff) const {
    auto end = std::lower_bound(events_.begin(), events_.end(), cutoff,
                                [](const CommitEvent& e, Timestamp t) { return e.time < t; });
    return {events_.data(), static_cast<std::size_t>(end - events_.begin())};
  }

 private:
  std::vector<CommitEvent> events_;
};

struct CommitCounts {
  std::size_t alpha = 0;    // commits by the author
  std::size_t c_total = 0;  // all commits

  friend bool operator==(const CommitCounts&, const CommitCounts&) = default;
};

inline CommitCounts count_commits(const CommitHistory& history, const AuthorIdentity& author,
                                  Timestamp cutoff) {
  const auto window = history.before(cutoff);
  CommitCounts c;
  c.c_total = window.size();
  c.alpha = static_cast<std::size_t>(std::count_if(
      window.begin(), window.end(), [&](const CommitEvent& e) { return same_author(e.author, author); }));
  return c;
}

struct PullRequestRecord {
  std::int64_t number = 0;
  Timestamp submitted_at;
  std::set<std::string> participants;  // logins that left review comments
};

// Closed pull requests of one repository; only PRs with at least one review
// comment count as reviews.
class PrParticipation {
 public:
  PrParticipation() = default;
  explicit PrParticipation(std::vector<PullRequestRecord> prs) : prs_(std::move(prs)) {
    std::stable_sort(prs_.begin(), prs_.end(), [](const auto& a, const auto& b) {
      return a.submitted_at < b.submitted_at;
    });
  }

  const std::vector<PullRequestRecord>& prs() const { return prs_; }

  std::span<const PullRequestRecord> before(Timestamp cutoff) const {
    auto end = std::lower_bound(prs_.begin(), prs_.end(), cutoff,
                                [](const PullRequestRecord& p, Timestamp t) { return p.submitted_at < t; });
    return {prs_.data(), static_cast<std::size_t>(end - prs_.begin())};
  }

 private:
  std::vector<PullRequestRecord> prs_;
};

struct PrCounts {
  std::size_t r = 0;    // reviews the reviewer commented on
  std::size_t rho = 0;  // all reviews

  friend bool operator==(const PrCounts&, const PrCounts&) = default;
};

inline PrCounts count_prs(const PrParticipation& part, std::string_view reviewer, Timestamp cutoff) {
  PrCounts c;
  for (const auto& pr : part.before(cutoff)) {
    if (pr.participants.empty()) continue;
    ++c.rho;
    if (std::any_of(pr.participants.begin(), pr.participants.end(),
                    [&](const std::string& p) { return iequals(p, reviewer); }))
      ++c.r;
  }
  return c;
}

// ---- on-disk formats ------------------------------------------------------

// Commit history file: one commit per line, tab-separated
// `unix_seconds  login  name  email`; login may be empty.
inline CommitHistory read_commit_history(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open commit history " + path.string());
  std::vector<CommitEvent> events;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string col;
    while (std::getline(ss, col, '\t')) cols.push_back(col);
    while (cols.size() < 4) cols.emplace_back();
    try {
      events.push_back({{cols[1], cols[2], cols[3]}, from_unix(std::stoll(cols[0]))});
    } catch (const std::exception&) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": bad commit time");
    }
  }
  return CommitHistory(std::move(events));
}

inline void write_commit_history(const std::filesystem::path& path, const CommitHistory& h) {
  std::vector<std::string> lines;
  for (const auto& e : h.events())
    lines.push_back(std::to_string(to_unix(e.time)) + "\t" + e.author.login + "\t" + e.author.name +
                    "\t" + e.author.email);
  write_lines(path, lines);
}

// Reads history from a local clone with `git log`. Logins come from noreply
// addresses only.
inline CommitHistory git_commit_history(const std::filesystem::path& repo_dir) {
  const std::string cmd = "git -C '" + repo_dir.string() +
                          "' log --all --no-color --format=%at%x09%an%x09%ae 2>/dev/null";
  std::unique_ptr<FILE, int (*)(FILE*)> pipe(::popen(cmd.c_str(), "r"), &::pclose);
  if (!pipe) throw IoError("cannot run git in " + repo_dir.string());
  std::string out;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, pipe.get())) > 0) out.append(buf, n);
  std::vector<CommitEvent> events;
  std::stringstream ss(out);
  std::string line;
  while (std::getline(ss, line)) {
    std::stringstream ls(line);
    std::string t, name, email;
    std::getline(ls, t, '\t');
    std::getline(ls, name, '\t');
    std::getline(ls, email, '\t');
    if (t.empty()) continue;
    AuthorIdentity who{noreply_login(email).value_or(""), name, email};
    events.push_back({std::move(who), from_unix(std::stoll(t))});
  }
  return CommitHistory(std::move(events));
}

inline json to_json(const PullRequestRecord& pr) {
  return {{"number", pr.number},
          {"submitted_at", format_timestamp(pr.submitted_at)},
          {"participants", pr.participants}};
}

inline PrParticipation read_participation(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open participation file " + path.string());
  std::vector<PullRequestRecord> prs;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      const auto j = json::parse(line);
      PullRequestRecord pr;
      pr.number = j.at("number").get<std::int64_t>();
      pr.submitted_at = parse_timestamp(j.at("submitted_at").get<std::string>());
      pr.participants = j.at("participants").get<std::set<std::string>>();
      prs.push_back(std::move(pr));
    } catch (const json::exception& err) {
      throw ParseError(path.string() + ": " + err.what());
    }
  }
  return PrParticipation(std::move(prs));
}

inline void write_participation(const std::filesystem::path& path, const PrParticipation& p) {
  std::vector<std::string> lines;
  for (const auto& pr : p.prs()) lines.push_back(to_json(pr).dump());
  write_lines(path, lines);
}

}  // namespace revexp::github

#pragma once

// Noise filters over the mined corpus and the per-split removal ledger.

#include <cctype>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "revexp/corpus.hpp"
#include "revexp/error.hpp"
#include "revexp/github/client.hpp"

namespace revexp {

using github::FetchResult;

class BotRegistry {
 public:
  BotRegistry() = default;

  // One username per line; `#` starts a comment; `!name` allow-lists a human
  // account that the suffix rule would otherwise catch.
  static BotRegistry parse(std::string_view text) {
    BotRegistry r;
    std::stringstream ss{std::string(text)};
    std::string line;
    while (std::getline(ss, line)) {
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos) continue;
      const auto last = line.find_last_not_of(" \t\r");
      line = line.substr(first, last - first + 1);
      if (line[0] == '!') {
        if (line.size() > 1) r.allow_.insert(github::to_lower(line.substr(1)));
      } else {
        r.bots_.insert(github::to_lower(line));
      }
    }
    return r;
  }

  static BotRegistry load(const std::filesystem::path& path) { return parse(read_text(path)); }

  void add_bot(std::string_view name) { bots_.insert(github::to_lower(name)); }
  void allow(std::string_view name) { allow_.insert(github::to_lower(name)); }

  bool is_bot(std::string_view username) const {
    const auto lower = github::to_lower(username);
    if (allow_.count(lower)) return false;
    if (bots_.count(lower)) return true;
    auto ends_with = [&](std::string_view suffix) {
      return lower.size() >= suffix.size() &&
             lower.compare(lower.size() - suffix.size(), suffix.size(), suffix) == 0;
    };
    return ends_with("bot") || ends_with("[bot]");
  }

  std::size_t size() const { return bots_.size(); }

 private:
  std::set<std::string> bots_;
  std::set<std::string> allow_;
};

inline bool is_bot(std::string_view username, const BotRegistry& registry) {
  return registry.is_bot(username);
}

namespace detail {

inline bool is_url_start(std::string_view s, std::size_t i) {
  auto starts = [&](std::string_view p) {
    if (s.size() - i < p.size()) return false;
    for (std::size_t k = 0; k < p.size(); ++k)
      if (std::tolower(static_cast<unsigned char>(s[i + k])) != p[k]) return false;
    return true;
  };
  if (i > 0 && std::isalnum(static_cast<unsigned char>(s[i - 1]))) return false;
  return starts("http://") || starts("https://") || starts("www.");
}

// Decodes one code point; malformed bytes decode as U+FFFD with length 1.
inline std::pair<char32_t, std::size_t> decode_utf8(std::string_view s, std::size_t i) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  if (b0 < 0x80) return {b0, 1};
  std::size_t len = b0 >= 0xF0 ? 4 : b0 >= 0xE0 ? 3 : b0 >= 0xC0 ? 2 : 0;
  if (len == 0 || i + len > s.size()) return {0xFFFD, 1};
  char32_t cp = b0 & (0x7F >> len);
  for (std::size_t k = 1; k < len; ++k) {
    const auto b = static_cast<unsigned char>(s[i + k]);
    if ((b & 0xC0) != 0x80) return {0xFFFD, 1};
    cp = (cp << 6) | (b & 0x3F);
  }
  return {cp, len};
}

// ASCII letters plus the letter blocks of the major scripts.
inline bool is_letter(char32_t c) {
  if (c < 0x80) return std::isalpha(static_cast<int>(c)) != 0;
  struct Range {
    char32_t lo, hi;
  };
  static constexpr Range letters[] = {
      {0x00C0, 0x00D6}, {0x00D8, 0x00F6}, {0x00F8, 0x024F}, {0x0370, 0x03FF}, {0x0400, 0x052F},
      {0x05D0, 0x05EA}, {0x0620, 0x064A}, {0x0900, 0x097F}, {0x0E00, 0x0E7F}, {0x1E00, 0x1FFF},
      {0x3040, 0x30FF}, {0x3400, 0x4DBF}, {0x4E00, 0x9FFF}, {0xAC00, 0xD7AF}};
  for (const auto& r : letters)
    if (c >= r.lo && c <= r.hi) return true;
  return false;
}

}  // namespace detail

// Removes fenced blocks, inline code spans and URLs; true iff an alphabetic
// character is left.
inline bool has_natural_language(std::string_view text) {
  std::string rest;
  rest.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    if (text.compare(i, 3, "```") == 0) {
      const auto close = text.find("```", i + 3);
      i = close == std::string_view::npos ? text.size() : close + 3;
      continue;
    }
    if (text[i] == '`') {
      std::size_t run = 0;
      while (i + run < text.size() && text[i + run] == '`') ++run;
      const std::string fence(run, '`');
      const auto close = text.find(fence, i + run);
      if (close != std::string_view::npos) {
        i = close + run;
        continue;
      }
      i += run;
      continue;
    }
    if (detail::is_url_start(text, i)) {
      while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
      continue;
    }
    rest.push_back(text[i]);
    ++i;
  }
  for (std::size_t k = 0; k < rest.size();) {
    const auto [cp, len] = detail::decode_utf8(rest, k);
    if (detail::is_letter(cp)) return true;
    k += len;
  }
  return false;
}

struct SplitLedger {
  std::size_t original_size = 0;
  std::size_t deleted_reviews = 0;
  std::size_t bot_reviews = 0;
  std::size_t code_only_comments = 0;
  std::size_t final_size = 0;
  std::set<std::string> bot_accounts;
  std::set<std::string> reviewer_accounts;  // humans among kept examples

  bool conserved() const {
    return original_size == final_size + deleted_reviews + bot_reviews + code_only_comments;
  }

  SplitLedger& operator+=(const SplitLedger& o) {
    original_size += o.original_size;
    deleted_reviews += o.deleted_reviews;
    bot_reviews += o.bot_reviews;
    code_only_comments += o.code_only_comments;
    final_size += o.final_size;
    bot_accounts.insert(o.bot_accounts.begin(), o.bot_accounts.end());
    reviewer_accounts.insert(o.reviewer_accounts.begin(), o.reviewer_accounts.end());
    return *this;
  }

  friend bool operator==(const SplitLedger&, const SplitLedger&) = default;
};

struct CurationLedger {
  std::map<DatasetSplit, SplitLedger> splits;

  SplitLedger& operator[](DatasetSplit s) { return splits[s]; }
  const SplitLedger& at(DatasetSplit s) const {
    static const SplitLedger empty;
    auto it = splits.find(s);
    return it == splits.end() ? empty : it->second;
  }

  bool conserved() const {
    for (const auto& [_, l] : splits)
      if (!l.conserved()) return false;
    return true;
  }

  CurationLedger& operator+=(const CurationLedger& o) {
    for (const auto& [s, l] : o.splits) splits[s] += l;
    return *this;
  }

  friend bool operator==(const CurationLedger&, const CurationLedger&) = default;
};

struct CurationResult {
  std::vector<ReviewExample> kept;
  CurationLedger ledger;
};

// Precedence: deleted, then bot, then code-only. Kept examples carry the
// mined reviewer and timestamp.
inline CurationResult curate(const std::vector<ReviewExample>& examples,
                             const std::map<ExampleKey, FetchResult>& fetch_results,
                             const BotRegistry& registry) {
  CurationResult out;
  for (auto s : kAllSplits) out.ledger[s];
  for (const auto& e : examples) {
    auto& row = out.ledger[e.split];
    ++row.original_size;
    auto it = fetch_results.find(e.key());
    if (it == fetch_results.end())
      throw ValidationError("no fetch result for example " + to_string(e.key()));
    const auto* found = std::get_if<github::Found>(&it->second);
    if (!found) {
      ++row.deleted_reviews;
      continue;
    }
    if (registry.is_bot(found->reviewer)) {
      ++row.bot_reviews;
      row.bot_accounts.insert(found->reviewer);
      continue;
    }
    if (!has_natural_language(e.r_nl)) {
      ++row.code_only_comments;
      continue;
    }
    ++row.final_size;
    row.reviewer_accounts.insert(found->reviewer);
    ReviewExample kept = e;
    kept.reviewer = found->reviewer;
    kept.created_at = found->created_at;
    out.kept.push_back(std::move(kept));
  }
  return out;
}

inline std::string ledger_csv(const CurationLedger& ledger) {
  std::string out = "split,original,deleted,bots,code_only,final\n";
  for (auto s : kAllSplits) {
    const auto& l = ledger.at(s);
    out += std::string(split_name(s)) + "," + std::to_string(l.original_size) + "," +
           std::to_string(l.deleted_reviews) + "," + std::to_string(l.bot_reviews) + "," +
           std::to_string(l.code_only_comments) + "," + std::to_string(l.final_size) + "\n";
  }
  return out;
}

inline std::string accounts_csv(const CurationLedger& ledger) {
  std::string out = "split,reviewer_accounts,bot_accounts,bots\n";
  for (auto s : kAllSplits) {
    const auto& l = ledger.at(s);
    std::string names;
    for (const auto& b : l.bot_accounts) names += (names.empty() ? "" : ";") + b;
    out += std::string(split_name(s)) + "," + std::to_string(l.reviewer_accounts.size()) + "," +
           std::to_string(l.bot_accounts.size()) + "," + names + "\n";
  }
  return out;
}

// Fetch-result sidecar written by the mining stage: one JSON object per line.
inline json to_json(const ExampleKey& key, const FetchResult& r) {
  json j = {{"repo", key.repo}, {"pr_id", key.pr_id}, {"comment_id", key.comment_id}};
  if (const auto* f = std::get_if<github::Found>(&r)) {
    j["status"] = "found";
    j["reviewer"] = f->reviewer;
    j["created_at"] = format_timestamp(f->created_at);
    j["forge_comment_id"] = f->comment_id;
  } else {
    j["status"] = "deleted";
  }
  return j;
}

inline std::map<ExampleKey, FetchResult> read_fetch_results(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::map<ExampleKey, FetchResult> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      const auto j = json::parse(line);
      ExampleKey key{j.at("repo").get<std::string>(), j.at("pr_id").get<std::int64_t>(),
                     j.at("comment_id").get<std::int64_t>()};
      const auto status = j.at("status").get<std::string>();
      if (status == "found") {
        out[key] = github::Found{j.at("reviewer").get<std::string>(),
                                 parse_timestamp(j.at("created_at").get<std::string>()),
                                 j.value("forge_comment_id", std::int64_t{0})};
      } else if (status == "deleted") {
        out[key] = github::Deleted{};
      } else {
        throw ParseError("unknown fetch status '" + status + "'");
      }
    } catch (const json::exception& err) {
      throw ParseError(path.string() + ": " + err.what());
    }
  }
  return out;
}

}  // namespace revexp

#pragma once

// Authoring / review-specific ownership and the major-minor experience grid.

#include <algorithm>
#include <array>
#include <cstddef>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "revexp/corpus.hpp"
#include "revexp/error.hpp"
#include "revexp/github/history.hpp"
#include "revexp/quadrant.hpp"

namespace revexp {

inline constexpr double kDefaultOwnershipThreshold = 0.05;

struct OwnershipScores {
  double aco = 0.0;
  double rso = 0.0;
};

namespace detail {

inline double ownership_ratio(std::size_t part, std::size_t total, const char* what) {
  if (part > total)
    throw ValidationError(std::string(what) + ": numerator " + std::to_string(part) +
                          " exceeds total " + std::to_string(total));
  if (total == 0) return 0.0;
  return static_cast<double>(part) / static_cast<double>(total);
}

}  // namespace detail

// Share of the repository's prior commits authored by the reviewer.
inline double compute_aco(std::size_t alpha, std::size_t c_total) {
  return detail::ownership_ratio(alpha, c_total, "aco");
}

// Share of the repository's prior closed reviews the reviewer commented on.
inline double compute_rso(std::size_t r, std::size_t rho) {
  return detail::ownership_ratio(r, rho, "rso");
}

// Inclusive on both axes: a score equal to the threshold is major.
inline ExperienceClass classify(OwnershipScores scores,
                                double threshold = kDefaultOwnershipThreshold) {
  if (!(threshold > 0.0 && threshold <= 1.0))
    throw ValidationError("ownership threshold must be in (0, 1]");
  return {scores.aco >= threshold, scores.rso >= threshold};
}

enum class TargetClass { MRMA, MR, MA };

inline std::string_view target_name(TargetClass t) {
  switch (t) {
    case TargetClass::MRMA: return "mrma";
    case TargetClass::MR: return "mr";
    case TargetClass::MA: return "ma";
  }
  return "mrma";
}

inline TargetClass parse_target(std::string_view name) {
  for (auto t : {TargetClass::MRMA, TargetClass::MR, TargetClass::MA})
    if (target_name(t) == name) return t;
  throw ValidationError("unknown target class '" + std::string(name) + "' (expected mrma, mr or ma)");
}

inline bool in_target(ExperienceClass c, TargetClass target) {
  switch (target) {
    case TargetClass::MRMA: return c.major_author && c.major_reviewer;
    case TargetClass::MR: return c.major_reviewer;
    case TargetClass::MA: return c.major_author;
  }
  return false;
}

// Ownership of `reviewer` in one repository from events strictly before `cutoff`.
inline OwnershipScores ownership_at(const std::string& reviewer, const github::CommitHistory& commits,
                                    const github::PrParticipation& prs, Timestamp cutoff) {
  const auto c = github::count_commits(commits, github::AuthorIdentity{reviewer, {}, {}}, cutoff);
  const auto p = github::count_prs(prs, reviewer, cutoff);
  return {compute_aco(c.alpha, c.c_total), compute_rso(p.r, p.rho)};
}

struct SplitDistribution {
  std::array<std::size_t, 4> counts{};  // indexed like kAllQuadrants
  std::array<int, 4> percent{};
  std::size_t total = 0;
};

struct PartitionStats {
  std::map<DatasetSplit, SplitDistribution> splits;
};

// Integer percentages by largest remainder, so each split sums to exactly 100.
inline std::array<int, 4> integer_percentages(const std::array<std::size_t, 4>& counts) {
  const std::size_t total = std::accumulate(counts.begin(), counts.end(), std::size_t{0});
  std::array<int, 4> pct{};
  if (total == 0) return pct;
  std::array<std::size_t, 4> remainder{};
  int assigned = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    pct[i] = static_cast<int>(counts[i] * 100 / total);
    remainder[i] = counts[i] * 100 % total;
    assigned += pct[i];
  }
  std::array<std::size_t, 4> order{0, 1, 2, 3};
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t k = 0; assigned < 100; ++k, ++assigned) ++pct[order[k]];
  return pct;
}

inline PartitionStats partition_stats(const std::vector<ReviewExample>& examples,
                                      const std::vector<DatasetSplit>& splits = {kAllSplits.begin(),
                                                                                 kAllSplits.end()}) {
  PartitionStats stats;
  for (auto s : splits) stats.splits[s];
  for (const auto& e : examples) {
    auto it = stats.splits.find(e.split);
    if (it == stats.splits.end()) continue;
    if (!e.experience)
      throw ValidationError("example " + to_string(e.key()) + " has no experience class");
    ++it->second.counts[quadrant_index(e.experience->quadrant)];
    ++it->second.total;
  }
  for (auto& [split, dist] : stats.splits) {
    if (dist.total == 0) throw ValidationError("split " + std::string(split_name(split)) + " is empty");
    dist.percent = integer_percentages(dist.counts);
  }
  return stats;
}

// Mirrors the distribution table: rows are author classes, columns are
// reviewer class x split.
inline std::string stats_csv(const PartitionStats& stats) {
  std::string out = "author";
  for (const char* rev : {"major_reviewer", "minor_reviewer"})
    for (const auto& [split, _] : stats.splits) out += std::string(",") + rev + "_" + std::string(split_name(split));
  out += "\n";
  for (bool major_author : {true, false}) {
    out += major_author ? "major_author" : "minor_author";
    for (bool major_reviewer : {true, false})
      for (const auto& [_, dist] : stats.splits)
        out += "," + std::to_string(dist.percent[quadrant_index({major_author, major_reviewer})]);
    out += "\n";
  }
  return out;
}

}  // namespace revexp

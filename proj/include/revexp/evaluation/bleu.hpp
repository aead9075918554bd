#pragma once

// Sentence-level BLEU-4 with add-one smoothing of zero-match precisions,
// averaged over a corpus.

#include <array>
#include <cctype>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "revexp/error.hpp"
#include "revexp/experience.hpp"
#include "revexp/quadrant.hpp"

namespace revexp::eval {

using Tokens = std::vector<std::string>;

// Lowercased maximal alphanumeric runs plus single punctuation symbols.
// Bytes >= 0x80 are treated as word characters so UTF-8 words stay whole.
inline Tokens tokenize(std::string_view text) {
  Tokens out;
  std::string word;
  auto is_word = [](unsigned char c) { return std::isalnum(c) || c >= 0x80; };
  for (unsigned char c : text) {
    if (is_word(c)) {
      word.push_back(static_cast<char>(std::tolower(c)));
      continue;
    }
    if (!word.empty()) out.push_back(std::exchange(word, {}));
    if (!std::isspace(c)) out.emplace_back(1, static_cast<char>(c));
  }
  if (!word.empty()) out.push_back(std::move(word));
  return out;
}

struct BleuScore {
  double value = 0.0;  // 0..100
  std::array<double, 4> precisions{};
  double brevity_penalty = 0.0;
};

namespace detail {

inline std::map<std::vector<std::string_view>, std::size_t> ngram_counts(const Tokens& t, std::size_t n) {
  std::map<std::vector<std::string_view>, std::size_t> counts;
  for (std::size_t i = 0; i + n <= t.size(); ++i)
    ++counts[std::vector<std::string_view>(t.begin() + static_cast<std::ptrdiff_t>(i),
                                           t.begin() + static_cast<std::ptrdiff_t>(i + n))];
  return counts;
}

}  // namespace detail

inline BleuScore bleu4(const Tokens& hypothesis, const Tokens& reference) {
  BleuScore score;
  if (hypothesis.empty()) return score;
  double log_sum = 0.0;
  for (std::size_t n = 1; n <= 4; ++n) {
    const auto hyp = detail::ngram_counts(hypothesis, n);
    const auto ref = detail::ngram_counts(reference, n);
    std::size_t matches = 0;
    for (const auto& [gram, count] : hyp)
      if (auto it = ref.find(gram); it != ref.end()) matches += std::min(count, it->second);
    const std::size_t total = hypothesis.size() >= n ? hypothesis.size() - n + 1 : 0;
    const double p = matches > 0 ? static_cast<double>(matches) / static_cast<double>(total)
                                 : 1.0 / static_cast<double>(total + 1);
    score.precisions[n - 1] = p;
    log_sum += std::log(p);
  }
  const auto hyp_len = static_cast<double>(hypothesis.size());
  const auto ref_len = static_cast<double>(reference.size());
  score.brevity_penalty = hyp_len < ref_len ? std::exp(1.0 - ref_len / hyp_len) : 1.0;
  score.value = 100.0 * score.brevity_penalty * std::exp(log_sum / 4.0);
  return score;
}

inline BleuScore bleu4(std::string_view hypothesis, std::string_view reference) {
  return bleu4(tokenize(hypothesis), tokenize(reference));
}

struct TextPair {
  std::string hypothesis;
  std::string reference;
};

inline double corpus_bleu4(const std::vector<TextPair>& pairs) {
  if (pairs.empty()) throw ValidationError("corpus BLEU needs at least one pair");
  double sum = 0.0;
  for (const auto& p : pairs) sum += bleu4(p.hypothesis, p.reference).value;
  return sum / static_cast<double>(pairs.size());
}

// One row of the per-partition results table. Rows overlap: MRMA is the
// intersection of MR and MA.
struct PartitionRow {
  std::string partition;  // All, MRMA, MR, MA
  std::size_t count = 0;
  std::optional<double> bleu;            // absent for an empty partition
  std::optional<std::size_t> se_count;  // only when judgments were supplied
};

inline std::vector<PartitionRow> partitioned_metrics(
    const std::vector<TextPair>& pairs, const std::vector<ExperienceClass>& quadrants,
    const std::optional<std::vector<bool>>& semantic_equivalence = std::nullopt) {
  if (quadrants.size() != pairs.size())
    throw ValidationError("one quadrant per pair is required");
  if (semantic_equivalence && semantic_equivalence->size() != pairs.size())
    throw ValidationError("one semantic-equivalence judgment per pair is required");
  std::vector<double> scores;
  scores.reserve(pairs.size());
  for (const auto& p : pairs) scores.push_back(bleu4(p.hypothesis, p.reference).value);

  struct Group {
    const char* name;
    bool (*member)(ExperienceClass);
  };
  static constexpr Group groups[] = {
      {"All", [](ExperienceClass) { return true; }},
      {"MRMA", [](ExperienceClass c) { return in_target(c, TargetClass::MRMA); }},
      {"MR", [](ExperienceClass c) { return in_target(c, TargetClass::MR); }},
      {"MA", [](ExperienceClass c) { return in_target(c, TargetClass::MA); }},
  };
  std::vector<PartitionRow> rows;
  for (const auto& g : groups) {
    PartitionRow row{g.name, 0, std::nullopt, std::nullopt};
    double sum = 0.0;
    std::size_t se = 0;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      if (!g.member(quadrants[i])) continue;
      ++row.count;
      sum += scores[i];
      if (semantic_equivalence && (*semantic_equivalence)[i]) ++se;
    }
    if (row.count > 0) row.bleu = sum / static_cast<double>(row.count);
    if (semantic_equivalence) row.se_count = se;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace revexp::eval

#pragma once

// Aggregation of adjudicated human judgments into the results tables.

#include <array>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "revexp/error.hpp"
#include "revexp/evaluation/annotation.hpp"
#include "revexp/experience.hpp"

namespace revexp::eval {

struct Fraction {
  std::size_t hits = 0;
  std::size_t total = 0;
};

inline constexpr std::array<const char*, 4> kPartitionRows = {"All", "MRMA", "MR", "MA"};

struct ModelReport {
  std::string model_id;
  std::size_t items = 0;
  std::map<std::string, Fraction> semantic_equivalence;  // by partition row
  std::size_t applicable = 0;
  std::array<std::size_t, 3> feedback{};  // over applicable items
  std::size_t explanation = 0;            // applicable items with an explanation
  std::array<std::size_t, kCategoryCount> categories{};
};

struct ReportBundle {
  std::vector<ModelReport> models;  // sorted by model id
};

inline bool in_partition(const char* row, std::optional<ExperienceClass> q) {
  const std::string r = row;
  if (r == "All") return true;
  if (!q) return false;
  if (r == "MRMA") return in_target(*q, TargetClass::MRMA);
  if (r == "MR") return in_target(*q, TargetClass::MR);
  return in_target(*q, TargetClass::MA);
}

// Expects one final record per (sample, model).
inline ReportBundle aggregate_report(const std::vector<AnnotationRecord>& records,
                                     const std::map<std::string, ExperienceClass>& partitions = {}) {
  std::set<std::pair<std::string, std::string>> seen;
  std::set<std::string> duplicated;
  for (const auto& r : records) {
    validate_record(r);
    if (!seen.insert({r.sample_id, r.model_id}).second) duplicated.insert(r.sample_id);
  }
  if (!duplicated.empty()) {
    std::string ids;
    for (const auto& d : duplicated) ids += (ids.empty() ? "" : ", ") + d;
    throw ValidationError("unadjudicated duplicate annotations for samples: " + ids);
  }

  std::map<std::string, ModelReport> by_model;
  for (const auto& r : records) {
    auto& m = by_model[r.model_id];
    m.model_id = r.model_id;
    ++m.items;
    std::optional<ExperienceClass> q;
    if (auto it = partitions.find(r.sample_id); it != partitions.end()) q = it->second;
    for (const char* row : kPartitionRows) {
      if (!in_partition(row, q)) continue;
      auto& f = m.semantic_equivalence[row];
      ++f.total;
      if (r.semantic_equivalence) ++f.hits;
    }
    if (!r.applicability) continue;
    ++m.applicable;
    ++m.feedback[static_cast<std::size_t>(*r.feedback_type)];
    ++m.categories[static_cast<std::size_t>(*r.category)];
    if (r.has_explanation) ++m.explanation;
  }
  ReportBundle bundle;
  for (auto& [_, m] : by_model) {
    for (const char* row : kPartitionRows) m.semantic_equivalence[row];
    bundle.models.push_back(std::move(m));
  }
  return bundle;
}

namespace detail {

inline std::string csv_header(const char* first, const ReportBundle& b) {
  std::string out = first;
  for (const auto& m : b.models) out += "," + m.model_id;
  return out + "\n";
}

}  // namespace detail

// Semantic equivalence per partition as `hits/total`.
inline std::string semantic_equivalence_csv(const ReportBundle& b) {
  std::string out = detail::csv_header("partition", b);
  for (const char* row : kPartitionRows) {
    out += row;
    for (const auto& m : b.models) {
      const auto& f = m.semantic_equivalence.at(row);
      out += "," + std::to_string(f.hits) + "/" + std::to_string(f.total);
    }
    out += "\n";
  }
  return out;
}

inline std::string human_evaluation_csv(const ReportBundle& b) {
  std::string out = detail::csv_header("measure", b);
  auto row = [&](std::string_view name, auto&& value) {
    out += name;
    for (const auto& m : b.models) out += "," + std::to_string(value(m));
    out += "\n";
  };
  row("Applicability", [](const ModelReport& m) { return m.applicable; });
  for (auto f : kAllFeedbackTypes)
    row(feedback_label(f), [f](const ModelReport& m) { return m.feedback[static_cast<std::size_t>(f)]; });
  row("Explanation", [](const ModelReport& m) { return m.explanation; });
  return out;
}

// Long format for plotting: category,model,count.
inline std::string category_csv(const ReportBundle& b) {
  std::string out = "category,model,count\n";
  for (std::size_t c = 0; c < kCategoryCount; ++c)
    for (const auto& m : b.models)
      out += std::string(kCategoryNames[c].label) + "," + m.model_id + "," +
             std::to_string(m.categories[c]) + "\n";
  return out;
}

}  // namespace revexp::eval

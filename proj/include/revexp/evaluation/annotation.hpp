#pragma once

// Human-judgment record types shared by the sampling, service and report code.

#include <array>
#include <optional>
#include <string>
#include <string_view>

#include "revexp/corpus.hpp"
#include "revexp/error.hpp"
#include "revexp/timestamp.hpp"

namespace revexp::eval {

enum class FeedbackType { Suggestion, Concern, ConfusedQuestion };

inline constexpr std::array<FeedbackType, 3> kAllFeedbackTypes = {
    FeedbackType::Suggestion, FeedbackType::Concern, FeedbackType::ConfusedQuestion};

inline std::string_view feedback_name(FeedbackType f) {
  switch (f) {
    case FeedbackType::Suggestion: return "suggestion";
    case FeedbackType::Concern: return "concern";
    case FeedbackType::ConfusedQuestion: return "confused_question";
  }
  return "suggestion";
}

inline std::string_view feedback_label(FeedbackType f) {
  switch (f) {
    case FeedbackType::Suggestion: return "Suggestion";
    case FeedbackType::Concern: return "Concern";
    case FeedbackType::ConfusedQuestion: return "Confused Question";
  }
  return "Suggestion";
}

inline FeedbackType parse_feedback(std::string_view s) {
  for (auto f : kAllFeedbackTypes)
    if (feedback_name(f) == s) return f;
  throw ValidationError("unknown feedback type '" + std::string(s) + "'");
}

enum class CommentCategory {
  LargerDefect,
  Validation,
  Logical,
  Interface,
  SolutionApproach,
  Question,
  DesignDiscussion,
  Resource,
  Documentation,
  OrganizationOfCode,
  AlternateOutput,
  Support,
  Timing,
  NamingConvention,
  Praise,
  VisualRepresentation,
  FalsePositives,
  Others,
};

inline constexpr std::size_t kCategoryCount = 18;

struct CategoryNames {
  std::string_view key;
  std::string_view label;
};

inline constexpr std::array<CategoryNames, kCategoryCount> kCategoryNames = {{
    {"larger_defect", "Larger Defect"},
    {"validation", "Validation"},
    {"logical", "Logical"},
    {"interface", "Interface"},
    {"solution_approach", "Solution Approach"},
    {"question", "Question"},
    {"design_discussion", "Design Discussion"},
    {"resource", "Resource"},
    {"documentation", "Documentation"},
    {"organization_of_code", "Organization of Code"},
    {"alternate_output", "Alternate Output"},
    {"support", "Support"},
    {"timing", "Timing"},
    {"naming_convention", "Naming Convention"},
    {"praise", "Praise"},
    {"visual_representation", "Visual Representation"},
    {"false_positives", "False Positives"},
    {"others", "Others"},
}};

inline std::string_view category_name(CommentCategory c) {
  return kCategoryNames[static_cast<std::size_t>(c)].key;
}

inline std::string_view category_label(CommentCategory c) {
  return kCategoryNames[static_cast<std::size_t>(c)].label;
}

inline CommentCategory parse_category(std::string_view s) {
  for (std::size_t i = 0; i < kCategoryCount; ++i)
    if (kCategoryNames[i].key == s) return static_cast<CommentCategory>(i);
  throw ValidationError("unknown comment category '" + std::string(s) + "'");
}

struct AnnotationRecord {
  std::string sample_id;
  std::string annotator_id;
  std::string model_id;
  bool semantic_equivalence = false;
  bool applicability = false;
  std::optional<FeedbackType> feedback_type;  // iff applicable
  bool has_explanation = false;
  std::optional<CommentCategory> category;  // iff applicable
  Timestamp annotated_at{};

  friend bool operator==(const AnnotationRecord&, const AnnotationRecord&) = default;
};

// Feedback type and category are present exactly when the comment is applicable.
inline void validate_record(const AnnotationRecord& r) {
  if (r.sample_id.empty()) throw ValidationError("annotation: sample_id is required");
  if (r.applicability) {
    if (!r.feedback_type) throw ValidationError("annotation: feedback_type is required when applicable");
    if (!r.category) throw ValidationError("annotation: category is required when applicable");
  } else {
    if (r.feedback_type) throw ValidationError("annotation: feedback_type must be absent when not applicable");
    if (r.category) throw ValidationError("annotation: category must be absent when not applicable");
  }
}

// Judgment fields only (no identities), as submitted by an annotator.
inline void read_judgment(const json& j, AnnotationRecord& r) {
  auto flag = [&](const char* key) {
    auto it = j.find(key);
    if (it == j.end()) throw ValidationError(std::string("annotation: missing field ") + key);
    if (!it->is_boolean()) throw ValidationError(std::string("annotation: field ") + key + " must be boolean");
    return it->get<bool>();
  };
  r.semantic_equivalence = flag("semantic_equivalence");
  r.applicability = flag("applicability");
  r.has_explanation = flag("has_explanation");
  r.feedback_type.reset();
  r.category.reset();
  if (auto it = j.find("feedback_type"); it != j.end() && !it->is_null()) {
    if (!it->is_string()) throw ValidationError("annotation: feedback_type must be a string");
    r.feedback_type = parse_feedback(it->get<std::string>());
  }
  if (auto it = j.find("category"); it != j.end() && !it->is_null()) {
    if (!it->is_string()) throw ValidationError("annotation: category must be a string");
    r.category = parse_category(it->get<std::string>());
  }
}

inline json judgment_json(const AnnotationRecord& r) {
  return {{"semantic_equivalence", r.semantic_equivalence},
          {"applicability", r.applicability},
          {"feedback_type", r.feedback_type ? json(std::string(feedback_name(*r.feedback_type))) : json(nullptr)},
          {"has_explanation", r.has_explanation},
          {"category", r.category ? json(std::string(category_name(*r.category))) : json(nullptr)}};
}

inline json to_json(const AnnotationRecord& r) {
  json j = judgment_json(r);
  j["sample_id"] = r.sample_id;
  j["annotator_id"] = r.annotator_id;
  j["model_id"] = r.model_id;
  j["annotated_at"] = format_timestamp(r.annotated_at);
  return j;
}

inline AnnotationRecord annotation_from_json(const json& j) {
  AnnotationRecord r;
  try {
    r.sample_id = j.at("sample_id").get<std::string>();
    r.annotator_id = j.value("annotator_id", "");
    r.model_id = j.at("model_id").get<std::string>();
    if (auto it = j.find("annotated_at"); it != j.end() && !it->is_null())
      r.annotated_at = parse_timestamp(it->get<std::string>());
  } catch (const json::exception& err) {
    throw ParseError(std::string("malformed annotation: ") + err.what());
  }
  read_judgment(j, r);
  validate_record(r);
  return r;
}

}  // namespace revexp::eval

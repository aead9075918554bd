#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace revexp {

// One cell of the author-axis x reviewer-axis experience grid.
struct ExperienceClass {
  bool major_author = false;
  bool major_reviewer = false;

  friend bool operator==(const ExperienceClass&, const ExperienceClass&) = default;
};

inline constexpr std::array<ExperienceClass, 4> kAllQuadrants = {
    ExperienceClass{true, true}, ExperienceClass{false, true}, ExperienceClass{true, false},
    ExperienceClass{false, false}};

inline std::string quadrant_name(ExperienceClass c) {
  std::string s = c.major_author ? "major_author" : "minor_author";
  s += c.major_reviewer ? "_major_reviewer" : "_minor_reviewer";
  return s;
}

inline std::optional<ExperienceClass> parse_quadrant(std::string_view name) {
  for (auto q : kAllQuadrants)
    if (quadrant_name(q) == name) return q;
  return std::nullopt;
}

// Position of a quadrant in kAllQuadrants.
inline std::size_t quadrant_index(ExperienceClass c) {
  return (c.major_author ? 0 : 1) + (c.major_reviewer ? 0 : 2);
}

}  // namespace revexp

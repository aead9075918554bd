#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "revexp/error.hpp"

namespace revexp::eval {

class UndefinedKappaError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

struct KappaResult {
  double kappa = 0.0;
  double observed = 0.0;  // po
  double expected = 0.0;  // pe
  std::size_t items = 0;
};

// Cohen's kappa for two raters over the same items. Computed from integer
// counts so that exact rational cases (e.g. po = 0.7, pe = 0.5) round once.
inline KappaResult cohen_kappa(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  if (a.size() != b.size()) throw ValidationError("kappa: label lists differ in length");
  if (a.empty()) throw ValidationError("kappa: no items");
  const auto n = static_cast<std::uint64_t>(a.size());
  std::map<std::string, std::uint64_t> ma, mb;
  std::uint64_t agree = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ++ma[a[i]];
    ++mb[b[i]];
    if (a[i] == b[i]) ++agree;
  }
  std::uint64_t chance = 0;  // sum over labels of count_a * count_b
  for (const auto& [label, ca] : ma)
    if (auto it = mb.find(label); it != mb.end()) chance += ca * it->second;
  const std::uint64_t n2 = n * n;
  if (chance == n2)
    throw UndefinedKappaError("kappa is undefined: expected agreement is 1 (both raters constant)");
  KappaResult r;
  r.items = a.size();
  r.observed = static_cast<double>(agree) / static_cast<double>(n);
  r.expected = static_cast<double>(chance) / static_cast<double>(n2);
  r.kappa = (static_cast<double>(n * agree) - static_cast<double>(chance)) /
            (static_cast<double>(n2) - static_cast<double>(chance));
  return r;
}

// Kappa per consecutive batch and over each growing prefix. Entries that are
// not computable (e.g. a constant batch) are left empty.
struct KappaPoint {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::optional<KappaResult> batch;
  std::optional<KappaResult> cumulative;
};

inline std::vector<KappaPoint> kappa_batches(const std::vector<std::string>& a,
                                             const std::vector<std::string>& b,
                                             std::size_t batch_size) {
  if (a.size() != b.size()) throw ValidationError("kappa: label lists differ in length");
  if (batch_size == 0) throw ValidationError("kappa: batch size must be positive");
  auto safe = [](std::vector<std::string> x, std::vector<std::string> y) -> std::optional<KappaResult> {
    try {
      return cohen_kappa(x, y);
    } catch (const ValidationError&) {
      return std::nullopt;
    }
  };
  std::vector<KappaPoint> out;
  for (std::size_t begin = 0; begin < a.size(); begin += batch_size) {
    const std::size_t end = std::min(a.size(), begin + batch_size);
    KappaPoint p{begin, end, {}, {}};
    p.batch = safe({a.begin() + static_cast<std::ptrdiff_t>(begin), a.begin() + static_cast<std::ptrdiff_t>(end)},
                   {b.begin() + static_cast<std::ptrdiff_t>(begin), b.begin() + static_cast<std::ptrdiff_t>(end)});
    p.cumulative = safe({a.begin(), a.begin() + static_cast<std::ptrdiff_t>(end)},
                        {b.begin(), b.begin() + static_cast<std::ptrdiff_t>(end)});
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace revexp::eval

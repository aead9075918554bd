#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "revexp/evaluation/kappa.hpp"

using namespace revexp::eval;

namespace {

std::vector<std::string> labels(const std::vector<int>& v) {
  std::vector<std::string> out;
  for (int x : v) out.push_back("l" + std::to_string(x));
  return out;
}

// Two raters over 20 items: yes/yes 7, yes/no 3, no/yes 3, no/no 7.
// po = 14/20 = 0.7, pe = 0.5*0.5 + 0.5*0.5 = 0.5.
std::pair<std::vector<std::string>, std::vector<std::string>> seventy_fifty() {
  std::vector<std::string> a, b;
  auto add = [&](int n, const char* x, const char* y) {
    for (int i = 0; i < n; ++i) {
      a.push_back(x);
      b.push_back(y);
    }
  };
  add(7, "yes", "yes");
  add(3, "yes", "no");
  add(3, "no", "yes");
  add(7, "no", "no");
  return {a, b};
}

}  // namespace

TEST(Kappa, PerfectAgreement) {
  const auto a = labels({0, 1, 2, 1, 0});
  EXPECT_EQ(cohen_kappa(a, a).kappa, 1.0);
}

TEST(Kappa, ClosedFormCase) {
  const auto [a, b] = seventy_fifty();
  const auto k = cohen_kappa(a, b);
  EXPECT_EQ(k.observed, 0.7);
  EXPECT_EQ(k.expected, 0.5);
  EXPECT_EQ(k.kappa, 0.4);
  EXPECT_EQ(k.items, 20u);
}

TEST(Kappa, ChanceLevelAndWorse) {
  EXPECT_EQ(cohen_kappa(labels({0, 1, 0, 1}), labels({0, 0, 1, 1})).kappa, 0.0);
  EXPECT_EQ(cohen_kappa(labels({0, 1}), labels({1, 0})).kappa, -1.0);
}

TEST(Kappa, DegenerateCases) {
  EXPECT_THROW(cohen_kappa(labels({1, 1, 1}), labels({1, 1, 1})), UndefinedKappaError);
  EXPECT_THROW(cohen_kappa({}, {}), revexp::ValidationError);
  EXPECT_THROW(cohen_kappa(labels({1}), labels({1, 2})), revexp::ValidationError);
}

TEST(Kappa, MatchesDefinition) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    const int k = 2 + static_cast<int>(rng() % 4);
    std::vector<int> a(5 + rng() % 40), b(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      a[i] = static_cast<int>(rng() % static_cast<unsigned>(k));
      b[i] = rng() % 3 == 0 ? static_cast<int>(rng() % static_cast<unsigned>(k)) : a[i];
    }
    try {
      const auto got = cohen_kappa(labels(a), labels(b)).kappa;
      EXPECT_NEAR(got, oracle::kappa(a, b, k), 1e-12);
    } catch (const UndefinedKappaError&) {
      EXPECT_TRUE(std::all_of(a.begin(), a.end(), [&](int x) { return x == a[0]; }));
    }
  }
}

TEST(Kappa, BatchesAndCumulative) {
  const auto [a, b] = seventy_fifty();
  const auto points = kappa_batches(a, b, 10);
  ASSERT_EQ(points.size(), 2u);
  EXPECT_EQ(points[0].begin, 0u);
  EXPECT_EQ(points[1].end, 20u);
  // First batch: yes/yes 7, yes/no 3 -> rater b varies, rater a constant.
  ASSERT_TRUE(points[0].batch);
  EXPECT_EQ(points[0].batch->kappa, 0.0);
  EXPECT_EQ(points[1].cumulative->kappa, 0.4);
  const auto constant = kappa_batches(labels({1, 1, 1, 1}), labels({1, 1, 1, 1}), 2);
  EXPECT_FALSE(constant[0].batch);
  EXPECT_FALSE(constant[1].cumulative);
  EXPECT_THROW(kappa_batches(a, b, 0), revexp::ValidationError);
}

#include <gtest/gtest.h>

#include "revexp/curation.hpp"
#include "support.hpp"

using namespace revexp;

namespace {

ReviewExample example(DatasetSplit split, std::int64_t id, std::string body) {
  ReviewExample e;
  e.repo = "o/r";
  e.pr_id = id;
  e.comment_id = id;
  e.m_pre = "diff";
  e.r_nl = std::move(body);
  e.split = split;
  return e;
}

github::FetchResult found(std::string who) { return github::Found{std::move(who), from_unix(1000), 1}; }

}  // namespace

TEST(Bots, SuffixRule) {
  const BotRegistry none;
  EXPECT_TRUE(is_bot("dependabot", none));
  EXPECT_TRUE(is_bot("dependabot[bot]", none));
  EXPECT_TRUE(is_bot("Renovate-BOT", none));
  EXPECT_FALSE(is_bot("alice", none));
  EXPECT_FALSE(is_bot("botany", none));
}

TEST(Bots, RegistryMembershipAndAllowList) {
  const auto r = BotRegistry::parse("# automation\ncodecov\n  Travis-CI  # inline comment\n\n!talbot\n");
  EXPECT_EQ(r.size(), 2u);
  EXPECT_TRUE(is_bot("codecov", r));
  EXPECT_TRUE(is_bot("travis-ci", r));
  EXPECT_FALSE(is_bot("codecov", BotRegistry{}));
  EXPECT_FALSE(is_bot("Talbot", r));
  EXPECT_TRUE(is_bot("Talbot", BotRegistry{}));
}

TEST(NaturalLanguage, CodeOnlyBodies) {
  EXPECT_FALSE(has_natural_language("```suggestion\nx += 1\n```"));
  EXPECT_FALSE(has_natural_language("`foo()`"));
  EXPECT_FALSE(has_natural_language("https://example.org/a/b?c=d"));
  EXPECT_FALSE(has_natural_language("www.example.org  ```\nint x;"));
  EXPECT_FALSE(has_natural_language("+1 :)"));
  EXPECT_FALSE(has_natural_language(""));
}

TEST(NaturalLanguage, ProseSurvives) {
  EXPECT_TRUE(has_natural_language("Please use a constant here"));
  EXPECT_TRUE(has_natural_language("Rename:\n```suggestion\nfoo\n```"));
  EXPECT_TRUE(has_natural_language("See https://example.org for why"));
  EXPECT_TRUE(has_natural_language("为什么这里要复制?"));
  EXPECT_TRUE(has_natural_language("Почему?"));
}

TEST(Ledger, PublishedCountsBalance) {
  struct Column {
    std::size_t original, deleted, bots, code_only, final_size;
  };
  const Column tr{150'406, 618, 1'207, 7'322, 141'259};
  const Column val{13'103, 24, 41, 632, 12'406};
  const Column te{13'104, 41, 55, 639, 12'369};
  for (const auto& c : {tr, val, te}) {
    SplitLedger l;
    l.original_size = c.original;
    l.deleted_reviews = c.deleted;
    l.bot_reviews = c.bots;
    l.code_only_comments = c.code_only;
    l.final_size = c.final_size;
    EXPECT_TRUE(l.conserved()) << c.original;
  }
}

TEST(Curate, NoRemovals) {
  const std::vector<ReviewExample> in{example(DatasetSplit::Train, 1, "Looks off"),
                                      example(DatasetSplit::Test, 2, "Why?")};
  std::map<ExampleKey, github::FetchResult> results{{in[0].key(), found("ann")}, {in[1].key(), found("ben")}};
  const auto out = curate(in, results, BotRegistry{});
  ASSERT_EQ(out.kept.size(), 2u);
  EXPECT_EQ(out.kept[0].reviewer, "ann");
  EXPECT_EQ(out.kept[1].created_at, from_unix(1000));
  for (auto s : kAllSplits) {
    const auto& l = out.ledger.at(s);
    EXPECT_EQ(l.deleted_reviews + l.bot_reviews + l.code_only_comments, 0u);
    EXPECT_EQ(l.final_size, l.original_size);
  }
}

TEST(Curate, PrecedenceIsDeletedThenBotThenCodeOnly) {
  const std::vector<ReviewExample> in{
      example(DatasetSplit::Train, 1, "`x`"),      // deleted and code-only
      example(DatasetSplit::Train, 2, "`x`"),      // bot and code-only
      example(DatasetSplit::Train, 3, "`x`"),      // code-only
      example(DatasetSplit::Train, 4, "Nice."),    // kept
  };
  std::map<ExampleKey, github::FetchResult> results{{in[0].key(), github::Deleted{}},
                                                    {in[1].key(), found("ci[bot]")},
                                                    {in[2].key(), found("ann")},
                                                    {in[3].key(), found("ann")}};
  const auto out = curate(in, results, BotRegistry{});
  const auto& l = out.ledger.at(DatasetSplit::Train);
  EXPECT_EQ(l.deleted_reviews, 1u);
  EXPECT_EQ(l.bot_reviews, 1u);
  EXPECT_EQ(l.code_only_comments, 1u);
  EXPECT_EQ(l.final_size, 1u);
  EXPECT_EQ(l.bot_accounts, (std::set<std::string>{"ci[bot]"}));
  EXPECT_EQ(l.reviewer_accounts, (std::set<std::string>{"ann"}));
}

TEST(Curate, MissingFetchResultIsAnError) {
  EXPECT_THROW(curate({example(DatasetSplit::Train, 1, "x")}, {}, BotRegistry{}), ValidationError);
}

TEST(Curate, TwentyExampleFixtureMatchesHandCounts) {
  const auto fx = testsupport::pipeline_fixture();
  const auto corpus = read_corpus(fx / "corpus.jsonl");
  ASSERT_EQ(corpus.size(), 20u);
  // Fetch outcomes as recorded in the fixture's API responses.
  std::map<ExampleKey, github::FetchResult> results;
  const std::set<std::int64_t> deleted{108, 52, 117};
  const std::map<std::int64_t, std::string> bots{{103, "dependabot[bot]"}, {112, "ci-helper"}};
  for (const auto& e : corpus) {
    if (deleted.count(e.pr_id))
      results[e.key()] = github::Deleted{};
    else
      results[e.key()] = found(bots.count(e.pr_id) ? bots.at(e.pr_id) : "human");
  }
  const auto out = curate(corpus, results, BotRegistry::load(fx / "bots.txt"));
  EXPECT_EQ(ledger_csv(out.ledger),
            "split,original,deleted,bots,code_only,final\n"
            "train,12,2,1,2,7\n"
            "validation,4,0,1,0,3\n"
            "test,4,1,0,1,2\n");
  EXPECT_TRUE(out.ledger.conserved());
  EXPECT_EQ(out.kept.size(), 12u);
}

TEST(FetchResults, RoundTrip) {
  testsupport::TempDir dir;
  const ExampleKey a{"o/r", 1, 2}, b{"o/r", 3, 4};
  write_lines(dir / "f.jsonl", std::vector<std::string>{to_json(a, found("ann")).dump(),
                                                         to_json(b, github::Deleted{}).dump()});
  const auto back = read_fetch_results(dir / "f.jsonl");
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(std::get<github::Found>(back.at(a)).reviewer, "ann");
  EXPECT_TRUE(std::holds_alternative<github::Deleted>(back.at(b)));
}

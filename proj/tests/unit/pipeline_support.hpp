#pragma once

#include <filesystem>
#include <string>

#include "revexp/github/client.hpp"
#include "revexp/pipeline.hpp"
#include "support.hpp"

namespace testsupport {

struct PipelineDirs {
  std::filesystem::path mine, curate, experience, stats, splits;
};

// Runs mine through oversample on the recorded fixture, rooted at `root`.
inline PipelineDirs run_fixture_pipeline(const std::filesystem::path& root, const revexp::OversamplePlan& plan) {
  namespace gh = revexp::github;
  namespace pl = revexp::pipeline;
  const auto fx = pipeline_fixture();
  PipelineDirs d{root / "mine", root / "curate", root / "experience", root / "stats", root / "splits"};
  gh::FixtureTransport transport(fx / "api");
  gh::RateBudget budget(2);
  gh::GithubClient client(transport, nullptr, budget);
  pl::mine({fx / "corpus.jsonl", std::nullopt, fx / "commits"}, client, d.mine, {});
  pl::curate(d.mine, revexp::BotRegistry::parse(revexp::read_text(fx / "bots.txt")), d.curate, {});
  pl::experience(d.curate, d.mine, 0.05, d.experience, {});
  pl::stats(d.experience, {revexp::DatasetSplit::Train, revexp::DatasetSplit::Validation, revexp::DatasetSplit::Test},
            d.stats, {});
  pl::oversample(d.experience, plan, d.splits, {});
  return d;
}

}  // namespace testsupport

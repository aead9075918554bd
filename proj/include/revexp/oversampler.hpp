#pragma once

// Experience-aware replication of target-class training examples.

#include <cstdint>
#include <filesystem>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "revexp/corpus.hpp"
#include "revexp/error.hpp"
#include "revexp/experience.hpp"
#include "revexp/rng.hpp"

namespace revexp {

struct OversamplePlan {
  TargetClass target = TargetClass::MRMA;
  int factor = 4;  // total copies of each target example
  std::uint64_t seed = 0;
  bool shuffle = true;
};

inline json to_json(const OversamplePlan& p) {
  return {{"target", std::string(target_name(p.target))},
          {"factor", p.factor},
          {"seed", p.seed},
          {"shuffle", p.shuffle}};
}

inline std::vector<ReviewExample> oversample(const std::vector<ReviewExample>& train,
                                             const OversamplePlan& plan) {
  if (plan.factor < 1) throw ValidationError("oversampling factor must be >= 1");
  if (train.empty()) throw ValidationError("cannot oversample an empty training set");
  std::vector<const ReviewExample*> targets;
  for (const auto& e : train) {
    if (e.split != DatasetSplit::Train)
      throw ValidationError("oversampling plans apply to the training split only; got " +
                            std::string(split_name(e.split)) + " example " + to_string(e.key()));
    if (!e.experience)
      throw ValidationError("example " + to_string(e.key()) + " has no experience class");
    if (in_target(e.experience->quadrant, plan.target)) targets.push_back(&e);
  }
  std::vector<ReviewExample> out;
  out.reserve(train.size() + targets.size() * static_cast<std::size_t>(plan.factor - 1));
  out.insert(out.end(), train.begin(), train.end());
  for (int copy = 1; copy < plan.factor; ++copy)
    for (const auto* e : targets) out.push_back(*e);
  if (plan.shuffle) SeededRng(plan.seed).shuffle(std::span<ReviewExample>(out));
  return out;
}

// Target-to-rest ratio after replicating a fraction `p` of the data `k` times.
inline double achieved_ratio(double p, int k) {
  if (k < 1) throw ValidationError("oversampling factor must be >= 1");
  if (!(p >= 0.0 && p < 1.0))
    throw ValidationError("target fraction must be in [0, 1); no non-target examples remain at 1");
  return k * p / (1.0 - p);
}

struct SplitFiles {
  static constexpr const char* train = "train.jsonl";
  static constexpr const char* validation = "validation.jsonl";
  static constexpr const char* test = "test.jsonl";
};

// Writes the three split files plus a manifest. Validation and test are
// written as given, so their bytes do not depend on the plan.
inline CorpusManifest emit_splits(const std::vector<ReviewExample>& train,
                                  const std::vector<ReviewExample>& validation,
                                  const std::vector<ReviewExample>& test,
                                  const std::filesystem::path& out_dir, CorpusManifest manifest) {
  std::set<ExampleKey> seen;
  for (const auto& e : validation) seen.insert(e.key());
  for (const auto& e : test)
    if (seen.count(e.key()))
      throw ValidationError("example " + to_string(e.key()) + " appears in both validation and test");

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create " + out_dir.string() + ": " + ec.message());
  write_corpus(out_dir / SplitFiles::train, train);
  write_corpus(out_dir / SplitFiles::validation, validation);
  write_corpus(out_dir / SplitFiles::test, test);

  manifest.split_counts = {{"train", train.size()},
                           {"validation", validation.size()},
                           {"test", test.size()}};
  for (const char* f : {SplitFiles::train, SplitFiles::validation, SplitFiles::test})
    add_manifest_file(manifest, out_dir, f);
  write_manifest(out_dir, manifest);
  return manifest;
}

}  // namespace revexp

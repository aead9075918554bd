#pragma once

// Pipeline stages. Each stage reads the previous stage's directory (checking
// its manifest), writes its outputs and a manifest of its own. Only `mine`
// talks to the network, and only through a Transport and the response cache.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "revexp/corpus.hpp"
#include "revexp/curation.hpp"
#include "revexp/evaluation/bleu.hpp"
#include "revexp/evaluation/report.hpp"
#include "revexp/evaluation/sampling.hpp"
#include "revexp/experience.hpp"
#include "revexp/github/cache.hpp"
#include "revexp/github/client.hpp"
#include "revexp/github/history.hpp"
#include "revexp/oversampler.hpp"

namespace revexp::pipeline {

namespace fs = std::filesystem;

inline constexpr const char* kCorpusFile = "corpus.jsonl";
inline constexpr const char* kFetchResultsFile = "fetch_results.jsonl";

using Log = std::function<void(const std::string&)>;

inline std::string repo_file_stem(const std::string& repo) {
  auto [owner, name] = split_repo(repo);
  return owner + "__" + name;
}

inline std::string manifest_checksum(const fs::path& dir) { return sha256_file(dir / kManifestName); }

inline CorpusManifest new_manifest(const std::string& stage, const json& config, std::uint64_t seed = 0) {
  CorpusManifest m;
  m.stage = stage;
  m.config = config;
  m.seed = seed;
  return m;
}

inline std::map<std::string, std::size_t> count_splits(const std::vector<ReviewExample>& examples) {
  std::map<std::string, std::size_t> counts;
  for (auto s : kAllSplits) counts[std::string(split_name(s))] = 0;
  for (const auto& e : examples) ++counts[std::string(split_name(e.split))];
  return counts;
}

inline void require_stage(const CorpusManifest& m, const fs::path& dir, const std::string& stage) {
  if (m.stage != stage)
    throw ValidationError(dir.string() + " holds '" + m.stage + "' output, expected '" + stage + "'");
}

// ---- mine -----------------------------------------------------------------

struct MineInputs {
  fs::path corpus;                       // raw input records
  std::optional<fs::path> clones;        // <clones>/<owner>/<name> git checkouts
  std::optional<fs::path> commit_files;  // <dir>/<owner>/<name>.tsv recorded histories
};

inline CorpusManifest mine(const MineInputs& in, github::GithubClient& client, const fs::path& out,
                           const json& config, const Log& log = {}) {
  auto examples = read_corpus(in.corpus);
  std::vector<std::string> results;
  std::set<std::string> repos;
  for (auto& e : examples) {
    repos.insert(e.repo);
    const auto r = client.fetch_review_meta(e.repo, e.pr_id, e.r_nl);
    if (const auto* f = std::get_if<github::Found>(&r)) {
      e.reviewer = f->reviewer;
      e.created_at = f->created_at;
    }
    results.push_back(to_json(e.key(), r).dump());
  }
  write_corpus(out / kCorpusFile, examples);
  write_lines(out / kFetchResultsFile, results);

  auto m = new_manifest("mine", config);
  m.inputs["corpus"] = sha256_file(in.corpus);
  add_manifest_file(m, out, kCorpusFile);
  add_manifest_file(m, out, kFetchResultsFile);
  for (const auto& repo : repos) {
    const auto stem = repo_file_stem(repo);
    auto [owner, name] = split_repo(repo);
    github::CommitHistory history;
    if (in.clones && fs::exists(*in.clones / owner / name)) {
      history = github::git_commit_history(*in.clones / owner / name);
    } else if (in.commit_files && fs::exists(*in.commit_files / owner / (name + ".tsv"))) {
      history = github::read_commit_history(*in.commit_files / owner / (name + ".tsv"));
    } else if (log) {
      log("warning: no commit history for " + repo + "; authoring ownership will be 0");
    }
    const auto commits_name = "commits/" + stem + ".tsv";
    github::write_commit_history(out / commits_name, history);
    add_manifest_file(m, out, commits_name);
    const auto part_name = "participation/" + stem + ".jsonl";
    github::write_participation(out / part_name, client.fetch_participation(repo));
    add_manifest_file(m, out, part_name);
  }
  m.split_counts = count_splits(examples);
  write_manifest(out, m);
  return m;
}

// ---- curate ---------------------------------------------------------------

inline CorpusManifest curate(const fs::path& mine_dir, const BotRegistry& registry, const fs::path& out,
                             const json& config) {
  require_stage(verify_manifest(mine_dir), mine_dir, "mine");
  const auto examples = read_corpus(mine_dir / kCorpusFile);
  const auto results = read_fetch_results(mine_dir / kFetchResultsFile);
  const auto curated = revexp::curate(examples, results, registry);
  write_corpus(out / kCorpusFile, curated.kept);
  write_text(out / "ledger.csv", ledger_csv(curated.ledger));
  write_text(out / "accounts.csv", accounts_csv(curated.ledger));
  auto m = new_manifest("curate", config);
  m.inputs["mine"] = manifest_checksum(mine_dir);
  add_manifest_file(m, out, kCorpusFile);
  add_manifest_file(m, out, "ledger.csv");
  add_manifest_file(m, out, "accounts.csv");
  m.split_counts = count_splits(curated.kept);
  write_manifest(out, m);
  return m;
}

// ---- experience -----------------------------------------------------------

struct RepoEvents {
  github::CommitHistory commits;
  github::PrParticipation prs;
};

// Ownership is measured at the PR's submission time; the comment time is the
// fallback when the PR is absent from the closed-PR listing.
inline Timestamp ownership_cutoff(const ReviewExample& e, const github::PrParticipation& prs) {
  for (const auto& pr : prs.prs())
    if (pr.number == e.pr_id) return pr.submitted_at;
  if (!e.created_at) throw ValidationError("example " + to_string(e.key()) + " has no comment time");
  return *e.created_at;
}

inline CorpusManifest experience(const fs::path& curate_dir, const fs::path& mine_dir, double threshold,
                                 const fs::path& out, const json& config) {
  require_stage(verify_manifest(curate_dir), curate_dir, "curate");
  require_stage(verify_manifest(mine_dir), mine_dir, "mine");
  auto examples = read_corpus(curate_dir / kCorpusFile);
  std::map<std::string, RepoEvents> events;
  for (auto& e : examples) {
    auto it = events.find(e.repo);
    if (it == events.end()) {
      const auto stem = repo_file_stem(e.repo);
      RepoEvents ev{github::read_commit_history(mine_dir / "commits" / (stem + ".tsv")),
                    github::read_participation(mine_dir / "participation" / (stem + ".jsonl"))};
      it = events.emplace(e.repo, std::move(ev)).first;
    }
    if (e.reviewer.empty()) throw ValidationError("example " + to_string(e.key()) + " has no reviewer");
    const auto cutoff = ownership_cutoff(e, it->second.prs);
    const auto scores = ownership_at(e.reviewer, it->second.commits, it->second.prs, cutoff);
    e.experience = ExperienceTag{scores.aco, scores.rso, classify(scores, threshold)};
  }
  write_corpus(out / kCorpusFile, examples);
  auto m = new_manifest("experience", config);
  m.inputs["curate"] = manifest_checksum(curate_dir);
  m.inputs["mine"] = manifest_checksum(mine_dir);
  add_manifest_file(m, out, kCorpusFile);
  m.split_counts = count_splits(examples);
  write_manifest(out, m);
  return m;
}

// ---- stats ----------------------------------------------------------------

inline PartitionStats stats(const fs::path& experience_dir, const std::vector<DatasetSplit>& splits,
                            const fs::path& out, const json& config) {
  require_stage(verify_manifest(experience_dir), experience_dir, "experience");
  const auto examples = read_corpus(experience_dir / kCorpusFile);
  auto result = partition_stats(examples, splits);
  write_text(out / "distribution.csv", stats_csv(result));
  auto m = new_manifest("stats", config);
  m.inputs["experience"] = manifest_checksum(experience_dir);
  add_manifest_file(m, out, "distribution.csv");
  write_manifest(out, m);
  return result;
}

// ---- oversample + emit ----------------------------------------------------

inline CorpusManifest oversample(const fs::path& experience_dir, const OversamplePlan& plan,
                                 const fs::path& out, const json& config) {
  require_stage(verify_manifest(experience_dir), experience_dir, "experience");
  const auto examples = read_corpus(experience_dir / kCorpusFile);
  std::vector<ReviewExample> train, validation, test;
  for (const auto& e : examples) {
    switch (e.split) {
      case DatasetSplit::Train: train.push_back(e); break;
      case DatasetSplit::Validation: validation.push_back(e); break;
      case DatasetSplit::Test: test.push_back(e); break;
    }
  }
  auto m = new_manifest("oversample", config, plan.seed);
  m.config["plan"] = to_json(plan);
  m.inputs["experience"] = manifest_checksum(experience_dir);
  return emit_splits(revexp::oversample(train, plan), validation, test, out, std::move(m));
}

// ---- bleu -----------------------------------------------------------------

// Hypotheses file: one generated comment per line, aligned with test.jsonl.
inline std::vector<std::string> read_hypotheses(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open hypotheses " + path.string());
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    out.push_back(line);
  }
  return out;
}

inline std::vector<ReviewExample> read_test_split(const fs::path& splits_dir) {
  require_stage(verify_manifest(splits_dir), splits_dir, "oversample");
  return read_corpus(splits_dir / SplitFiles::test);
}

inline std::string bleu(const fs::path& hypotheses, const fs::path& splits_dir, bool by_partition) {
  const auto test = read_test_split(splits_dir);
  const auto hyps = read_hypotheses(hypotheses);
  if (hyps.size() != test.size())
    throw ValidationError(std::to_string(hyps.size()) + " hypotheses for " + std::to_string(test.size()) +
                          " test examples");
  std::vector<eval::TextPair> pairs;
  std::vector<ExperienceClass> quadrants;
  for (std::size_t i = 0; i < test.size(); ++i) {
    pairs.push_back({hyps[i], test[i].r_nl});
    if (by_partition) {
      if (!test[i].experience)
        throw ValidationError("test example " + to_string(test[i].key()) + " has no experience class");
      quadrants.push_back(test[i].experience->quadrant);
    }
  }
  char buf[64];
  std::string out = "partition,count,bleu4\n";
  if (!by_partition) {
    std::snprintf(buf, sizeof buf, "%.4f", eval::corpus_bleu4(pairs));
    return out + "All," + std::to_string(pairs.size()) + "," + buf + "\n";
  }
  for (const auto& row : eval::partitioned_metrics(pairs, quadrants)) {
    out += row.partition + "," + std::to_string(row.count) + ",";
    if (row.bleu) {
      std::snprintf(buf, sizeof buf, "%.4f", *row.bleu);
      out += buf;
    }
    out += "\n";
  }
  return out;
}

// ---- sample ---------------------------------------------------------------

inline eval::SampleFrame sample(const fs::path& splits_dir, const std::map<std::string, fs::path>& models,
                                eval::SamplingParams params, std::optional<std::size_t> n,
                                const fs::path& out) {
  const auto test = read_test_split(splits_dir);
  std::map<std::string, std::vector<std::string>> hyps;
  for (const auto& [id, path] : models) hyps[id] = read_hypotheses(path);
  params.population = test.size();
  const auto size = n.value_or(eval::sample_size(params));
  auto frame = eval::draw_sample(test, hyps, size, params.seed);
  json p = {{"z", params.z},
            {"margin", params.margin},
            {"proportion", params.proportion},
            {"population", params.population},
            {"size", size},
            {"splits_manifest", manifest_checksum(splits_dir)}};
  eval::write_frame(out, frame, p);
  return frame;
}

// ---- report ---------------------------------------------------------------

inline std::vector<eval::AnnotationRecord> read_annotations(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open annotations " + path.string());
  std::vector<eval::AnnotationRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      out.push_back(eval::annotation_from_json(json::parse(line)));
    } catch (const json::parse_error& err) {
      throw ParseError(path.string() + ": " + err.what());
    }
  }
  return out;
}

inline eval::ReportBundle report(const fs::path& annotations, const std::optional<fs::path>& frame_dir,
                                 const fs::path& out, const json& config) {
  std::map<std::string, ExperienceClass> partitions;
  if (frame_dir) {
    const auto frame = eval::read_frame(*frame_dir);
    for (const auto& [sid, b] : frame.blinding)
      if (b.quadrant) partitions[sid] = *b.quadrant;
  }
  const auto bundle = eval::aggregate_report(read_annotations(annotations), partitions);
  write_text(out / "semantic_equivalence.csv", eval::semantic_equivalence_csv(bundle));
  write_text(out / "human_evaluation.csv", eval::human_evaluation_csv(bundle));
  write_text(out / "comment_categories.csv", eval::category_csv(bundle));
  auto m = new_manifest("report", config);
  m.inputs["annotations"] = sha256_file(annotations);
  for (const char* f : {"semantic_equivalence.csv", "human_evaluation.csv", "comment_categories.csv"})
    add_manifest_file(m, out, f);
  write_manifest(out, m);
  return bundle;
}

}  // namespace revexp::pipeline

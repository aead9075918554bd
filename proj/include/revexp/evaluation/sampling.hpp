#pragma once

// Sample sizing and blinded sample frames for the human evaluation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "revexp/corpus.hpp"
#include "revexp/error.hpp"
#include "revexp/rng.hpp"

namespace revexp::eval {

struct SamplingParams {
  std::size_t population = 0;  // N
  double z = 1.96;             // 95% confidence
  double margin = 0.10;        // e
  double proportion = 0.5;     // p-hat
  std::uint64_t seed = 0;
};

// Cochran's size with finite-population correction:
// n0 = z^2 p(1-p) / e^2, n = ceil(n0 / (1 + n0 / N)).
inline std::size_t sample_size(const SamplingParams& params) {
  if (params.population == 0) throw ValidationError("sample size: population must be positive");
  if (!(params.margin > 0.0 && params.margin <= 1.0))
    throw ValidationError("sample size: margin must be in (0, 1]");
  if (!(params.proportion > 0.0 && params.proportion < 1.0))
    throw ValidationError("sample size: proportion must be in (0, 1)");
  if (!(params.z > 0.0)) throw ValidationError("sample size: z must be positive");
  const double n0 = params.z * params.z * params.proportion * (1.0 - params.proportion) /
                    (params.margin * params.margin);
  const double n = n0 / (1.0 + n0 / static_cast<double>(params.population));
  // Absorb representation error so that an exact integer does not round up.
  const auto size = static_cast<std::size_t>(std::ceil(n - 1e-9));
  return std::clamp<std::size_t>(size, 1, params.population);
}

struct GeneratedComment {
  std::string alias;
  std::string text;
};

struct SampleItem {
  std::string sample_id;
  ExampleKey source;
  std::string m_pre;
  std::string ground_truth;
  std::vector<GeneratedComment> comments;  // presentation order (by alias)
};

// Server-side only: alias -> model id, and the source example's quadrant.
struct BlindingEntry {
  std::map<std::string, std::string> alias_to_model;
  std::optional<ExperienceClass> quadrant;
};

struct SampleFrame {
  std::string frame_id;
  std::uint64_t seed = 0;
  std::size_t population = 0;
  std::vector<std::string> models;
  std::vector<SampleItem> items;
  std::map<std::string, BlindingEntry> blinding;  // by sample_id

  const SampleItem* find(const std::string& sample_id) const {
    for (const auto& it : items)
      if (it.sample_id == sample_id) return &it;
    return nullptr;
  }
};

inline std::string alias_for(std::size_t i) {
  std::string s;
  do {
    s.insert(s.begin(), static_cast<char>('A' + i % 26));
    i = i / 26;
  } while (i-- > 0);
  return s;
}

// Uniform sample of `n` test examples without replacement. Each item lists
// the models' comments under per-item shuffled aliases.
inline SampleFrame draw_sample(const std::vector<ReviewExample>& test,
                               const std::map<std::string, std::vector<std::string>>& hypotheses,
                               std::size_t n, std::uint64_t seed) {
  if (n > test.size())
    throw ValidationError("sample of " + std::to_string(n) + " exceeds test set of " +
                          std::to_string(test.size()));
  if (hypotheses.empty()) throw ValidationError("sample frame needs at least one model");
  for (const auto& [model, lines] : hypotheses)
    if (lines.size() != test.size())
      throw ValidationError("model " + model + " has " + std::to_string(lines.size()) +
                            " outputs for " + std::to_string(test.size()) + " test examples");

  SeededRng rng(seed);
  std::vector<std::size_t> idx(test.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < n; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(idx.size() - i));
    std::swap(idx[i], idx[j]);
  }

  SampleFrame frame;
  frame.seed = seed;
  frame.population = test.size();
  for (const auto& [model, _] : hypotheses) frame.models.push_back(model);
  const std::size_t width = std::to_string(n).size();
  for (std::size_t k = 0; k < n; ++k) {
    const auto& ex = test[idx[k]];
    SampleItem item;
    std::string num = std::to_string(k + 1);
    item.sample_id = "s" + std::string(width > num.size() ? width - num.size() : 0, '0') + num;
    item.source = ex.key();
    item.m_pre = ex.m_pre;
    item.ground_truth = ex.r_nl;
    std::vector<std::string> order = frame.models;
    rng.shuffle(std::span<std::string>(order));
    BlindingEntry blind;
    for (std::size_t m = 0; m < order.size(); ++m) {
      const auto alias = alias_for(m);
      item.comments.push_back({alias, hypotheses.at(order[m])[idx[k]]});
      blind.alias_to_model[alias] = order[m];
    }
    if (ex.experience) blind.quadrant = ex.experience->quadrant;
    frame.blinding[item.sample_id] = std::move(blind);
    frame.items.push_back(std::move(item));
  }
  return frame;
}

// ---- files ----------------------------------------------------------------
// frame.jsonl    annotator-visible items
// blinding.jsonl alias -> model map and partition per sample (server only)
// frame.json     frame id, seed, population, models

inline json to_json(const SampleItem& item) {
  json comments = json::array();
  for (const auto& c : item.comments) comments.push_back({{"alias", c.alias}, {"text", c.text}});
  return {{"sample_id", item.sample_id},
          {"repo", item.source.repo},
          {"pr_id", item.source.pr_id},
          {"comment_id", item.source.comment_id},
          {"m_pre", item.m_pre},
          {"ground_truth", item.ground_truth},
          {"comments", comments}};
}

inline std::string frame_items_text(const SampleFrame& frame) {
  std::string out;
  for (const auto& item : frame.items) out += to_json(item).dump() + "\n";
  return out;
}

inline std::string frame_id_of(const SampleFrame& frame) {
  return "frame-" + sha256_hex(frame_items_text(frame)).substr(0, 12);
}

inline void write_frame(const std::filesystem::path& dir, SampleFrame& frame, json params = json::object()) {
  const auto items = frame_items_text(frame);
  frame.frame_id = frame_id_of(frame);
  write_text(dir / "frame.jsonl", items);
  std::string blind;
  for (const auto& item : frame.items) {
    const auto& b = frame.blinding.at(item.sample_id);
    json j = {{"sample_id", item.sample_id}, {"aliases", b.alias_to_model}};
    j["quadrant"] = b.quadrant ? json(quadrant_name(*b.quadrant)) : json(nullptr);
    blind += j.dump() + "\n";
  }
  write_text(dir / "blinding.jsonl", blind);
  json meta = {{"frame_id", frame.frame_id},
               {"seed", frame.seed},
               {"population", frame.population},
               {"size", frame.items.size()},
               {"models", frame.models},
               {"params", std::move(params)}};
  write_text(dir / "frame.json", meta.dump(2) + "\n");
}

inline SampleFrame read_frame(const std::filesystem::path& dir) {
  SampleFrame frame;
  try {
    const auto meta = json::parse(read_text(dir / "frame.json"));
    frame.frame_id = meta.at("frame_id").get<std::string>();
    frame.seed = meta.at("seed").get<std::uint64_t>();
    frame.population = meta.at("population").get<std::size_t>();
    frame.models = meta.at("models").get<std::vector<std::string>>();
    std::ifstream in(dir / "frame.jsonl", std::ios::binary);
    if (!in) throw IoError("cannot open " + (dir / "frame.jsonl").string());
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto j = json::parse(line);
      SampleItem item;
      item.sample_id = j.at("sample_id").get<std::string>();
      item.source = {j.at("repo").get<std::string>(), j.at("pr_id").get<std::int64_t>(),
                     j.at("comment_id").get<std::int64_t>()};
      item.m_pre = j.at("m_pre").get<std::string>();
      item.ground_truth = j.at("ground_truth").get<std::string>();
      for (const auto& c : j.at("comments"))
        item.comments.push_back({c.at("alias").get<std::string>(), c.at("text").get<std::string>()});
      frame.items.push_back(std::move(item));
    }
    std::ifstream bin(dir / "blinding.jsonl", std::ios::binary);
    if (!bin) throw IoError("cannot open " + (dir / "blinding.jsonl").string());
    while (std::getline(bin, line)) {
      if (line.empty()) continue;
      const auto j = json::parse(line);
      BlindingEntry b;
      b.alias_to_model = j.at("aliases").get<std::map<std::string, std::string>>();
      if (auto q = j.find("quadrant"); q != j.end() && !q->is_null())
        b.quadrant = parse_quadrant(q->get<std::string>());
      frame.blinding[j.at("sample_id").get<std::string>()] = std::move(b);
    }
  } catch (const json::exception& err) {
    throw ParseError("malformed sample frame in " + dir.string() + ": " + err.what());
  }
  for (const auto& item : frame.items)
    if (!frame.blinding.count(item.sample_id))
      throw ValidationError("sample " + item.sample_id + " has no blinding entry");
  if (frame_id_of(frame) != frame.frame_id)
    throw ValidationError("sample frame " + dir.string() + " does not match its recorded id");
  return frame;
}

}  // namespace revexp::eval

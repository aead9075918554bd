#include <csignal>
#include <cstdlib>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <pthread.h>

#include <CLI11.hpp>

#include "revexp/annotation/server.hpp"
#include "revexp/github/live_transport.hpp"
#include "revexp/pipeline.hpp"

namespace fs = std::filesystem;
using revexp::json;

namespace {

// Values of every option on `sub`, whether given on the command line, read
// from the config file or left at its default.
json effective_config(const CLI::App& app, const CLI::App& sub) {
  json out = json::object();
  auto collect = [&](const CLI::App& a, json& into) {
    for (const auto* opt : a.get_options()) {
      const auto name = opt->get_single_name();
      if (name.empty() || name == "help" || name == "config" || name == "version" || name == "admin-token") continue;
      if (opt->count() > 0) {
        const auto& res = opt->results();
        into[name] = res.size() == 1 ? json(res.front()) : json(res);
      } else if (!opt->get_default_str().empty()) {
        into[name] = opt->get_default_str();
      } else if (opt->get_expected_min() == 0) {
        into[name] = false;
      }
    }
  };
  collect(app, out);
  json stage = json::object();
  collect(sub, stage);
  out[sub.get_name()] = stage;
  return out;
}

std::map<std::string, fs::path> parse_models(const std::vector<std::string>& specs) {
  std::map<std::string, fs::path> out;
  for (const auto& s : specs) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0 || eq + 1 == s.size())
      throw revexp::ValidationError("--model expects ID=PATH, got '" + s + "'");
    if (!out.emplace(s.substr(0, eq), s.substr(eq + 1)).second)
      throw revexp::ValidationError("model '" + s.substr(0, eq) + "' given twice");
  }
  return out;
}

void print_ledger(const revexp::CorpusManifest& m) {
  for (const auto& [split, n] : m.split_counts) std::cerr << "  " << split << ": " << n << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Experience-aware code review corpus pipeline"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);
  app.set_config("--config", "", "TOML/INI file with default option values");
  std::uint64_t seed = 0;
  app.add_option("--seed", seed, "Seed for every random choice")->capture_default_str();
  app.set_version_flag("--version", revexp::kToolVersion);

  // mine
  auto* mine = app.add_subcommand("mine", "Recover reviewer and time of each comment from GitHub");
  fs::path mine_in, mine_out, cache_dir = ".revexp-cache";
  std::optional<fs::path> fixtures, clones, commit_files;
  std::size_t max_in_flight = 4;
  mine->add_option("--in", mine_in, "Raw corpus (JSONL)")->required()->check(CLI::ExistingFile);
  mine->add_option("--out", mine_out, "Output directory")->required();
  mine->add_option("--fixtures", fixtures, "Recorded responses instead of the live API")
      ->check(CLI::ExistingDirectory);
  mine->add_option("--cache", cache_dir, "Response cache directory")->capture_default_str();
  mine->add_option("--clones", clones, "Local clones as <dir>/<owner>/<name>");
  mine->add_option("--commits", commit_files, "Recorded histories as <dir>/<owner>/<name>.tsv");
  mine->add_option("--max-in-flight", max_in_flight, "Concurrent request cap")->capture_default_str();

  // curate
  auto* curate = app.add_subcommand("curate", "Drop deleted, bot and code-only comments");
  fs::path curate_in, curate_out;
  std::optional<fs::path> bots;
  curate->add_option("--in", curate_in, "Output of mine")->required();
  curate->add_option("--bots", bots, "Bot registry file")->check(CLI::ExistingFile);
  curate->add_option("--out", curate_out, "Output directory")->required();

  // experience
  auto* exp = app.add_subcommand("experience", "Attach ownership scores and quadrant");
  fs::path exp_in, exp_mine, exp_out;
  double threshold = revexp::kDefaultOwnershipThreshold;
  exp->add_option("--in", exp_in, "Output of curate")->required();
  exp->add_option("--mine", exp_mine, "Output of mine (histories)")->required();
  exp->add_option("--threshold", threshold, "Major/minor ownership threshold")->capture_default_str();
  exp->add_option("--out", exp_out, "Output directory")->required();

  // stats
  auto* stats = app.add_subcommand("stats", "Quadrant distribution per split");
  fs::path stats_in, stats_out;
  std::vector<std::string> stats_splits{"train", "validation", "test"};
  stats->add_option("--in", stats_in, "Output of experience")->required();
  stats->add_option("--splits", stats_splits, "Splits to tabulate")->delimiter(',')->capture_default_str();
  stats->add_option("--out", stats_out, "Output directory")->required();

  // oversample
  auto* over = app.add_subcommand("oversample", "Replicate target-class training examples and emit splits");
  fs::path over_in, over_out;
  std::string target = "mrma";
  int factor = 4;
  bool no_shuffle = false;
  over->add_option("--in", over_in, "Output of experience")->required();
  over->add_option("--target", target, "mrma, mr or ma")->capture_default_str();
  over->add_option("--factor", factor, "Total copies of each target example")->capture_default_str();
  over->add_flag("--no-shuffle", no_shuffle, "Keep originals first, copies after");
  over->add_option("--out", over_out, "Output directory")->required();

  // bleu
  auto* bleu = app.add_subcommand("bleu", "Average sentence BLEU-4 of a hypothesis file");
  fs::path hyp, bleu_refs;
  std::optional<fs::path> bleu_out;
  bool by_partition = false;
  bleu->add_option("--hyp", hyp, "One hypothesis per line, aligned with test.jsonl")
      ->required()
      ->check(CLI::ExistingFile);
  bleu->add_option("--refs", bleu_refs, "Output of oversample")->required();
  bleu->add_flag("--by-partition", by_partition, "Rows for All, MRMA, MR and MA");
  bleu->add_option("--out", bleu_out, "CSV file (default stdout)");

  // sample
  auto* sample = app.add_subcommand("sample", "Draw a blinded human-evaluation frame");
  fs::path sample_refs, sample_out;
  std::vector<std::string> model_specs;
  revexp::eval::SamplingParams params;
  std::optional<std::size_t> sample_n;
  sample->add_option("--refs", sample_refs, "Output of oversample")->required();
  sample->add_option("--model", model_specs, "ID=PATH of a hypothesis file")->required();
  sample->add_option("--z", params.z, "z score")->capture_default_str();
  sample->add_option("--margin", params.margin, "Margin of error")->capture_default_str();
  sample->add_option("--proportion", params.proportion, "Assumed proportion")->capture_default_str();
  sample->add_option("--n", sample_n, "Fixed sample size instead of the computed one");
  sample->add_option("--out", sample_out, "Frame directory")->required();

  // serve
  auto* serve = app.add_subcommand("serve", "Run the annotation service");
  std::vector<fs::path> frame_dirs;
  fs::path log_path = "annotations.log";
  std::optional<fs::path> ui_dir;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string admin_token;
  serve->add_option("--frame", frame_dirs, "Frame directory (repeatable)")->required();
  serve->add_option("--log", log_path, "Append-only event log")->capture_default_str();
  serve->add_option("--ui", ui_dir, "Static frontend bundle")->check(CLI::ExistingDirectory);
  serve->add_option("--host", host)->capture_default_str();
  serve->add_option("--port", port)->capture_default_str();
  serve->add_option("--admin-token", admin_token, "Token for export (or REVEXP_ADMIN_TOKEN)");

  // report
  auto* report = app.add_subcommand("report", "Aggregate exported annotations into tables");
  fs::path annotations, report_out;
  std::optional<fs::path> report_frame;
  report->add_option("--annotations", annotations, "Exported NDJSON")->required()->check(CLI::ExistingFile);
  report->add_option("--frame", report_frame, "Frame directory, for partition rows");
  report->add_option("--out", report_out, "Output directory")->required();

  // cache-invalidate
  auto* inval = app.add_subcommand("cache-invalidate", "Remove cached API responses");
  fs::path inval_cache = ".revexp-cache";
  std::string inval_kind, inval_repo;
  inval->add_option("--cache", inval_cache)->capture_default_str();
  inval->add_option("--kind", inval_kind, "pr-comments or pulls-closed");
  inval->add_option("--repo", inval_repo, "owner/name (needs --kind)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : 1;
  }

  const auto log = [](const std::string& msg) { std::cerr << msg << "\n"; };
  try {
    if (*mine) {
      auto config = effective_config(app, *mine);
      std::unique_ptr<revexp::github::Transport> transport;
      if (fixtures) {
        transport = std::make_unique<revexp::github::FixtureTransport>(*fixtures / "api");
        if (!commit_files && fs::exists(*fixtures / "commits")) commit_files = *fixtures / "commits";
      } else {
        auto live = std::make_unique<revexp::github::HttpTransport>();
        if (!live->has_token()) log("warning: GITHUB_TOKEN is not set; unauthenticated rate limits apply");
        transport = std::move(live);
      }
      revexp::github::ResponseCache cache(cache_dir);
      revexp::github::RateBudget budget(max_in_flight);
      revexp::github::GithubClient client(*transport, &cache, budget);
      const auto m = revexp::pipeline::mine({mine_in, clones, commit_files}, client, mine_out, config, log);
      print_ledger(m);
    } else if (*curate) {
      const auto registry = bots ? revexp::BotRegistry::load(*bots) : revexp::BotRegistry{};
      revexp::pipeline::curate(curate_in, registry, curate_out, effective_config(app, *curate));
      std::cout << revexp::read_text(curate_out / "ledger.csv");
    } else if (*exp) {
      const auto m = revexp::pipeline::experience(exp_in, exp_mine, threshold, exp_out, effective_config(app, *exp));
      print_ledger(m);
    } else if (*stats) {
      std::vector<revexp::DatasetSplit> splits;
      for (const auto& s : stats_splits) splits.push_back(revexp::parse_split(s));
      revexp::pipeline::stats(stats_in, splits, stats_out, effective_config(app, *stats));
      std::cout << revexp::read_text(stats_out / "distribution.csv");
    } else if (*over) {
      revexp::OversamplePlan plan{revexp::parse_target(target), factor, seed, !no_shuffle};
      const auto m = revexp::pipeline::oversample(over_in, plan, over_out, effective_config(app, *over));
      print_ledger(m);
    } else if (*bleu) {
      const auto csv = revexp::pipeline::bleu(hyp, bleu_refs, by_partition);
      if (bleu_out)
        revexp::write_text(*bleu_out, csv);
      else
        std::cout << csv;
    } else if (*sample) {
      params.seed = seed;
      const auto frame = revexp::pipeline::sample(sample_refs, parse_models(model_specs), params, sample_n, sample_out);
      std::cout << frame.frame_id << " " << frame.items.size() << " items\n";
    } else if (*serve) {
      if (admin_token.empty())
        if (const char* t = std::getenv("REVEXP_ADMIN_TOKEN")) admin_token = t;
      if (admin_token.empty()) throw revexp::ValidationError("an admin token is required to serve");
      std::vector<revexp::eval::SampleFrame> frames;
      for (const auto& d : frame_dirs) frames.push_back(revexp::eval::read_frame(d));
      revexp::annotation::ServiceOptions opts;
      opts.log_path = log_path;
      opts.admin_token = admin_token;
      revexp::annotation::AnnotationService service(std::move(frames), opts);
      revexp::annotation::AnnotationServer server(service, ui_dir.value_or(fs::path{}));

      sigset_t signals;
      sigemptyset(&signals);
      sigaddset(&signals, SIGINT);
      sigaddset(&signals, SIGTERM);
      pthread_sigmask(SIG_BLOCK, &signals, nullptr);
      std::thread waiter([&] {
        int sig = 0;
        sigwait(&signals, &sig);
        server.stop();
      });
      waiter.detach();
      log("serving on http://" + host + ":" + std::to_string(port));
      if (!server.listen(host, port)) throw revexp::IoError("cannot listen on " + host + ":" + std::to_string(port));
    } else if (*report) {
      revexp::pipeline::report(annotations, report_frame, report_out, effective_config(app, *report));
      std::cout << revexp::read_text(report_out / "semantic_equivalence.csv");
    } else if (*inval) {
      if (!inval_repo.empty() && inval_kind.empty()) throw revexp::ValidationError("--repo needs --kind");
      revexp::github::ResponseCache cache(inval_cache);
      std::cout << cache.invalidate_all(inval_kind, inval_repo) << " entries removed\n";
    }
  } catch (const revexp::Error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return err.exit_code();
  } catch (const fs::filesystem_error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 2;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 0;
}

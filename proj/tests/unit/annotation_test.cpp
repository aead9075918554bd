#include <gtest/gtest.h>

#include "annotation_support.hpp"
#include "support.hpp"

using namespace revexp;
using namespace revexp::annotation;
using testsupport::judgment;
using testsupport::label_body;

namespace {

struct Fixture {
  testsupport::TempDir dir;
  eval::SampleFrame frame = testsupport::annotation_frame(6);
  std::unique_ptr<AnnotationService> service;
  long long clock = 1'700'000'000;

  Fixture() { restart(); }

  void restart() {
    service.reset();
    ServiceOptions opts;
    opts.log_path = dir / "events.log";
    opts.admin_token = "s3cret";
    opts.now = [this] { return from_unix(clock++); };
    service = std::make_unique<AnnotationService>(std::vector<eval::SampleFrame>{frame}, opts);
  }

  std::string create(std::size_t calibration = 3) {
    return service->create_session({{"frame_id", frame.frame_id},
                                    {"annotators", {"first", "fourth"}},
                                    {"calibration_size", calibration}})
        .at("session_id")
        .get<std::string>();
  }

  // Labels every comment of calibration items; `differ` makes the second
  // annotator disagree on semantic equivalence for those sample ids.
  void calibrate(const std::string& sid, const std::set<std::string>& differ = {}) {
    for (const auto* who : {"first", "fourth"})
      for (;;) {
        const auto next = service->next_item(sid, who);
        if (next.at("phase_complete").get<bool>()) break;
        const auto sample = next["item"]["sample_id"].get<std::string>();
        for (const auto& c : next["item"]["comments"]) {
          const bool se = std::string(who) == "fourth" && differ.count(sample) ? false : true;
          service->submit_label(sid, label_body(who, sample, c["alias"], judgment(se, true)));
        }
      }
  }

  void solo(const std::string& sid) {
    for (;;) {
      const auto next = service->next_item(sid, "first");
      if (next.at("phase_complete").get<bool>()) break;
      for (const auto& c : next["item"]["comments"])
        service->submit_label(sid, label_body("first", next["item"]["sample_id"], c["alias"], judgment(false, false)));
    }
  }

  std::string phase(const std::string& sid) { return service->status(sid).at("phase"); }
};

}  // namespace

TEST(Session, CreateValidatesInput) {
  Fixture f;
  EXPECT_THROW(f.service->create_session({{"frame_id", f.frame.frame_id}, {"annotators", {"solo"}}}), ValidationError);
  EXPECT_THROW(f.service->create_session({{"frame_id", f.frame.frame_id}, {"annotators", {"a", "a"}}}),
               ValidationError);
  EXPECT_THROW(f.service->create_session(
                   {{"frame_id", f.frame.frame_id}, {"annotators", {"a", "b"}}, {"calibration_size", 7}}),
               ValidationError);
  EXPECT_THROW(f.service->create_session({{"frame_id", "frame-nope"}, {"annotators", {"a", "b"}}}), NotFoundError);
  const auto sid = f.create();
  EXPECT_EQ(f.phase(sid), "calibration");
  EXPECT_THROW(f.create(), ConflictError);
}

TEST(Session, NextItemIsIdempotentAndBlinded) {
  Fixture f;
  const auto sid = f.create();
  const auto a = f.service->next_item(sid, "first");
  const auto b = f.service->next_item(sid, "first");
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.at("position"), 1);
  EXPECT_EQ(a.at("total"), 3);
  const auto text = a.dump();
  for (const auto& m : testsupport::kSecretModelIds) EXPECT_EQ(text.find(m), std::string::npos);
  EXPECT_THROW(f.service->next_item(sid, "intruder"), AuthError);
}

TEST(Session, LabelAcknowledgedWithProgress) {
  Fixture f;
  const auto sid = f.create();
  const auto next = f.service->next_item(sid, "first");
  const auto sample = next["item"]["sample_id"].get<std::string>();
  const auto r = f.service->submit_label(sid, label_body("first", sample, "A", judgment(true, false)));
  EXPECT_TRUE(r.at("ok").get<bool>());
  EXPECT_EQ(r["progress"]["labeled"], 0);  // item complete only when every alias is labeled
  f.service->submit_label(sid, label_body("first", sample, "B", judgment(true, false)));
  EXPECT_EQ(f.service->status(sid)["progress"]["first"]["labeled"], 1);
  EXPECT_NE(f.service->next_item(sid, "first")["item"]["sample_id"], sample);
}

TEST(Session, InvalidLabelsAreRejected) {
  Fixture f;
  const auto sid = f.create();
  const auto sample = f.service->next_item(sid, "first")["item"]["sample_id"].get<std::string>();
  auto bad = judgment(true, false);
  bad["category"] = "logical";
  EXPECT_THROW(f.service->submit_label(sid, label_body("first", sample, "A", bad)), ValidationError);
  EXPECT_THROW(f.service->submit_label(sid, label_body("first", sample, "Q", judgment(true, false))), NotFoundError);
  EXPECT_THROW(f.service->submit_label(sid, label_body("first", "s9", "A", judgment(true, false))), NotFoundError);
  // Solo items are not open during calibration.
  EXPECT_THROW(f.service->submit_label(sid, label_body("first", f.frame.items[5].sample_id, "A", judgment(true, false))),
               ConflictError);
}

TEST(Session, FullLifecycle) {
  Fixture f;
  const auto sid = f.create(3);
  const auto disputed = f.frame.items[1].sample_id;
  f.calibrate(sid, {disputed});
  EXPECT_EQ(f.phase(sid), "adjudication");
  const auto done = f.service->next_item(sid, "fourth");
  EXPECT_TRUE(done["phase_complete"].get<bool>());
  EXPECT_EQ(done["disagreements"], 2);  // both comments of the disputed item
  EXPECT_EQ(done["unresolved"], 2);

  const auto agreement = f.service->agreement(sid);
  EXPECT_EQ(agreement["doubly_labeled"], 6);
  EXPECT_TRUE(agreement["dimensions"]["semantic_equivalence"]["computable"].get<bool>());
  EXPECT_FALSE(agreement["dimensions"]["applicability"]["computable"].get<bool>());  // constant labels

  const auto adj = f.service->adjudications(sid);
  ASSERT_EQ(adj["items"].size(), 2u);
  EXPECT_EQ(adj["items"][0]["dimensions"], json::array({"semantic_equivalence"}));
  auto bad = judgment(true, false);
  bad["feedback_type"] = "concern";
  bad["annotator"] = "first";
  EXPECT_THROW(f.service->resolve(sid, adj["items"][0]["item"], bad), ValidationError);
  EXPECT_THROW(f.service->resolve(sid, f.frame.items[0].sample_id + "-A", label_body("first", "", "", judgment(true, true))),
               ValidationError);
  auto ok = judgment(true, true);
  ok["annotator"] = "first";
  f.service->resolve(sid, adj["items"][0]["item"], ok);
  EXPECT_EQ(f.phase(sid), "adjudication");
  EXPECT_THROW(f.service->resolve(sid, adj["items"][0]["item"], ok), ConflictError);
  f.service->resolve(sid, adj["items"][1]["item"], ok);
  EXPECT_EQ(f.phase(sid), "solo");

  EXPECT_TRUE(f.service->next_item(sid, "fourth")["phase_complete"].get<bool>());
  EXPECT_THROW(f.service->export_records(sid, "s3cret"), ConflictError);
  f.solo(sid);
  EXPECT_EQ(f.phase(sid), "review");

  const auto queue = f.service->review_queue(sid, "fourth");
  EXPECT_EQ(queue["items"].size(), 6u);
  EXPECT_THROW(f.service->review_queue(sid, "first"), AuthError);
  const auto flagged = f.frame.items[4].sample_id;
  f.service->reopen(sid, {{"annotator", "fourth"}, {"sample_id", flagged}, {"alias", "B"}, {"note", "recheck"}});
  EXPECT_THROW(f.service->close(sid, {{"annotator", "fourth"}}), ConflictError);
  const auto again = f.service->next_item(sid, "first");
  EXPECT_EQ(again["item"]["sample_id"], flagged);
  f.service->submit_label(sid, label_body("first", flagged, "B", judgment(true, true, "concern", "validation")));
  EXPECT_THROW(f.service->close(sid, {{"annotator", "first"}}), AuthError);
  f.service->close(sid, {{"annotator", "fourth"}});
  EXPECT_EQ(f.phase(sid), "closed");

  EXPECT_THROW(f.service->export_records(sid, "wrong"), AuthError);
  const auto records = f.service->export_records(sid, "s3cret");
  ASSERT_EQ(records.size(), f.frame.items.size() * f.frame.models.size());
  std::set<std::pair<std::string, std::string>> units;
  for (const auto& r : records) {
    eval::validate_record(r);
    units.insert({r.sample_id, r.model_id});
    if (r.sample_id == disputed) {
      EXPECT_TRUE(r.applicability);  // the adjudicated record wins
    }
  }
  EXPECT_EQ(units.size(), records.size());
}

TEST(Session, PerfectAgreementGivesKappaOne) {
  Fixture f;
  const auto sid = f.create(4);
  // Vary semantic equivalence per item so the dimension is not constant.
  for (const auto* who : {"first", "fourth"})
    for (std::size_t i = 0; i < 4; ++i)
      for (const auto* alias : {"A", "B"})
        f.service->submit_label(sid, label_body(who, f.frame.items[i].sample_id, alias, judgment(i % 2 == 0, i < 2)));
  EXPECT_EQ(f.phase(sid), "solo");
  const auto k = f.service->agreement(sid);
  EXPECT_EQ(k["dimensions"]["semantic_equivalence"]["kappa"], 1.0);
  EXPECT_EQ(k["dimensions"]["applicability"]["kappa"], 1.0);
  EXPECT_EQ(k["dimensions"]["feedback_type"]["items"], 4);
}

TEST(Session, HandComputedKappaAndNotComputableDimension) {
  Fixture f;
  const auto sid = f.create(5);
  // Ten doubly labeled units. Semantic equivalence: first says yes on units
  // 0-4, fourth says yes on units 0-2 and 5-6. Applicability is never set.
  int unit = 0;
  for (std::size_t i = 0; i < 5; ++i)
    for (const auto* alias : {"A", "B"}) {
      const auto& sample = f.frame.items[i].sample_id;
      f.service->submit_label(sid, label_body("first", sample, alias, judgment(unit < 5, false)));
      f.service->submit_label(sid, label_body("fourth", sample, alias, judgment(unit < 3 || unit == 5 || unit == 6, false)));
      ++unit;
    }
  const auto k = f.service->agreement(sid);
  // Agreement on 6 of 10; both raters say yes 5 times: pe = 0.5, kappa = 0.2.
  EXPECT_NEAR(k["dimensions"]["semantic_equivalence"]["kappa"].get<double>(), 0.2, 1e-12);
  EXPECT_FALSE(k["dimensions"]["feedback_type"]["computable"].get<bool>());
  EXPECT_EQ(k["dimensions"]["feedback_type"]["items"], 0);
  EXPECT_FALSE(k["dimensions"]["category"].contains("kappa"));
}

TEST(Replay, RestartRestoresState) {
  Fixture f;
  const auto sid = f.create(3);
  f.calibrate(sid, {f.frame.items[0].sample_id});
  const auto before = f.service->snapshot();
  f.restart();
  EXPECT_EQ(f.service->snapshot(), before);
  EXPECT_EQ(f.phase(sid), "adjudication");
}

TEST(Replay, TornTailIsDropped) {
  Fixture f;
  const auto sid = f.create(3);
  const auto sample = f.service->next_item(sid, "first")["item"]["sample_id"].get<std::string>();
  f.service->submit_label(sid, label_body("first", sample, "A", judgment(true, false)));
  const auto before = f.service->snapshot();
  f.service.reset();
  {
    std::ofstream out(f.dir / "events.log", std::ios::app | std::ios::binary);
    out << R"({"type":"label","session_id":")" << sid << R"(","sam)";
  }
  f.restart();
  EXPECT_EQ(f.service->snapshot(), before);
  f.service->submit_label(sid, label_body("first", sample, "B", judgment(true, false)));
  const auto after = f.service->snapshot();
  f.restart();
  EXPECT_EQ(f.service->snapshot(), after);
}

TEST(Replay, CorruptMiddleLineIsAnError) {
  Fixture f;
  f.create(3);
  f.service.reset();
  auto text = read_text(f.dir / "events.log");
  write_text(f.dir / "events.log", "garbage\n" + text);
  EXPECT_THROW(f.restart(), ParseError);
}

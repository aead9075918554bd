#include <gtest/gtest.h>

#include <thread>

#include "annotation_support.hpp"
#include "revexp/annotation/server.hpp"
#include "support.hpp"

using namespace revexp;
using namespace revexp::annotation;
using testsupport::judgment;
using testsupport::label_body;

namespace {

class Http : public ::testing::Test {
 protected:
  testsupport::TempDir dir;
  eval::SampleFrame frame = testsupport::annotation_frame(4);
  std::unique_ptr<AnnotationService> service;
  std::unique_ptr<AnnotationServer> server;
  std::unique_ptr<httplib::Client> client;
  std::thread thread;
  std::vector<std::string> bodies;

  void SetUp() override { start(); }
  void TearDown() override { shutdown(); }

  void start() {
    ServiceOptions opts;
    opts.log_path = dir / "events.log";
    opts.admin_token = "s3cret";
    service = std::make_unique<AnnotationService>(std::vector<eval::SampleFrame>{frame}, opts);
    server = std::make_unique<AnnotationServer>(*service);
    const int port = server->bind_any();
    ASSERT_GT(port, 0);
    thread = std::thread([this] { server->listen_after_bind(); });
    server->wait_until_ready();
    client = std::make_unique<httplib::Client>("127.0.0.1", port);
  }

  void shutdown() {
    if (!server) return;
    server->stop();
    thread.join();
    client.reset();
    server.reset();
    service.reset();
  }

  std::pair<int, json> post(const std::string& path, const json& body) {
    auto res = client->Post(path, body.dump(), "application/json");
    if (!res) throw std::runtime_error("no response from " + path);
    bodies.push_back(res->body);
    return {res->status, json::parse(res->body)};
  }

  std::pair<int, json> get(const std::string& path) {
    auto res = client->Get(path);
    if (!res) throw std::runtime_error("no response from " + path);
    bodies.push_back(res->body);
    return {res->status, json::parse(res->body)};
  }

  std::string create(int calibration) {
    auto [status, body] = post("/sessions", {{"frame_id", frame.frame_id},
                                             {"annotators", {"first", "fourth"}},
                                             {"calibration_size", calibration}});
    EXPECT_EQ(status, 201);
    return body.at("session_id");
  }

  void label_all(const std::string& sid, const std::string& who) {
    for (;;) {
      auto [status, next] = get("/sessions/" + sid + "/next?annotator=" + who);
      ASSERT_EQ(status, 200);
      if (next["phase_complete"].get<bool>()) return;
      for (const auto& c : next["item"]["comments"]) {
        auto [s, ack] = post("/sessions/" + sid + "/labels",
                             label_body(who, next["item"]["sample_id"], c["alias"], judgment(true, false)));
        ASSERT_EQ(s, 200) << ack.dump();
      }
    }
  }
};

}  // namespace

TEST_F(Http, StatusCodes) {
  EXPECT_EQ(post("/sessions", {{"frame_id", frame.frame_id}, {"annotators", {"one"}}}).first, 400);
  EXPECT_EQ(post("/sessions", {{"frame_id", "frame-none"}, {"annotators", {"a", "b"}}}).first, 404);
  auto raw = client->Post("/sessions", "{not json", "application/json");
  ASSERT_TRUE(raw);
  EXPECT_EQ(raw->status, 400);

  const auto sid = create(2);
  EXPECT_EQ(post("/sessions", {{"frame_id", frame.frame_id}, {"annotators", {"a", "b"}}, {"calibration_size", 1}}).first,
            409);
  EXPECT_EQ(get("/sessions/session-99").first, 404);
  EXPECT_EQ(get("/sessions/" + sid + "/next?annotator=mallory").first, 403);
  EXPECT_EQ(get("/sessions/" + sid + "/agreement").first, 409);
  EXPECT_EQ(get("/sessions/" + sid + "/agreement?batch_size=abc").first, 400);
  auto bad = judgment(true, false);
  bad["feedback_type"] = "concern";
  EXPECT_EQ(post("/sessions/" + sid + "/labels", label_body("first", frame.items[0].sample_id, "A", bad)).first, 400);

  auto res = client->Get("/sessions/" + sid + "/export");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 403);
  res = client->Get("/sessions/" + sid + "/export", httplib::Headers{{"X-Admin-Token", "s3cret"}});
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 409);
}

TEST_F(Http, WorkflowAndExport) {
  const auto sid = create(2);
  label_all(sid, "first");
  label_all(sid, "fourth");
  EXPECT_EQ(get("/sessions/" + sid).second["phase"], "solo");
  auto [ks, kappa] = get("/sessions/" + sid + "/agreement?batch_size=2");
  EXPECT_EQ(ks, 200);
  EXPECT_EQ(kappa["doubly_labeled"], 4);
  label_all(sid, "first");
  EXPECT_EQ(get("/sessions/" + sid).second["phase"], "review");
  auto [rs, queue] = get("/sessions/" + sid + "/review?annotator=fourth");
  EXPECT_EQ(rs, 200);
  EXPECT_EQ(queue["items"].size(), 4u);
  EXPECT_EQ(post("/sessions/" + sid + "/reopen",
                 {{"annotator", "fourth"}, {"sample_id", frame.items[0].sample_id}, {"alias", "A"}})
                .first,
            400);  // calibration items are not reviewable
  EXPECT_EQ(post("/sessions/" + sid + "/close", {{"annotator", "fourth"}}).first, 200);

  httplib::Headers wrong{{"X-Admin-Token", "guess"}};
  auto denied = client->Get("/sessions/" + sid + "/export", wrong);
  ASSERT_TRUE(denied);
  EXPECT_EQ(denied->status, 403);

  httplib::Headers admin{{"X-Admin-Token", "s3cret"}};
  auto exported = client->Get("/sessions/" + sid + "/export", admin);
  ASSERT_TRUE(exported);
  ASSERT_EQ(exported->status, 200);
  std::istringstream lines(exported->body);
  std::set<std::pair<std::string, std::string>> units;
  std::string line;
  while (std::getline(lines, line)) {
    const auto rec = eval::annotation_from_json(json::parse(line));
    units.insert({rec.sample_id, rec.model_id});
  }
  EXPECT_EQ(units.size(), frame.items.size() * frame.models.size());

  for (const auto& body : bodies)
    for (const auto& model : testsupport::kSecretModelIds) EXPECT_EQ(body.find(model), std::string::npos) << body;
}

TEST_F(Http, RestartKeepsSessions) {
  const auto sid = create(2);
  label_all(sid, "first");
  const auto before = get("/sessions/" + sid).second;
  shutdown();
  start();
  EXPECT_EQ(get("/sessions/" + sid).second, before);
}

TEST_F(Http, ResolveRoute) {
  const auto sid = create(1);
  const auto& sample = frame.items[0].sample_id;
  for (const auto* alias : {"A", "B"}) {
    post("/sessions/" + sid + "/labels", label_body("first", sample, alias, judgment(true, false)));
    post("/sessions/" + sid + "/labels", label_body("fourth", sample, alias, judgment(alias[0] == 'A', false)));
  }
  auto [as, adj] = get("/sessions/" + sid + "/adjudications");
  EXPECT_EQ(as, 200);
  ASSERT_EQ(adj["items"].size(), 1u);
  const std::string item = adj["items"][0]["item"];
  auto verdict = judgment(false, false);
  verdict["annotator"] = "fourth";
  EXPECT_EQ(post("/sessions/" + sid + "/adjudications/" + sample + "-A/resolve", verdict).first, 400);
  EXPECT_EQ(post("/sessions/" + sid + "/adjudications/" + item + "/resolve", verdict).first, 200);
  EXPECT_EQ(get("/sessions/" + sid).second["phase"], "solo");
}

#pragma once

// Annotation protocol service: validates requests against session state,
// appends events durably, then folds them. Transport-independent; the HTTP
// binding lives in server.hpp.

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "revexp/annotation/session.hpp"
#include "revexp/evaluation/kappa.hpp"
#include "revexp/rng.hpp"

namespace revexp::annotation {

// Append-only JSON-lines log. Each append is flushed with fsync before it
// returns.
class EventLog {
 public:
  explicit EventLog(std::filesystem::path path) : path_(std::move(path)) {
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    fd_ = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd_ < 0) throw IoError("cannot open event log " + path_.string() + ": " + std::strerror(errno));
    // Cut a torn tail so the next append starts on a fresh line.
    const auto text = read_text(path_);
    if (!text.empty() && text.back() != '\n') {
      const auto keep = text.rfind('\n');
      if (::ftruncate(fd_, keep == std::string::npos ? 0 : static_cast<off_t>(keep + 1)) != 0)
        throw IoError("cannot repair event log " + path_.string() + ": " + std::strerror(errno));
    }
  }
  EventLog(const EventLog&) = delete;
  EventLog& operator=(const EventLog&) = delete;
  ~EventLog() {
    if (fd_ >= 0) ::close(fd_);
  }

  // Complete events in file order. A torn final line (no trailing newline)
  // was never acknowledged and is dropped.
  std::vector<Event> replay() const {
    std::vector<Event> out;
    const auto text = read_text(path_);
    std::size_t pos = 0;
    while (pos < text.size()) {
      const auto nl = text.find('\n', pos);
      if (nl == std::string::npos) break;
      const auto line = text.substr(pos, nl - pos);
      pos = nl + 1;
      if (line.empty()) continue;
      json j;
      try {
        j = json::parse(line);
      } catch (const json::parse_error& err) {
        throw ParseError("corrupt event log " + path_.string() + ": " + err.what());
      }
      out.push_back(event_from_json(j));
    }
    return out;
  }

  void append(const Event& e) {
    const auto line = to_json(e).dump() + "\n";
    std::size_t written = 0;
    while (written < line.size()) {
      const auto n = ::write(fd_, line.data() + written, line.size() - written);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw IoError("event log write failed: " + std::string(std::strerror(errno)));
      }
      written += static_cast<std::size_t>(n);
    }
    if (::fsync(fd_) != 0) throw IoError("event log fsync failed: " + std::string(std::strerror(errno)));
  }

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  int fd_ = -1;
};

struct ServiceOptions {
  std::filesystem::path log_path;
  std::string admin_token;  // required by export
  std::function<Timestamp()> now = [] {
    return std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now());
  };
};

class AnnotationService {
 public:
  AnnotationService(std::vector<SampleFrame> frames, ServiceOptions options)
      : options_(std::move(options)), log_(options_.log_path) {
    for (auto& f : frames) {
      const auto id = f.frame_id;
      frames_.emplace(id, std::make_unique<SampleFrame>(std::move(f)));
    }
    for (const auto& e : log_.replay()) fold(e);
  }

  // ---- commands -----------------------------------------------------------

  json create_session(const json& body) {
    std::unique_lock lk(mutex_);
    const auto frame_id = string_field(body, "frame_id");
    auto fit = frames_.find(frame_id);
    if (fit == frames_.end()) throw NotFoundError("unknown frame '" + frame_id + "'");
    const auto& frame = *fit->second;
    if (!body.contains("annotators") || !body["annotators"].is_array())
      throw ValidationError("annotators must be a list");
    auto annotators = body["annotators"].get<std::vector<std::string>>();
    if (annotators.size() != 2) throw ValidationError("a session needs exactly 2 annotators");
    if (annotators[0].empty() || annotators[1].empty() || annotators[0] == annotators[1])
      throw ValidationError("annotator ids must be distinct and non-empty");
    const std::size_t calibration = body.value("calibration_size", std::size_t{25});
    if (calibration == 0 || calibration > frame.items.size())
      throw ValidationError("calibration_size must be in [1, " + std::to_string(frame.items.size()) + "]");
    for (const auto& [_, s] : sessions_)
      if (s->frame_id() == frame_id) throw ConflictError("a session already exists for frame " + frame_id);

    SessionCreated created;
    created.session_id = "session-" + std::to_string(sessions_.size() + 1);
    created.frame_id = frame_id;
    created.annotators = annotators;
    created.calibration_size = calibration;
    SeededRng rng(body.value("seed", frame.seed));
    for (std::size_t a = 0; a < 2; ++a) {
      std::vector<std::size_t> order(calibration);
      for (std::size_t i = 0; i < calibration; ++i) order[i] = i;
      rng.shuffle(std::span<std::size_t>(order));
      created.presentation.push_back(std::move(order));
    }
    commit(created);
    const auto& s = *sessions_.at(created.session_id);
    return {{"session_id", s.id()}, {"phase", std::string(phase_name(s.phase()))}};
  }

  json submit_label(const std::string& session_id, const json& body) {
    std::unique_lock lk(mutex_);
    auto& s = session(session_id);
    const auto annotator = string_field(body, "annotator");
    const auto who = enrolled(s, annotator);
    const auto sample_id = string_field(body, "sample_id");
    const auto item = s.item_index(sample_id);
    if (!item) throw NotFoundError("unknown sample '" + sample_id + "'");
    const auto& model = s.model_for(*item, string_field(body, "alias"));
    const Unit unit{sample_id, model};

    bool assigned = false;
    switch (s.phase()) {
      case Phase::Calibration: assigned = s.is_calibration(*item); break;
      case Phase::Solo: assigned = who == 0 && !s.is_calibration(*item); break;
      case Phase::Review: assigned = who == 0 && s.open_flags().count(unit) > 0; break;
      default: break;
    }
    if (!assigned)
      throw ConflictError("sample " + sample_id + " is not assigned to " + annotator + " in phase " +
                          std::string(phase_name(s.phase())));

    AnnotationRecord r;
    r.sample_id = sample_id;
    r.annotator_id = annotator;
    r.model_id = model;
    eval::read_judgment(body, r);
    eval::validate_record(r);
    r.annotated_at = options_.now();
    const auto id = commit(LabelSubmitted{session_id, r});
    return {{"ok", true},
            {"event_id", id},
            {"phase", std::string(phase_name(s.phase()))},
            {"progress", progress(s, annotator)}};
  }

  json resolve(const std::string& session_id, const std::string& item_id, const json& body) {
    std::unique_lock lk(mutex_);
    auto& s = session(session_id);
    const auto annotator = string_field(body, "annotator");
    enrolled(s, annotator);
    if (s.phase() != Phase::Adjudication)
      throw ConflictError("session is in phase " + std::string(phase_name(s.phase())) + ", not adjudication");
    const auto [item, alias] = parse_item_id(s, item_id);
    const Unit unit{s.frame().items[item].sample_id, s.model_for(item, alias)};
    bool disputed = false;
    for (const auto& d : s.disagreements())
      if (d.unit == unit) disputed = true;
    if (!disputed) throw ValidationError("item " + item_id + " is not a disagreement");
    if (s.resolution(unit)) throw ConflictError("item " + item_id + " is already resolved");

    AnnotationRecord r;
    r.sample_id = unit.first;
    r.annotator_id = annotator;
    r.model_id = unit.second;
    eval::read_judgment(body, r);
    eval::validate_record(r);
    r.annotated_at = options_.now();
    const auto id = commit(Resolved{session_id, r});
    return {{"ok", true}, {"event_id", id}, {"phase", std::string(phase_name(s.phase()))}};
  }

  // Second annotator flags a solo item during review; it goes back to the
  // primary annotator.
  json reopen(const std::string& session_id, const json& body) {
    std::unique_lock lk(mutex_);
    auto& s = session(session_id);
    const auto annotator = string_field(body, "annotator");
    if (enrolled(s, annotator) != 1) throw AuthError("only the reviewing annotator can reopen items");
    if (s.phase() != Phase::Review)
      throw ConflictError("items can only be reopened in the review phase");
    const auto sample_id = string_field(body, "sample_id");
    const auto item = s.item_index(sample_id);
    if (!item) throw NotFoundError("unknown sample '" + sample_id + "'");
    if (s.is_calibration(*item)) throw ValidationError("calibration items are settled by adjudication");
    const auto& model = s.model_for(*item, string_field(body, "alias"));
    const auto id = commit(Reopened{session_id, sample_id, model, annotator, body.value("note", "")});
    return {{"ok", true}, {"event_id", id}, {"open_flags", s.open_flags().size()}};
  }

  json close(const std::string& session_id, const json& body) {
    std::unique_lock lk(mutex_);
    auto& s = session(session_id);
    const auto annotator = string_field(body, "annotator");
    if (enrolled(s, annotator) != 1) throw AuthError("only the reviewing annotator can close the session");
    if (s.phase() != Phase::Review) throw ConflictError("session can only be closed from the review phase");
    if (!s.open_flags().empty())
      throw ConflictError(std::to_string(s.open_flags().size()) + " reopened items are still pending");
    const auto id = commit(SessionClosed{session_id, annotator});
    return {{"ok", true}, {"event_id", id}, {"phase", std::string(phase_name(s.phase()))}};
  }

  // ---- queries ------------------------------------------------------------

  json next_item(const std::string& session_id, const std::string& annotator) const {
    std::shared_lock lk(mutex_);
    const auto& s = session(session_id);
    const auto who = enrolled(s, annotator);
    std::vector<std::size_t> queue;
    switch (s.phase()) {
      case Phase::Calibration:
        queue = s.presentation(who);
        break;
      case Phase::Solo:
        if (who == 0)
          for (std::size_t i = s.calibration_size(); i < s.frame().items.size(); ++i) queue.push_back(i);
        break;
      case Phase::Review:
        if (who == 0)
          for (std::size_t i = s.calibration_size(); i < s.frame().items.size(); ++i)
            for (const auto& [_, u] : s.units(i))
              if (s.open_flags().count(u)) {
                queue.push_back(i);
                break;
              }
        break;
      default:
        break;
    }
    for (std::size_t pos = 0; pos < queue.size(); ++pos) {
      const auto item = queue[pos];
      const bool pending =
          s.phase() == Phase::Review ? true : !s.item_labeled(annotator, item);
      if (!pending) continue;
      return item_view(s, annotator, item, pos + 1, queue.size());
    }
    json done = {{"phase_complete", true}, {"phase", std::string(phase_name(s.phase()))}};
    if (s.phase() == Phase::Calibration) done["waiting_for"] = waiting_for(s);
    if (s.phase() != Phase::Calibration) {
      const auto d = s.disagreements();
      std::size_t unresolved = 0;
      for (const auto& x : d)
        if (!s.resolution(x.unit)) ++unresolved;
      done["disagreements"] = d.size();
      done["unresolved"] = unresolved;
    }
    return done;
  }

  json status(const std::string& session_id) const {
    std::shared_lock lk(mutex_);
    const auto& s = session(session_id);
    json progress_by = json::object();
    for (const auto& a : s.annotators()) progress_by[a] = progress(s, a);
    return {{"session_id", s.id()},
            {"frame_id", s.frame_id()},
            {"phase", std::string(phase_name(s.phase()))},
            {"annotators", s.annotators()},
            {"calibration_size", s.calibration_size()},
            {"items", s.frame().items.size()},
            {"progress", progress_by},
            {"open_flags", s.open_flags().size()}};
  }

  // Per-dimension kappa over units labeled by both annotators. Feedback type
  // and category only use units both marked applicable.
  json agreement(const std::string& session_id, std::size_t batch_size = 10) const {
    std::shared_lock lk(mutex_);
    const auto& s = session(session_id);
    struct Pair {
      const AnnotationRecord* a;
      const AnnotationRecord* b;
    };
    std::vector<Pair> pairs;
    for (std::size_t i = 0; i < s.calibration_size(); ++i)
      for (const auto& [_, u] : s.units(i)) {
        const auto* a = s.label(s.primary(), u);
        const auto* b = s.label(s.second(), u);
        if (a && b) pairs.push_back({a, b});
      }
    if (pairs.empty()) throw ConflictError("no items have been labeled by both annotators yet");

    using Extract = std::function<std::optional<std::string>(const AnnotationRecord&)>;
    auto flag = [](bool v) { return std::optional<std::string>(v ? "true" : "false"); };
    const std::vector<std::pair<std::string, Extract>> dims = {
        {"semantic_equivalence", [&](const AnnotationRecord& r) { return flag(r.semantic_equivalence); }},
        {"applicability", [&](const AnnotationRecord& r) { return flag(r.applicability); }},
        {"feedback_type",
         [](const AnnotationRecord& r) -> std::optional<std::string> {
           if (!r.feedback_type) return std::nullopt;
           return std::string(eval::feedback_name(*r.feedback_type));
         }},
        {"has_explanation", [&](const AnnotationRecord& r) { return flag(r.has_explanation); }},
        {"category",
         [](const AnnotationRecord& r) -> std::optional<std::string> {
           if (!r.category) return std::nullopt;
           return std::string(eval::category_name(*r.category));
         }},
    };
    json out = {{"doubly_labeled", pairs.size()}, {"batch_size", batch_size}};
    json dimensions = json::object();
    for (const auto& [name, extract] : dims) {
      std::vector<std::string> la, lb;
      for (const auto& p : pairs) {
        auto x = extract(*p.a);
        auto y = extract(*p.b);
        if (!x || !y) continue;
        la.push_back(*x);
        lb.push_back(*y);
      }
      json d = {{"items", la.size()}};
      if (la.empty()) {
        d["computable"] = false;
        d["reason"] = "no items both annotators marked applicable";
      } else {
        try {
          const auto k = eval::cohen_kappa(la, lb);
          d["computable"] = true;
          d["kappa"] = k.kappa;
          d["observed"] = k.observed;
          d["expected"] = k.expected;
        } catch (const eval::UndefinedKappaError& err) {
          d["computable"] = false;
          d["reason"] = err.what();
        }
        json batches = json::array();
        for (const auto& pt : eval::kappa_batches(la, lb, batch_size)) {
          auto value = [](const std::optional<eval::KappaResult>& r) {
            return r ? json(r->kappa) : json(nullptr);
          };
          batches.push_back({{"begin", pt.begin},
                             {"end", pt.end},
                             {"batch", value(pt.batch)},
                             {"cumulative", value(pt.cumulative)}});
        }
        d["batches"] = batches;
      }
      dimensions[name] = d;
    }
    out["dimensions"] = dimensions;
    return out;
  }

  json adjudications(const std::string& session_id) const {
    std::shared_lock lk(mutex_);
    const auto& s = session(session_id);
    json list = json::array();
    for (const auto& d : s.disagreements()) {
      const auto* res = s.resolution(d.unit);
      list.push_back({{"item", s.frame().items[d.item].sample_id + "-" + d.alias},
                      {"sample_id", s.frame().items[d.item].sample_id},
                      {"alias", d.alias},
                      {"dimensions", d.dimensions},
                      {"labels",
                       {{s.primary(), eval::judgment_json(*s.label(s.primary(), d.unit))},
                        {s.second(), eval::judgment_json(*s.label(s.second(), d.unit))}}},
                      {"resolution", res ? eval::judgment_json(*res) : json(nullptr)}});
    }
    return {{"phase", std::string(phase_name(s.phase()))}, {"items", list}};
  }

  // Solo-phase labels for the reviewing annotator.
  json review_queue(const std::string& session_id, const std::string& annotator) const {
    std::shared_lock lk(mutex_);
    const auto& s = session(session_id);
    if (enrolled(s, annotator) != 1) throw AuthError("only the reviewing annotator has a review queue");
    json list = json::array();
    for (std::size_t i = s.calibration_size(); i < s.frame().items.size(); ++i)
      for (const auto& [alias, u] : s.units(i)) {
        const auto* l = s.label(s.primary(), u);
        list.push_back({{"sample_id", u.first},
                        {"alias", alias},
                        {"label", l ? eval::judgment_json(*l) : json(nullptr)},
                        {"flagged", s.open_flags().count(u) > 0}});
      }
    return {{"phase", std::string(phase_name(s.phase()))}, {"items", list}};
  }

  // Final records, one per sample x model. Requires the admin token because
  // records carry model ids.
  std::vector<AnnotationRecord> export_records(const std::string& session_id,
                                               const std::string& token) const {
    std::shared_lock lk(mutex_);
    if (options_.admin_token.empty() || token != options_.admin_token)
      throw AuthError("export requires the admin token");
    const auto& s = session(session_id);
    if (s.phase() != Phase::Review && s.phase() != Phase::Closed)
      throw ConflictError("export is available from the review phase on");
    std::vector<AnnotationRecord> out;
    for (std::size_t i = 0; i < s.frame().items.size(); ++i)
      for (const auto& [_, u] : s.units(i)) {
        auto r = s.final_record(u);
        if (!r) throw ConflictError("no final record for sample " + u.first);
        out.push_back(std::move(*r));
      }
    return out;
  }

  // Canonical snapshot of every session, for replay comparison.
  json snapshot() const {
    std::shared_lock lk(mutex_);
    json out = json::object();
    for (const auto& [id, s] : sessions_) out[id] = s->to_json();
    return {{"sessions", out}, {"next_event_id", next_event_id_}};
  }

  std::vector<std::string> session_ids() const {
    std::shared_lock lk(mutex_);
    std::vector<std::string> ids;
    for (const auto& [id, _] : sessions_) ids.push_back(id);
    return ids;
  }

 private:
  static std::string string_field(const json& body, const char* key) {
    auto it = body.find(key);
    if (it == body.end() || !it->is_string() || it->get<std::string>().empty())
      throw ValidationError(std::string("missing field ") + key);
    return it->get<std::string>();
  }

  SessionState& session(const std::string& id) {
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw NotFoundError("unknown session '" + id + "'");
    return *it->second;
  }
  const SessionState& session(const std::string& id) const {
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw NotFoundError("unknown session '" + id + "'");
    return *it->second;
  }

  static std::size_t enrolled(const SessionState& s, const std::string& annotator) {
    auto idx = s.annotator_index(annotator);
    if (!idx) throw AuthError("annotator '" + annotator + "' is not enrolled in " + s.id());
    return *idx;
  }

  static std::pair<std::size_t, std::string> parse_item_id(const SessionState& s, const std::string& id) {
    const auto dash = id.rfind('-');
    if (dash == std::string::npos) throw NotFoundError("unknown adjudication item '" + id + "'");
    const auto item = s.item_index(id.substr(0, dash));
    if (!item) throw NotFoundError("unknown adjudication item '" + id + "'");
    return {*item, id.substr(dash + 1)};
  }

  static json progress(const SessionState& s, const std::string& annotator) {
    std::size_t begin = 0, end = 0;
    switch (s.phase()) {
      case Phase::Calibration: end = s.calibration_size(); break;
      case Phase::Solo:
      case Phase::Review:
      case Phase::Closed:
        begin = s.calibration_size();
        end = s.frame().items.size();
        break;
      default: end = s.calibration_size(); break;
    }
    std::size_t labeled = 0;
    for (std::size_t i = begin; i < end; ++i)
      if (s.item_labeled(annotator, i)) ++labeled;
    return {{"labeled", labeled}, {"total", end - begin}};
  }

  static json waiting_for(const SessionState& s) {
    json w = json::array();
    for (const auto& a : s.annotators()) {
      bool done = true;
      for (std::size_t i = 0; i < s.calibration_size() && done; ++i) done = s.item_labeled(a, i);
      if (!done) w.push_back(a);
    }
    return w;
  }

  static json item_view(const SessionState& s, const std::string& annotator, std::size_t item,
                        std::size_t position, std::size_t total) {
    const auto& it = s.frame().items[item];
    json comments = json::array();
    for (const auto& c : it.comments) {
      const Unit u{it.sample_id, s.model_for(item, c.alias)};
      const auto* mine = s.label(annotator, u);
      json entry = {{"alias", c.alias}, {"text", c.text}};
      entry["label"] = mine ? eval::judgment_json(*mine) : json(nullptr);
      entry["flagged"] = s.open_flags().count(u) > 0;
      comments.push_back(entry);
    }
    return {{"phase_complete", false},
            {"phase", std::string(phase_name(s.phase()))},
            {"position", position},
            {"total", total},
            {"item",
             {{"sample_id", it.sample_id},
              {"m_pre", it.m_pre},
              {"ground_truth", it.ground_truth},
              {"comments", comments}}}};
  }

  std::uint64_t commit(EventPayload payload) {
    Event e{next_event_id_, options_.now(), std::move(payload)};
    log_.append(e);
    fold(e);
    return e.event_id;
  }

  void fold(const Event& e) {
    next_event_id_ = std::max(next_event_id_, e.event_id + 1);
    if (const auto* created = std::get_if<SessionCreated>(&e.payload)) {
      auto fit = frames_.find(created->frame_id);
      if (fit == frames_.end())
        throw ValidationError("event log references unloaded frame " + created->frame_id);
      auto state = std::make_unique<SessionState>(*created, *fit->second);
      state->apply(e);
      sessions_[created->session_id] = std::move(state);
      return;
    }
    session(session_of(e)).apply(e);
  }

  ServiceOptions options_;
  EventLog log_;
  std::map<std::string, std::unique_ptr<SampleFrame>> frames_;
  std::map<std::string, std::unique_ptr<SessionState>> sessions_;
  std::uint64_t next_event_id_ = 1;
  mutable std::shared_mutex mutex_;
};

}  // namespace revexp::annotation

#pragma once

// Event-sourced state of one human-evaluation session. The state is a pure
// fold over the session's events; phases only move forward:
// calibration -> adjudication -> solo -> review -> closed.

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <variant>
#include <vector>

#include "revexp/corpus.hpp"
#include "revexp/error.hpp"
#include "revexp/evaluation/annotation.hpp"
#include "revexp/evaluation/sampling.hpp"

namespace revexp::annotation {

using eval::AnnotationRecord;
using eval::SampleFrame;

class NotFoundError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class ConflictError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class AuthError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

enum class Phase { Calibration, Adjudication, Solo, Review, Closed };

inline std::string_view phase_name(Phase p) {
  switch (p) {
    case Phase::Calibration: return "calibration";
    case Phase::Adjudication: return "adjudication";
    case Phase::Solo: return "solo";
    case Phase::Review: return "review";
    case Phase::Closed: return "closed";
  }
  return "calibration";
}

// ---- events ---------------------------------------------------------------

struct SessionCreated {
  std::string session_id;
  std::string frame_id;
  std::vector<std::string> annotators;
  std::size_t calibration_size = 0;
  std::vector<std::vector<std::size_t>> presentation;  // per annotator, calibration item order
};

struct LabelSubmitted {
  std::string session_id;
  AnnotationRecord record;
};

struct Resolved {
  std::string session_id;
  AnnotationRecord record;
};

struct Reopened {
  std::string session_id;
  std::string sample_id;
  std::string model_id;
  std::string by;
  std::string note;
};

struct SessionClosed {
  std::string session_id;
  std::string by;
};

using EventPayload = std::variant<SessionCreated, LabelSubmitted, Resolved, Reopened, SessionClosed>;

struct Event {
  std::uint64_t event_id = 0;
  Timestamp at{};
  EventPayload payload;
};

inline const std::string& session_of(const Event& e) {
  return std::visit([](const auto& p) -> const std::string& { return p.session_id; }, e.payload);
}

inline json to_json(const Event& e) {
  json j = {{"event_id", e.event_id}, {"at", format_timestamp(e.at)}};
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        j["session_id"] = p.session_id;
        if constexpr (std::is_same_v<T, SessionCreated>) {
          j["type"] = "session_created";
          j["frame_id"] = p.frame_id;
          j["annotators"] = p.annotators;
          j["calibration_size"] = p.calibration_size;
          j["presentation"] = p.presentation;
        } else if constexpr (std::is_same_v<T, LabelSubmitted>) {
          j["type"] = "label";
          j["record"] = eval::to_json(p.record);
        } else if constexpr (std::is_same_v<T, Resolved>) {
          j["type"] = "resolved";
          j["record"] = eval::to_json(p.record);
        } else if constexpr (std::is_same_v<T, Reopened>) {
          j["type"] = "reopened";
          j["sample_id"] = p.sample_id;
          j["model_id"] = p.model_id;
          j["by"] = p.by;
          j["note"] = p.note;
        } else {
          j["type"] = "closed";
          j["by"] = p.by;
        }
      },
      e.payload);
  return j;
}

inline Event event_from_json(const json& j) {
  Event e;
  try {
    e.event_id = j.at("event_id").get<std::uint64_t>();
    e.at = parse_timestamp(j.at("at").get<std::string>());
    const auto type = j.at("type").get<std::string>();
    const auto sid = j.at("session_id").get<std::string>();
    if (type == "session_created") {
      e.payload = SessionCreated{sid, j.at("frame_id").get<std::string>(),
                                 j.at("annotators").get<std::vector<std::string>>(),
                                 j.at("calibration_size").get<std::size_t>(),
                                 j.at("presentation").get<std::vector<std::vector<std::size_t>>>()};
    } else if (type == "label") {
      e.payload = LabelSubmitted{sid, eval::annotation_from_json(j.at("record"))};
    } else if (type == "resolved") {
      e.payload = Resolved{sid, eval::annotation_from_json(j.at("record"))};
    } else if (type == "reopened") {
      e.payload = Reopened{sid, j.at("sample_id").get<std::string>(), j.at("model_id").get<std::string>(),
                           j.at("by").get<std::string>(), j.value("note", "")};
    } else if (type == "closed") {
      e.payload = SessionClosed{sid, j.at("by").get<std::string>()};
    } else {
      throw ParseError("unknown event type '" + type + "'");
    }
  } catch (const json::exception& err) {
    throw ParseError(std::string("malformed event: ") + err.what());
  }
  return e;
}

// ---- state ----------------------------------------------------------------

using Unit = std::pair<std::string, std::string>;  // (sample_id, model_id)

struct Flag {
  std::string by;
  std::string note;
};

inline bool same_judgment(const AnnotationRecord& a, const AnnotationRecord& b) {
  return a.semantic_equivalence == b.semantic_equivalence && a.applicability == b.applicability &&
         a.feedback_type == b.feedback_type && a.has_explanation == b.has_explanation &&
         a.category == b.category;
}

inline std::vector<std::string> differing_dimensions(const AnnotationRecord& a, const AnnotationRecord& b) {
  std::vector<std::string> out;
  if (a.semantic_equivalence != b.semantic_equivalence) out.emplace_back("semantic_equivalence");
  if (a.applicability != b.applicability) out.emplace_back("applicability");
  if (a.feedback_type != b.feedback_type) out.emplace_back("feedback_type");
  if (a.has_explanation != b.has_explanation) out.emplace_back("has_explanation");
  if (a.category != b.category) out.emplace_back("category");
  return out;
}

class SessionState {
 public:
  SessionState(const SessionCreated& created, const SampleFrame& frame)
      : created_(created), frame_(&frame) {}

  const std::string& id() const { return created_.session_id; }
  const std::string& frame_id() const { return created_.frame_id; }
  const std::vector<std::string>& annotators() const { return created_.annotators; }
  const std::string& primary() const { return created_.annotators.at(0); }
  const std::string& second() const { return created_.annotators.at(1); }
  std::size_t calibration_size() const { return created_.calibration_size; }
  const std::vector<std::size_t>& presentation(std::size_t annotator) const {
    return created_.presentation.at(annotator);
  }
  Phase phase() const { return phase_; }
  const SampleFrame& frame() const { return *frame_; }
  std::size_t event_count() const { return events_; }

  std::optional<std::size_t> annotator_index(std::string_view who) const {
    for (std::size_t i = 0; i < created_.annotators.size(); ++i)
      if (created_.annotators[i] == who) return i;
    return std::nullopt;
  }

  bool is_calibration(std::size_t item) const { return item < created_.calibration_size; }

  std::optional<std::size_t> item_index(std::string_view sample_id) const {
    for (std::size_t i = 0; i < frame_->items.size(); ++i)
      if (frame_->items[i].sample_id == sample_id) return i;
    return std::nullopt;
  }

  const std::string& model_for(std::size_t item, std::string_view alias) const {
    const auto& b = frame_->blinding.at(frame_->items[item].sample_id).alias_to_model;
    auto it = b.find(std::string(alias));
    if (it == b.end()) throw NotFoundError("unknown comment alias '" + std::string(alias) + "'");
    return it->second;
  }

  const AnnotationRecord* label(std::string_view annotator, const Unit& u) const {
    auto it = labels_.find({std::string(annotator), u.first, u.second});
    return it == labels_.end() ? nullptr : &it->second;
  }

  const AnnotationRecord* resolution(const Unit& u) const {
    auto it = resolutions_.find(u);
    return it == resolutions_.end() ? nullptr : &it->second;
  }

  const std::map<Unit, Flag>& open_flags() const { return flags_; }

  // Units of an item, in alias order.
  std::vector<std::pair<std::string, Unit>> units(std::size_t item) const {
    std::vector<std::pair<std::string, Unit>> out;
    const auto& sid = frame_->items[item].sample_id;
    for (const auto& [alias, model] : frame_->blinding.at(sid).alias_to_model)
      out.push_back({alias, {sid, model}});
    return out;
  }

  bool item_labeled(std::string_view annotator, std::size_t item) const {
    for (const auto& [_, u] : units(item))
      if (!label(annotator, u)) return false;
    return true;
  }

  struct Disagreement {
    std::size_t item = 0;
    std::string alias;
    Unit unit;
    std::vector<std::string> dimensions;
  };

  // Calibration units labeled by both annotators with differing judgments.
  std::vector<Disagreement> disagreements() const {
    std::vector<Disagreement> out;
    for (std::size_t i = 0; i < created_.calibration_size; ++i)
      for (const auto& [alias, u] : units(i)) {
        const auto* a = label(primary(), u);
        const auto* b = label(second(), u);
        if (!a || !b || same_judgment(*a, *b)) continue;
        out.push_back({i, alias, u, differing_dimensions(*a, *b)});
      }
    return out;
  }

  // Final record per unit: the resolution, or the primary annotator's label.
  std::optional<AnnotationRecord> final_record(const Unit& u) const {
    if (const auto* r = resolution(u)) return *r;
    if (const auto* l = label(primary(), u)) return *l;
    return std::nullopt;
  }

  // Events are validated before they are logged; apply only folds.
  void apply(const Event& e) {
    ++events_;
    std::visit(
        [&](const auto& p) {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, LabelSubmitted>) {
            const auto& r = p.record;
            labels_[{r.annotator_id, r.sample_id, r.model_id}] = r;
            flags_.erase({r.sample_id, r.model_id});
          } else if constexpr (std::is_same_v<T, Resolved>) {
            resolutions_[{p.record.sample_id, p.record.model_id}] = p.record;
          } else if constexpr (std::is_same_v<T, Reopened>) {
            flags_[{p.sample_id, p.model_id}] = {p.by, p.note};
          } else if constexpr (std::is_same_v<T, SessionClosed>) {
            if (phase_ == Phase::Review && flags_.empty()) phase_ = Phase::Closed;
          }
        },
        e.payload);
    advance();
  }

  json to_json() const {
    json labels = json::array();
    for (const auto& [_, r] : labels_) labels.push_back(eval::to_json(r));
    json resolutions = json::array();
    for (const auto& [_, r] : resolutions_) resolutions.push_back(eval::to_json(r));
    json flags = json::array();
    for (const auto& [u, f] : flags_)
      flags.push_back({{"sample_id", u.first}, {"model_id", u.second}, {"by", f.by}, {"note", f.note}});
    return {{"session_id", created_.session_id},
            {"frame_id", created_.frame_id},
            {"annotators", created_.annotators},
            {"calibration_size", created_.calibration_size},
            {"presentation", created_.presentation},
            {"phase", std::string(phase_name(phase_))},
            {"labels", labels},
            {"resolutions", resolutions},
            {"flags", flags},
            {"events", events_}};
  }

 private:
  void advance() {
    for (;;) {
      const Phase before = phase_;
      switch (phase_) {
        case Phase::Calibration: {
          bool done = true;
          for (std::size_t i = 0; i < created_.calibration_size && done; ++i)
            done = item_labeled(primary(), i) && item_labeled(second(), i);
          if (done) phase_ = Phase::Adjudication;
          break;
        }
        case Phase::Adjudication: {
          bool done = true;
          for (const auto& d : disagreements())
            if (!resolution(d.unit)) done = false;
          if (done) phase_ = Phase::Solo;
          break;
        }
        case Phase::Solo: {
          bool done = true;
          for (std::size_t i = created_.calibration_size; i < frame_->items.size() && done; ++i)
            done = item_labeled(primary(), i);
          if (done) phase_ = Phase::Review;
          break;
        }
        case Phase::Review:
        case Phase::Closed:
          break;
      }
      if (phase_ == before) return;
    }
  }

  SessionCreated created_;
  const SampleFrame* frame_;
  Phase phase_ = Phase::Calibration;
  std::map<std::tuple<std::string, std::string, std::string>, AnnotationRecord> labels_;
  std::map<Unit, AnnotationRecord> resolutions_;
  std::map<Unit, Flag> flags_;
  std::size_t events_ = 0;
};

}  // namespace revexp::annotation

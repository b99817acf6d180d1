// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "clueseek/interval.hpp"
#include "clueseek/json_io.hpp"

namespace clueseek {

enum class Saliency { Salient, Subtle };

inline const char * to_string(Saliency s) {
    return s == Saliency::Salient ? "salient" : "subtle";
}

inline Saliency saliency_from_string(const std::string & s) {
    if (s == "salient") return Saliency::Salient;
    if (s == "subtle") return Saliency::Subtle;
    throw Error(ErrorCode::Malformed, "unknown saliency '" + s + "'");
}

enum class SampleTag { Free, TrajectoryGuided };

inline const char * to_string(SampleTag t) {
    return t == SampleTag::Free ? "free" : "trajectory_guided";
}

inline SampleTag tag_from_string(const std::string & s) {
    if (s == "free") return SampleTag::Free;
    if (s == "trajectory_guided") return SampleTag::TrajectoryGuided;
    throw Error(ErrorCode::Malformed, "unknown tag '" + s + "'");
}

enum class TaskType {
    SingleClueDirect,
    SingleClueTool,
    MultiClueDirect,
    MultiClueTool,
    SelfReflectionTool,
    FreeFormatTool,
};

inline constexpr TaskType kAllTaskTypes[] = {
    TaskType::SingleClueDirect, TaskType::SingleClueTool,  TaskType::MultiClueDirect,
    TaskType::MultiClueTool,    TaskType::SelfReflectionTool, TaskType::FreeFormatTool,
};

inline const char * to_string(TaskType t) {
    switch (t) {
        case TaskType::SingleClueDirect:   return "SingleClueDirect";
        case TaskType::SingleClueTool:     return "SingleClueTool";
        case TaskType::MultiClueDirect:    return "MultiClueDirect";
        case TaskType::MultiClueTool:      return "MultiClueTool";
        case TaskType::SelfReflectionTool: return "SelfReflectionTool";
        case TaskType::FreeFormatTool:     return "FreeFormatTool";
    }
    return "?";
}

inline TaskType task_type_from_string(const std::string & s) {
    for (TaskType t : kAllTaskTypes) {
        if (s == to_string(t)) return t;
    }
    throw Error(ErrorCode::Malformed, "unknown task_type '" + s + "'");
}

/// One labeled moment on a synthetic timeline. Subtle events stand in for
/// content the global overview cannot resolve.
struct Event {
    std::string  id;
    TimeInterval interval;
    std::string  label;
    Saliency     saliency = Saliency::Salient;
    std::string  payload;

    bool operator==(const Event &) const = default;
};

/// A pixel-free stand-in for a long video: a timeline of labeled events.
struct VideoManifest {
    std::string        id;
    double             duration_s = 0.0;
    double             fps        = 2.0;
    std::vector<Event> events;

    bool operator==(const VideoManifest &) const = default;

    std::vector<const Event *> events_overlapping(const TimeInterval & window) const {
        std::vector<const Event *> out;
        for (const Event & e : events) {
            if (e.interval.overlaps(window)) out.push_back(&e);
        }
        return out;
    }

    std::vector<const Event *> events_at(double t) const {
        std::vector<const Event *> out;
        for (const Event & e : events) {
            if (e.interval.contains(t)) out.push_back(&e);
        }
        return out;
    }
};

struct Sample {
    std::string               manifest_ref;
    std::string               question;
    std::vector<std::string>  options;       // empty for open-ended questions
    std::string               answer_key;
    std::vector<TimeInterval> clue_intervals;
    SampleTag                 tag   = SampleTag::Free;
    int                       k_ref = 0;
    TaskType                  task_type = TaskType::FreeFormatTool;

    bool operator==(const Sample &) const = default;

    void validate() const {
        if (k_ref < 0) {
            throw Error(ErrorCode::InvariantViolation, "k_ref must be >= 0");
        }
        if (tag == SampleTag::TrajectoryGuided) {
            if (clue_intervals.empty()) {
                throw Error(ErrorCode::InvariantViolation,
                            "trajectory_guided sample requires non-empty clue_intervals");
            }
            if (k_ref < 1) {
                throw Error(ErrorCode::InvariantViolation,
                            "trajectory_guided sample requires k_ref >= 1");
            }
        }
        for (const TimeInterval & iv : clue_intervals) {
            if (iv.start < 0.0 || iv.empty()) {
                throw Error(ErrorCode::EmptyInterval, "clue interval must satisfy 0 <= start < end");
            }
        }
    }
};

// ---- serialization -------------------------------------------------------

inline std::string serialize_interval(const TimeInterval & iv) {
    return "{\"start\":" + wire::sec(iv.start) + ",\"end\":" + wire::sec(iv.end) + "}";
}

inline TimeInterval parse_interval(const json & j, const std::string & what) {
    const double start = round_ms(require_number(j, "start", what));
    const double end   = round_ms(require_number(j, "end", what));
    return TimeInterval{start, end};
}

inline std::string serialize_manifest(const VideoManifest & m) {
    std::string out = "{\"id\":" + wire::str(m.id) +
                      ",\"duration_s\":" + wire::sec(m.duration_s) +
                      ",\"fps\":" + wire::sec(m.fps) + ",\"events\":";
    out += wire::array(m.events, [](const Event & e) {
        return "{\"id\":" + wire::str(e.id) +
               ",\"interval\":" + serialize_interval(e.interval) +
               ",\"label\":" + wire::str(e.label) +
               ",\"saliency\":" + wire::str(to_string(e.saliency)) +
               ",\"payload\":" + wire::str(e.payload) + "}";
    });
    out += "}";
    return out;
}

/// Parses and validates a manifest document. Out-of-order events are sorted;
/// duplicate event ids are rejected.
inline VideoManifest load_manifest(const std::string & text) {
    const json j = parse_json(text, "manifest");
    VideoManifest m;
    m.id         = require_string(j, "id", "manifest");
    m.duration_s = round_ms(require_number(j, "duration_s", "manifest"));
    m.fps        = j.contains("fps") ? require_number(j, "fps", "manifest") : 2.0;
    if (m.duration_s <= 0.0) {
        throw Error(ErrorCode::InvariantViolation, "manifest duration_s must be > 0");
    }
    if (m.fps <= 0.0) {
        throw Error(ErrorCode::InvariantViolation, "manifest fps must be > 0");
    }

    const json & events = require_field(j, "events", "manifest");
    if (!events.is_array()) {
        throw Error(ErrorCode::Malformed, "manifest: 'events' must be an array");
    }
    std::unordered_set<std::string> seen;
    for (const json & ej : events) {
        Event e;
        e.id = require_string(ej, "id", "event");
        const std::string what = "event '" + e.id + "'";
        e.interval = parse_interval(require_field(ej, "interval", what), what);
        e.label    = require_string(ej, "label", what);
        e.saliency = saliency_from_string(require_string(ej, "saliency", what));
        e.payload  = require_string(ej, "payload", what);
        if (!seen.insert(e.id).second) {
            throw Error(ErrorCode::DuplicateId, what + ": duplicate event id");
        }
        if (e.interval.empty() || e.interval.start < 0.0) {
            throw Error(ErrorCode::InvariantViolation, what + ": interval must satisfy 0 <= start < end");
        }
        if (e.interval.end > m.duration_s) {
            throw Error(ErrorCode::EventExceedsDuration, what + ": event exceeds duration");
        }
        m.events.push_back(std::move(e));
    }
    std::stable_sort(m.events.begin(), m.events.end(), [](const Event & a, const Event & b) {
        return a.interval.start < b.interval.start;
    });
    return m;
}

inline VideoManifest load_manifest(std::istream & in) {
    std::ostringstream ss;
    ss << in.rdbuf();
    return load_manifest(ss.str());
}

inline std::string serialize_sample(const Sample & s) {
    std::string out = "{\"manifest_ref\":" + wire::str(s.manifest_ref) +
                      ",\"question\":" + wire::str(s.question);
    if (!s.options.empty()) {
        out += ",\"options\":" + wire::array(s.options, [](const std::string & o) { return wire::str(o); });
    }
    out += ",\"answer_key\":" + wire::str(s.answer_key) +
           ",\"clue_intervals\":" + wire::array(s.clue_intervals, serialize_interval) +
           ",\"tag\":" + wire::str(to_string(s.tag)) +
           ",\"k_ref\":" + wire::num(s.k_ref) +
           ",\"task_type\":" + wire::str(to_string(s.task_type)) + "}";
    return out;
}

inline Sample parse_sample(const std::string & line) {
    const json j = parse_json(line, "sample");
    Sample s;
    s.manifest_ref = require_string(j, "manifest_ref", "sample");
    s.question     = require_string(j, "question", "sample");
    if (j.contains("options")) {
        for (const json & o : j.at("options")) {
            s.options.push_back(o.get<std::string>());
        }
    }
    s.answer_key = require_string(j, "answer_key", "sample");
    for (const json & ij : require_field(j, "clue_intervals", "sample")) {
        s.clue_intervals.push_back(parse_interval(ij, "clue interval"));
    }
    s.tag       = tag_from_string(require_string(j, "tag", "sample"));
    s.k_ref     = static_cast<int>(require_integer(j, "k_ref", "sample"));
    s.task_type = task_type_from_string(require_string(j, "task_type", "sample"));
    s.validate();
    return s;
}

/// JSON-lines container: one sample per line.
inline std::vector<Sample> parse_samples_jsonl(std::istream & in) {
    std::vector<Sample> out;
    std::string line;
    size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            out.push_back(parse_sample(line));
        } catch (const Error & e) {
            throw Error(e.code(), "line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

inline std::string serialize_samples_jsonl(const std::vector<Sample> & samples) {
    std::string out;
    for (const Sample & s : samples) {
        out += serialize_sample(s);
        out += "\n";
    }
    return out;
}

} // namespace clueseek

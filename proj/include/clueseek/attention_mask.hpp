// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "clueseek/json_io.hpp"
#include "clueseek/protocol.hpp"

namespace clueseek {

enum class SegmentKind { GlobalVisual, LocalVisual, Text };

inline const char * to_string(SegmentKind k) {
    switch (k) {
        case SegmentKind::GlobalVisual: return "global_visual";
        case SegmentKind::LocalVisual:  return "local_visual";
        case SegmentKind::Text:         return "text";
    }
    return "?";
}

inline SegmentKind segment_kind_from_string(const std::string & s) {
    if (s == "global_visual") return SegmentKind::GlobalVisual;
    if (s == "local_visual")  return SegmentKind::LocalVisual;
    if (s == "text")          return SegmentKind::Text;
    throw Error(ErrorCode::Malformed, "unknown segment kind '" + s + "'");
}

struct TokenSegment {
    SegmentKind kind  = SegmentKind::Text;
    int         start = 0; // [start, end)
    int         end   = 0;
};

struct GeneratedSpan {
    int                  start = 0; // [start, end)
    int                  end   = 0;
    std::optional<Phase> phase;     // absent => UnlabeledPhase at build time
};

/// A token sequence annotated with visual/text segments and the phase of each
/// assistant-generated span. Segments must partition [0, length).
struct AnnotatedSequence {
    int                        length = 0;
    std::vector<TokenSegment>  segments;
    std::vector<GeneratedSpan> generated;

    void validate() const {
        std::vector<char> covered(static_cast<size_t>(length), 0);
        for (const TokenSegment & s : segments) {
            if (s.start < 0 || s.end > length || s.start >= s.end) {
                throw Error(ErrorCode::InvariantViolation, "segment range out of bounds");
            }
            for (int i = s.start; i < s.end; ++i) {
                if (covered[static_cast<size_t>(i)]++) {
                    throw Error(ErrorCode::InvariantViolation, "segments overlap");
                }
            }
        }
        for (char c : covered) {
            if (!c) throw Error(ErrorCode::InvariantViolation, "segments must cover [0, length)");
        }
        std::vector<char> gen_covered(static_cast<size_t>(length), 0);
        for (const GeneratedSpan & g : generated) {
            if (g.start < 0 || g.end > length || g.start >= g.end) {
                throw Error(ErrorCode::InvariantViolation, "generated span out of bounds");
            }
            for (int i = g.start; i < g.end; ++i) {
                if (gen_covered[static_cast<size_t>(i)]++) {
                    throw Error(ErrorCode::InvariantViolation, "generated spans overlap");
                }
            }
        }
    }

    SegmentKind kind_at(int idx) const {
        for (const TokenSegment & s : segments) {
            if (idx >= s.start && idx < s.end) return s.kind;
        }
        return SegmentKind::Text;
    }

    std::optional<Phase> phase_at(int idx) const {
        for (const GeneratedSpan & g : generated) {
            if (idx >= g.start && idx < g.end) return g.phase;
        }
        return std::nullopt;
    }
};

/// Canonical form: sorted, with touching or overlapping ranges merged.
inline std::vector<std::pair<int, int>> normalize_ranges(std::vector<std::pair<int, int>> ranges) {
    std::sort(ranges.begin(), ranges.end());
    std::vector<std::pair<int, int>> out;
    for (const auto & r : ranges) {
        if (!out.empty() && r.first <= out.back().second) {
            out.back().second = std::max(out.back().second, r.second);
        } else {
            out.push_back(r);
        }
    }
    return out;
}

/// Visibility constraints beyond causality, stored as per-row blocked column
/// ranges. All blocked pairs satisfy j < i.
struct MaskSpec {
    int length = 0;
    // row -> sorted disjoint [start, end) blocked column ranges
    std::map<int, std::vector<std::pair<int, int>>> blocked;

    bool operator==(const MaskSpec &) const = default;

    bool is_blocked(int row, int col) const {
        auto it = blocked.find(row);
        if (it == blocked.end()) return false;
        for (const auto & [s, e] : it->second) {
            if (col >= s && col < e) return true;
        }
        return false;
    }

    /// Visible under causal masking plus the task-decoupling constraints.
    bool is_visible(int row, int col) const { return col <= row && !is_blocked(row, col); }
};

/// Applies the task-decoupling rule per generated row: tool-phase rows cannot
/// see local (cropped) visual tokens, answer-phase rows cannot see the global
/// overview tokens. Non-generated rows are purely causal.
inline MaskSpec build_mask(const AnnotatedSequence & seq) {
    seq.validate();
    for (const GeneratedSpan & g : seq.generated) {
        if (!g.phase) {
            throw Error(ErrorCode::UnlabeledPhase,
                        "generated span [" + std::to_string(g.start) + "," +
                            std::to_string(g.end) + ") has no phase");
        }
    }

    MaskSpec mask;
    mask.length = seq.length;

    for (const GeneratedSpan & g : seq.generated) {
        const SegmentKind hidden = *g.phase == Phase::Tool ? SegmentKind::LocalVisual
                                                           : SegmentKind::GlobalVisual;
        for (int row = g.start; row < g.end; ++row) {
            std::vector<std::pair<int, int>> ranges;
            for (const TokenSegment & s : seq.segments) {
                if (s.kind != hidden) continue;
                const int lo = s.start;
                const int hi = std::min(s.end, row); // causal: only j < i can be blocked
                if (lo < hi) ranges.emplace_back(lo, hi);
            }
            if (!ranges.empty()) {
                mask.blocked[row] = normalize_ranges(std::move(ranges));
            }
        }
    }
    return mask;
}

/// Deterministic per-sample Bernoulli decision for the masking ratio. FNV-1a
/// over the id mixed with the seed, mapped to [0, 1).
inline bool should_apply(const std::string & sample_id, double ratio, uint64_t seed) {
    if (ratio < 0.0 || ratio > 1.0) {
        throw Error(ErrorCode::BadConfig, "ratio must be in [0, 1]");
    }
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : sample_id) {
        h ^= c;
        h *= 1099511628211ull;
    }
    h ^= seed + 0x9E3779B97F4A7C15ull + (h << 6) + (h >> 2);
    // splitmix64 finalizer
    h = (h ^ (h >> 30)) * 0xBF58476D1CE4E5B9ull;
    h = (h ^ (h >> 27)) * 0x94D049BB133111EBull;
    h ^= h >> 31;
    const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
    return u < ratio;
}

enum class MaskFormat { Dense01, BlockedRanges };

/// dense01: row-major lines of 0/1 visibility characters (bit-exact goldens).
/// blocked_ranges: compact JSON of the blocked set.
inline std::string export_mask(const MaskSpec & m, MaskFormat format) {
    if (format == MaskFormat::Dense01) {
        std::string out;
        out.reserve(static_cast<size_t>(m.length) * (m.length + 1));
        for (int i = 0; i < m.length; ++i) {
            for (int j = 0; j < m.length; ++j) {
                out += m.is_visible(i, j) ? '1' : '0';
            }
            out += '\n';
        }
        return out;
    }
    std::string rows;
    bool first = true;
    for (const auto & [row, ranges] : m.blocked) {
        for (const auto & [s, e] : ranges) {
            if (!first) rows += ",";
            first = false;
            rows += "[" + std::to_string(row) + "," + std::to_string(s) + "," +
                    std::to_string(e) + "]";
        }
    }
    return "{\"length\":" + std::to_string(m.length) + ",\"blocked\":[" + rows + "]}\n";
}

inline MaskSpec import_mask(const std::string & text, MaskFormat format) {
    MaskSpec m;
    if (format == MaskFormat::BlockedRanges) {
        const json j = parse_json(text, "mask");
        m.length     = static_cast<int>(require_integer(j, "length", "mask"));
        for (const json & entry : require_field(j, "blocked", "mask")) {
            if (!entry.is_array() || entry.size() != 3) {
                throw Error(ErrorCode::Malformed, "mask: blocked entries must be [row,start,end]");
            }
            m.blocked[entry[0].get<int>()].emplace_back(entry[1].get<int>(), entry[2].get<int>());
        }
        for (auto & [row, ranges] : m.blocked) {
            ranges = normalize_ranges(std::move(ranges));
        }
        return m;
    }
    // dense01: blocked = causal positions marked 0
    std::vector<std::string> lines;
    size_t pos = 0;
    while (pos < text.size()) {
        size_t nl = text.find('\n', pos);
        if (nl == std::string::npos) nl = text.size();
        if (nl > pos) lines.push_back(text.substr(pos, nl - pos));
        pos = nl + 1;
    }
    m.length = static_cast<int>(lines.size());
    for (int i = 0; i < m.length; ++i) {
        if (static_cast<int>(lines[static_cast<size_t>(i)].size()) != m.length) {
            throw Error(ErrorCode::Malformed, "dense01 mask must be square");
        }
        std::vector<std::pair<int, int>> ranges;
        int open = -1;
        for (int j = 0; j <= i; ++j) {
            const bool zero = lines[static_cast<size_t>(i)][static_cast<size_t>(j)] == '0';
            if (zero && open < 0) open = j;
            if (!zero && open >= 0) {
                ranges.emplace_back(open, j);
                open = -1;
            }
        }
        if (open >= 0) ranges.emplace_back(open, i + 1);
        if (!ranges.empty()) m.blocked[i] = std::move(ranges);
    }
    return m;
}

// ---- annotated-sequence document -------------------------------------------

inline AnnotatedSequence parse_annotated_sequence(const std::string & text) {
    const json j = parse_json(text, "sequence");
    AnnotatedSequence seq;
    seq.length = static_cast<int>(require_integer(j, "length", "sequence"));
    for (const json & sj : require_field(j, "segments", "sequence")) {
        TokenSegment s;
        s.kind  = segment_kind_from_string(require_string(sj, "kind", "segment"));
        s.start = static_cast<int>(require_integer(sj, "start", "segment"));
        s.end   = static_cast<int>(require_integer(sj, "end", "segment"));
        seq.segments.push_back(s);
    }
    if (j.contains("generated")) {
        for (const json & gj : j.at("generated")) {
            GeneratedSpan g;
            g.start = static_cast<int>(require_integer(gj, "start", "generated span"));
            g.end   = static_cast<int>(require_integer(gj, "end", "generated span"));
            if (gj.contains("phase")) {
                const std::string p = gj.at("phase").get<std::string>();
                if (p == "tool") {
                    g.phase = Phase::Tool;
                } else if (p == "answer") {
                    g.phase = Phase::Answer;
                } else {
                    throw Error(ErrorCode::Malformed, "unknown phase '" + p + "'");
                }
            }
            seq.generated.push_back(g);
        }
    }
    seq.validate();
    return seq;
}

inline std::string serialize_annotated_sequence(const AnnotatedSequence & seq) {
    std::string out = "{\"length\":" + std::to_string(seq.length) + ",\"segments\":";
    out += wire::array(seq.segments, [](const TokenSegment & s) {
        return "{\"kind\":" + wire::str(to_string(s.kind)) + ",\"start\":" + wire::num(s.start) +
               ",\"end\":" + wire::num(s.end) + "}";
    });
    out += ",\"generated\":";
    out += wire::array(seq.generated, [](const GeneratedSpan & g) {
        std::string r = "{\"start\":" + wire::num(g.start) + ",\"end\":" + wire::num(g.end);
        if (g.phase) {
            r += ",\"phase\":" + wire::str(to_string(*g.phase));
        }
        return r + "}";
    });
    out += "}";
    return out;
}

} // namespace clueseek

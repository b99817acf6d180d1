// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "clueseek/interval.hpp"
#include "clueseek/json_io.hpp"

namespace clueseek {

enum class SamplingStrategy { Coarse, Medium, Fine };

inline const char * to_string(SamplingStrategy s) {
    switch (s) {
        case SamplingStrategy::Coarse: return "coarse";
        case SamplingStrategy::Medium: return "medium";
        case SamplingStrategy::Fine:   return "fine";
    }
    return "?";
}

inline SamplingStrategy strategy_from_string(const std::string & s) {
    if (s == "coarse") return SamplingStrategy::Coarse;
    if (s == "medium") return SamplingStrategy::Medium;
    if (s == "fine")   return SamplingStrategy::Fine;
    throw Error(ErrorCode::Malformed, "unknown sampling_strategy '" + s + "'");
}

/// One tool call: the temporal window to inspect plus the granularity that
/// selects the per-call visual token quota.
struct CropDirective {
    TimeInterval     temporal_segment;
    SamplingStrategy sampling_strategy = SamplingStrategy::Medium;

    bool operator==(const CropDirective &) const = default;
};

struct QuotaConfig {
    long   overview_quota       = 16384;
    long   coarse               = 2048;
    long   medium               = 4096;
    long   fine                 = 6144;
    long   max_visual_budget    = 32768;
    double fps                  = 2.0;
    long   frame_limit          = 768;
    long   min_tokens_per_frame = 4;

    long quota_for(SamplingStrategy s) const {
        switch (s) {
            case SamplingStrategy::Coarse: return coarse;
            case SamplingStrategy::Medium: return medium;
            case SamplingStrategy::Fine:   return fine;
        }
        return medium;
    }

    void validate() const {
        if (!(coarse < medium && medium < fine && fine <= overview_quota &&
              overview_quota < max_visual_budget)) {
            throw Error(ErrorCode::BadConfig,
                        "quota ordering must satisfy coarse < medium < fine <= overview < max budget");
        }
        if (fps <= 0.0 || frame_limit < 1 || min_tokens_per_frame < 1) {
            throw Error(ErrorCode::BadConfig, "fps, frame_limit, min_tokens_per_frame must be positive");
        }
    }
};

struct SamplingPlan {
    CropDirective directive;   // window already clamped to the video
    long          frame_count      = 0;
    long          tokens_per_frame = 0;
    long          total_tokens     = 0;
};

/// Splits the granularity's token quota across the frames of the requested
/// window: frame count from duration x fps (ceiling), per-frame tokens from
/// quota / frames (floor). The quota is a hard cap, so when the per-frame
/// floor would push the total over it the frame count shrinks instead.
inline SamplingPlan compute_sampling_plan(const CropDirective & d, const QuotaConfig & cfg,
                                          double video_duration) {
    cfg.validate();
    TimeInterval window = d.temporal_segment.clamped(0.0, round_ms(video_duration));
    window.start = round_ms(window.start);
    window.end   = round_ms(window.end);
    if (window.empty()) {
        throw Error(ErrorCode::ZeroLengthInterval, "directive window is empty after clamping");
    }

    const long quota = cfg.quota_for(d.sampling_strategy);

    long frames = static_cast<long>(std::ceil(window.duration() * cfg.fps - 1e-9));
    frames      = std::max(1L, std::min(frames, cfg.frame_limit));

    const long affordable = std::max(1L, quota / cfg.min_tokens_per_frame);
    frames                = std::min(frames, affordable);

    long per_frame = std::max(quota / frames, cfg.min_tokens_per_frame);
    per_frame      = std::min(per_frame, quota);

    SamplingPlan plan;
    plan.directive        = CropDirective{window, d.sampling_strategy};
    plan.frame_count      = frames;
    plan.tokens_per_frame = per_frame;
    plan.total_tokens     = frames * per_frame;
    return plan;
}

/// Cumulative visual-context spend for one dialogue. Refusal is a value;
/// the ledger never goes above its cap.
struct BudgetLedger {
    long cap   = 32768;
    long spent = 0;
    std::vector<std::pair<int, long>> entries; // (turn index, tokens)

    long remaining() const { return cap - spent; }
};

struct ChargeResult {
    bool charged   = false;
    long remaining = 0;
};

inline ChargeResult charge(BudgetLedger & ledger, int turn_index, long tokens) {
    if (tokens < 0) {
        throw Error(ErrorCode::InvariantViolation, "charge must be non-negative");
    }
    if (ledger.spent + tokens > ledger.cap) {
        return ChargeResult{false, ledger.remaining()};
    }
    ledger.spent += tokens;
    ledger.entries.emplace_back(turn_index, tokens);
    return ChargeResult{true, ledger.remaining()};
}

inline ChargeResult charge(BudgetLedger & ledger, int turn_index, const SamplingPlan & plan) {
    return charge(ledger, turn_index, plan.total_tokens);
}

// ---- serialization -------------------------------------------------------

inline std::string serialize_directive(const CropDirective & d) {
    return "{\"temporal_segment\":[" + wire::sec(d.temporal_segment.start) + "," +
           wire::sec(d.temporal_segment.end) + "],\"sampling_strategy\":" +
           wire::str(to_string(d.sampling_strategy)) + "}";
}

inline CropDirective parse_directive(const json & j, const std::string & what) {
    const json & seg = require_field(j, "temporal_segment", what);
    if (!seg.is_array() || seg.size() != 2 || !seg[0].is_number() || !seg[1].is_number()) {
        throw Error(ErrorCode::Malformed, what + ": temporal_segment must be [start, end]");
    }
    CropDirective d;
    d.temporal_segment = TimeInterval{round_ms(seg[0].get<double>()), round_ms(seg[1].get<double>())};
    d.sampling_strategy = strategy_from_string(require_string(j, "sampling_strategy", what));
    return d;
}

inline std::string serialize_plan(const SamplingPlan & p) {
    return "{\"directive\":" + serialize_directive(p.directive) +
           ",\"frame_count\":" + wire::num(p.frame_count) +
           ",\"tokens_per_frame\":" + wire::num(p.tokens_per_frame) +
           ",\"total_tokens\":" + wire::num(p.total_tokens) + "}";
}

} // namespace clueseek

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cctype>
#include <functional>
#include <map>
#include <string>

#include "clueseek/manifest.hpp"
#include "clueseek/protocol.hpp"

namespace clueseek {

struct RewardConfig {
    double b0           = 0.5;  // base bonus
    double w_g          = 0.5;  // clue-score weight
    double c_free       = 0.5;  // constant clue score for free-exploration samples
    double lambda_decay = 0.05; // per-extra-turn decay
    double gamma_floor  = 0.0;

    void validate() const {
        if (b0 < 0 || w_g < 0 || c_free < 0 || lambda_decay < 0) {
            throw Error(ErrorCode::BadConfig, "reward constants must be non-negative");
        }
        if (gamma_floor > 1.0) {
            throw Error(ErrorCode::BadConfig, "gamma_floor must be <= 1");
        }
    }
};

struct IntervalScore {
    double iou = 0.0;
    double iop = 0.0;
    double iog = 0.0;
};

/// Overlap scores on the union measure of each interval set: I over union,
/// over prediction, over ground truth. Zero whenever a denominator is zero.
inline IntervalScore interval_scores(const std::vector<TimeInterval> & pred,
                                     const std::vector<TimeInterval> & gt) {
    const double p = total_measure(pred);
    const double g = total_measure(gt);
    const double i = intersection_measure(pred, gt);
    const double u = p + g - i;

    IntervalScore s;
    s.iou = u > 0.0 ? i / u : 0.0;
    s.iop = p > 0.0 ? i / p : 0.0;
    s.iog = g > 0.0 ? i / g : 0.0;
    return s;
}

/// Free samples earn the constant c_free; trajectory-guided samples earn
/// (2*IoU + IoP + IoG) / 4.
inline double hybrid_clue_score(SampleTag tag, const IntervalScore & s, const RewardConfig & cfg) {
    if (tag == SampleTag::Free) return cfg.c_free;
    return (2.0 * s.iou + s.iop + s.iog) / 4.0;
}

/// Linear decay once the tool-call count exceeds the annotated reference,
/// clamped at gamma_floor so the bonus never goes negative.
inline double turn_decay(int k_t, int k_ref, const RewardConfig & cfg) {
    if (k_t <= k_ref) return 1.0;
    return std::max(cfg.gamma_floor, 1.0 - cfg.lambda_decay * static_cast<double>(k_t - k_ref));
}

struct RewardBreakdown {
    double r_a    = 0.0; // answer reward, {0,1}
    double r_f    = 0.0; // format reward, [0,1]
    double s_clue = 0.0;
    double gamma  = 1.0;
    double beta   = 0.0;
    double total  = 0.0;
    std::map<std::string, double> components; // iou, iop, iog, k_t, k_ref
    std::string tag;
};

/// Case-insensitive option-letter match against the sample's answer key.
using AnswerMatcher = std::function<double(const std::string &, const Sample &)>;

inline std::string normalize_answer(const std::string & s) {
    std::string out;
    for (char c : s) {
        if (!std::isspace(static_cast<unsigned char>(c))) {
            out += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        }
    }
    return out;
}

inline double default_answer_matcher(const std::string & answer, const Sample & sample) {
    return normalize_answer(answer) == normalize_answer(sample.answer_key) ? 1.0 : 0.0;
}

/// Predicted clue intervals are the windows the tool actually observed: the
/// clamped segments of executed directive turns.
inline std::vector<TimeInterval> predicted_intervals(const Trajectory & t) {
    std::vector<TimeInterval> out;
    for (const Turn & turn : t.turns) {
        if (turn.directive && turn.observation && turn.observation->executed()) {
            out.push_back(turn.directive->temporal_segment);
        }
    }
    return out;
}

/// Scores one trajectory against its sample: R = r_a * (1 + beta) + r_f with
/// beta = (b0 + w_g * s_clue) * gamma. Every intermediate lands in the
/// breakdown for provenance.
inline RewardBreakdown score_trajectory(const Trajectory & t, const Sample & sample,
                                        const RewardConfig & cfg = {},
                                        const AnswerMatcher & matcher = default_answer_matcher) {
    cfg.validate();
    if (sample.tag == SampleTag::TrajectoryGuided && sample.clue_intervals.empty()) {
        throw Error(ErrorCode::MissingGroundTruth,
                    "trajectory_guided sample has no clue intervals");
    }

    RewardBreakdown b;

    const auto answer = t.final_answer();
    b.r_a = answer ? matcher(*answer, sample) : 0.0;

    if (t.turns.empty()) {
        b.r_f = 1.0;
    } else {
        int valid = 0;
        for (const Turn & turn : t.turns) valid += turn.format_valid ? 1 : 0;
        b.r_f = static_cast<double>(valid) / static_cast<double>(t.turns.size());
    }

    const IntervalScore scores = interval_scores(predicted_intervals(t), sample.clue_intervals);
    const int k_t = t.tool_call_count;

    b.s_clue = hybrid_clue_score(sample.tag, scores, cfg);
    b.gamma  = turn_decay(k_t, sample.k_ref, cfg);
    b.beta   = (cfg.b0 + cfg.w_g * b.s_clue) * b.gamma;
    b.total  = b.r_a * (1.0 + b.beta) + b.r_f;

    b.components["iou"]   = scores.iou;
    b.components["iop"]   = scores.iop;
    b.components["iog"]   = scores.iog;
    b.components["k_t"]   = static_cast<double>(k_t);
    b.components["k_ref"] = static_cast<double>(sample.k_ref);
    b.tag                 = to_string(sample.tag);
    return b;
}

inline std::string serialize_breakdown(const RewardBreakdown & b) {
    std::string out = "{\"r_a\":" + wire::num(b.r_a) + ",\"r_f\":" + wire::num(b.r_f) +
                      ",\"s_clue\":" + wire::num(b.s_clue) + ",\"gamma\":" + wire::num(b.gamma) +
                      ",\"beta\":" + wire::num(b.beta) + ",\"total\":" + wire::num(b.total) +
                      ",\"components\":{";
    for (const auto & [key, value] : b.components) {
        out += wire::str(key) + ":" + wire::num(value) + ",";
    }
    out += "\"tag\":" + wire::str(b.tag) + "}}";
    return out;
}

} // namespace clueseek

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <vector>

#include "clueseek/json_io.hpp"

namespace clueseek {

/// One rollout inside a group. Token ratios are pi_theta / pi_theta_old per
/// generated token, supplied by the caller; an empty list means ratio 1.
struct GroupSample {
    double              reward         = 0.0;
    int                 turn_count     = 0;
    long                context_tokens = 0;
    std::vector<double> token_ratios;
};

struct LimitsConfig {
    long   c_context   = 32768;
    int    c_turn      = 6;
    double epsilon_low  = 0.20;
    double epsilon_high = 0.20;
    int    group_size  = 16;
    double std_epsilon = 1e-6;

    void validate() const {
        if (group_size < 2) throw Error(ErrorCode::BadConfig, "group_size must be >= 2");
        if (epsilon_low < 0 || epsilon_high < 0) {
            throw Error(ErrorCode::BadConfig, "clip epsilons must be >= 0");
        }
        if (std_epsilon <= 0) throw Error(ErrorCode::BadConfig, "std_epsilon must be > 0");
    }
};

struct GroupAdvantage {
    std::vector<double> raw;    // (r_i - mean) / std
    std::vector<int>    mask;   // completion mask, 1 iff within context and turn limits
    std::vector<double> masked; // mask * raw
    int                 active_count = 0;
};

/// Group-relative advantages with the over-turn completion mask: rewards are
/// standardized with the population std (epsilon-guarded), then rollouts that
/// blew the context or turn limit are zeroed out of the learning signal.
inline GroupAdvantage group_advantages(const std::vector<GroupSample> & samples,
                                       const LimitsConfig & cfg = {}) {
    if (samples.size() < 2) {
        throw Error(ErrorCode::GroupTooSmall, "need at least 2 samples per group");
    }
    const double n = static_cast<double>(samples.size());

    double mean = 0.0;
    for (const GroupSample & s : samples) mean += s.reward;
    mean /= n;

    double var = 0.0;
    for (const GroupSample & s : samples) {
        const double d = s.reward - mean;
        var += d * d;
    }
    var /= n;
    const double std_dev = std::max(std::sqrt(var), cfg.std_epsilon);

    GroupAdvantage adv;
    adv.raw.reserve(samples.size());
    adv.mask.reserve(samples.size());
    adv.masked.reserve(samples.size());
    for (const GroupSample & s : samples) {
        const double a = (s.reward - mean) / std_dev;
        const int    m = (s.context_tokens <= cfg.c_context && s.turn_count <= cfg.c_turn) ? 1 : 0;
        adv.raw.push_back(a);
        adv.mask.push_back(m);
        adv.masked.push_back(m * a);
        adv.active_count += m;
    }
    return adv;
}

enum class ObjectiveLevel { Sequence, Token };

/// Clipped surrogate over the masked group mean. Sequence level treats the
/// product of token ratios as the sample ratio; token level averages the
/// per-token clipped terms within each sample first.
inline double surrogate_objective(const GroupAdvantage & adv,
                                  const std::vector<GroupSample> & samples,
                                  const LimitsConfig & cfg = {},
                                  ObjectiveLevel level = ObjectiveLevel::Sequence) {
    if (adv.raw.size() != samples.size()) {
        throw Error(ErrorCode::LengthMismatch, "advantage/sample size mismatch");
    }
    if (adv.active_count < 1) {
        throw Error(ErrorCode::AllMasked, "no active samples in group");
    }
    const double lo = 1.0 - cfg.epsilon_low;
    const double hi = 1.0 + cfg.epsilon_high;

    auto clipped_term = [&](double ratio, double a) {
        if (ratio <= 0.0) {
            throw Error(ErrorCode::InvariantViolation, "token ratios must be > 0");
        }
        const double clipped = std::min(std::max(ratio, lo), hi);
        return std::min(ratio * a, clipped * a);
    };

    double sum = 0.0;
    for (size_t i = 0; i < samples.size(); ++i) {
        if (adv.mask[i] == 0) continue; // masked rollouts contribute nothing
        const double a = adv.masked[i];
        if (level == ObjectiveLevel::Sequence) {
            double ratio = 1.0;
            for (double r : samples[i].token_ratios) ratio *= r;
            sum += clipped_term(ratio, a);
        } else {
            if (samples[i].token_ratios.empty()) {
                sum += clipped_term(1.0, a);
            } else {
                double token_sum = 0.0;
                for (double r : samples[i].token_ratios) token_sum += clipped_term(r, a);
                sum += token_sum / static_cast<double>(samples[i].token_ratios.size());
            }
        }
    }
    return sum / static_cast<double>(adv.active_count);
}

/// Dynamic sampling: groups whose rewards are all identical carry no
/// advantage signal and are dropped; everything else is retained in order.
inline std::vector<size_t> dynamic_sampling_filter(const std::vector<std::vector<double>> & groups) {
    std::vector<size_t> retained;
    for (size_t i = 0; i < groups.size(); ++i) {
        const auto & rewards = groups[i];
        bool varied = false;
        for (size_t k = 1; k < rewards.size(); ++k) {
            if (rewards[k] != rewards[0]) {
                varied = true;
                break;
            }
        }
        if (varied) retained.push_back(i);
    }
    return retained;
}

inline std::string serialize_group_advantage(const GroupAdvantage & adv) {
    auto nums = [](const std::vector<double> & v) {
        return wire::array(v, [](double d) { return wire::num(d); });
    };
    return "{\"raw\":" + nums(adv.raw) +
           ",\"mask\":" + wire::array(adv.mask, [](int m) { return std::to_string(m); }) +
           ",\"masked\":" + nums(adv.masked) +
           ",\"active_count\":" + wire::num(adv.active_count) + "}";
}

} // namespace clueseek

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "clueseek/errors.hpp"

namespace clueseek {

/// Timestamps are seconds with millisecond precision; arithmetic rounds half-up
/// at the millisecond.
inline double round_ms(double seconds) {
    return std::floor(seconds * 1000.0 + 0.5) / 1000.0;
}

struct TimeInterval {
    double start = 0.0;
    double end   = 0.0;

    double duration() const { return end - start; }
    bool   empty() const { return end <= start; }

    bool operator==(const TimeInterval & other) const = default;

    /// Intersect with [lo, hi]; may come back empty.
    TimeInterval clamped(double lo, double hi) const {
        return TimeInterval{std::max(start, lo), std::min(end, hi)};
    }

    bool contains(double t) const { return t >= start && t < end; }

    bool overlaps(const TimeInterval & other) const {
        return std::max(start, other.start) < std::min(end, other.end);
    }

    static TimeInterval make(double start, double end) {
        TimeInterval iv{round_ms(start), round_ms(end)};
        if (iv.start < 0.0) {
            throw Error(ErrorCode::InvariantViolation, "interval start must be >= 0");
        }
        if (iv.empty()) {
            throw Error(ErrorCode::EmptyInterval, "interval end must exceed start");
        }
        return iv;
    }
};

/// Merges a set of intervals into sorted, disjoint, nonempty intervals.
inline std::vector<TimeInterval> merge_intervals(std::vector<TimeInterval> ivs) {
    std::erase_if(ivs, [](const TimeInterval & iv) { return iv.empty(); });
    std::sort(ivs.begin(), ivs.end(), [](const TimeInterval & a, const TimeInterval & b) {
        return a.start < b.start || (a.start == b.start && a.end < b.end);
    });
    std::vector<TimeInterval> merged;
    for (const TimeInterval & iv : ivs) {
        if (!merged.empty() && iv.start <= merged.back().end) {
            merged.back().end = std::max(merged.back().end, iv.end);
        } else {
            merged.push_back(iv);
        }
    }
    return merged;
}

inline double total_measure(const std::vector<TimeInterval> & ivs) {
    double sum = 0.0;
    for (const TimeInterval & iv : merge_intervals(ivs)) {
        sum += iv.duration();
    }
    return sum;
}

/// Measure of the intersection of two interval unions.
inline double intersection_measure(const std::vector<TimeInterval> & a,
                                   const std::vector<TimeInterval> & b) {
    const auto ma = merge_intervals(a);
    const auto mb = merge_intervals(b);
    double sum = 0.0;
    // Both sides are disjoint after merging, so pairwise overlaps never double count.
    for (const TimeInterval & x : ma) {
        for (const TimeInterval & y : mb) {
            const double lo = std::max(x.start, y.start);
            const double hi = std::min(x.end, y.end);
            if (hi > lo) {
                sum += hi - lo;
            }
        }
    }
    return sum;
}

} // namespace clueseek

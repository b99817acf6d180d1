// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "clueseek/manifest.hpp"

namespace clueseek {

/// Deterministic splitmix64 stream. std:: distributions are not pinned across
/// library implementations, so all draws go through this.
class DetRng {
public:
    explicit DetRng(uint64_t seed) : state_(seed) {}

    uint64_t next() {
        state_ += 0x9E3779B97F4A7C15ull;
        uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    uint64_t below(uint64_t n) { return n == 0 ? 0 : next() % n; }

    /// Millisecond-granular draw in [lo, hi).
    double seconds(double lo, double hi) {
        const auto lo_ms = static_cast<int64_t>(round_ms(lo) * 1000.0 + 0.5);
        const auto hi_ms = static_cast<int64_t>(round_ms(hi) * 1000.0 + 0.5);
        if (hi_ms <= lo_ms) return lo;
        return static_cast<double>(lo_ms + static_cast<int64_t>(below(static_cast<uint64_t>(hi_ms - lo_ms)))) / 1000.0;
    }

    double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

private:
    uint64_t state_;
};

struct TaxonomyProfile {
    // Weight per task type, indexed by the order of kAllTaskTypes.
    std::array<double, 6> weights{};

    static TaxonomyProfile uniform() {
        TaxonomyProfile p;
        p.weights.fill(1.0);
        return p;
    }

    static TaxonomyProfile single(TaskType t) {
        TaxonomyProfile p;
        p.weights[static_cast<size_t>(t)] = 1.0;
        return p;
    }

    double sum() const { return std::accumulate(weights.begin(), weights.end(), 0.0); }

    void validate() const {
        for (double w : weights) {
            if (w < 0.0) throw Error(ErrorCode::BadConfig, "profile weights must be non-negative");
        }
    }
};

/// Parses "uniform", "all-<TaskType>", or "Type=w,Type=w,...".
inline TaxonomyProfile parse_profile(const std::string & text) {
    if (text.empty() || text == "uniform") return TaxonomyProfile::uniform();
    if (text.rfind("all-", 0) == 0) {
        return TaxonomyProfile::single(task_type_from_string(text.substr(4)));
    }
    TaxonomyProfile p;
    size_t pos = 0;
    while (pos < text.size()) {
        size_t comma = text.find(',', pos);
        if (comma == std::string::npos) comma = text.size();
        const std::string part = text.substr(pos, comma - pos);
        const size_t eq = part.find('=');
        if (eq == std::string::npos) {
            throw Error(ErrorCode::BadConfig, "profile entry '" + part + "' is not Type=weight");
        }
        const TaskType t = task_type_from_string(part.substr(0, eq));
        p.weights[static_cast<size_t>(t)] = std::stod(part.substr(eq + 1));
        pos = comma + 1;
    }
    p.validate();
    return p;
}

/// Largest-remainder apportionment of n by profile weight, so class counts
/// land within one of the requested fractions.
inline std::array<int, 6> apportion(const TaxonomyProfile & profile, int n) {
    std::array<int, 6> counts{};
    const double total = profile.sum();
    if (total <= 0.0 || n <= 0) return counts;

    std::array<double, 6> exact{};
    int assigned = 0;
    for (size_t i = 0; i < 6; ++i) {
        exact[i]  = n * profile.weights[i] / total;
        counts[i] = static_cast<int>(exact[i]);
        assigned += counts[i];
    }
    std::array<size_t, 6> order{0, 1, 2, 3, 4, 5};
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        const double fa = exact[a] - counts[a];
        const double fb = exact[b] - counts[b];
        return fa > fb || (fa == fb && a < b);
    });
    for (size_t i = 0; assigned < n; ++i) {
        counts[order[i % 6]] += 1;
        ++assigned;
    }
    return counts;
}

struct SyntheticBatch {
    VideoManifest       manifest;
    std::vector<Sample> samples;
};

namespace detail {

inline std::string option_letter(size_t idx) {
    return std::string(1, static_cast<char>('A' + idx));
}

inline std::string make_code(DetRng & rng) {
    std::string code = "K";
    for (int i = 0; i < 4; ++i) {
        code += static_cast<char>('0' + rng.below(10));
    }
    return code;
}

} // namespace detail

/// Generates one manifest plus n samples, deterministically from (seed,
/// profile). Each sample owns a 60 s region of the shared timeline, and every
/// sample satisfies its task-type definition (clue count and saliency split).
inline SyntheticBatch generate_synthetic(uint64_t seed, const TaxonomyProfile & profile, int n) {
    profile.validate();
    constexpr double kRegion = 60.0;

    SyntheticBatch batch;
    batch.manifest.id         = "syn-" + std::to_string(seed);
    batch.manifest.duration_s = kRegion * std::max(n, 1);
    batch.manifest.fps        = 2.0;

    const std::array<int, 6> counts = apportion(profile, n);
    std::vector<TaskType> assignment;
    for (size_t i = 0; i < 6; ++i) {
        assignment.insert(assignment.end(), counts[i], kAllTaskTypes[i]);
    }
    DetRng rng(seed * 0x9E3779B97F4A7C15ull + 1);
    // Fisher-Yates so mixed profiles interleave classes.
    for (size_t i = assignment.size(); i > 1; --i) {
        std::swap(assignment[i - 1], assignment[rng.below(i)]);
    }

    for (size_t i = 0; i < assignment.size(); ++i) {
        const TaskType task = assignment[i];
        const double   base = kRegion * static_cast<double>(i);

        int clue_count = 1;
        if (task == TaskType::MultiClueDirect || task == TaskType::MultiClueTool) {
            clue_count = 2 + static_cast<int>(rng.below(2));
        }

        std::vector<TimeInterval> clues;
        std::vector<Saliency>     saliency;
        const double slot = 52.0 / clue_count;
        for (int c = 0; c < clue_count; ++c) {
            const double lo    = base + 4.0 + slot * c;
            const double len   = rng.seconds(3.0, 6.0);
            const double start = rng.seconds(lo, lo + slot - len - 0.5);
            clues.push_back(TimeInterval{round_ms(start), round_ms(start + len)});
        }
        switch (task) {
            case TaskType::SingleClueDirect:
            case TaskType::MultiClueDirect:
                saliency.assign(clue_count, Saliency::Salient);
                break;
            case TaskType::SingleClueTool:
            case TaskType::SelfReflectionTool:
            case TaskType::FreeFormatTool:
                saliency.assign(clue_count, Saliency::Subtle);
                break;
            case TaskType::MultiClueTool:
                saliency.assign(clue_count, Saliency::Salient);
                saliency[rng.below(clue_count)] = Saliency::Subtle;
                break;
        }

        const std::string code = detail::make_code(rng);
        for (int c = 0; c < clue_count; ++c) {
            Event e;
            e.id       = "e" + std::to_string(i) + "_" + std::to_string(c);
            e.interval = clues[c];
            e.label    = "clue";
            e.saliency = saliency[c];
            e.payload  = "code " + code + " part " + std::to_string(c + 1);
            batch.manifest.events.push_back(std::move(e));
        }
        // One salient distractor per region keeps overview observations busy.
        {
            Event d;
            const double start = round_ms(base + 57.0);
            d.id       = "d" + std::to_string(i);
            d.interval = TimeInterval{start, round_ms(start + 2.0)};
            d.label    = "background";
            d.saliency = Saliency::Salient;
            d.payload  = "background scene " + std::to_string(i);
            batch.manifest.events.push_back(std::move(d));
        }

        Sample s;
        s.manifest_ref = batch.manifest.id;
        s.question     = "Which code is shown during the highlighted moment" +
                         std::string(clue_count > 1 ? "s" : "") + " of segment " +
                         std::to_string(i) + "?";
        const size_t correct = rng.below(4);
        for (size_t o = 0; o < 4; ++o) {
            std::string oc = o == correct ? code : detail::make_code(rng);
            s.options.push_back(detail::option_letter(o) + ") " + oc);
        }
        s.answer_key = detail::option_letter(correct);
        s.task_type  = task;
        switch (task) {
            case TaskType::SingleClueDirect:
            case TaskType::MultiClueDirect:
                s.clue_intervals = clues;
                s.tag            = SampleTag::Free;
                s.k_ref          = 0;
                break;
            case TaskType::SingleClueTool:
            case TaskType::MultiClueTool:
                s.clue_intervals = clues;
                s.tag            = SampleTag::TrajectoryGuided;
                s.k_ref          = clue_count;
                break;
            case TaskType::SelfReflectionTool:
                s.clue_intervals = clues;
                s.tag            = SampleTag::TrajectoryGuided;
                s.k_ref          = clue_count + 1;
                break;
            case TaskType::FreeFormatTool:
                s.clue_intervals.clear();
                s.tag            = SampleTag::Free;
                s.k_ref          = 0;
                break;
        }
        s.validate();
        batch.samples.push_back(std::move(s));
    }

    std::stable_sort(batch.manifest.events.begin(), batch.manifest.events.end(),
                     [](const Event & a, const Event & b) { return a.interval.start < b.interval.start; });
    return batch;
}

} // namespace clueseek

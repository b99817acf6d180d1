// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include "clueseek/reward.hpp"
#include "clueseek/synthetic.hpp"

using namespace clueseek;

namespace {

// Independent measure oracle: endpoint sweep instead of merge-based union.
double sweep_union(const std::vector<TimeInterval> & set) {
    std::vector<std::pair<double, int>> edges;
    for (const TimeInterval & iv : set) {
        if (iv.empty()) continue;
        edges.push_back({iv.start, +1});
        edges.push_back({iv.end, -1});
    }
    std::sort(edges.begin(), edges.end());
    double total = 0.0, open_at = 0.0;
    int depth = 0;
    for (const auto & [t, delta] : edges) {
        if (depth == 0 && delta > 0) open_at = t;
        depth += delta;
        if (depth == 0 && delta < 0) total += t - open_at;
    }
    return total;
}

double sweep_intersection(const std::vector<TimeInterval> & a, const std::vector<TimeInterval> & b) {
    std::vector<TimeInterval> both = a;
    both.insert(both.end(), b.begin(), b.end());
    return sweep_union(a) + sweep_union(b) - sweep_union(both);
}

IntervalScore oracle_scores(const std::vector<TimeInterval> & pred,
                            const std::vector<TimeInterval> & gt) {
    const double p = sweep_union(pred);
    const double g = sweep_union(gt);
    const double i = sweep_intersection(pred, gt);
    const double u = p + g - i;
    IntervalScore s;
    s.iou = u > 0 ? i / u : 0.0;
    s.iop = p > 0 ? i / p : 0.0;
    s.iog = g > 0 ? i / g : 0.0;
    return s;
}

// Direct substitution of the closed-form reward, independent of the engine.
double oracle_total(double r_a, double r_f, SampleTag tag, const IntervalScore & s, int k_t,
                    int k_ref, const RewardConfig & cfg) {
    const double s_clue = tag == SampleTag::Free ? cfg.c_free : (2 * s.iou + s.iop + s.iog) / 4.0;
    double gamma = 1.0;
    if (k_t > k_ref) gamma = std::max(cfg.gamma_floor, 1.0 - cfg.lambda_decay * (k_t - k_ref));
    const double beta = (cfg.b0 + cfg.w_g * s_clue) * gamma;
    return r_a * (1.0 + beta) + r_f;
}

Turn tool_turn(int index, TimeInterval window, bool valid = true, bool executed = true) {
    Turn t;
    t.index        = index;
    t.directive    = CropDirective{window, SamplingStrategy::Fine};
    t.format_valid = valid;
    ToolObservation obs;
    if (executed) {
        obs.frames.push_back({window.start, 64, {}});
        obs.total_tokens = 64;
    }
    t.observation = obs;
    return t;
}

Turn answer_turn(int index, const std::string & answer, bool valid = true) {
    Turn t;
    t.index        = index;
    t.answer       = answer;
    t.format_valid = valid;
    return t;
}

Sample tg_sample(std::vector<TimeInterval> clues, int k_ref, const std::string & key = "B") {
    Sample s;
    s.manifest_ref   = "m";
    s.question       = "q";
    s.answer_key     = key;
    s.clue_intervals = std::move(clues);
    s.tag            = SampleTag::TrajectoryGuided;
    s.k_ref          = k_ref;
    s.task_type      = TaskType::SingleClueTool;
    return s;
}

} // namespace

TEST_CASE("interval scores on the worked examples") {
    SECTION("perfect match") {
        const IntervalScore s = interval_scores({{4, 8}}, {{4, 8}});
        CHECK(s.iou == 1.0);
        CHECK(s.iop == 1.0);
        CHECK(s.iog == 1.0);
    }
    SECTION("partial overlap") {
        const IntervalScore s = interval_scores({{2, 6}}, {{4, 8}});
        CHECK(s.iou == Catch::Approx(1.0 / 3.0).epsilon(1e-14));
        CHECK(s.iop == 0.5);
        CHECK(s.iog == 0.5);
    }
    SECTION("disjoint sets are all zero") {
        const IntervalScore s = interval_scores({{0, 1}}, {{5, 6}});
        CHECK(s.iou == 0.0);
        CHECK(s.iop == 0.0);
        CHECK(s.iog == 0.0);
    }
    SECTION("empty sets are all zero") {
        const IntervalScore s = interval_scores({}, {});
        CHECK(s.iou == 0.0);
        CHECK(s.iop == 0.0);
        CHECK(s.iog == 0.0);
    }
}

TEST_CASE("interval scores match the sweep-line oracle on random sets") {
    DetRng rng(41);
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<TimeInterval> pred, gt;
        for (uint64_t i = rng.below(5); i > 0; --i) {
            const double s = rng.seconds(0.0, 50.0);
            pred.push_back({s, round_ms(s + rng.seconds(0.2, 8.0))});
        }
        for (uint64_t i = rng.below(4); i > 0; --i) {
            const double s = rng.seconds(0.0, 50.0);
            gt.push_back({s, round_ms(s + rng.seconds(0.2, 8.0))});
        }
        const IntervalScore fast = interval_scores(pred, gt);
        const IntervalScore slow = oracle_scores(pred, gt);
        CHECK(fast.iou == Catch::Approx(slow.iou).margin(1e-12));
        CHECK(fast.iop == Catch::Approx(slow.iop).margin(1e-12));
        CHECK(fast.iog == Catch::Approx(slow.iog).margin(1e-12));
    }
}

TEST_CASE("hybrid clue score branches") {
    const RewardConfig cfg;
    CHECK(hybrid_clue_score(SampleTag::Free, {0.9, 0.9, 0.9}, cfg) == 0.5);
    CHECK(hybrid_clue_score(SampleTag::TrajectoryGuided, {1, 1, 1}, cfg) == 1.0);
    const IntervalScore s = interval_scores({{2, 6}}, {{4, 8}});
    CHECK(hybrid_clue_score(SampleTag::TrajectoryGuided, s, cfg) ==
          Catch::Approx((2.0 / 3.0 + 0.5 + 0.5) / 4.0).epsilon(1e-14));
}

TEST_CASE("turn decay") {
    const RewardConfig cfg;
    CHECK(turn_decay(3, 3, cfg) == 1.0);
    CHECK(turn_decay(0, 3, cfg) == 1.0);
    CHECK(turn_decay(5, 3, cfg) == Catch::Approx(0.9).epsilon(1e-14));
    CHECK(turn_decay(30, 3, cfg) == 0.0); // 1 - 0.05*27 < 0, clamped at the floor
}

TEST_CASE("wrong answer collapses the total to the format reward") {
    Trajectory t;
    t.sample_ref = "0";
    t.turns.push_back(tool_turn(1, {4, 8}));
    t.turns.push_back(answer_turn(2, "C"));
    t.tool_call_count = 1;
    const RewardBreakdown b = score_trajectory(t, tg_sample({{4, 8}}, 1, "B"));
    CHECK(b.r_a == 0.0);
    CHECK(b.r_f == 1.0);
    CHECK(b.total == 1.0);
}

TEST_CASE("perfect trajectory scores exactly 3.0") {
    Trajectory t;
    t.sample_ref = "0";
    t.turns.push_back(tool_turn(1, {30, 34}));
    t.turns.push_back(answer_turn(2, "B"));
    t.tool_call_count = 1;
    const RewardBreakdown b = score_trajectory(t, tg_sample({{30, 34}}, 1, "B"));
    CHECK(b.r_a == 1.0);
    CHECK(b.r_f == 1.0);
    CHECK(b.s_clue == 1.0);
    CHECK(b.gamma == 1.0);
    CHECK(b.beta == 1.0);
    CHECK(b.total == 3.0);
}

TEST_CASE("free sample with partial format validity") {
    Sample s;
    s.manifest_ref = "m";
    s.question     = "q";
    s.answer_key   = "B";
    s.tag          = SampleTag::Free;
    s.k_ref        = 4;

    Trajectory t;
    t.sample_ref = "0";
    t.turns.push_back(tool_turn(1, {1, 3}, true));
    t.turns.push_back(tool_turn(2, {5, 7}, false)); // one invalid turn
    t.turns.push_back(tool_turn(3, {9, 11}, true));
    t.turns.push_back(answer_turn(4, "b")); // case-insensitive match
    t.tool_call_count = 3;

    const RewardBreakdown b = score_trajectory(t, s);
    CHECK(b.r_a == 1.0);
    CHECK(b.r_f == 0.75);
    CHECK(b.beta == Catch::Approx(0.75).epsilon(1e-14)); // (0.5 + 0.5*0.5) * 1
    CHECK(b.total == Catch::Approx(2.5).epsilon(1e-14));
}

TEST_CASE("format reward edge cases") {
    Sample free_sample;
    free_sample.manifest_ref = "m";
    free_sample.question     = "q";
    free_sample.answer_key   = "B";
    free_sample.tag          = SampleTag::Free;

    SECTION("zero turns") {
        Trajectory t;
        t.sample_ref  = "0";
        t.termination = Termination::OverTurn;
        const RewardBreakdown b = score_trajectory(t, free_sample);
        CHECK(b.r_f == 1.0);
        CHECK(b.r_a == 0.0);
    }
    SECTION("single malformed coerced answer") {
        Trajectory t;
        t.sample_ref = "0";
        t.turns.push_back(answer_turn(1, "gibberish", false));
        const RewardBreakdown b = score_trajectory(t, free_sample);
        CHECK(b.r_f == 0.0);
    }
}

TEST_CASE("trajectory-guided sample without ground truth is an error") {
    Sample s;
    s.manifest_ref = "m";
    s.question     = "q";
    s.answer_key   = "B";
    s.tag          = SampleTag::TrajectoryGuided;
    s.k_ref        = 1;
    Trajectory t;
    t.sample_ref = "0";
    t.turns.push_back(answer_turn(1, "B"));
    CHECK_THROWS_AS(score_trajectory(t, s), Error);
}

TEST_CASE("only executed directives feed the predicted intervals") {
    Trajectory t;
    t.sample_ref = "0";
    t.turns.push_back(tool_turn(1, {30, 34}, true, true));
    t.turns.push_back(tool_turn(2, {50, 60}, true, false)); // refused: empty observation
    t.turns.push_back(answer_turn(3, "B"));
    t.tool_call_count = 2;

    const auto preds = predicted_intervals(t);
    REQUIRE(preds.size() == 1);
    CHECK(preds[0] == TimeInterval{30, 34});

    // the unexecuted call still counts toward k_t
    const RewardBreakdown b = score_trajectory(t, tg_sample({{30, 34}}, 1, "B"));
    CHECK(b.components.at("k_t") == 2.0);
    CHECK(b.gamma == Catch::Approx(0.95).epsilon(1e-14));
    CHECK(b.s_clue == 1.0);
}

TEST_CASE("randomized totals match direct formula substitution") {
    DetRng rng(53);
    const RewardConfig cfg;
    for (int trial = 0; trial < 1000; ++trial) {
        const bool tg = rng.below(2) == 0;

        Sample s;
        s.manifest_ref = "m";
        s.question     = "q";
        s.answer_key   = "B";
        s.tag          = tg ? SampleTag::TrajectoryGuided : SampleTag::Free;
        s.k_ref        = tg ? 1 + static_cast<int>(rng.below(4)) : static_cast<int>(rng.below(4));
        if (tg) {
            for (uint64_t i = 1 + rng.below(3); i > 0; --i) {
                const double start = rng.seconds(0.0, 50.0);
                s.clue_intervals.push_back({start, round_ms(start + rng.seconds(0.5, 6.0))});
            }
        }

        Trajectory t;
        t.sample_ref = "0";
        int index    = 1;
        int valid    = 0;
        for (uint64_t i = rng.below(6); i > 0; --i) {
            const double start = rng.seconds(0.0, 50.0);
            const bool   ok    = rng.below(4) != 0;
            const bool   exec  = rng.below(5) != 0;
            t.turns.push_back(
                tool_turn(index++, {start, round_ms(start + rng.seconds(0.5, 6.0))}, ok, exec));
            valid += ok ? 1 : 0;
            t.tool_call_count += 1;
        }
        const bool answered     = rng.below(4) != 0;
        const bool answer_right = answered && rng.below(2) == 0;
        if (answered) {
            const bool ok = rng.below(4) != 0;
            t.turns.push_back(answer_turn(index++, answer_right ? "B" : "Z", ok));
            valid += ok ? 1 : 0;
        }

        const RewardBreakdown b = score_trajectory(t, s, cfg);

        const double r_a = answer_right ? 1.0 : 0.0;
        const double r_f =
            t.turns.empty() ? 1.0 : static_cast<double>(valid) / static_cast<double>(t.turns.size());
        const IntervalScore scores = oracle_scores(predicted_intervals(t), s.clue_intervals);
        const double expected =
            oracle_total(r_a, r_f, s.tag, scores, t.tool_call_count, s.k_ref, cfg);

        CHECK(b.total == Catch::Approx(expected).margin(1e-12));
        CHECK(b.total >= 0.0);
        CHECK(b.total <= 3.0);
    }
}

TEST_CASE("monotonicity and invariance properties") {
    const RewardConfig cfg;

    SECTION("total is non-decreasing in each interval score component") {
        DetRng rng(61);
        for (int trial = 0; trial < 300; ++trial) {
            IntervalScore s{rng.unit(), rng.unit(), rng.unit()};
            const double base = oracle_total(1.0, 1.0, SampleTag::TrajectoryGuided, s, 2, 2, cfg);
            IntervalScore up = s;
            switch (rng.below(3)) {
                case 0: up.iou = std::min(1.0, up.iou + rng.unit() * (1 - up.iou)); break;
                case 1: up.iop = std::min(1.0, up.iop + rng.unit() * (1 - up.iop)); break;
                default: up.iog = std::min(1.0, up.iog + rng.unit() * (1 - up.iog)); break;
            }
            const double bumped = oracle_total(1.0, 1.0, SampleTag::TrajectoryGuided, up, 2, 2, cfg);
            CHECK(bumped >= base - 1e-15);

            const double hybrid_base = hybrid_clue_score(SampleTag::TrajectoryGuided, s, cfg);
            const double hybrid_up   = hybrid_clue_score(SampleTag::TrajectoryGuided, up, cfg);
            CHECK(hybrid_up >= hybrid_base - 1e-15);
        }
    }
    SECTION("total is non-increasing in k_t") {
        for (int k = 0; k < 40; ++k) {
            CHECK(turn_decay(k + 1, 3, cfg) <= turn_decay(k, 3, cfg));
        }
    }
    SECTION("zero answer makes total independent of the bonus") {
        Trajectory t;
        t.sample_ref = "0";
        t.turns.push_back(tool_turn(1, {1, 5}));
        t.turns.push_back(answer_turn(2, "WRONG"));
        t.tool_call_count = 1;
        const RewardBreakdown a = score_trajectory(t, tg_sample({{1, 5}}, 1, "B"));
        const RewardBreakdown b = score_trajectory(t, tg_sample({{40, 45}}, 1, "B"));
        CHECK(a.total == a.r_f);
        CHECK(b.total == b.r_f);
        CHECK(a.total == b.total);
    }
    SECTION("free tag ignores predicted intervals") {
        Sample s;
        s.manifest_ref = "m";
        s.question     = "q";
        s.answer_key   = "B";
        s.tag          = SampleTag::Free;
        s.k_ref        = 2;

        Trajectory t1, t2;
        t1.sample_ref = t2.sample_ref = "0";
        t1.turns.push_back(tool_turn(1, {1, 5}));
        t1.turns.push_back(answer_turn(2, "B"));
        t1.tool_call_count = 1;
        t2.turns.push_back(tool_turn(1, {40, 47}));
        t2.turns.push_back(answer_turn(2, "B"));
        t2.tool_call_count = 1;
        CHECK(score_trajectory(t1, s).total == score_trajectory(t2, s).total);
    }
}

TEST_CASE("breakdown serialization carries every component") {
    Trajectory t;
    t.sample_ref = "0";
    t.turns.push_back(tool_turn(1, {30, 34}));
    t.turns.push_back(answer_turn(2, "B"));
    t.tool_call_count = 1;
    const RewardBreakdown b = score_trajectory(t, tg_sample({{30, 34}}, 1, "B"));
    const json j = json::parse(serialize_breakdown(b));
    CHECK(j.at("total") == 3.0);
    CHECK(j.at("components").at("iou") == 1.0);
    CHECK(j.at("components").at("k_ref") == 1.0);
    CHECK(j.at("components").at("tag") == "trajectory_guided");
}

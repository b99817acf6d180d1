// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <atomic>
#include <thread>

#include "clueseek/rollout_remote.hpp"

using namespace clueseek;

namespace {

VideoManifest needle_manifest() {
    VideoManifest m;
    m.id         = "vid";
    m.duration_s = 120.0;
    m.fps        = 2.0;
    m.events.push_back({"e1", {30.0, 34.0}, "clue", Saliency::Subtle, "the needle"});
    m.events.push_back({"e2", {50.0, 52.0}, "background", Saliency::Salient, "hay"});
    return m;
}

Sample needle_sample() {
    Sample s;
    s.manifest_ref   = "vid";
    s.question       = "what is hidden?";
    s.options        = {"A) hay", "B) the needle", "C) rope", "D) nothing"};
    s.answer_key     = "B";
    s.clue_intervals = {{30.0, 34.0}};
    s.tag            = SampleTag::TrajectoryGuided;
    s.k_ref          = 1;
    s.task_type      = TaskType::SingleClueTool;
    return s;
}

std::string tool_step(double start, double end, const std::string & strategy = "fine") {
    return compose_tool_message("look", CropDirective{TimeInterval{start, end},
                                                      strategy_from_string(strategy)});
}

} // namespace

TEST_CASE("oracle nails a single-clue tool sample") {
    const VideoManifest m = needle_manifest();
    const Sample        s = needle_sample();
    OraclePolicy policy;
    const EpisodeResult ep = run_episode(s, m, policy, EpisodeConfig::eval_defaults());

    REQUIRE(ep.trajectory.turns.size() == 2);
    CHECK(ep.trajectory.tool_call_count == 1);
    CHECK(ep.trajectory.turns[0].directive->temporal_segment == TimeInterval{30.0, 34.0});
    CHECK(ep.trajectory.termination == Termination::Answered);
    CHECK(ep.breakdown.total == 3.0);
    CHECK(ep.visual_tokens == 16384 + 6144); // overview plus one fine crop
    CHECK_FALSE(ep.budget_violation);

    // the crop saw the subtle payload at fine density
    const ToolObservation & obs = *ep.trajectory.turns[0].observation;
    bool saw_needle = false;
    for (const ObservedFrame & f : obs.frames) {
        for (const std::string & p : f.event_payloads) {
            if (p == "the needle") saw_needle = true;
        }
    }
    CHECK(saw_needle);
}

TEST_CASE("immediate answer on a direct sample skips the tool") {
    Sample s        = needle_sample();
    s.tag           = SampleTag::Free;
    s.k_ref         = 0;
    s.task_type     = TaskType::SingleClueDirect;
    ScriptedPolicy policy({compose_answer_message("obvious", "B")});
    const EpisodeResult ep = run_episode(s, needle_manifest(), policy, {});
    CHECK(ep.trajectory.turns.size() == 1);
    CHECK(ep.trajectory.tool_call_count == 0);
    CHECK(ep.breakdown.r_a == 1.0);
}

TEST_CASE("nine scripted tool calls under limit 8 hit the forced prompt after turn 8") {
    std::vector<std::string> steps;
    for (int k = 0; k < 9; ++k) {
        steps.push_back(tool_step(k * 2.0, k * 2.0 + 1.0, "coarse"));
    }
    ScriptedPolicy policy(steps);
    const EpisodeResult ep = run_episode(needle_sample(), needle_manifest(), policy,
                                         EpisodeConfig::eval_defaults());
    // the ninth call arrives after the forced prompt, so it ends the episode
    CHECK(ep.trajectory.tool_call_count == 8);
    CHECK(ep.trajectory.termination == Termination::OverTurn);
    CHECK(ep.trajectory.turns.size() == 9); // 8 tool turns plus the coerced final turn
}

TEST_CASE("eight tool calls then an answer terminates as a forced answer") {
    std::vector<std::string> steps;
    for (int k = 0; k < 8; ++k) {
        steps.push_back(tool_step(k * 2.0, k * 2.0 + 1.0, "coarse"));
    }
    steps.push_back(compose_answer_message("done", "B"));
    ScriptedPolicy policy(steps);
    const EpisodeResult ep = run_episode(needle_sample(), needle_manifest(), policy,
                                         EpisodeConfig::eval_defaults());
    CHECK(ep.trajectory.termination == Termination::ForcedAnswer);
    CHECK(ep.breakdown.r_a == 1.0);
}

TEST_CASE("training config marks over-turn without forcing") {
    std::vector<std::string> steps;
    for (int k = 0; k < 7; ++k) {
        steps.push_back(tool_step(k * 2.0, k * 2.0 + 1.0, "coarse"));
    }
    ScriptedPolicy policy(steps);
    const EpisodeResult ep = run_episode(needle_sample(), needle_manifest(), policy,
                                         EpisodeConfig::train_defaults());
    CHECK(ep.trajectory.tool_call_count == 6);
    CHECK(ep.trajectory.termination == Termination::OverTurn);
}

TEST_CASE("budget exhaustion refuses the crop and forces an answer") {
    // fine crops cost 6144; the third would exceed 32768 after the 16384 overview
    std::vector<std::string> steps = {tool_step(0.0, 4.0), tool_step(10.0, 14.0),
                                      tool_step(20.0, 24.0),
                                      compose_answer_message("out of budget", "B")};
    ScriptedPolicy policy(steps);
    const EpisodeResult ep =
        run_episode(needle_sample(), needle_manifest(), policy, EpisodeConfig::eval_defaults());
    CHECK(ep.trajectory.termination == Termination::ForcedAnswer);
    CHECK(ep.visual_tokens == 16384 + 6144 + 6144);
    REQUIRE(ep.trajectory.turns.size() == 4);
    CHECK_FALSE(ep.trajectory.turns[2].observation->executed()); // refused crop
    CHECK(ep.trajectory.tool_call_count == 3);
    CHECK_FALSE(ep.budget_violation);
}

TEST_CASE("directives overhanging the video are clamped and recorded clamped") {
    std::vector<std::string> steps = {tool_step(110.0, 200.0, "medium"),
                                      compose_answer_message("done", "B")};
    ScriptedPolicy policy(steps);
    const EpisodeResult ep =
        run_episode(needle_sample(), needle_manifest(), policy, EpisodeConfig::eval_defaults());
    CHECK(ep.clamped_directives == 1);
    CHECK(ep.trajectory.turns[0].directive->temporal_segment == TimeInterval{110.0, 120.0});
    CHECK(ep.trajectory.turns[0].format_valid); // clamped, still valid
}

TEST_CASE("fully out-of-range directives execute as invalid and the episode continues") {
    std::vector<std::string> steps = {tool_step(150.0, 200.0),
                                      compose_answer_message("oops", "B")};
    ScriptedPolicy policy(steps);
    const EpisodeResult ep =
        run_episode(needle_sample(), needle_manifest(), policy, EpisodeConfig::eval_defaults());
    REQUIRE(ep.trajectory.turns.size() == 2);
    CHECK_FALSE(ep.trajectory.turns[0].format_valid);
    CHECK_FALSE(ep.trajectory.turns[0].observation->executed());
    CHECK(ep.trajectory.termination == Termination::Answered);
    CHECK(ep.breakdown.r_f == 0.5);
}

TEST_CASE("script exhaustion is a policy failure recorded as over-turn") {
    ScriptedPolicy policy({tool_step(0.0, 4.0)});
    const EpisodeResult ep =
        run_episode(needle_sample(), needle_manifest(), policy, EpisodeConfig::eval_defaults());
    CHECK(ep.policy_failed);
    CHECK(ep.trajectory.termination == Termination::OverTurn);
    CHECK(ep.breakdown.r_a == 0.0);
}

TEST_CASE("coarse wide crops hide subtle events but show salient ones") {
    // 60 s at coarse: 120 frames, 17 tokens per frame, far below the 128 threshold
    std::vector<std::string> steps = {tool_step(20.0, 80.0, "coarse"),
                                      compose_answer_message("hm", "B")};
    ScriptedPolicy policy(steps);
    const EpisodeResult ep =
        run_episode(needle_sample(), needle_manifest(), policy, EpisodeConfig::eval_defaults());
    const ToolObservation & obs = *ep.trajectory.turns[0].observation;
    bool saw_subtle = false, saw_salient = false;
    for (const ObservedFrame & f : obs.frames) {
        for (const std::string & p : f.event_payloads) {
            if (p == "the needle") saw_subtle = true;
            if (p == "hay") saw_salient = true;
        }
    }
    CHECK_FALSE(saw_subtle);
    CHECK(saw_salient);
}

TEST_CASE("grounding metrics") {
    SECTION("exact matches") {
        const GroundingResult r = grounding_metrics({{1, 3}, {5, 9}}, {{1, 3}, {5, 9}});
        CHECK_FALSE(r.empty);
        CHECK(r.miou == 1.0);
        CHECK(r.r_at.at("0.3") == 1.0);
        CHECK(r.r_at.at("0.7") == 1.0);
    }
    SECTION("hand-averaged pair") {
        const GroundingResult r = grounding_metrics({{4, 8}, {2, 6}}, {{4, 8}, {4, 8}});
        CHECK(r.miou == Catch::Approx(2.0 / 3.0).epsilon(1e-14));
        CHECK(r.r_at.at("0.3") == 1.0);
        CHECK(r.r_at.at("0.5") == 0.5);
        CHECK(r.r_at.at("0.7") == 0.5);
    }
    SECTION("empty inputs flag themselves") {
        const GroundingResult r = grounding_metrics({}, {});
        CHECK(r.empty);
        CHECK(r.miou == 0.0);
    }
    SECTION("length mismatch is an error") {
        CHECK_THROWS_AS(grounding_metrics({{1, 2}}, {}), Error);
    }
    SECTION("recall is non-increasing in the threshold") {
        DetRng rng(91);
        for (int trial = 0; trial < 100; ++trial) {
            std::vector<TimeInterval> preds, gts;
            for (uint64_t i = 1 + rng.below(6); i > 0; --i) {
                const double ps = rng.seconds(0.0, 40.0);
                const double gs = rng.seconds(0.0, 40.0);
                preds.push_back({ps, round_ms(ps + rng.seconds(0.5, 6.0))});
                gts.push_back({gs, round_ms(gs + rng.seconds(0.5, 6.0))});
            }
            const GroundingResult r = grounding_metrics(preds, gts);
            CHECK(r.r_at.at("0.3") >= r.r_at.at("0.5"));
            CHECK(r.r_at.at("0.5") >= r.r_at.at("0.7"));
        }
    }
}

TEST_CASE("fixed predictions against a fixed ground truth") {
    VideoManifest m;
    m.id         = "fx";
    m.duration_s = 20.0;
    m.fps        = 2.0;
    m.events.push_back({"e", {4.0, 8.0}, "clue", Saliency::Subtle, "x"});

    std::vector<Sample> samples;
    for (int i = 0; i < 2; ++i) {
        Sample s;
        s.manifest_ref   = "fx";
        s.question       = "q";
        s.options        = {"A) x", "B) y"};
        s.answer_key     = "A";
        s.clue_intervals = {{4.0, 8.0}};
        s.tag            = SampleTag::TrajectoryGuided;
        s.k_ref          = 1;
        s.task_type      = TaskType::SingleClueTool;
        samples.push_back(s);
    }
    const ManifestStore store{{m.id, m}};
    PolicySpec spec;
    spec.kind   = PolicyKind::Scripted;
    spec.script = {tool_step(2.0, 6.0), compose_answer_message("guess", "A")};

    const SuiteResult suite = run_suite(samples, store, spec, {}, 1);
    CHECK(suite.report.miou == 1.0 / 3.0);
    CHECK(suite.report.r_at.at("0.3") == 1.0);
    CHECK(suite.report.r_at.at("0.5") == 0.0);
    CHECK(suite.report.r_at.at("0.7") == 0.0);
}

TEST_CASE("oracle suite over synthetic grounding samples is perfect") {
    const SyntheticBatch batch =
        generate_synthetic(17, TaxonomyProfile::single(TaskType::SingleClueTool), 40);
    const ManifestStore store{{batch.manifest.id, batch.manifest}};
    const SuiteResult suite =
        run_suite(batch.samples, store, PolicySpec{PolicyKind::Oracle}, {}, 4);
    CHECK(suite.report.accuracy == 1.0);
    CHECK(suite.report.miou == 1.0);
    CHECK(suite.report.r_at.at("0.3") == 1.0);
    CHECK(suite.report.r_at.at("0.5") == 1.0);
    CHECK(suite.report.r_at.at("0.7") == 1.0);
    CHECK(suite.report.mean_reward == 3.0);
    CHECK(suite.report.budget_violations == 0);
}

TEST_CASE("oracle dominates the random baseline") {
    const SyntheticBatch batch = generate_synthetic(23, TaxonomyProfile::uniform(), 100);
    const ManifestStore  store{{batch.manifest.id, batch.manifest}};
    EpisodeConfig cfg;
    cfg.seed = 5;
    const SuiteResult oracle = run_suite(batch.samples, store, PolicySpec{PolicyKind::Oracle}, cfg, 4);
    const SuiteResult random = run_suite(batch.samples, store, PolicySpec{PolicyKind::Random}, cfg, 4);
    CHECK(oracle.report.mean_reward >= random.report.mean_reward);
    CHECK(oracle.report.mean_reward - random.report.mean_reward > 0.5);
    CHECK(oracle.report.budget_violations == 0);
    CHECK(random.report.budget_violations == 0);
}

TEST_CASE("suite results are identical across parallelism") {
    const SyntheticBatch batch = generate_synthetic(29, TaxonomyProfile::uniform(), 30);
    const ManifestStore  store{{batch.manifest.id, batch.manifest}};
    EpisodeConfig cfg;
    cfg.seed = 11;
    const SuiteResult seq = run_suite(batch.samples, store, PolicySpec{PolicyKind::Random}, cfg, 1);
    const SuiteResult par = run_suite(batch.samples, store, PolicySpec{PolicyKind::Random}, cfg, 8);
    CHECK(serialize_report(seq.report) == serialize_report(par.report));
    REQUIRE(seq.episodes.size() == par.episodes.size());
    for (size_t i = 0; i < seq.episodes.size(); ++i) {
        CHECK(serialize_trajectory(seq.episodes[i].trajectory) ==
              serialize_trajectory(par.episodes[i].trajectory));
    }
}

TEST_CASE("remote policy speaks the one-request-per-turn protocol") {
    httplib::Server server;
    std::atomic<int> calls{0};
    server.Post("/act", [&](const httplib::Request & req, httplib::Response & res) {
        const json j = json::parse(req.body);
        REQUIRE(j.contains("question"));
        REQUIRE(j.contains("remaining_budget"));
        REQUIRE(j.contains("remaining_turns"));
        REQUIRE_FALSE(j.contains("answer_key")); // ground truth never crosses the wire
        if (calls.fetch_add(1) == 0) {
            res.set_content(tool_step(30.0, 34.0), "text/plain");
        } else {
            REQUIRE(j.at("observations").size() == 1);
            res.set_content(compose_answer_message("saw it", "B"), "text/plain");
        }
    });
    const int port = server.bind_to_any_port("127.0.0.1");
    std::thread server_thread([&] { server.listen_after_bind(); });
    while (!server.is_running()) std::this_thread::sleep_for(std::chrono::milliseconds(1));

    RemotePolicy policy("http://127.0.0.1:" + std::to_string(port) + "/act");
    const EpisodeResult ep =
        run_episode(needle_sample(), needle_manifest(), policy, EpisodeConfig::eval_defaults());
    CHECK(ep.breakdown.total == 3.0);
    CHECK(calls.load() == 2);

    server.stop();
    server_thread.join();
}

TEST_CASE("unreachable remote policy fails the episode gracefully") {
    RemotePolicy policy("http://127.0.0.1:1/act");
    const EpisodeResult ep =
        run_episode(needle_sample(), needle_manifest(), policy, EpisodeConfig::eval_defaults());
    CHECK(ep.policy_failed);
    CHECK(ep.trajectory.termination == Termination::OverTurn);
}

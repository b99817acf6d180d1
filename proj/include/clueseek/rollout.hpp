// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <map>
#include <memory>
#include <sstream>
#include <thread>

#include "clueseek/reward.hpp"
#include "clueseek/synthetic.hpp"
#include "clueseek/toolserver.hpp"

namespace clueseek {

enum class PolicyKind { Oracle, Random, Scripted, Remote };

struct PolicySpec {
    PolicyKind               kind = PolicyKind::Oracle;
    uint64_t                 seed = 0;       // Random
    std::vector<std::string> script;         // Scripted: verbatim per-turn texts
    std::string              endpoint;       // Remote
};

struct EpisodeConfig {
    int         turn_limit            = 8;    // eval default; training uses 6
    bool        force_answer_at_limit = true; // training runs disable forcing
    QuotaConfig quota;
    uint64_t    seed                     = 0;
    long        subtle_visibility_tokens = 128;
    std::string forced_answer_prompt     = kDefaultForcedAnswerPrompt;

    static EpisodeConfig eval_defaults() { return EpisodeConfig{}; }

    static EpisodeConfig train_defaults() {
        EpisodeConfig cfg;
        cfg.turn_limit            = 6;
        cfg.force_answer_at_limit = false;
        return cfg;
    }
};

/// What a policy is allowed to see. Only the Oracle may read the sample's
/// ground truth; the remote protocol serializes everything except it.
struct PolicyContext {
    const Sample &        sample;
    const VideoManifest & manifest;
    const std::vector<const ToolObservation *> & observations;
    int                        next_turn_index      = 1;
    long                       remaining_budget     = 0;
    int                        remaining_tool_rounds = 0;
    std::optional<std::string> injected_prompt; // forced-answer message, when delivered
};

class Policy {
public:
    virtual ~Policy() = default;
    /// Returns raw assistant text in the block wire format.
    virtual std::string next_message(const PolicyContext & ctx) = 0;
};

inline std::string compose_tool_message(const std::string & think, const CropDirective & d) {
    return "```think\n" + think + "\n```\n```tool_call\n" + serialize_directive(d) + "\n```\n";
}

inline std::string compose_answer_message(const std::string & think, const std::string & answer) {
    return "```think\n" + think + "\n```\n```answer\n" + answer + "\n```\n";
}

/// Crops each annotated clue interval once (trajectory-guided samples), then
/// answers with the key. Free samples are answered immediately.
class OraclePolicy : public Policy {
public:
    std::string next_message(const PolicyContext & ctx) override {
        const auto & clues = ctx.sample.clue_intervals;
        const bool   seek  = ctx.sample.tag == SampleTag::TrajectoryGuided;
        const size_t done  = ctx.observations.size();
        if (ctx.injected_prompt || !seek || done >= clues.size() ||
            ctx.remaining_tool_rounds <= 0) {
            return compose_answer_message("Evidence collected; answer follows.",
                                          ctx.sample.answer_key);
        }
        // Budget-aware granularity: fine for short clue lists, medium otherwise.
        const SamplingStrategy strategy =
            clues.size() <= 2 ? SamplingStrategy::Fine : SamplingStrategy::Medium;
        return compose_tool_message(
            "Inspect clue " + std::to_string(done + 1) + " of " + std::to_string(clues.size()) + ".",
            CropDirective{clues[done], strategy});
    }
};

/// Weak legal baseline: uniform windows of 4-32 s, random granularity, answers
/// a random option letter.
class RandomPolicy : public Policy {
public:
    explicit RandomPolicy(uint64_t seed) : rng_(seed) {}

    std::string next_message(const PolicyContext & ctx) override {
        if (!ctx.injected_prompt && ctx.remaining_tool_rounds > 0 && rng_.unit() >= 0.3) {
            const double duration = ctx.manifest.duration_s;
            const double len      = rng_.seconds(4.0, std::min(32.0, duration));
            const double start    = rng_.seconds(0.0, std::max(0.001, duration - len));
            const SamplingStrategy strategy = static_cast<SamplingStrategy>(rng_.below(3));
            return compose_tool_message("Probe a window.",
                                        CropDirective{TimeInterval{round_ms(start), round_ms(start + len)},
                                                      strategy});
        }
        const size_t n = std::max<size_t>(ctx.sample.options.size(), 1);
        const std::string letter(1, static_cast<char>('A' + rng_.below(n)));
        return compose_answer_message("Best guess.", letter);
    }

private:
    DetRng rng_;
};

/// Replays verbatim assistant texts; running out of steps is a policy failure.
class ScriptedPolicy : public Policy {
public:
    explicit ScriptedPolicy(std::vector<std::string> steps) : steps_(std::move(steps)) {}

    std::string next_message(const PolicyContext &) override {
        if (next_ >= steps_.size()) {
            throw Error(ErrorCode::PolicyFailure, "script exhausted");
        }
        return steps_[next_++];
    }

private:
    std::vector<std::string> steps_;
    size_t                   next_ = 0;
};

inline uint64_t episode_seed(uint64_t suite_seed, size_t episode_index) {
    uint64_t z = suite_seed + 0x9E3779B97F4A7C15ull * (episode_index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

using PolicyFactory = std::function<std::unique_ptr<Policy>(const PolicySpec &, uint64_t seed)>;

/// Builds Oracle/Random/Scripted policies; Remote needs a transport-aware
/// factory (see rollout_remote.hpp).
inline std::unique_ptr<Policy> make_policy(const PolicySpec & spec, uint64_t seed) {
    switch (spec.kind) {
        case PolicyKind::Oracle:   return std::make_unique<OraclePolicy>();
        case PolicyKind::Random:   return std::make_unique<RandomPolicy>(spec.seed ^ seed);
        case PolicyKind::Scripted: return std::make_unique<ScriptedPolicy>(spec.script);
        case PolicyKind::Remote:
            throw Error(ErrorCode::BadConfig, "remote policies need the remote-capable factory");
    }
    throw Error(ErrorCode::BadConfig, "unknown policy kind");
}

/// Whitespace-delimited word count; stands in for tokenizer-accurate counting.
inline long count_text_tokens(std::string_view text) {
    long count   = 0;
    bool in_word = false;
    for (char c : text) {
        const bool space = c == ' ' || c == '\t' || c == '\n' || c == '\r';
        if (!space && !in_word) ++count;
        in_word = !space;
    }
    return count;
}

struct EpisodeResult {
    Trajectory      trajectory;
    RewardBreakdown breakdown;
    long            visual_tokens  = 0;
    long            text_tokens    = 0;
    long            context_tokens = 0;
    int             clamped_directives = 0;
    bool            budget_violation   = false;
    bool            policy_failed      = false;
    bool            errored            = false;
    std::string     error_message;
};

/// Runs one dialogue to termination: policy text in, protocol advance, tool
/// execution against the ledger, reward at the end. Deterministic for
/// deterministic policies.
inline EpisodeResult run_episode(const Sample & sample, const VideoManifest & manifest,
                                 Policy & policy, const EpisodeConfig & cfg,
                                 const std::string & sample_ref = "0",
                                 const RewardConfig & reward_cfg = {},
                                 const AnswerMatcher & matcher = default_answer_matcher) {
    EpisodeResult result;

    ProtocolConfig pcfg;
    pcfg.turn_limit            = cfg.turn_limit;
    pcfg.force_answer_at_limit = cfg.force_answer_at_limit;
    pcfg.forced_answer_prompt  = cfg.forced_answer_prompt;
    DialogueState state(sample_ref, pcfg);

    BudgetLedger ledger;
    ledger.cap = cfg.quota.max_visual_budget;
    charge(ledger, 0, cfg.quota.overview_quota);

    std::vector<const ToolObservation *> observations;

    while (!state.terminal()) {
        std::optional<std::string> injected;
        if (state.forced_prompt_pending()) {
            injected = state.take_forced_prompt();
            result.text_tokens += count_text_tokens(*injected);
        }
        PolicyContext ctx{sample,
                          manifest,
                          observations,
                          static_cast<int>(state.trajectory().turns.size()) + 1,
                          ledger.remaining(),
                          cfg.turn_limit - state.trajectory().tool_call_count,
                          injected};
        std::string message;
        try {
            message = policy.next_message(ctx);
        } catch (const Error & e) {
            if (e.code() != ErrorCode::PolicyFailure) throw;
            result.policy_failed = true;
            state.abort(Termination::OverTurn);
            break;
        }
        result.text_tokens += count_text_tokens(message);

        const AdvanceResult advanced = state.advance(message);
        if (!advanced.observation_expected) continue;

        const CropDirective & requested = *state.trajectory().turns.back().directive;
        ToolObservation obs;
        CropStatus      status = CropStatus::Ok;
        std::optional<CropDirective> executed;
        try {
            const SamplingPlan plan =
                compute_sampling_plan(requested, cfg.quota, manifest.duration_s);
            if (plan.directive.temporal_segment != requested.temporal_segment) {
                ++result.clamped_directives;
            }
            const int turn = static_cast<int>(state.trajectory().turns.size());
            if (!charge(ledger, turn, plan).charged) {
                status = CropStatus::RefusedBudget;
            } else {
                obs      = observe_plan(plan, manifest, cfg.subtle_visibility_tokens);
                executed = plan.directive;
            }
        } catch (const Error & e) {
            if (e.code() != ErrorCode::ZeroLengthInterval) throw;
            status = CropStatus::InvalidDirective;
        }
        state.attach_observation(std::move(obs), status, executed);
        if (status == CropStatus::Ok) {
            observations.push_back(&*state.trajectory().turns.back().observation);
        }
    }

    result.trajectory       = state.trajectory();
    result.visual_tokens    = ledger.spent;
    result.context_tokens   = ledger.spent + result.text_tokens;
    result.budget_violation = ledger.spent > ledger.cap;
    result.breakdown        = score_trajectory(result.trajectory, sample, reward_cfg, matcher);
    return result;
}

// ---- metrics ----------------------------------------------------------------

inline const double kRecallThresholds[] = {0.3, 0.5, 0.7};

struct GroundingResult {
    std::map<std::string, double> r_at{{"0.3", 0.0}, {"0.5", 0.0}, {"0.7", 0.0}};
    double miou  = 0.0;
    bool   empty = true;
};

/// Paired recall-at-IoU and mean IoU over (prediction, ground truth) pairs.
inline GroundingResult grounding_metrics(const std::vector<TimeInterval> & preds,
                                         const std::vector<TimeInterval> & gts) {
    if (preds.size() != gts.size()) {
        throw Error(ErrorCode::LengthMismatch, "prediction/ground-truth counts differ");
    }
    GroundingResult res;
    if (preds.empty()) return res;
    res.empty = false;

    double iou_sum = 0.0;
    std::map<std::string, int> hits{{"0.3", 0}, {"0.5", 0}, {"0.7", 0}};
    for (size_t i = 0; i < preds.size(); ++i) {
        const double iou = interval_scores({preds[i]}, {gts[i]}).iou;
        iou_sum += iou;
        for (double th : kRecallThresholds) {
            char key[8];
            std::snprintf(key, sizeof(key), "%.1f", th);
            if (iou >= th) hits[key] += 1;
        }
    }
    const double n = static_cast<double>(preds.size());
    res.miou       = iou_sum / n;
    for (auto & [key, value] : res.r_at) {
        value = hits[key] / n;
    }
    return res;
}

struct MetricsReport {
    int    episodes          = 0;
    double accuracy          = 0.0;
    std::map<std::string, double> r_at{{"0.3", 0.0}, {"0.5", 0.0}, {"0.7", 0.0}};
    double miou              = 0.0;
    int    grounded_episodes = 0; // trajectory-guided samples feeding r_at/miou
    double mean_reward       = 0.0;
    double mean_turns        = 0.0;
    int    budget_violations = 0;
    int    policy_failures   = 0;
    int    errors            = 0;
};

inline std::string serialize_report(const MetricsReport & r) {
    return "{\"episodes\":" + wire::num(r.episodes) + ",\"accuracy\":" + wire::num(r.accuracy) +
           ",\"r_at\":{\"0.3\":" + wire::num(r.r_at.at("0.3")) +
           ",\"0.5\":" + wire::num(r.r_at.at("0.5")) +
           ",\"0.7\":" + wire::num(r.r_at.at("0.7")) + "}" +
           ",\"miou\":" + wire::num(r.miou) +
           ",\"grounded_episodes\":" + wire::num(r.grounded_episodes) +
           ",\"mean_reward\":" + wire::num(r.mean_reward) +
           ",\"mean_turns\":" + wire::num(r.mean_turns) +
           ",\"budget_violations\":" + wire::num(r.budget_violations) +
           ",\"policy_failures\":" + wire::num(r.policy_failures) +
           ",\"errors\":" + wire::num(r.errors) + "}";
}

struct SuiteResult {
    MetricsReport              report;
    std::vector<EpisodeResult> episodes; // in sample order
};

using ManifestStore = std::map<std::string, VideoManifest>;

/// Order-independent reduction over per-episode results. Grounding metrics
/// cover trajectory-guided samples only; other tags have no interval ground
/// truth to recall against.
inline MetricsReport aggregate_report(const std::vector<EpisodeResult> & episodes,
                                      const std::vector<Sample> & samples) {
    if (episodes.size() != samples.size()) {
        throw Error(ErrorCode::LengthMismatch, "episode/sample counts differ");
    }
    MetricsReport rep;
    std::map<std::string, int> hits{{"0.3", 0}, {"0.5", 0}, {"0.7", 0}};
    double iou_sum = 0.0;
    int    scored  = 0;
    for (size_t i = 0; i < episodes.size(); ++i) {
        const EpisodeResult & ep = episodes[i];
        rep.episodes += 1;
        if (ep.errored) {
            rep.errors += 1;
            continue;
        }
        ++scored;
        rep.accuracy += ep.breakdown.r_a;
        rep.mean_reward += ep.breakdown.total;
        rep.mean_turns += static_cast<double>(ep.trajectory.turns.size());
        rep.budget_violations += ep.budget_violation ? 1 : 0;
        rep.policy_failures += ep.policy_failed ? 1 : 0;
        if (samples[i].tag == SampleTag::TrajectoryGuided) {
            rep.grounded_episodes += 1;
            const double iou =
                interval_scores(predicted_intervals(ep.trajectory), samples[i].clue_intervals).iou;
            iou_sum += iou;
            for (double th : kRecallThresholds) {
                char key[8];
                std::snprintf(key, sizeof(key), "%.1f", th);
                if (iou >= th) hits[key] += 1;
            }
        }
    }
    if (scored > 0) {
        rep.accuracy /= scored;
        rep.mean_reward /= scored;
        rep.mean_turns /= scored;
    }
    if (rep.grounded_episodes > 0) {
        rep.miou = iou_sum / rep.grounded_episodes;
        for (auto & [key, value] : rep.r_at) {
            value = static_cast<double>(hits[key]) / rep.grounded_episodes;
        }
    }
    return rep;
}

/// Runs every sample once. Episodes are independent; workers pull indices and
/// the aggregation happens in sample order afterwards, so reports are
/// identical for any parallelism.
inline SuiteResult run_suite(const std::vector<Sample> & samples, const ManifestStore & manifests,
                             const PolicySpec & spec, const EpisodeConfig & cfg,
                             int parallelism = 1,
                             const PolicyFactory & factory = {},
                             const RewardConfig & reward_cfg = {}) {
    if (parallelism < 1) {
        throw Error(ErrorCode::BadConfig, "parallelism must be >= 1");
    }
    const PolicyFactory make = factory ? factory : PolicyFactory(make_policy);

    SuiteResult result;
    result.episodes.resize(samples.size());

    std::atomic<size_t> cursor{0};
    auto worker = [&] {
        for (;;) {
            const size_t i = cursor.fetch_add(1);
            if (i >= samples.size()) return;
            EpisodeResult & slot = result.episodes[i];
            try {
                const Sample & sample = samples[i];
                auto mit = manifests.find(sample.manifest_ref);
                if (mit == manifests.end()) {
                    throw Error(ErrorCode::UnknownManifest,
                                "manifest '" + sample.manifest_ref + "' not provided");
                }
                auto policy = make(spec, episode_seed(cfg.seed, i));
                slot = run_episode(sample, mit->second, *policy, cfg, std::to_string(i), reward_cfg);
            } catch (const std::exception & e) {
                slot.errored       = true;
                slot.error_message = e.what();
            }
        }
    };

    if (parallelism == 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        for (int t = 0; t < parallelism; ++t) threads.emplace_back(worker);
        for (auto & t : threads) t.join();
    }

    result.report = aggregate_report(result.episodes, samples);
    return result;
}

} // namespace clueseek

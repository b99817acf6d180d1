// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "clueseek/grpo.hpp"
#include "clueseek/reward.hpp"
#include "clueseek/rollout.hpp"

namespace clueseek {

/// One config document for the whole toolchain. Defaults are the published
/// training/evaluation constants; environment variables override file values
/// under the CLUESEEK_<SECTION>_<FIELD> scheme.
struct GlobalConfig {
    QuotaConfig   quota;
    RewardConfig  reward;
    LimitsConfig  limits;
    EpisodeConfig episode;

    void validate() const {
        quota.validate();
        reward.validate();
        limits.validate();
        if (episode.turn_limit < 1) {
            throw Error(ErrorCode::BadConfig, "episode turn_limit must be >= 1");
        }
    }
};

namespace detail {

inline void env_override(const char * name, double & field) {
    if (const char * v = std::getenv(name)) field = std::stod(v);
}
inline void env_override(const char * name, long & field) {
    if (const char * v = std::getenv(name)) field = std::stol(v);
}
inline void env_override(const char * name, int & field) {
    if (const char * v = std::getenv(name)) field = std::stoi(v);
}
inline void env_override(const char * name, uint64_t & field) {
    if (const char * v = std::getenv(name)) field = std::stoull(v);
}
inline void env_override(const char * name, bool & field) {
    if (const char * v = std::getenv(name)) field = std::string(v) == "1" || std::string(v) == "true";
}
inline void env_override(const char * name, std::string & field) {
    if (const char * v = std::getenv(name)) field = v;
}

} // namespace detail

inline void apply_env_overrides(GlobalConfig & cfg) {
    using detail::env_override;
    env_override("CLUESEEK_QUOTA_OVERVIEW_QUOTA", cfg.quota.overview_quota);
    env_override("CLUESEEK_QUOTA_COARSE", cfg.quota.coarse);
    env_override("CLUESEEK_QUOTA_MEDIUM", cfg.quota.medium);
    env_override("CLUESEEK_QUOTA_FINE", cfg.quota.fine);
    env_override("CLUESEEK_QUOTA_MAX_VISUAL_BUDGET", cfg.quota.max_visual_budget);
    env_override("CLUESEEK_QUOTA_FPS", cfg.quota.fps);
    env_override("CLUESEEK_QUOTA_FRAME_LIMIT", cfg.quota.frame_limit);
    env_override("CLUESEEK_QUOTA_MIN_TOKENS_PER_FRAME", cfg.quota.min_tokens_per_frame);

    env_override("CLUESEEK_REWARD_B0", cfg.reward.b0);
    env_override("CLUESEEK_REWARD_W_G", cfg.reward.w_g);
    env_override("CLUESEEK_REWARD_C_FREE", cfg.reward.c_free);
    env_override("CLUESEEK_REWARD_LAMBDA_DECAY", cfg.reward.lambda_decay);
    env_override("CLUESEEK_REWARD_GAMMA_FLOOR", cfg.reward.gamma_floor);

    env_override("CLUESEEK_LIMITS_C_CONTEXT", cfg.limits.c_context);
    env_override("CLUESEEK_LIMITS_C_TURN", cfg.limits.c_turn);
    env_override("CLUESEEK_LIMITS_EPSILON_LOW", cfg.limits.epsilon_low);
    env_override("CLUESEEK_LIMITS_EPSILON_HIGH", cfg.limits.epsilon_high);
    env_override("CLUESEEK_LIMITS_GROUP_SIZE", cfg.limits.group_size);
    env_override("CLUESEEK_LIMITS_STD_EPSILON", cfg.limits.std_epsilon);

    env_override("CLUESEEK_EPISODE_TURN_LIMIT", cfg.episode.turn_limit);
    env_override("CLUESEEK_EPISODE_FORCE_ANSWER_AT_LIMIT", cfg.episode.force_answer_at_limit);
    env_override("CLUESEEK_EPISODE_SEED", cfg.episode.seed);
    env_override("CLUESEEK_EPISODE_SUBTLE_VISIBILITY_TOKENS", cfg.episode.subtle_visibility_tokens);
    env_override("CLUESEEK_EPISODE_FORCED_ANSWER_PROMPT", cfg.episode.forced_answer_prompt);
}

inline std::string serialize_config(const GlobalConfig & c) {
    return "{\"quota\":{"
           "\"overview_quota\":" + wire::num(c.quota.overview_quota) +
           ",\"coarse\":" + wire::num(c.quota.coarse) +
           ",\"medium\":" + wire::num(c.quota.medium) +
           ",\"fine\":" + wire::num(c.quota.fine) +
           ",\"max_visual_budget\":" + wire::num(c.quota.max_visual_budget) +
           ",\"fps\":" + wire::sec(c.quota.fps) +
           ",\"frame_limit\":" + wire::num(c.quota.frame_limit) +
           ",\"min_tokens_per_frame\":" + wire::num(c.quota.min_tokens_per_frame) +
           "},\"reward\":{"
           "\"b0\":" + wire::num(c.reward.b0) +
           ",\"w_g\":" + wire::num(c.reward.w_g) +
           ",\"c_free\":" + wire::num(c.reward.c_free) +
           ",\"lambda_decay\":" + wire::num(c.reward.lambda_decay) +
           ",\"gamma_floor\":" + wire::num(c.reward.gamma_floor) +
           "},\"limits\":{"
           "\"c_context\":" + wire::num(c.limits.c_context) +
           ",\"c_turn\":" + wire::num(c.limits.c_turn) +
           ",\"epsilon_low\":" + wire::num(c.limits.epsilon_low) +
           ",\"epsilon_high\":" + wire::num(c.limits.epsilon_high) +
           ",\"group_size\":" + wire::num(c.limits.group_size) +
           ",\"std_epsilon\":" + wire::num(c.limits.std_epsilon) +
           "},\"episode\":{"
           "\"turn_limit\":" + wire::num(c.episode.turn_limit) +
           ",\"force_answer_at_limit\":" + wire::boolean(c.episode.force_answer_at_limit) +
           ",\"seed\":" + wire::num(c.episode.seed) +
           ",\"subtle_visibility_tokens\":" + wire::num(c.episode.subtle_visibility_tokens) +
           ",\"forced_answer_prompt\":" + wire::str(c.episode.forced_answer_prompt) + "}}";
}

inline GlobalConfig parse_config(const std::string & text) {
    const json j = parse_json(text, "config");
    GlobalConfig c;
    if (j.contains("quota")) {
        const json & q = j.at("quota");
        c.quota.overview_quota       = q.value("overview_quota", c.quota.overview_quota);
        c.quota.coarse               = q.value("coarse", c.quota.coarse);
        c.quota.medium               = q.value("medium", c.quota.medium);
        c.quota.fine                 = q.value("fine", c.quota.fine);
        c.quota.max_visual_budget    = q.value("max_visual_budget", c.quota.max_visual_budget);
        c.quota.fps                  = q.value("fps", c.quota.fps);
        c.quota.frame_limit          = q.value("frame_limit", c.quota.frame_limit);
        c.quota.min_tokens_per_frame = q.value("min_tokens_per_frame", c.quota.min_tokens_per_frame);
    }
    if (j.contains("reward")) {
        const json & r = j.at("reward");
        c.reward.b0           = r.value("b0", c.reward.b0);
        c.reward.w_g          = r.value("w_g", c.reward.w_g);
        c.reward.c_free       = r.value("c_free", c.reward.c_free);
        c.reward.lambda_decay = r.value("lambda_decay", c.reward.lambda_decay);
        c.reward.gamma_floor  = r.value("gamma_floor", c.reward.gamma_floor);
    }
    if (j.contains("limits")) {
        const json & l = j.at("limits");
        c.limits.c_context    = l.value("c_context", c.limits.c_context);
        c.limits.c_turn       = l.value("c_turn", c.limits.c_turn);
        c.limits.epsilon_low  = l.value("epsilon_low", c.limits.epsilon_low);
        c.limits.epsilon_high = l.value("epsilon_high", c.limits.epsilon_high);
        c.limits.group_size   = l.value("group_size", c.limits.group_size);
        c.limits.std_epsilon  = l.value("std_epsilon", c.limits.std_epsilon);
    }
    if (j.contains("episode")) {
        const json & e = j.at("episode");
        c.episode.turn_limit            = e.value("turn_limit", c.episode.turn_limit);
        c.episode.force_answer_at_limit = e.value("force_answer_at_limit", c.episode.force_answer_at_limit);
        c.episode.seed                  = e.value("seed", c.episode.seed);
        c.episode.subtle_visibility_tokens =
            e.value("subtle_visibility_tokens", c.episode.subtle_visibility_tokens);
        c.episode.forced_answer_prompt = e.value("forced_answer_prompt", c.episode.forced_answer_prompt);
    }
    c.episode.quota = c.quota;
    return c;
}

inline GlobalConfig load_config(const std::string & path, bool with_env = true) {
    GlobalConfig cfg;
    if (!path.empty() && path != "default") {
        std::ifstream in(path);
        if (!in) {
            throw Error(ErrorCode::IoError, "cannot open config file '" + path + "'");
        }
        std::ostringstream ss;
        ss << in.rdbuf();
        cfg = parse_config(ss.str());
    }
    if (with_env) {
        apply_env_overrides(cfg);
    }
    cfg.episode.quota = cfg.quota;
    cfg.validate();
    return cfg;
}

} // namespace clueseek

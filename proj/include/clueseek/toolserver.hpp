// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <unordered_map>

#include "clueseek/manifest.hpp"
#include "clueseek/protocol.hpp"
#include "clueseek/quota.hpp"

namespace clueseek {

struct Session {
    std::string id;
    std::string manifest_ref;
    long        remaining_budget = 0;
    long long   created_at       = 0; // unix seconds
};

struct CropRequest {
    std::string   session_id;
    CropDirective directive;
};

struct CropResponse {
    CropStatus      status = CropStatus::Ok;
    SamplingPlan    plan;        // meaningful iff status == ok
    ToolObservation observation; // empty when the crop was not executed
    long            remaining_budget = 0;
};

/// Builds the observation for an executed plan: frames sampled at mid-points
/// of the plan's window, carrying payloads of events visible at this
/// per-frame token density. Subtle events need at least
/// subtle_visibility_tokens per frame to show up.
inline ToolObservation observe_plan(const SamplingPlan & plan, const VideoManifest & manifest,
                                    long subtle_visibility_tokens = 128) {
    ToolObservation obs;
    const TimeInterval window = plan.directive.temporal_segment;

    // One pass over the manifest, then per-frame checks against the handful
    // of events inside the window.
    std::vector<const Event *> candidates;
    for (const Event & e : manifest.events) {
        if (e.saliency == Saliency::Subtle && plan.tokens_per_frame < subtle_visibility_tokens) {
            continue;
        }
        if (e.interval.overlaps(window)) candidates.push_back(&e);
    }

    const double spacing = window.duration() / static_cast<double>(plan.frame_count);
    for (long i = 0; i < plan.frame_count; ++i) {
        ObservedFrame f;
        f.timestamp = round_ms(window.start + spacing * (static_cast<double>(i) + 0.5));
        f.tokens    = plan.tokens_per_frame;
        for (const Event * e : candidates) {
            if (e->interval.contains(f.timestamp)) {
                f.event_payloads.push_back(e->payload);
            }
        }
        obs.total_tokens += f.tokens;
        obs.frames.push_back(std::move(f));
    }
    return obs;
}

/// The VideoCrop tool over registered manifests. Sessions are isolated;
/// each crop charges its plan atomically against the session ledger, so the
/// budget stays linearizable under concurrent requests.
class ToolService {
public:
    explicit ToolService(QuotaConfig quota = {}, long subtle_visibility_tokens = 128,
                         std::function<long long()> clock = nullptr)
        : quota_(quota),
          subtle_visibility_tokens_(subtle_visibility_tokens),
          clock_(std::move(clock)) {
        quota_.validate();
    }

    void register_manifest(VideoManifest manifest) {
        std::unique_lock lock(mutex_);
        manifests_[manifest.id] = std::move(manifest);
    }

    const QuotaConfig & quota() const { return quota_; }

    /// Opens a session and pre-charges the global overview quota, so the
    /// remaining budget reflects the full visual context cap.
    Session open_session(const std::string & manifest_ref) {
        std::unique_lock lock(mutex_);
        if (!manifests_.count(manifest_ref)) {
            throw Error(ErrorCode::UnknownManifest, "manifest '" + manifest_ref + "' not registered");
        }
        auto state          = std::make_unique<SessionState>();
        state->manifest_ref = manifest_ref;
        state->ledger.cap   = quota_.max_visual_budget;
        charge(state->ledger, 0, quota_.overview_quota);

        Session meta;
        meta.id               = "sess-" + std::to_string(++session_counter_);
        meta.manifest_ref     = manifest_ref;
        meta.remaining_budget = state->ledger.remaining();
        meta.created_at       = clock_ ? clock_() : 0;
        state->meta           = meta;
        sessions_[meta.id]    = std::move(state);
        return meta;
    }

    CropResponse crop(const CropRequest & req) {
        // Shared lock keeps the session alive for the whole crop; same-session
        // crops serialize on the per-session mutex so the charge and the
        // observation stay atomic.
        std::shared_lock lock(mutex_);
        auto it = sessions_.find(req.session_id);
        if (it == sessions_.end()) {
            throw Error(ErrorCode::UnknownSession, "session '" + req.session_id + "' not open");
        }
        SessionState * state          = it->second.get();
        const VideoManifest * manifest = &manifests_.at(state->manifest_ref);

        std::lock_guard session_lock(state->op_mutex);

        CropResponse resp;
        SamplingPlan plan;
        try {
            plan = compute_sampling_plan(req.directive, quota_, manifest->duration_s);
        } catch (const Error & e) {
            if (e.code() != ErrorCode::ZeroLengthInterval) throw;
            resp.status           = CropStatus::InvalidDirective;
            resp.remaining_budget = state->ledger.remaining();
            return resp;
        }

        const int turn = static_cast<int>(state->ledger.entries.size());
        const ChargeResult charged = charge(state->ledger, turn, plan);
        if (!charged.charged) {
            resp.status           = CropStatus::RefusedBudget;
            resp.remaining_budget = charged.remaining;
            return resp;
        }
        resp.status           = CropStatus::Ok;
        resp.plan             = plan;
        resp.observation      = observe_plan(plan, *manifest, subtle_visibility_tokens_);
        resp.remaining_budget = charged.remaining;
        return resp;
    }

    /// Idempotent: closing an unknown or already-closed session is a no-op.
    bool close_session(const std::string & id) {
        std::unique_lock lock(mutex_);
        return sessions_.erase(id) > 0;
    }

    long session_spent(const std::string & id) const {
        std::shared_lock lock(mutex_);
        auto it = sessions_.find(id);
        if (it == sessions_.end()) {
            throw Error(ErrorCode::UnknownSession, "session '" + id + "' not open");
        }
        return it->second->ledger.spent;
    }

private:
    struct SessionState {
        Session      meta;
        std::string  manifest_ref;
        BudgetLedger ledger;
        std::mutex   op_mutex;
    };

    QuotaConfig                quota_;
    long                       subtle_visibility_tokens_;
    std::function<long long()> clock_;

    mutable std::shared_mutex mutex_;
    std::unordered_map<std::string, VideoManifest>              manifests_;
    std::unordered_map<std::string, std::unique_ptr<SessionState>> sessions_;
    long session_counter_ = 0;
};

// ---- wire schema -----------------------------------------------------------

inline std::string serialize_session(const Session & s) {
    return "{\"id\":" + wire::str(s.id) + ",\"manifest_ref\":" + wire::str(s.manifest_ref) +
           ",\"remaining_budget\":" + wire::num(s.remaining_budget) +
           ",\"created_at\":" + wire::num(s.created_at) + "}";
}

inline std::string serialize_crop_response(const CropResponse & r) {
    std::string out = "{\"status\":" + wire::str(to_string(r.status));
    if (r.status == CropStatus::Ok) {
        out += ",\"plan\":" + serialize_plan(r.plan);
    }
    out += ",\"observation\":" + serialize_observation(r.observation) +
           ",\"remaining_budget\":" + wire::num(r.remaining_budget) + "}";
    return out;
}

inline CropRequest parse_crop_request(const json & j) {
    CropRequest req;
    req.session_id = require_string(j, "session_id", "crop request");
    req.directive  = parse_directive(require_field(j, "directive", "crop request"), "crop request");
    return req;
}

} // namespace clueseek

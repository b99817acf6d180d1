// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "httplib.h"

#include "clueseek/rollout.hpp"

namespace clueseek {

/// One request per turn: the runner posts the visible dialogue state, the
/// remote policy replies with raw assistant text. Ground truth never crosses
/// the wire.
class RemotePolicy : public Policy {
public:
    explicit RemotePolicy(const std::string & endpoint) {
        const auto slash = endpoint.find('/', endpoint.find("//") + 2);
        if (endpoint.rfind("http", 0) != 0) {
            throw Error(ErrorCode::BadConfig, "remote endpoint must be an http URL");
        }
        host_ = slash == std::string::npos ? endpoint : endpoint.substr(0, slash);
        path_ = slash == std::string::npos ? "/act" : endpoint.substr(slash);
    }

    std::string next_message(const PolicyContext & ctx) override {
        std::string body = "{\"question\":" + wire::str(ctx.sample.question) +
                           ",\"options\":" +
                           wire::array(ctx.sample.options,
                                       [](const std::string & o) { return wire::str(o); }) +
                           ",\"video\":{\"duration_s\":" + wire::sec(ctx.manifest.duration_s) +
                           ",\"fps\":" + wire::sec(ctx.manifest.fps) + "}" +
                           ",\"observations\":[";
        for (size_t i = 0; i < ctx.observations.size(); ++i) {
            if (i) body += ",";
            body += serialize_observation(*ctx.observations[i]);
        }
        body += "],\"remaining_budget\":" + wire::num(ctx.remaining_budget) +
                ",\"remaining_turns\":" + wire::num(ctx.remaining_tool_rounds) +
                ",\"turn_index\":" + wire::num(ctx.next_turn_index);
        if (ctx.injected_prompt) {
            body += ",\"injected_prompt\":" + wire::str(*ctx.injected_prompt);
        }
        body += "}";

        httplib::Client client(host_);
        client.set_connection_timeout(5, 0);
        client.set_read_timeout(30, 0);
        auto res = client.Post(path_, body, "application/json");
        if (!res || res->status != 200) {
            throw Error(ErrorCode::PolicyFailure,
                        "remote policy unreachable or non-200 from " + host_ + path_);
        }
        return res->body;
    }

private:
    std::string host_;
    std::string path_;
};

/// Factory covering all four policy kinds.
inline std::unique_ptr<Policy> make_policy_with_remote(const PolicySpec & spec, uint64_t seed) {
    if (spec.kind == PolicyKind::Remote) {
        return std::make_unique<RemotePolicy>(spec.endpoint);
    }
    return make_policy(spec, seed);
}

} // namespace clueseek

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "httplib.h"

#include "clueseek/datapipe.hpp"

namespace clueseek {

/// Judge backed by an external service: POST {sample, stage, stage_output},
/// expect {"verdict":"pass"|"fail","reason":...}. Transport problems surface
/// as JudgeFailure so the pipeline's retry policy applies.
inline Judge make_http_judge(const std::string & endpoint) {
    if (endpoint.rfind("http", 0) != 0) {
        throw Error(ErrorCode::BadConfig, "judge endpoint must be an http URL");
    }
    const auto  slash = endpoint.find('/', endpoint.find("//") + 2);
    std::string host  = slash == std::string::npos ? endpoint : endpoint.substr(0, slash);
    std::string path  = slash == std::string::npos ? "/judge" : endpoint.substr(slash);

    return [host, path](const JudgeInput & in) {
        const std::string body = "{\"sample\":" + serialize_sample(in.sample) +
                                 ",\"stage\":" + wire::str(to_string(in.stage)) +
                                 ",\"stage_output\":" + in.stage_output.dump() + "}";
        httplib::Client client(host);
        client.set_connection_timeout(5, 0);
        client.set_read_timeout(60, 0);
        auto res = client.Post(path, body, "application/json");
        if (!res || res->status != 200) {
            throw Error(ErrorCode::JudgeFailure, "judge unreachable or non-200 from " + host + path);
        }
        const json j = parse_json(res->body, "judge reply");
        Verdict    v;
        v.pass   = require_string(j, "verdict", "judge reply") == "pass";
        v.reason = j.value("reason", "");
        return v;
    };
}

} // namespace clueseek

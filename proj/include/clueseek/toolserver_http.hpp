// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <istream>
#include <ostream>

#include "httplib.h"

#include "clueseek/toolserver.hpp"

namespace clueseek {

/// HTTP envelope: POST /manifests, POST /sessions, POST /sessions/{id}/crop,
/// DELETE /sessions/{id}. Budget refusals and invalid directives are 200-level
/// statuses in the body, not transport errors.
class HttpToolServer {
public:
    explicit HttpToolServer(ToolService & service) : service_(service) {
        server_.Post("/manifests", [this](const httplib::Request & req, httplib::Response & res) {
            handle(res, [&] {
                VideoManifest m = load_manifest(req.body);
                const std::string id = m.id;
                service_.register_manifest(std::move(m));
                return "{\"registered\":" + wire::str(id) + "}";
            });
        });
        server_.Post("/sessions", [this](const httplib::Request & req, httplib::Response & res) {
            handle(res, [&] {
                const json j = parse_json(req.body, "open session");
                const Session s = service_.open_session(require_string(j, "manifest_ref", "open session"));
                return serialize_session(s);
            });
        });
        server_.Post(R"(/sessions/([^/]+)/crop)", [this](const httplib::Request & req, httplib::Response & res) {
            handle(res, [&] {
                const json j = parse_json(req.body, "crop");
                CropRequest creq;
                creq.session_id = req.matches[1];
                creq.directive  = parse_directive(require_field(j, "directive", "crop"), "crop");
                return serialize_crop_response(service_.crop(creq));
            });
        });
        server_.Delete(R"(/sessions/([^/]+))", [this](const httplib::Request & req, httplib::Response & res) {
            handle(res, [&] {
                const bool removed = service_.close_session(req.matches[1]);
                return std::string("{\"closed\":") + (removed ? "true" : "false") + "}";
            });
        });
    }

    /// Binds an ephemeral port and returns it; serves until stop().
    int bind_any_port(const std::string & host = "127.0.0.1") {
        return server_.bind_to_any_port(host);
    }

    bool listen_after_bind() { return server_.listen_after_bind(); }

    bool listen(const std::string & host, int port) { return server_.listen(host, port); }

    void stop() { server_.stop(); }

    bool wait_until_ready(int timeout_ms = 2000) {
        for (int i = 0; i < timeout_ms; ++i) {
            if (server_.is_running()) return true;
            std::this_thread::sleep_for(std::chrono::milliseconds(1));
        }
        return server_.is_running();
    }

private:
    template <typename Fn>
    void handle(httplib::Response & res, Fn && fn) {
        try {
            res.set_content(fn(), "application/json");
        } catch (const Error & e) {
            const bool not_found = e.code() == ErrorCode::UnknownSession ||
                                   e.code() == ErrorCode::UnknownManifest;
            res.status = not_found ? 404 : 400;
            res.set_content("{\"error\":" + wire::str(error_code_name(e.code())) +
                                ",\"message\":" + wire::str(e.what()) + "}",
                            "application/json");
        } catch (const std::exception & e) {
            res.status = 500;
            res.set_content("{\"error\":\"Internal\",\"message\":" + wire::str(e.what()) + "}",
                            "application/json");
        }
    }

    ToolService &   service_;
    httplib::Server server_;
};

/// Newline-delimited JSON loop for embedding the tool in tests and pipes.
/// Ops: {"op":"open_session","manifest_ref":...}, {"op":"crop","session_id":...,
/// "directive":...}, {"op":"close_session","id":...}.
inline void run_stdio_tool_loop(ToolService & service, std::istream & in, std::ostream & out) {
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::string reply;
        try {
            const json j = parse_json(line, "request");
            const std::string op = require_string(j, "op", "request");
            if (op == "open_session") {
                const Session s = service.open_session(require_string(j, "manifest_ref", "request"));
                reply = serialize_session(s);
            } else if (op == "crop") {
                reply = serialize_crop_response(service.crop(parse_crop_request(j)));
            } else if (op == "close_session") {
                const bool removed = service.close_session(require_string(j, "id", "request"));
                reply = std::string("{\"closed\":") + (removed ? "true" : "false") + "}";
            } else {
                throw Error(ErrorCode::Malformed, "unknown op '" + op + "'");
            }
        } catch (const Error & e) {
            reply = "{\"error\":" + wire::str(error_code_name(e.code())) + ",\"message\":" +
                    wire::str(e.what()) + "}";
        }
        out << reply << "\n";
    }
    out.flush();
}

} // namespace clueseek

#include <csignal>
#include <filesystem>
#include <fstream>
#include <httplib.h>
#include <json.hpp>
#include <spdlog/spdlog.h>
#include <sstream>
#include <thread>

#include "zfdt/engine.hpp"
#include "zfdt/errors.hpp"

namespace zfdt {

using json = nlohmann::json;

namespace {

HttpReply error_reply(int status, std::string_view kind, std::string_view message) {
    return {status, json{{"error", kind}, {"message", message}}.dump()};
}

json trace_json(const Trace& trace) {
    json out = json::array();
    for (const auto& e : trace.events) {
        json j;
        j["stage"] = e.stage;
        j["community_id"] = e.community_id ? json(*e.community_id) : json(nullptr);
        j["client_call_id"] = e.client_call_id ? json(*e.client_call_id) : json(nullptr);
        j["detail"] = e.detail;
        out.push_back(std::move(j));
    }
    return out;
}

// The snapshot is served only while the manifest on disk still describes it.
bool snapshot_current(const EngineState& state) {
    const auto path = std::filesystem::path(state.root) / kManifestFile;
    std::ifstream in(path, std::ios::binary);
    if (!in) return false;
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        const Manifest m = Manifest::from_json(ss.str());
        return m.valid && m.workspace_digest() == state.manifest.workspace_digest();
    } catch (const std::exception&) {
        return false;
    }
}

std::atomic<bool> g_signalled{false};

extern "C" void on_signal(int) { g_signalled.store(true); }

}  // namespace

QueryService::QueryService(const EngineState& state, const Clients& clients, RetrievalConfig config)
    : state_(state), clients_(clients), config_(std::move(config)) {
    config_.beam.validate();
}

HttpReply QueryService::query(std::string_view body) const {
    json req;
    try {
        req = json::parse(body);
    } catch (const json::parse_error& e) {
        return error_reply(400, "InvalidInput", e.what());
    }
    if (!req.is_object()) return error_reply(400, "InvalidInput", "body must be a JSON object");
    for (const auto& [key, _] : req.items()) {
        if (key != "symptoms" && key != "top_k") return error_reply(400, "InvalidInput", "unknown field " + key);
    }
    if (!req.contains("symptoms") || !req["symptoms"].is_string()) {
        return error_reply(400, "InvalidInput", "symptoms must be a string");
    }
    RetrievalConfig cfg = config_;
    if (req.contains("top_k")) {
        if (!req["top_k"].is_number_integer() || req["top_k"].get<std::int64_t>() < 1) {
            return error_reply(400, "InvalidInput", "top_k must be a positive integer");
        }
        cfg.beam.k = req["top_k"].get<std::size_t>();
        cfg.beam.beam_width = std::max(cfg.beam.beam_width, cfg.beam.k);
    }
    if (!snapshot_current(state_)) return error_reply(409, "WorkspaceError", "workspace changed or invalid; restart");
    try {
        const AnswerResult r = run_query(state_, clients_, req["symptoms"].get<std::string>(), cfg);
        json locals = json::array();
        for (const auto& g : r.globals) {
            for (const auto& l : g.contributing) {
                locals.push_back({{"community_id", l.community_id},
                                  {"category", category_id(l.category)},
                                  {"text", l.text},
                                  {"score", l.score}});
            }
            break;
        }
        json out;
        out["answer"] = r.answer;
        out["global_answer"] = r.globals.empty() ? json(nullptr) : json(r.globals.front().text);
        out["local_answers"] = locals;
        out["trace"] = trace_json(r.trace);
        return {200, out.dump()};
    } catch (const InvalidInput& e) {
        return error_reply(400, e.kind(), e.what());
    } catch (const ConfigError& e) {
        return error_reply(400, e.kind(), e.what());
    } catch (const WorkspaceError& e) {
        return error_reply(409, e.kind(), e.what());
    } catch (const Error& e) {
        return error_reply(502, e.kind(), e.what());
    }
}

HttpReply QueryService::health() const {
    return {200, json{{"status", "ok"}, {"workspace_digest", state_.manifest.workspace_digest()}}.dump()};
}

HttpReply QueryService::handle(std::string_view method, std::string_view path, std::string_view body) const {
    if (path == "/v1/query") {
        if (method != "POST") return error_reply(405, "MethodNotAllowed", "use POST");
        return query(body);
    }
    if (path == "/v1/health") {
        if (method != "GET") return error_reply(405, "MethodNotAllowed", "use GET");
        return health();
    }
    return error_reply(404, "NotFound", std::string(path));
}

void serve(const QueryService& service, const std::string& host, int port, std::atomic<bool>* stop) {
    httplib::Server server;
    const auto bridge = [&service](const httplib::Request& req, httplib::Response& res) {
        const HttpReply r = service.handle(req.method, req.path, req.body);
        res.status = r.status;
        res.set_content(r.body, "application/json");
    };
    server.Post("/v1/query", bridge);
    server.Get("/v1/health", bridge);
    server.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
        if (res.body.empty()) {
            res.set_content(json{{"error", "NotFound"}, {"message", req.path}}.dump(), "application/json");
        }
    });

    g_signalled.store(false);
    auto prev_int = std::signal(SIGINT, on_signal);
    auto prev_term = std::signal(SIGTERM, on_signal);
    std::atomic<bool> done{false};
    std::thread watcher([&] {
        while (!done.load()) {
            if (g_signalled.load() || (stop && stop->load())) {
                server.stop();
                break;
            }
            std::this_thread::sleep_for(std::chrono::milliseconds(50));
        }
    });
    if (!server.bind_to_port(host, port)) {
        done.store(true);
        watcher.join();
        std::signal(SIGINT, prev_int);
        std::signal(SIGTERM, prev_term);
        throw IoError("cannot bind " + host + ":" + std::to_string(port));
    }
    spdlog::info("serving on {}:{}", host, port);
    server.listen_after_bind();
    done.store(true);
    watcher.join();
    std::signal(SIGINT, prev_int);
    std::signal(SIGTERM, prev_term);
}

}  // namespace zfdt

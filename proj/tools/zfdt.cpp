#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "zfdt/engine.hpp"
#include "zfdt/errors.hpp"

namespace fs = std::filesystem;
using namespace zfdt;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct GlobalFlags {
    std::string config_path;
    std::optional<std::size_t> chunk_size;
    std::optional<std::size_t> top_k;
    std::optional<std::size_t> beam_width;
    std::optional<double> resolution;
    std::optional<std::uint64_t> seed;
    std::string endpoint;
    std::string api_key_env;
    bool stub = false;
    bool trace = false;
    bool verbose = false;
};

// Config file, else the workspace's recorded config, else defaults; flags win.
EngineConfig resolve_config(const GlobalFlags& g, const std::string& workspace) {
    EngineConfig c;
    if (!g.config_path.empty()) {
        c = EngineConfig::load(g.config_path);
    } else if (!workspace.empty() && fs::exists(fs::path(workspace) / kManifestFile)) {
        std::ifstream in(fs::path(workspace) / kManifestFile);
        std::stringstream ss;
        ss << in.rdbuf();
        try {
            c = Manifest::from_json(ss.str()).config;
        } catch (const WorkspaceError&) {
        }
    }
    if (g.chunk_size) c.chunk_size = *g.chunk_size;
    if (g.top_k) {
        c.top_k = *g.top_k;
        if (!g.beam_width) c.beam_width = std::max(c.beam_width, c.top_k);
    }
    if (g.beam_width) c.beam_width = *g.beam_width;
    if (g.resolution) c.leiden.resolution = *g.resolution;
    if (g.seed) {
        c.seed = *g.seed;
        c.leiden.rng_seed = *g.seed;
    }
    if (!g.endpoint.empty()) {
        c.endpoint = g.endpoint;
        c.stub = false;
    }
    if (!g.api_key_env.empty()) c.api_key_env = g.api_key_env;
    if (g.stub) c.stub = true;
    c.validate();
    return c;
}

void print_reports(const std::vector<bounds::BoundReport>& reports, bool as_json) {
    for (const auto& r : reports) {
        if (as_json) {
            std::cout << r.to_json() << '\n';
            continue;
        }
        std::printf("proposition %d  %s  lhs=%.6g  rhs=%.6g  tolerance=%.3g\n", r.proposition,
                    r.satisfied ? "PASS" : "FAIL", r.bound_lhs, r.bound_rhs, r.tolerance);
        for (const auto& q : r.quantities) std::printf("  %-28s %.9g\n", q.name.c_str(), q.value);
        if (!r.note.empty()) std::printf("  note: %s\n", r.note.c_str());
    }
}

bool is_usage_error(const Error& e) {
    const std::string& k = e.kind();
    return k == "InvalidInput" || k == "ConfigError" || k == "WorkspaceError" || k == "ParseError" ||
           k == "SchemaError" || k == "IoError";
}

}  // namespace

int main(int argc, char** argv) {
    spdlog::set_default_logger(spdlog::stderr_color_mt("zfdt"));
    spdlog::set_level(spdlog::level::warn);

    CLI::App app{"Formula recommendation engine over a community-summarized knowledge graph"};
    app.require_subcommand(1);
    app.fallthrough();

    GlobalFlags g;
    app.add_option("--config", g.config_path, "JSON config file")->check(CLI::ExistingFile);
    app.add_option("--chunk-size", g.chunk_size, "Tokens per chunk");
    app.add_option("--top-k", g.top_k, "Global answers kept by the beam");
    app.add_option("--beam-width", g.beam_width, "Candidates per category");
    app.add_option("--resolution", g.resolution, "Leiden resolution");
    app.add_option("--seed", g.seed, "Seed for clustering and generation");
    app.add_option("--endpoint", g.endpoint, "OpenAI-compatible base URL");
    app.add_option("--api-key-env", g.api_key_env, "Environment variable holding the API key");
    app.add_flag("--stub", g.stub, "Use the deterministic offline clients");
    app.add_flag("--trace", g.trace, "Print the stage trace");
    app.add_flag("-v,--verbose", g.verbose, "Log progress to stderr");

    std::string workspace = "workspace";
    std::string corpus_path;
    std::string symptoms;
    std::string bind = "127.0.0.1:8080";
    std::string outputs_path, refs_path, out_path;
    std::string judge;
    std::string rules_path;
    bool tcm_only = false;
    std::string kind = "sft";
    std::size_t limit = 0;
    int proposition = 0;
    std::optional<double> beta, learning_rate;
    std::optional<std::size_t> steps;
    bool json_out = false;

    auto* build = app.add_subcommand("build", "Build a workspace from a JSONL corpus");
    build->add_option("corpus", corpus_path, "Corpus JSONL")->required();
    build->add_option("-w,--workspace", workspace, "Workspace directory");

    auto* query = app.add_subcommand("query", "Answer a symptom description");
    query->add_option("symptoms", symptoms, "Symptom description")->required();
    query->add_option("-w,--workspace", workspace, "Workspace directory");

    auto* serve_cmd = app.add_subcommand("serve", "Serve the query endpoint over HTTP");
    serve_cmd->add_option("-w,--workspace", workspace, "Workspace directory");
    serve_cmd->add_option("--bind", bind, "host:port");

    auto* eval = app.add_subcommand("eval", "Score outputs against references");
    eval->add_option("outputs", outputs_path, "Outputs JSONL")->required();
    eval->add_option("references", refs_path, "References JSONL")->required();
    eval->add_option("-w,--workspace", workspace, "Workspace directory");
    eval->add_option("--out", out_path, "Report path prefix; writes <prefix>.json and <prefix>.tsv");
    eval->add_option("--judge", judge, "kg or llm");
    eval->add_option("--rules", rules_path, "Rule table file")->check(CLI::ExistingFile);
    eval->add_flag("--tcm-only-avg", tcm_only, "Average the six domain metrics only");

    auto* dataset = app.add_subcommand("dataset", "Export SFT or DPO records");
    dataset->add_option("-w,--workspace", workspace, "Workspace directory");
    dataset->add_option("--kind", kind, "sft or dpo")->check(CLI::IsMember({"sft", "dpo"}));
    dataset->add_option("--out", out_path, "Output JSONL")->required();
    dataset->add_option("--limit", limit, "Records to export (0 = all)");

    auto* bounds_cmd = app.add_subcommand("bounds", "Check a proposition on seeded toy worlds");
    bounds_cmd->add_option("proposition", proposition, "1, 2, 3 or 4")->required();
    bounds_cmd->add_option("--beta", beta, "Preference temperature");
    bounds_cmd->add_option("--learning-rate", learning_rate, "Gradient step");
    bounds_cmd->add_option("--steps", steps, "Training steps");
    bounds_cmd->add_flag("--json", json_out, "Print JSON reports");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }
    if (g.verbose) spdlog::set_level(spdlog::level::info);

    try {
        if (*build) {
            const EngineConfig cfg = resolve_config(g, "");
            const Clients clients = make_clients(cfg);
            const BuildResult r = build_workspace(corpus_path, workspace, cfg, clients);
            std::printf("%s %s digest=%s\n", r.noop ? "unchanged" : "built", workspace.c_str(),
                        r.manifest.workspace_digest().c_str());
            return 0;
        }
        if (*query) {
            const EngineState state = open_workspace(workspace);
            const EngineConfig cfg = resolve_config(g, workspace);
            const Clients clients = make_clients(cfg);
            const AnswerResult r = run_query(state, clients, symptoms, retrieval_config(cfg));
            std::cout << r.answer << '\n';
            if (g.trace) std::cerr << format_trace(r.trace, true);
            return 0;
        }
        if (*serve_cmd) {
            const auto colon = bind.rfind(':');
            if (colon == std::string::npos) throw InvalidInput("--bind expects host:port");
            const std::string host = bind.substr(0, colon);
            int port = 0;
            try {
                port = std::stoi(bind.substr(colon + 1));
            } catch (const std::exception&) {
                throw InvalidInput("--bind expects host:port");
            }
            const EngineState state = open_workspace(workspace);
            const EngineConfig cfg = resolve_config(g, workspace);
            const Clients clients = make_clients(cfg);
            const QueryService service(state, clients, retrieval_config(cfg));
            spdlog::set_level(spdlog::level::info);
            serve(service, host, port);
            return 0;
        }
        if (*eval) {
            const std::vector<std::string> outputs = read_texts(outputs_path);
            const std::vector<std::string> refs = read_texts(refs_path);
            if (outputs.size() != refs.size()) {
                throw InvalidInput("outputs and references differ in length (" + std::to_string(outputs.size()) +
                                   " vs " + std::to_string(refs.size()) + ")");
            }
            const EngineState state = open_workspace(workspace);
            const EngineConfig cfg = resolve_config(g, workspace);
            const Clients clients = make_clients(cfg);
            EvalOptions opts;
            opts.judge = judge.empty() ? cfg.judge : judge;
            opts.tcm_only_avg = tcm_only || cfg.tcm_only_avg;
            opts.rules_path = rules_path.empty() ? cfg.rules_path : rules_path;
            const MetricReport report = run_eval(state, clients, outputs, refs, opts);
            if (out_path.empty()) {
                std::cout << report.to_tsv();
            } else {
                std::ofstream(out_path + ".json") << report.to_json() << '\n';
                std::ofstream(out_path + ".tsv") << report.to_tsv();
                std::cout << report.to_tsv();
            }
            return 0;
        }
        if (*dataset) {
            const EngineState state = open_workspace(workspace);
            const EngineConfig cfg = resolve_config(g, workspace);
            const Clients clients = make_clients(cfg);
            const DatasetKind k = kind == "dpo" ? DatasetKind::dpo : DatasetKind::sft;
            const DatasetSummary s = run_dataset(state, clients, k, out_path, limit, retrieval_config(cfg));
            std::printf("wrote %zu %s records to %s (%zu with conflict notes)\n", s.written, kind.c_str(),
                        out_path.c_str(), s.conflict_records);
            return 0;
        }
        if (*bounds_cmd) {
            EngineConfig cfg = g.config_path.empty() ? EngineConfig{} : EngineConfig::load(g.config_path);
            bounds::BoundsConfig b = cfg.bounds;
            if (beta) b.beta = *beta;
            if (learning_rate) b.learning_rate = *learning_rate;
            if (steps) b.steps = *steps;
            if (g.seed) b.rng_seed = *g.seed;
            const auto reports = run_bounds(proposition, b);
            print_reports(reports, json_out);
            for (const auto& r : reports) {
                if (!r.satisfied) return kExitFailure;
            }
            return 0;
        }
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s: %s\n", e.kind().c_str(), e.what());
        return is_usage_error(e) ? kExitUsage : kExitFailure;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitFailure;
    }
    return kExitUsage;
}

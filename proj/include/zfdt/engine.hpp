#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "zfdt/bounds.hpp"
#include "zfdt/clients.hpp"
#include "zfdt/community.hpp"
#include "zfdt/corpus.hpp"
#include "zfdt/dataset.hpp"
#include "zfdt/index.hpp"
#include "zfdt/kg.hpp"
#include "zfdt/metrics.hpp"
#include "zfdt/retrieval.hpp"

namespace zfdt {

// ---------------------------------------------------------------------------
// Configuration

struct EngineConfig {
    std::size_t chunk_size = kDefaultChunkSize;
    std::size_t top_k = 2;
    std::size_t beam_width = 4;
    LeidenConfig leiden;
    std::uint64_t seed = 42;
    std::size_t max_parallel = 4;
    bool expand = true;

    bool stub = true;  // deterministic local clients; otherwise `endpoint` is used
    StubOptions stub_options;
    std::size_t stub_dimension = 512;
    std::string endpoint;
    std::string model = "default";
    std::string embedding_model = "default-embedding";
    std::string api_key_env;
    std::size_t dimension = 1024;  // remote embedding dimension

    std::string judge = "kg";  // "kg" or "llm"
    bool tcm_only_avg = false;
    std::string rules_path;    // empty = classical table
    bounds::BoundsConfig bounds;

    /// Throws ConfigError.
    void validate() const;
    std::string to_json() const;
    /// Unknown keys throw ConfigError; missing keys keep their defaults.
    static EngineConfig from_json(std::string_view json_text);
    static EngineConfig load(const std::string& path);
    /// Digest of the settings that shape the build artifacts.
    std::string build_fingerprint() const;
};

struct Clients {
    std::unique_ptr<Encoder> encoder;
    std::unique_ptr<Generator> generator;
};

/// Stub clients when `config.stub` is set, remote ones otherwise.
Clients make_clients(const EngineConfig& config);

// ---------------------------------------------------------------------------
// Workspace

inline constexpr std::string_view kManifestFile = "manifest.json";

/// Stage artifacts relative to the workspace root, in build order.
const std::vector<std::string>& artifact_files();

struct Manifest {
    int version = 1;
    bool valid = false;
    std::string failed_stage;
    std::string corpus_sha256;
    std::string config_fingerprint;
    std::string encoder_id;
    std::string generator_id;
    std::vector<std::pair<std::string, std::string>> artifacts;  // relative path, sha256
    std::vector<std::pair<std::string, double>> stage_seconds;
    std::string built_at;
    EngineConfig config;

    /// sha256 over the artifact digests.
    std::string workspace_digest() const;
    std::string to_json() const;
    static Manifest from_json(std::string_view json_text);
};

/// Advisory flock on "<workspace>.lock"; exclusive for builds, shared for reads.
class WorkspaceLock {
public:
    WorkspaceLock(const std::string& workspace, bool exclusive);
    ~WorkspaceLock();
    WorkspaceLock(const WorkspaceLock&) = delete;
    WorkspaceLock& operator=(const WorkspaceLock&) = delete;

private:
    int fd_ = -1;
};

/// Immutable snapshot of a built workspace.
struct EngineState {
    std::string root;
    Manifest manifest;
    Corpus corpus;
    KnowledgeGraph graph;
    CommunityHierarchy hierarchy;
    CommunityIndex index;
};

std::string hierarchy_to_json(const CommunityHierarchy& hierarchy);
CommunityHierarchy hierarchy_from_json(std::string_view json_text);

struct BuildResult {
    bool noop = false;
    Manifest manifest;
};

/// ingest -> chunk -> extract -> build_graph -> hierarchical_leiden ->
/// assign_categories -> summarize -> build_index, written to a sibling
/// "<workspace>.partial" directory and renamed into place. A rerun with the
/// same corpus and settings is a no-op. A corpus that fails to parse leaves
/// the workspace untouched; a later stage failure leaves the partial
/// directory with an invalid manifest and throws PipelineError.
BuildResult build_workspace(const std::string& corpus_path, const std::string& workspace, const EngineConfig& config,
                            const Clients& clients);

/// Throws WorkspaceError when the workspace is missing, invalid or stale.
EngineState open_workspace(const std::string& workspace);

// ---------------------------------------------------------------------------
// Commands

struct QueryOverrides {
    std::optional<std::size_t> top_k;
    std::optional<std::size_t> beam_width;
};

RetrievalConfig retrieval_config(const EngineConfig& config, const QueryOverrides& overrides = {});

/// One line per event: stage, community, client call and detail.
std::string format_trace(const Trace& trace, bool with_timing = false);

AnswerResult run_query(const EngineState& state, const Clients& clients, std::string_view symptoms,
                       const RetrievalConfig& config);

/// Reads a JSONL file whose lines are JSON strings or objects with a "text"
/// or "output" field.
std::vector<std::string> read_texts(const std::string& path);

struct EvalOptions {
    std::string judge = "kg";
    bool tcm_only_avg = false;
    std::string rules_path;
};

MetricReport run_eval(const EngineState& state, const Clients& clients, const std::vector<std::string>& outputs,
                      const std::vector<std::string>& references, const EvalOptions& options);

/// Target output for a corpus record: its rendered sections with the disclaimer.
std::string record_target(const FormulaRecord& record);

struct DatasetSummary {
    std::size_t written = 0;
    std::size_t conflict_records = 0;
};

/// Builds SFT or DPO records for the first `limit` corpus records (0 = all)
/// through the retrieval pipeline and exports them to `out_path`.
DatasetSummary run_dataset(const EngineState& state, const Clients& clients, DatasetKind kind,
                           const std::string& out_path, std::size_t limit, const RetrievalConfig& config);

/// Seeded default instances for each proposition. Throws InvalidInput for an
/// id outside 1..4.
std::vector<bounds::BoundReport> run_bounds(int proposition, const bounds::BoundsConfig& config);

// ---------------------------------------------------------------------------
// Service

struct HttpReply {
    int status = 200;
    std::string body;
};

/// Request handling for the query service, independent of the socket layer.
class QueryService {
public:
    QueryService(const EngineState& state, const Clients& clients, RetrievalConfig config);

    HttpReply query(std::string_view body) const;
    HttpReply health() const;
    HttpReply handle(std::string_view method, std::string_view path, std::string_view body) const;

private:
    const EngineState& state_;
    const Clients& clients_;
    RetrievalConfig config_;
};

/// Serves until `stop` becomes true or SIGINT/SIGTERM arrives.
void serve(const QueryService& service, const std::string& host, int port, std::atomic<bool>* stop = nullptr);

}  // namespace zfdt

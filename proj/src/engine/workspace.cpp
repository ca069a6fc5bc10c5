#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <spdlog/spdlog.h>
#include <sstream>

#include "zfdt/engine.hpp"
#include "zfdt/errors.hpp"
#include "zfdt/text.hpp"

namespace zfdt {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoError("cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& p, std::string_view content) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + p.string());
    out << content;
    out.flush();
    if (!out) throw IoError("failed writing " + p.string());
}

std::string utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

ojson community_json(const Community& c) {
    ojson j;
    j["id"] = c.community_id;
    j["level"] = c.level;
    j["parent"] = c.parent ? ojson(*c.parent) : ojson(nullptr);
    j["children"] = c.children;
    j["entity_ids"] = c.entity_ids;
    j["category"] = std::string(category_id(c.category));
    j["description"] = c.description;
    return j;
}

Community community_from(const ojson& j) {
    Community c;
    c.community_id = j.at("id").get<std::int64_t>();
    c.level = j.at("level").get<int>();
    if (!j.at("parent").is_null()) c.parent = j.at("parent").get<std::int64_t>();
    c.children = j.at("children").get<std::vector<std::int64_t>>();
    c.entity_ids = j.at("entity_ids").get<std::vector<EntityId>>();
    const auto cat = parse_category_id(j.at("category").get<std::string>());
    if (!cat) throw InvalidInput("unknown category in communities file");
    c.category = *cat;
    c.description = j.at("description").get<std::string>();
    return c;
}

std::string chunks_jsonl(const std::vector<Chunk>& chunks) {
    std::string out;
    for (const auto& c : chunks) {
        ojson j;
        j["chunk_id"] = c.chunk_id;
        j["source_record_id"] = c.source_record_id;
        j["token_start"] = c.token_start;
        j["token_end"] = c.token_end;
        j["token_count"] = c.token_count;
        j["text"] = c.text;
        out += j.dump() + '\n';
    }
    return out;
}

std::string extractions_jsonl(const std::vector<Extraction>& extractions) {
    std::string out;
    for (const auto& e : extractions) {
        ojson j;
        j["chunk_id"] = e.chunk_id;
        ojson ents = ojson::array();
        for (const auto& en : e.entities) ents.push_back({{"name", en.name}, {"category", category_id(en.category)}});
        ojson rels = ojson::array();
        for (const auto& r : e.relations) rels.push_back({{"src", r.src}, {"label", r.label}, {"dst", r.dst}});
        j["entities"] = ents;
        j["relations"] = rels;
        out += j.dump() + '\n';
    }
    return out;
}

std::vector<std::pair<std::string, std::string>> digest_artifacts(const fs::path& root) {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& rel : artifact_files()) out.emplace_back(rel, text::sha256_file((root / rel).string()));
    return out;
}

bool artifacts_match(const fs::path& root, const Manifest& m) {
    if (m.artifacts.size() != artifact_files().size()) return false;
    for (const auto& [rel, digest] : m.artifacts) {
        const fs::path p = root / rel;
        if (!fs::exists(p) || text::sha256_file(p.string()) != digest) return false;
    }
    return true;
}

std::optional<Manifest> try_read_manifest(const fs::path& root) {
    const fs::path p = root / kManifestFile;
    if (!fs::exists(p)) return std::nullopt;
    try {
        return Manifest::from_json(read_file(p));
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

}  // namespace

const std::vector<std::string>& artifact_files() {
    static const std::vector<std::string> files = {
        "corpus.jsonl", "chunks.jsonl", "extractions.jsonl", "graph/nodes.csv", "graph/edges.csv", "communities.json",
        "index.bin",
    };
    return files;
}

std::string Manifest::workspace_digest() const {
    std::string acc;
    for (const auto& [rel, digest] : artifacts) acc += rel + '=' + digest + '\n';
    return text::sha256_hex(acc);
}

std::string Manifest::to_json() const {
    ojson j;
    j["version"] = version;
    j["valid"] = valid;
    if (!failed_stage.empty()) j["failed_stage"] = failed_stage;
    j["corpus_sha256"] = corpus_sha256;
    j["config_fingerprint"] = config_fingerprint;
    j["encoder_id"] = encoder_id;
    j["generator_id"] = generator_id;
    j["workspace_digest"] = workspace_digest();
    ojson a = ojson::object();
    for (const auto& [rel, digest] : artifacts) a[rel] = digest;
    j["artifacts"] = a;
    ojson s = ojson::object();
    for (const auto& [stage, secs] : stage_seconds) s[stage] = secs;
    j["stage_seconds"] = s;
    j["built_at"] = built_at;
    j["config"] = ojson::parse(config.to_json());
    return j.dump(2);
}

Manifest Manifest::from_json(std::string_view json_text) {
    Manifest m;
    try {
        const ojson j = ojson::parse(json_text);
        m.version = j.at("version").get<int>();
        m.valid = j.at("valid").get<bool>();
        if (j.contains("failed_stage")) m.failed_stage = j["failed_stage"].get<std::string>();
        m.corpus_sha256 = j.at("corpus_sha256").get<std::string>();
        m.config_fingerprint = j.at("config_fingerprint").get<std::string>();
        m.encoder_id = j.at("encoder_id").get<std::string>();
        m.generator_id = j.at("generator_id").get<std::string>();
        for (const auto& [rel, digest] : j.at("artifacts").items()) m.artifacts.emplace_back(rel, digest.get<std::string>());
        for (const auto& [stage, secs] : j.at("stage_seconds").items()) m.stage_seconds.emplace_back(stage, secs.get<double>());
        m.built_at = j.at("built_at").get<std::string>();
        m.config = EngineConfig::from_json(j.at("config").dump());
    } catch (const nlohmann::json::exception& e) {
        throw WorkspaceError(std::string("malformed manifest: ") + e.what());
    }
    if (m.version != 1) throw WorkspaceError("unsupported manifest version " + std::to_string(m.version));
    return m;
}

WorkspaceLock::WorkspaceLock(const std::string& workspace, bool exclusive) {
    fs::path ws(workspace);
    if (ws.has_parent_path()) fs::create_directories(ws.parent_path());
    const std::string path = fs::path(workspace).lexically_normal().string() + ".lock";
    fd_ = ::open(path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
    if (fd_ < 0) throw IoError("cannot open lock file " + path);
    if (::flock(fd_, exclusive ? LOCK_EX : LOCK_SH) != 0) {
        ::close(fd_);
        throw IoError("cannot lock " + path);
    }
}

WorkspaceLock::~WorkspaceLock() {
    if (fd_ >= 0) {
        ::flock(fd_, LOCK_UN);
        ::close(fd_);
    }
}

std::string hierarchy_to_json(const CommunityHierarchy& hierarchy) {
    ojson j;
    ojson cats = ojson::array();
    for (const auto& c : hierarchy.category_communities) cats.push_back(community_json(c));
    ojson nodes = ojson::array();
    for (const auto& c : hierarchy.nodes) nodes.push_back(community_json(c));
    j["category_communities"] = cats;
    j["nodes"] = nodes;
    return j.dump(1);
}

CommunityHierarchy hierarchy_from_json(std::string_view json_text) {
    CommunityHierarchy h;
    try {
        const ojson j = ojson::parse(json_text);
        for (const auto& c : j.at("category_communities")) h.category_communities.push_back(community_from(c));
        for (const auto& c : j.at("nodes")) h.nodes.push_back(community_from(c));
    } catch (const nlohmann::json::exception& e) {
        throw WorkspaceError(std::string("malformed communities file: ") + e.what());
    }
    if (h.category_communities.size() != kCategoryCount) throw WorkspaceError("communities file needs seven categories");
    return h;
}

BuildResult build_workspace(const std::string& corpus_path, const std::string& workspace, const EngineConfig& config,
                            const Clients& clients) {
    config.validate();
    const fs::path root = fs::path(workspace).lexically_normal();
    if (root.empty() || root.filename().empty()) throw InvalidInput("workspace path must name a directory");
    WorkspaceLock lock(root.string(), true);

    const Corpus corpus = ingest(corpus_path);
    Manifest m;
    m.corpus_sha256 = text::sha256_file(corpus_path);
    m.config_fingerprint = config.build_fingerprint();
    m.encoder_id = clients.encoder->name();
    m.generator_id = clients.generator->name();
    m.config = config;

    if (auto existing = try_read_manifest(root)) {
        if (existing->valid && existing->corpus_sha256 == m.corpus_sha256 &&
            existing->config_fingerprint == m.config_fingerprint && existing->encoder_id == m.encoder_id &&
            existing->generator_id == m.generator_id && artifacts_match(root, *existing)) {
            spdlog::info("workspace {} is up to date", root.string());
            return {true, *existing};
        }
    }

    const fs::path partial = root.string() + ".partial";
    fs::remove_all(partial);
    fs::create_directories(partial / "graph");

    GenerationParams params;
    params.seed = static_cast<std::int64_t>(config.seed);

    const auto stage = [&](const std::string& name, const auto& fn) {
        const auto start = std::chrono::steady_clock::now();
        try {
            fn();
        } catch (const std::exception& e) {
            m.valid = false;
            m.failed_stage = name;
            try {
                write_file(partial / kManifestFile, m.to_json());
            } catch (const std::exception&) {
            }
            spdlog::error("stage {} failed: {}", name, e.what());
            throw PipelineError(name, e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        m.stage_seconds.emplace_back(name, secs);
        spdlog::info("stage {} done in {:.3f}s", name, secs);
    };

    std::vector<Chunk> chunks;
    std::vector<Extraction> extractions;
    KnowledgeGraph graph;
    CommunityHierarchy hierarchy;

    stage("ingest", [&] {
        std::string out;
        for (const auto& r : corpus.records) out += to_json_line(r) + '\n';
        write_file(partial / "corpus.jsonl", out);
    });
    stage("chunk", [&] {
        chunks = chunk(corpus, config.chunk_size);
        write_file(partial / "chunks.jsonl", chunks_jsonl(chunks));
    });
    stage("extract", [&] {
        for (const auto& c : chunks) extractions.push_back(extract(c, *clients.generator, params));
        write_file(partial / "extractions.jsonl", extractions_jsonl(extractions));
    });
    stage("graph", [&] {
        graph = build_graph(extractions);
        export_graph(graph, (partial / "graph").string());
    });
    stage("communities", [&] {
        hierarchy = hierarchical_leiden(graph, config.leiden);
        assign_categories(hierarchy, graph);
        summarize_all(hierarchy, graph, *clients.generator);
        const auto leaf_of = hierarchy.leaf_of_entity(graph.size());
        export_graph(graph, (partial / "graph").string(), &leaf_of);
        write_file(partial / "communities.json", hierarchy_to_json(hierarchy));
    });
    stage("index", [&] {
        const CommunityIndex index = build_index(hierarchy, *clients.encoder, clients.encoder->dimension());
        save_index(index, (partial / "index.bin").string());
    });

    m.artifacts = digest_artifacts(partial);
    m.valid = true;
    m.built_at = utc_now();
    write_file(partial / kManifestFile, m.to_json());

    const fs::path old = root.string() + ".old";
    fs::remove_all(old);
    if (fs::exists(root)) fs::rename(root, old);
    fs::rename(partial, root);
    fs::remove_all(old);
    spdlog::info("workspace {} built: {} entities, {} relations, {} leaf communities", root.string(), graph.size(),
                 graph.relations().size(), hierarchy.leaves().size());
    return {false, m};
}

EngineState open_workspace(const std::string& workspace) {
    const fs::path root = fs::path(workspace).lexically_normal();
    if (!fs::is_directory(root)) throw WorkspaceError("workspace not found: " + root.string());
    if (!fs::exists(root / kManifestFile)) throw WorkspaceError("workspace has no manifest: " + root.string());
    WorkspaceLock lock(root.string(), false);
    EngineState s;
    s.root = root.string();
    s.manifest = Manifest::from_json(read_file(root / kManifestFile));
    if (!s.manifest.valid) throw WorkspaceError("workspace is marked invalid: " + root.string());
    if (!artifacts_match(root, s.manifest)) throw WorkspaceError("workspace artifacts do not match the manifest");
    s.corpus = ingest((root / "corpus.jsonl").string());
    s.graph = import_graph((root / "graph").string());
    s.hierarchy = hierarchy_from_json(read_file(root / "communities.json"));
    s.index = load_index((root / "index.bin").string());
    return s;
}

}  // namespace zfdt

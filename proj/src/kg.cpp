#include "zfdt/kg.hpp"

#include <algorithm>
#include <array>
#include <cerrno>
#include <cstdio>
#include <cstring>
#include <deque>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>
#include <tuple>

#include "zfdt/errors.hpp"
#include "zfdt/text.hpp"

namespace zfdt {

std::string_view relation_type_id(RelationType t) {
    return t == RelationType::intra_category ? "intra_category" : "inter_category";
}

// ---------------------------------------------------------------------------
// Extraction

namespace {

std::vector<std::string> split_tabs(std::string_view line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto tab = line.find('\t', start);
        out.emplace_back(line.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start));
        if (tab == std::string_view::npos) break;
        start = tab + 1;
    }
    return out;
}

constexpr std::string_view kExtractInstructions =
    "List every entity in the text with one of the categories disease, formula, herbal_ingredient, "
    "symptoms_population, pulse_tongue, contraindication, preparation (or unknown), and every relation "
    "between two listed entities. Output one item per line:\n"
    "ENTITY<TAB>name<TAB>category\n"
    "RELATION<TAB>source name<TAB>label<TAB>target name\n"
    "Output the single line NONE when the text contains no entities.";

}  // namespace

std::optional<Extraction> parse_extraction(std::string_view output, std::int64_t chunk_id) {
    Extraction ex;
    ex.chunk_id = chunk_id;
    std::istringstream in{std::string(output)};
    std::string line;
    bool saw_none = false;
    bool saw_item = false;
    std::map<std::string, std::size_t> seen;
    auto add_entity = [&](const std::string& name, Category category) {
        auto [it, inserted] = seen.emplace(name, ex.entities.size());
        if (inserted) {
            ex.entities.push_back({name, category});
        } else if (ex.entities[it->second].category == Category::unknown) {
            ex.entities[it->second].category = category;
        }
    };
    std::vector<ExtractedRelation> pending;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const std::string trimmed = text::trim(line);
        if (trimmed.empty()) continue;
        if (trimmed == "NONE") {
            saw_none = true;
            continue;
        }
        const auto f = split_tabs(trimmed);
        if (f[0] == "ENTITY" && f.size() == 3) {
            const std::string name = text::normalize_name(f[1]);
            if (name.empty()) return std::nullopt;
            add_entity(name, parse_category_id(text::trim(f[2])).value_or(Category::unknown));
            saw_item = true;
        } else if (f[0] == "RELATION" && f.size() == 4) {
            ExtractedRelation r{text::normalize_name(f[1]), text::normalize_name(f[2]), text::normalize_name(f[3])};
            if (r.src.empty() || r.dst.empty() || r.label.empty()) return std::nullopt;
            pending.push_back(std::move(r));
            saw_item = true;
        } else {
            return std::nullopt;
        }
    }
    if (!saw_item && !saw_none) return std::nullopt;
    for (auto& r : pending) {
        if (r.src == r.dst) continue;
        add_entity(r.src, Category::unknown);
        add_entity(r.dst, Category::unknown);
        ex.relations.push_back(std::move(r));
    }
    return ex;
}

std::string extraction_prompt(std::string_view chunk_text) {
    return PromptBuilder(PromptRole::extract)
        .section("instructions", kExtractInstructions)
        .section("text", chunk_text)
        .str();
}

Extraction extract(const Chunk& chunk, const Generator& generator, const GenerationParams& params) {
    if (text::trim(chunk.text).empty()) throw InvalidInput("chunk " + std::to_string(chunk.chunk_id) + " is empty");
    constexpr int kRepairAttempts = 2;
    std::string prompt = extraction_prompt(chunk.text);
    for (int attempt = 0; attempt <= kRepairAttempts; ++attempt) {
        const std::string output = generator.generate(prompt, params);
        if (auto ex = parse_extraction(output, chunk.chunk_id)) return *ex;
        prompt = PromptBuilder(PromptRole::extract)
                     .section("instructions", kExtractInstructions)
                     .section("text", chunk.text)
                     .section("previous", output)
                     .section("error", "The previous output did not follow the line format. Answer again.")
                     .str();
    }
    throw ExtractionError(chunk.chunk_id, "generator output unparseable after repair attempts");
}

// ---------------------------------------------------------------------------
// Graph

KnowledgeGraph::KnowledgeGraph(std::vector<Entity> entities, std::vector<Relation> relations)
    : entities_(std::move(entities)), relations_(std::move(relations)) {
    for (std::size_t i = 0; i < entities_.size(); ++i) {
        if (entities_[i].entity_id != static_cast<EntityId>(i)) throw InvalidInput("entity ids must be dense");
        if (!by_name_.emplace(entities_[i].name, entities_[i].entity_id).second) {
            throw InvalidInput("duplicate entity name '" + entities_[i].name + "'");
        }
    }
    std::set<std::tuple<EntityId, EntityId, std::string>> triples;
    const auto n = static_cast<EntityId>(entities_.size());
    for (const auto& r : relations_) {
        if (r.src < 0 || r.src >= n || r.dst < 0 || r.dst >= n) throw InvalidInput("relation endpoint out of range");
        if (r.src == r.dst) throw InvalidInput("self relation on entity " + std::to_string(r.src));
        if (!(r.weight > 0.0)) throw InvalidInput("relation weight must be positive");
        if (!triples.emplace(r.src, r.dst, r.label).second) throw InvalidInput("duplicate relation triple");
    }
    index();
}

void KnowledgeGraph::index() {
    const std::size_t n = entities_.size();
    std::vector<std::map<EntityId, double>> merged(n);
    total_edge_weight_ = 0.0;
    for (auto& r : relations_) {
        r.relation_type = entities_[r.src].category == entities_[r.dst].category ? RelationType::intra_category
                                                                                  : RelationType::inter_category;
        merged[r.src][r.dst] += r.weight;
        merged[r.dst][r.src] += r.weight;
        total_edge_weight_ += 2.0 * r.weight;
    }
    adjacency_.assign(n, {});
    degree_.assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (const auto& [j, w] : merged[i]) {
            adjacency_[i].emplace_back(j, w);
            degree_[i] += w;
        }
    }
}

const std::vector<std::pair<EntityId, double>>& KnowledgeGraph::neighbors(EntityId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= adjacency_.size()) throw UnknownEntity(std::to_string(id));
    return adjacency_[static_cast<std::size_t>(id)];
}

std::optional<EntityId> KnowledgeGraph::find(std::string_view name) const {
    const auto it = by_name_.find(text::normalize_name(name));
    if (it == by_name_.end()) return std::nullopt;
    return it->second;
}

const Entity& KnowledgeGraph::entity(EntityId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= entities_.size()) throw UnknownEntity(std::to_string(id));
    return entities_[static_cast<std::size_t>(id)];
}

void KnowledgeGraph::set_categories(const std::vector<Category>& categories) {
    if (categories.size() != entities_.size()) throw InvalidInput("category vector size mismatch");
    for (std::size_t i = 0; i < categories.size(); ++i) entities_[i].category = categories[i];
    index();
}

namespace {

Category majority_category(const std::array<int, kCategoryCount>& votes) {
    int best = 0;
    Category category = Category::unknown;
    for (std::size_t c = 0; c < kCategoryCount; ++c) {
        if (votes[c] > best) {
            best = votes[c];
            category = kCategories[c];
        }
    }
    return category;
}

}  // namespace

KnowledgeGraph build_graph(const std::vector<Extraction>& extractions) {
    struct Pending {
        std::array<int, kCategoryCount> votes{};
        std::set<std::int64_t> chunks;
    };
    std::map<std::string, Pending> names;
    for (const auto& ex : extractions) {
        for (const auto& e : ex.entities) {
            const std::string name = text::normalize_name(e.name);
            if (name.empty()) continue;
            auto& p = names[name];
            p.chunks.insert(ex.chunk_id);
            if (e.category != Category::unknown) ++p.votes[static_cast<std::size_t>(e.category)];
        }
        for (const auto& r : ex.relations) {
            for (const auto* endpoint : {&r.src, &r.dst}) {
                const std::string name = text::normalize_name(*endpoint);
                if (!name.empty()) names[name].chunks.insert(ex.chunk_id);
            }
        }
    }
    if (names.empty()) throw EmptyGraph("no entities were extracted");

    std::vector<Entity> entities;
    std::map<std::string, EntityId> ids;
    for (auto& [name, p] : names) {
        const auto id = static_cast<EntityId>(entities.size());
        ids.emplace(name, id);
        entities.push_back({id, name, majority_category(p.votes), std::move(p.chunks)});
    }

    std::map<std::tuple<EntityId, EntityId, std::string>, double> weights;
    for (const auto& ex : extractions) {
        for (const auto& r : ex.relations) {
            const std::string src = text::normalize_name(r.src);
            const std::string dst = text::normalize_name(r.dst);
            if (src.empty() || dst.empty() || src == dst) continue;
            weights[{ids.at(src), ids.at(dst), text::normalize_name(r.label)}] += 1.0;
        }
    }
    std::vector<Relation> relations;
    relations.reserve(weights.size());
    for (const auto& [key, w] : weights) {
        relations.push_back({std::get<0>(key), std::get<1>(key), RelationType::inter_category, std::get<2>(key), w});
    }
    return KnowledgeGraph(std::move(entities), std::move(relations));
}

Subgraph subgraph_for_query(const KnowledgeGraph& graph, const std::set<EntityId>& query_entities, int hops) {
    if (hops < 0) throw InvalidInput("hops must be non-negative");
    const auto n = static_cast<EntityId>(graph.size());
    std::vector<int> dist(graph.size(), -1);
    std::deque<EntityId> frontier;
    for (EntityId id : query_entities) {
        if (id < 0 || id >= n) throw UnknownEntity("entity id " + std::to_string(id));
        dist[static_cast<std::size_t>(id)] = 0;
        frontier.push_back(id);
    }
    while (!frontier.empty()) {
        const EntityId u = frontier.front();
        frontier.pop_front();
        const int d = dist[static_cast<std::size_t>(u)];
        if (d == hops) continue;
        for (const auto& [v, w] : graph.neighbors(u)) {
            auto& dv = dist[static_cast<std::size_t>(v)];
            if (dv < 0) {
                dv = d + 1;
                frontier.push_back(v);
            }
        }
    }
    Subgraph sg;
    for (EntityId i = 0; i < n; ++i) {
        if (dist[static_cast<std::size_t>(i)] >= 0) sg.entity_ids.push_back(i);
    }
    const auto& rels = graph.relations();
    for (std::size_t i = 0; i < rels.size(); ++i) {
        if (dist[static_cast<std::size_t>(rels[i].src)] >= 0 && dist[static_cast<std::size_t>(rels[i].dst)] >= 0) {
            sg.relation_indices.push_back(i);
        }
    }
    return sg;
}

Subgraph merge_subgraphs(const KnowledgeGraph& graph, const std::vector<Subgraph>& parts) {
    std::vector<char> member(graph.size(), 0);
    for (const auto& p : parts) {
        for (EntityId id : p.entity_ids) member[static_cast<std::size_t>(id)] = 1;
    }
    Subgraph out;
    for (std::size_t i = 0; i < member.size(); ++i) {
        if (member[i]) out.entity_ids.push_back(static_cast<EntityId>(i));
    }
    const auto& rels = graph.relations();
    for (std::size_t i = 0; i < rels.size(); ++i) {
        if (member[static_cast<std::size_t>(rels[i].src)] && member[static_cast<std::size_t>(rels[i].dst)]) {
            out.relation_indices.push_back(i);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// CSV

std::string csv_escape(std::string_view field) {
    if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char ch : field) {
        if (ch == '"') out += '"';
        out += ch;
    }
    out += '"';
    return out;
}

std::vector<std::vector<std::string>> parse_csv(std::string_view content) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool quoted = false;
    bool field_started = false;
    std::size_t i = 0;
    auto end_field = [&] {
        row.push_back(std::move(field));
        field.clear();
        field_started = false;
    };
    auto end_row = [&] {
        end_field();
        rows.push_back(std::move(row));
        row.clear();
    };
    while (i < content.size()) {
        const char ch = content[i];
        if (quoted) {
            if (ch == '"') {
                if (i + 1 < content.size() && content[i + 1] == '"') {
                    field += '"';
                    i += 2;
                    continue;
                }
                quoted = false;
            } else {
                field += ch;
            }
            ++i;
            continue;
        }
        if (ch == '"' && !field_started) {
            quoted = true;
            field_started = true;
        } else if (ch == ',') {
            end_field();
        } else if (ch == '\r' && i + 1 < content.size() && content[i + 1] == '\n') {
            end_row();
            ++i;
        } else if (ch == '\n') {
            end_row();
        } else {
            field += ch;
            field_started = true;
        }
        ++i;
    }
    if (quoted) throw ParseError("unterminated quoted field", rows.size() + 1);
    if (field_started || !row.empty()) end_row();
    return rows;
}

namespace {

std::string format_weight(double w) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", w);
    return buf;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << content;
    out.flush();
    if (!out) throw IoError("failed writing " + path.string());
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

std::int64_t parse_int(const std::string& s, const std::string& what) {
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw IoError("invalid " + what + " '" + s + "'");
    }
}

}  // namespace

void export_graph(const KnowledgeGraph& graph, const std::string& dir, const std::vector<std::int64_t>* communities) {
    if (graph.empty()) throw EmptyGraph("cannot export an empty graph");
    if (communities && communities->size() != graph.size()) throw InvalidInput("community column size mismatch");
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir + ": " + ec.message());

    std::string nodes = communities ? "id,name,category,community\n" : "id,name,category\n";
    for (const auto& e : graph.entities()) {
        nodes += std::to_string(e.entity_id) + "," + csv_escape(e.name) + "," + std::string(category_id(e.category));
        if (communities) nodes += "," + std::to_string((*communities)[static_cast<std::size_t>(e.entity_id)]);
        nodes += "\n";
    }
    std::string edges = "src,dst,type,label,weight\n";
    for (const auto& r : graph.relations()) {
        edges += std::to_string(r.src) + "," + std::to_string(r.dst) + "," +
                 std::string(relation_type_id(r.relation_type)) + "," + csv_escape(r.label) + "," +
                 format_weight(r.weight) + "\n";
    }
    write_file(std::filesystem::path(dir) / "nodes.csv", nodes);
    write_file(std::filesystem::path(dir) / "edges.csv", edges);
}

KnowledgeGraph import_graph(const std::string& dir, std::vector<std::int64_t>* communities) {
    const auto node_rows = parse_csv(read_file(std::filesystem::path(dir) / "nodes.csv"));
    const auto edge_rows = parse_csv(read_file(std::filesystem::path(dir) / "edges.csv"));
    if (node_rows.empty() || node_rows[0].size() < 3 || node_rows[0][0] != "id") throw IoError("bad nodes.csv header");
    if (edge_rows.empty() || edge_rows[0].size() != 5 || edge_rows[0][0] != "src") throw IoError("bad edges.csv header");
    const bool has_community = node_rows[0].size() == 4 && node_rows[0][3] == "community";
    if (communities) communities->clear();

    std::vector<Entity> entities;
    for (std::size_t i = 1; i < node_rows.size(); ++i) {
        const auto& row = node_rows[i];
        if (row.size() != node_rows[0].size()) throw IoError("nodes.csv row " + std::to_string(i) + " has wrong arity");
        Entity e;
        e.entity_id = parse_int(row[0], "entity id");
        e.name = row[1];
        const auto category = parse_category_id(row[2]);
        if (!category) throw IoError("unknown category '" + row[2] + "'");
        e.category = *category;
        if (has_community && communities) communities->push_back(parse_int(row[3], "community id"));
        entities.push_back(std::move(e));
    }
    std::vector<Relation> relations;
    for (std::size_t i = 1; i < edge_rows.size(); ++i) {
        const auto& row = edge_rows[i];
        if (row.size() != 5) throw IoError("edges.csv row " + std::to_string(i) + " has wrong arity");
        Relation r;
        r.src = parse_int(row[0], "src");
        r.dst = parse_int(row[1], "dst");
        r.label = row[3];
        try {
            r.weight = std::stod(row[4]);
        } catch (const std::exception&) {
            throw IoError("invalid weight '" + row[4] + "'");
        }
        relations.push_back(std::move(r));
    }
    try {
        return KnowledgeGraph(std::move(entities), std::move(relations));
    } catch (const InvalidInput& e) {
        throw IoError(std::string("inconsistent graph files: ") + e.what());
    }
}

}  // namespace zfdt

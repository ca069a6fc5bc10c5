#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "zfdt/clients.hpp"
#include "zfdt/corpus.hpp"
#include "zfdt/taxonomy.hpp"

namespace zfdt {

using EntityId = std::int64_t;

struct Entity {
    EntityId entity_id = 0;
    std::string name;  // normalized
    Category category = Category::unknown;
    std::set<std::int64_t> source_chunks;
};

enum class RelationType { intra_category, inter_category };

std::string_view relation_type_id(RelationType t);

struct Relation {
    EntityId src = 0;
    EntityId dst = 0;
    RelationType relation_type = RelationType::inter_category;
    std::string label;
    double weight = 1.0;
};

struct ExtractedEntity {
    std::string name;
    Category category = Category::unknown;
};

struct ExtractedRelation {
    std::string src;
    std::string label;
    std::string dst;
};

struct Extraction {
    std::int64_t chunk_id = 0;
    std::vector<ExtractedEntity> entities;
    std::vector<ExtractedRelation> relations;
};

/// Parses ENTITY/RELATION/NONE lines. Returns nullopt if any non-blank line
/// is malformed. Names are normalized, relations with a missing endpoint get
/// that endpoint added as `unknown`, and self-relations are dropped.
std::optional<Extraction> parse_extraction(std::string_view output, std::int64_t chunk_id);

std::string extraction_prompt(std::string_view chunk_text);

/// Prompts the generator, re-prompting up to twice with the parse failure
/// before giving up with ExtractionError.
Extraction extract(const Chunk& chunk, const Generator& generator, const GenerationParams& params = {});

class KnowledgeGraph {
public:
    KnowledgeGraph() = default;

    /// Entities must have ids 0..n-1 in order. Validates relation endpoints,
    /// weights and triple uniqueness, and derives relation types.
    KnowledgeGraph(std::vector<Entity> entities, std::vector<Relation> relations);

    const std::vector<Entity>& entities() const { return entities_; }
    const std::vector<Relation>& relations() const { return relations_; }
    std::size_t size() const { return entities_.size(); }
    bool empty() const { return entities_.empty(); }

    /// Undirected neighbours with the summed weight of all relations between the pair.
    const std::vector<std::pair<EntityId, double>>& neighbors(EntityId id) const;
    double weighted_degree(EntityId id) const { return degree_.at(static_cast<std::size_t>(id)); }

    /// 2m: twice the sum of relation weights.
    double total_edge_weight() const { return total_edge_weight_; }

    std::optional<EntityId> find(std::string_view name) const;
    const Entity& entity(EntityId id) const;

    /// Replaces entity categories and recomputes relation types.
    void set_categories(const std::vector<Category>& categories);

private:
    void index();

    std::vector<Entity> entities_;
    std::vector<Relation> relations_;
    std::vector<std::vector<std::pair<EntityId, double>>> adjacency_;
    std::vector<double> degree_;
    std::unordered_map<std::string, EntityId> by_name_;
    double total_edge_weight_ = 0.0;
};

/// Merges extractions into a graph. Entity ids follow sorted normalized
/// names, so the result does not depend on extraction order.
KnowledgeGraph build_graph(const std::vector<Extraction>& extractions);

struct Subgraph {
    std::vector<EntityId> entity_ids;         // sorted
    std::vector<std::size_t> relation_indices;  // into parent.relations(), sorted
};

Subgraph subgraph_for_query(const KnowledgeGraph& graph, const std::set<EntityId>& query_entities, int hops = 1);

Subgraph merge_subgraphs(const KnowledgeGraph& graph, const std::vector<Subgraph>& parts);

/// Writes nodes.csv and edges.csv; `communities`, when given, adds a
/// `community` column to nodes.csv.
void export_graph(const KnowledgeGraph& graph, const std::string& dir,
                  const std::vector<std::int64_t>* communities = nullptr);

KnowledgeGraph import_graph(const std::string& dir, std::vector<std::int64_t>* communities = nullptr);

// RFC-4180 helpers shared by the graph files.
std::string csv_escape(std::string_view field);
std::vector<std::vector<std::string>> parse_csv(std::string_view content);

}  // namespace zfdt

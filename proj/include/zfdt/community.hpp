#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "zfdt/clients.hpp"
#include "zfdt/kg.hpp"
#include "zfdt/taxonomy.hpp"

namespace zfdt {

struct LeidenConfig {
    double resolution = 1.0;
    int max_iterations = 50;
    double min_gain_epsilon = 1e-7;
    std::uint64_t rng_seed = 42;

    /// Throws ConfigError.
    void validate() const;
};

/// Symmetric weighted graph used by the community algorithms. `self_weight[i]`
/// is A_ii; aggregated graphs carry a community's internal weight there.
struct WeightedGraph {
    std::vector<std::vector<std::pair<std::size_t, double>>> adjacency;  // excludes self loops
    std::vector<double> self_weight;

    std::size_t size() const { return adjacency.size(); }
    double degree(std::size_t v) const;
    double total_weight() const;  // 2m = sum of degrees

    static WeightedGraph from_graph(const KnowledgeGraph& graph);
    /// Subgraph induced by `nodes`; local node i corresponds to nodes[i].
    static WeightedGraph induced(const KnowledgeGraph& graph, const std::vector<EntityId>& nodes);
    /// Builds a graph from an undirected edge list; repeated pairs accumulate.
    static WeightedGraph from_edges(std::size_t n, const std::vector<std::tuple<std::size_t, std::size_t, double>>& edges);
};

struct Partition {
    std::vector<std::int64_t> assignment;  // node -> community index
    std::vector<double> sigma_in;          // sum of A_ij over ordered pairs inside the community
    std::vector<double> sigma_tot;         // sum of member degrees
    double modularity = 0.0;

    std::size_t community_count() const { return sigma_tot.size(); }
    std::vector<std::vector<std::size_t>> members() const;
};

/// Fills sigma_in, sigma_tot and modularity for `assignment`, renumbering
/// communities in order of their smallest member.
Partition make_partition(const WeightedGraph& graph, std::vector<std::int64_t> assignment, double resolution);

/// Q = sum_c [ Sigma_in/2m - gamma (Sigma_tot/2m)^2 ]; 0 when the graph has no edges.
double modularity(const WeightedGraph& graph, const std::vector<std::int64_t>& assignment, double resolution);

/// The gain expression (Sigma_in + k_v,in)/2m - gamma (Sigma_tot + k_v) k_v / (2m)^2.
double modularity_gain(double sigma_in, double k_v_in, double sigma_tot, double k_v, double two_m, double gamma);

/// Same expression evaluated from a partition for moving `node` into `target`.
/// Throws PreconditionError when `node` already belongs to `target`.
double modularity_gain(const WeightedGraph& graph, const Partition& partition, std::size_t node,
                       std::int64_t target, const LeidenConfig& config);

/// Exact change in Q when `node` leaves its community and joins `target`
/// (a fresh community index creates a new singleton).
double move_delta(const WeightedGraph& graph, const Partition& partition, std::size_t node, std::int64_t target,
                  double resolution);

Partition leiden(const WeightedGraph& graph, const LeidenConfig& config);
Partition leiden(const KnowledgeGraph& graph, const LeidenConfig& config);

/// True when every community induces a connected subgraph.
bool communities_connected(const WeightedGraph& graph, const std::vector<std::int64_t>& assignment);

/// Ids 0..6 are reserved for the category-level communities.
inline constexpr std::int64_t kFirstLeafId = static_cast<std::int64_t>(kCategoryCount);

struct Community {
    std::int64_t community_id = 0;
    std::vector<EntityId> entity_ids;  // sorted
    Category category = Category::unknown;
    std::string description;
    int level = 0;
    std::optional<std::int64_t> parent;
    std::vector<std::int64_t> children;

    bool is_leaf() const { return children.empty(); }
};

struct CommunityHierarchy {
    std::vector<Community> nodes;  // hierarchy nodes, ids from kFirstLeafId upward
    std::vector<Community> category_communities;  // exactly seven, ids 0..6

    std::vector<const Community*> leaves() const;
    const Community& get(std::int64_t community_id) const;
    Community& get(std::int64_t community_id);
    /// Leaf id containing each entity.
    std::vector<std::int64_t> leaf_of_entity(std::size_t entity_count) const;
};

/// Level-1 communities come from Leiden on the whole graph; each community of
/// size > 2 is split again on its induced subgraph until Leiden returns a
/// single community.
CommunityHierarchy hierarchical_leiden(const KnowledgeGraph& graph, const LeidenConfig& config);

/// Majority (non-unknown) member category per leaf, ties broken by taxonomy
/// order; leaves with no labelled member fall back to the first category.
/// Rewrites unknown entity categories in `graph` to their leaf's category and
/// fills the seven category-level communities.
void assign_categories(CommunityHierarchy& hierarchy, KnowledgeGraph& graph);

Category majority_category(const KnowledgeGraph& graph, const std::vector<EntityId>& members);

/// Members ordered by weighted degree (descending), then name.
std::vector<EntityId> ranked_members(const KnowledgeGraph& graph, const std::vector<EntityId>& members);

std::string summarize_prompt(const Community& community, const KnowledgeGraph& graph, std::size_t max_members = 0);

/// Generates a description naming at least min(5, |C|) members; a members
/// line is appended when the generator names fewer. Throws SummarizeError.
std::string summarize(const Community& community, const KnowledgeGraph& graph, const Generator& generator,
                      std::size_t max_members = 0);

/// Fixed description for a category with no entities.
std::string empty_category_description(Category category);

/// Summarizes every leaf and every category-level community.
void summarize_all(CommunityHierarchy& hierarchy, const KnowledgeGraph& graph, const Generator& generator,
                   std::size_t category_member_cap = 50);

}  // namespace zfdt

#include <algorithm>
#include <array>
#include <set>

#include "zfdt/community.hpp"
#include "zfdt/errors.hpp"
#include "zfdt/text.hpp"

namespace zfdt {

std::vector<const Community*> CommunityHierarchy::leaves() const {
    std::vector<const Community*> out;
    for (const auto& c : nodes) {
        if (c.is_leaf()) out.push_back(&c);
    }
    return out;
}

const Community& CommunityHierarchy::get(std::int64_t community_id) const {
    return const_cast<CommunityHierarchy*>(this)->get(community_id);
}

Community& CommunityHierarchy::get(std::int64_t community_id) {
    if (community_id >= 0 && community_id < kFirstLeafId &&
        static_cast<std::size_t>(community_id) < category_communities.size()) {
        return category_communities[static_cast<std::size_t>(community_id)];
    }
    const auto index = community_id - kFirstLeafId;
    if (index < 0 || static_cast<std::size_t>(index) >= nodes.size()) {
        throw InvalidInput("unknown community id " + std::to_string(community_id));
    }
    return nodes[static_cast<std::size_t>(index)];
}

std::vector<std::int64_t> CommunityHierarchy::leaf_of_entity(std::size_t entity_count) const {
    std::vector<std::int64_t> out(entity_count, -1);
    for (const auto* leaf : leaves()) {
        for (EntityId e : leaf->entity_ids) out.at(static_cast<std::size_t>(e)) = leaf->community_id;
    }
    return out;
}

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::int64_t salt) {
    std::uint64_t x = seed ^ (static_cast<std::uint64_t>(salt) * 0x9e3779b97f4a7c15ULL);
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

CommunityHierarchy hierarchical_leiden(const KnowledgeGraph& graph, const LeidenConfig& config) {
    if (graph.empty()) throw EmptyGraph("cannot detect communities in an empty graph");
    CommunityHierarchy h;
    const Partition top = leiden(graph, config);
    for (auto& group : top.members()) {
        Community c;
        c.community_id = kFirstLeafId + static_cast<std::int64_t>(h.nodes.size());
        c.level = 1;
        for (auto v : group) c.entity_ids.push_back(static_cast<EntityId>(v));
        h.nodes.push_back(std::move(c));
    }
    for (std::size_t i = 0; i < h.nodes.size(); ++i) {
        if (h.nodes[i].entity_ids.size() <= 2) continue;
        const std::vector<EntityId> members = h.nodes[i].entity_ids;
        LeidenConfig sub_config = config;
        sub_config.rng_seed = mix_seed(config.rng_seed, h.nodes[i].community_id);
        const Partition sub = leiden(WeightedGraph::induced(graph, members), sub_config);
        if (sub.community_count() <= 1) continue;
        for (auto& group : sub.members()) {
            Community child;
            child.community_id = kFirstLeafId + static_cast<std::int64_t>(h.nodes.size());
            child.level = h.nodes[i].level + 1;
            child.parent = h.nodes[i].community_id;
            for (auto v : group) child.entity_ids.push_back(members[v]);
            std::sort(child.entity_ids.begin(), child.entity_ids.end());
            h.nodes[i].children.push_back(child.community_id);
            h.nodes.push_back(std::move(child));
        }
    }
    return h;
}

Category majority_category(const KnowledgeGraph& graph, const std::vector<EntityId>& members) {
    std::array<int, kCategoryCount> votes{};
    for (EntityId e : members) {
        const auto c = graph.entity(e).category;
        if (c != Category::unknown) ++votes[static_cast<std::size_t>(c)];
    }
    std::size_t best = 0;
    for (std::size_t c = 1; c < kCategoryCount; ++c) {
        if (votes[c] > votes[best]) best = c;
    }
    return kCategories[best];
}

void assign_categories(CommunityHierarchy& hierarchy, KnowledgeGraph& graph) {
    std::vector<Category> categories;
    categories.reserve(graph.size());
    for (const auto& e : graph.entities()) categories.push_back(e.category);

    for (auto& node : hierarchy.nodes) node.category = majority_category(graph, node.entity_ids);
    for (const auto& node : hierarchy.nodes) {
        if (!node.is_leaf()) continue;
        for (EntityId e : node.entity_ids) {
            auto& c = categories[static_cast<std::size_t>(e)];
            if (c == Category::unknown) c = node.category;
        }
    }
    graph.set_categories(categories);

    hierarchy.category_communities.clear();
    for (std::size_t i = 0; i < kCategoryCount; ++i) {
        Community cc;
        cc.community_id = static_cast<std::int64_t>(i);
        cc.category = kCategories[i];
        cc.level = 0;
        hierarchy.category_communities.push_back(std::move(cc));
    }
    for (const auto& node : hierarchy.nodes) {
        if (!node.is_leaf()) continue;
        auto& cc = hierarchy.category_communities[static_cast<std::size_t>(node.category)];
        cc.entity_ids.insert(cc.entity_ids.end(), node.entity_ids.begin(), node.entity_ids.end());
        cc.children.push_back(node.community_id);
    }
    for (auto& cc : hierarchy.category_communities) std::sort(cc.entity_ids.begin(), cc.entity_ids.end());
}

std::vector<EntityId> ranked_members(const KnowledgeGraph& graph, const std::vector<EntityId>& members) {
    std::vector<EntityId> out = members;
    std::sort(out.begin(), out.end(), [&](EntityId a, EntityId b) {
        const double da = graph.weighted_degree(a);
        const double db = graph.weighted_degree(b);
        if (da != db) return da > db;
        return graph.entity(a).name < graph.entity(b).name;
    });
    return out;
}

namespace {

constexpr std::size_t kMaxPromptRelations = 400;

constexpr std::string_view kSummarizeInstructions =
    "Describe this community of related entities from a formula knowledge graph. Begin with one line of the "
    "form \"[<category title>] <member>; <member>; ...\" naming the most important members. For herbal "
    "ingredients, add the composition of monarch, minister, assistant and courier herbs.";

std::string category_label(Category c) {
    return c == Category::unknown ? std::string("unknown") : std::string(category_id(c));
}

}  // namespace

std::string summarize_prompt(const Community& community, const KnowledgeGraph& graph, std::size_t max_members) {
    auto members = ranked_members(graph, community.entity_ids);
    if (max_members > 0 && members.size() > max_members) members.resize(max_members);
    std::set<EntityId> listed(members.begin(), members.end());

    std::string member_lines;
    for (EntityId e : members) {
        const auto& ent = graph.entity(e);
        member_lines += ent.name + "\t" + category_label(ent.category) + "\n";
    }
    std::string relation_lines;
    std::size_t count = 0;
    for (const auto& r : graph.relations()) {
        if (count == kMaxPromptRelations) break;
        if (!listed.count(r.src) && !listed.count(r.dst)) continue;
        relation_lines += graph.entity(r.src).name + "\t" + r.label + "\t" + graph.entity(r.dst).name + "\n";
        ++count;
    }
    return PromptBuilder(PromptRole::summarize)
        .section("instructions", kSummarizeInstructions)
        .section("community", std::to_string(community.community_id), "")
        .section("category", category_label(community.category))
        .section("members", member_lines)
        .section("relations", relation_lines)
        .str();
}

std::string summarize(const Community& community, const KnowledgeGraph& graph, const Generator& generator,
                      std::size_t max_members) {
    if (community.entity_ids.empty()) {
        throw PreconditionError("community " + std::to_string(community.community_id) + " is empty");
    }
    std::string description;
    try {
        description = text::trim(generator.generate(summarize_prompt(community, graph, max_members)));
    } catch (const std::exception& e) {
        throw SummarizeError(community.community_id, e.what());
    }
    if (description.empty()) throw SummarizeError(community.community_id, "empty description");

    const auto ranked = ranked_members(graph, community.entity_ids);
    const std::size_t needed = std::min<std::size_t>(5, ranked.size());
    const std::string haystack = text::normalize_for_mentions(description);
    std::size_t mentioned = 0;
    for (EntityId e : ranked) {
        if (text::mentions(haystack, text::normalize_for_mentions(graph.entity(e).name))) ++mentioned;
    }
    if (mentioned < needed) {
        description += "\nMembers: ";
        for (std::size_t i = 0; i < needed; ++i) {
            if (i) description += ", ";
            description += graph.entity(ranked[i]).name;
        }
    }
    return description;
}

std::string empty_category_description(Category category) {
    return "[" + std::string(category_title(category)) +
           "] -\nNo entities of this category were extracted from the corpus.";
}

void summarize_all(CommunityHierarchy& hierarchy, const KnowledgeGraph& graph, const Generator& generator,
                   std::size_t category_member_cap) {
    for (auto& node : hierarchy.nodes) {
        if (node.is_leaf()) node.description = summarize(node, graph, generator);
    }
    for (auto& cc : hierarchy.category_communities) {
        cc.description = cc.entity_ids.empty() ? empty_category_description(cc.category)
                                                : summarize(cc, graph, generator, category_member_cap);
    }
}

}  // namespace zfdt

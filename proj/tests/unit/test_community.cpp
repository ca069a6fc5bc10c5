#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "test_support.hpp"
#include "zfdt/community.hpp"
#include "zfdt/corpus.hpp"
#include "zfdt/errors.hpp"

using namespace zfdt;
using testing::Edge;

namespace {

std::vector<Edge> two_triangles(bool bridge) {
    std::vector<Edge> e = {{0, 1, 1}, {1, 2, 1}, {0, 2, 1}, {3, 4, 1}, {4, 5, 1}, {3, 5, 1}};
    if (bridge) e.emplace_back(2, 3, 1);
    return e;
}

std::vector<Edge> clique(std::size_t from, std::size_t n) {
    std::vector<Edge> e;
    for (std::size_t a = from; a < from + n; ++a) {
        for (std::size_t b = a + 1; b < from + n; ++b) e.emplace_back(a, b, 1.0);
    }
    return e;
}

bool same_grouping(const std::vector<std::int64_t>& a, const std::vector<std::int64_t>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = 0; j < a.size(); ++j) {
            if ((a[i] == a[j]) != (b[i] == b[j])) return false;
        }
    }
    return true;
}

KnowledgeGraph fixture_graph() {
    StubGenerator gen;
    const Corpus c = ingest(testing::fixture_path("formulas.jsonl"));
    std::vector<Extraction> ex;
    for (const auto& ch : chunk(c)) ex.push_back(extract(ch, gen));
    return build_graph(ex);
}

}  // namespace

TEST_CASE("modularity gain hand-evaluated cases") {
    CHECK(std::abs(modularity_gain(4.0, 2.0, 6.0, 2.0, 20.0, 1.0) - 0.26) < 1e-12);
    // isolated node: only the target's own term remains
    CHECK(std::abs(modularity_gain(4.0, 0.0, 6.0, 0.0, 20.0, 1.0) - 4.0 / 20.0) < 1e-12);
    // resolution to zero leaves the internal term
    CHECK(std::abs(modularity_gain(4.0, 2.0, 6.0, 2.0, 20.0, 0.0) - 6.0 / 20.0) < 1e-12);
    CHECK(std::abs(modularity_gain(0.0, 1.0, 3.0, 1.0, 10.0, 2.0) - (0.1 - 2.0 * 4.0 / 100.0)) < 1e-12);
}

TEST_CASE("graph-level gain uses cached degrees and sigmas") {
    const auto edges = two_triangles(true);
    const WeightedGraph g = WeightedGraph::from_edges(6, edges);
    const Partition p = make_partition(g, {0, 0, 0, 1, 1, 1}, 1.0);
    LeidenConfig cfg;
    // node 2: k_v = 3, k_v,in(target {3,4,5}) = 1
    const double expected = modularity_gain(p.sigma_in[1], 1.0, p.sigma_tot[1], 3.0, g.total_weight(), 1.0);
    CHECK(modularity_gain(g, p, 2, 1, cfg) == doctest::Approx(expected).epsilon(1e-12));
    CHECK_THROWS_AS(modularity_gain(g, p, 2, 0, cfg), PreconditionError);
    CHECK_THROWS_AS(modularity_gain(g, p, 2, 5, cfg), InvalidInput);
}

TEST_CASE("partition sigmas and modularity match naive recomputation") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 40; ++trial) {
        const std::size_t n = 2 + rng() % 7;
        const auto edges = testing::random_connected_edges(n, 0.4, rng);
        const WeightedGraph g = WeightedGraph::from_edges(n, edges);
        std::vector<std::int64_t> a(n);
        for (auto& x : a) x = static_cast<std::int64_t>(rng() % 3);
        const Partition p = make_partition(g, a, 1.0);
        CHECK(p.modularity == doctest::Approx(testing::naive_modularity(edges, n, a, 1.0)).epsilon(1e-9));
        CHECK(modularity(g, a, 1.0) == doctest::Approx(p.modularity).epsilon(1e-12));
        double tot = 0.0;
        for (double s : p.sigma_tot) tot += s;
        CHECK(tot == doctest::Approx(g.total_weight()));
    }
}

TEST_CASE("move delta equals the change in recomputed modularity") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 60; ++trial) {
        const std::size_t n = 3 + rng() % 6;
        const auto edges = testing::random_connected_edges(n, 0.5, rng);
        const WeightedGraph g = WeightedGraph::from_edges(n, edges);
        std::vector<std::int64_t> a(n);
        for (auto& x : a) x = static_cast<std::int64_t>(rng() % 3);
        const Partition p = make_partition(g, a, 1.0);
        const std::size_t v = rng() % n;
        const auto target = static_cast<std::int64_t>(rng() % (p.community_count() + 1));
        if (target == p.assignment[v]) continue;
        const double delta = move_delta(g, p, v, target, 1.0);
        auto moved = p.assignment;
        moved[v] = target;
        const double after = testing::naive_modularity(edges, n, moved, 1.0);
        CHECK(std::abs((after - p.modularity) - delta) < 1e-9);
    }
}

TEST_CASE("two disjoint triangles split into the triangles") {
    const auto edges = two_triangles(false);
    std::vector<std::int64_t> best;
    testing::brute_force_best_modularity(edges, 6, 1.0, &best);
    const Partition p = leiden(WeightedGraph::from_edges(6, edges), LeidenConfig{});
    CHECK(p.community_count() == 2);
    CHECK(same_grouping(p.assignment, best));
}

TEST_CASE("bridged triangles split at the bridge") {
    const auto edges = two_triangles(true);
    std::vector<std::int64_t> best;
    const double q = testing::brute_force_best_modularity(edges, 6, 1.0, &best);
    const Partition p = leiden(WeightedGraph::from_edges(6, edges), LeidenConfig{});
    CHECK(same_grouping(p.assignment, best));
    CHECK(same_grouping(p.assignment, {0, 0, 0, 1, 1, 1}));
    CHECK(p.modularity == doctest::Approx(q).epsilon(1e-12));
}

TEST_CASE("single node graph") {
    const Partition p = leiden(WeightedGraph::from_edges(1, {}), LeidenConfig{});
    CHECK(p.community_count() == 1);
    CHECK(p.modularity == 0.0);
}

TEST_CASE("leiden postconditions on random small graphs") {
    std::mt19937_64 rng(99);
    LeidenConfig cfg;
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t n = 2 + rng() % 7;
        const auto edges = testing::random_connected_edges(n, 0.35, rng);
        const WeightedGraph g = WeightedGraph::from_edges(n, edges);
        const Partition p = leiden(g, cfg);
        const double best = testing::brute_force_best_modularity(edges, n, 1.0);
        CHECK(p.modularity >= 0.95 * best - 1e-12);
        CHECK(p.modularity == doctest::Approx(testing::naive_modularity(edges, n, p.assignment, 1.0)).epsilon(1e-9));
        CHECK(communities_connected(g, p.assignment));
        CHECK(testing::naive_communities_connected(edges, n, p.assignment));
    }
}

TEST_CASE("identical seeds give identical partitions") {
    const KnowledgeGraph g = fixture_graph();
    LeidenConfig cfg;
    const Partition a = leiden(g, cfg);
    const Partition b = leiden(g, cfg);
    CHECK(a.assignment == b.assignment);
    CHECK(a.modularity == b.modularity);
}

TEST_CASE("leiden config validation") {
    CHECK_THROWS_AS((LeidenConfig{0.0, 50, 1e-7, 1}.validate()), ConfigError);
    CHECK_THROWS_AS((LeidenConfig{1.0, 0, 1e-7, 1}.validate()), ConfigError);
    CHECK_THROWS_AS((LeidenConfig{1.0, 50, 0.0, 1}.validate()), ConfigError);
    CHECK_NOTHROW(LeidenConfig{}.validate());
}

TEST_CASE("clique stays a single leaf") {
    const KnowledgeGraph g = testing::graph_from_edges(5, clique(0, 5));
    const CommunityHierarchy h = hierarchical_leiden(g, LeidenConfig{});
    const auto leaves = h.leaves();
    REQUIRE(leaves.size() == 1);
    CHECK(leaves[0]->level == 1);
    CHECK(leaves[0]->entity_ids.size() == 5);
}

TEST_CASE("two bridged four-cliques give two terminal leaves") {
    auto edges = clique(0, 4);
    const auto second = clique(4, 4);
    edges.insert(edges.end(), second.begin(), second.end());
    edges.emplace_back(3, 4, 1.0);
    const KnowledgeGraph g = testing::graph_from_edges(8, edges);
    const CommunityHierarchy h = hierarchical_leiden(g, LeidenConfig{});
    const auto leaves = h.leaves();
    REQUIRE(leaves.size() == 2);
    for (const auto* l : leaves) {
        CHECK(l->level == 1);
        CHECK(l->entity_ids.size() == 4);
        CHECK_FALSE(l->parent.has_value());
    }
}

TEST_CASE("leaves partition the fixture graph for many seeds") {
    const KnowledgeGraph g = fixture_graph();
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        LeidenConfig cfg;
        cfg.rng_seed = seed;
        const CommunityHierarchy h = hierarchical_leiden(g, cfg);
        std::vector<int> seen(g.size(), 0);
        for (const auto& c : h.nodes) REQUIRE_FALSE(c.entity_ids.empty());
        for (const auto* l : h.leaves()) {
            for (auto e : l->entity_ids) ++seen[static_cast<std::size_t>(e)];
        }
        CHECK(std::all_of(seen.begin(), seen.end(), [](int s) { return s == 1; }));
        const auto leaf_of = h.leaf_of_entity(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) CHECK(leaf_of[i] >= kFirstLeafId);
    }
}

TEST_CASE("majority category with fixed-order tie break") {
    std::vector<Entity> ents;
    auto add = [&](const std::string& name, Category c) {
        Entity e;
        e.entity_id = static_cast<EntityId>(ents.size());
        e.name = name;
        e.category = c;
        ents.push_back(e);
    };
    add("a", Category::herbal_ingredient);
    add("b", Category::herbal_ingredient);
    add("c", Category::herbal_ingredient);
    add("d", Category::unknown);
    add("e", Category::formula);
    add("f", Category::disease);
    const KnowledgeGraph g(ents, {});
    CHECK(majority_category(g, {0, 1, 2, 3}) == Category::herbal_ingredient);
    CHECK(majority_category(g, {4, 5}) == Category::disease);
    CHECK(majority_category(g, {3}) == Category::disease);
}

TEST_CASE("assign_categories fills seven category communities covering the entities") {
    KnowledgeGraph g = fixture_graph();
    CommunityHierarchy h = hierarchical_leiden(g, LeidenConfig{});
    assign_categories(h, g);
    REQUIRE(h.category_communities.size() == 7);
    std::set<EntityId> covered;
    for (std::size_t i = 0; i < 7; ++i) {
        const auto& cc = h.category_communities[i];
        CHECK(cc.community_id == static_cast<std::int64_t>(i));
        CHECK(cc.category == kCategories[i]);
        for (auto e : cc.entity_ids) CHECK(covered.insert(e).second);
    }
    CHECK(covered.size() == g.size());
    for (const auto& e : g.entities()) CHECK(e.category != Category::unknown);
    for (const auto* l : h.leaves()) CHECK(l->category == majority_category(g, l->entity_ids));
}

TEST_CASE("summaries name members and list herb roles") {
    KnowledgeGraph g = fixture_graph();
    CommunityHierarchy h = hierarchical_leiden(g, LeidenConfig{});
    assign_categories(h, g);
    StubGenerator gen;
    summarize_all(h, g, gen);
    bool saw_roles = false;
    for (const auto* l : h.leaves()) {
        REQUIRE_FALSE(l->description.empty());
        std::size_t named = 0;
        const std::string desc = text::normalize_for_mentions(l->description);
        for (auto e : l->entity_ids) named += text::mentions(desc, text::normalize_for_mentions(g.entity(e).name));
        CHECK(named >= std::min<std::size_t>(5, l->entity_ids.size()));
        if (l->category == Category::herbal_ingredient) {
            saw_roles |= l->description.find("monarch:") != std::string::npos &&
                         l->description.find("courier:") != std::string::npos;
        }
    }
    CHECK(saw_roles);
    for (const auto& cc : h.category_communities) CHECK_FALSE(cc.description.empty());

    Community single;
    single.community_id = 99;
    single.entity_ids = {0};
    single.category = g.entity(0).category;
    CHECK(summarize(single, g, gen).find(g.entity(0).name) != std::string::npos);
    Community empty;
    CHECK_THROWS_AS(summarize(empty, g, gen), PreconditionError);
    CHECK(empty_category_description(Category::preparation).find("Preparation Methods") != std::string::npos);
}

TEST_CASE("failing generator raises SummarizeError") {
    struct Failing : Generator {
        std::string name() const override { return "failing"; }
        std::string generate_impl(std::string_view, const GenerationParams&) const override {
            throw ClientError("down", 1);
        }
    } gen;
    const KnowledgeGraph g = testing::graph_from_edges(2, {{0, 1, 1.0}});
    Community c;
    c.community_id = 12;
    c.entity_ids = {0, 1};
    try {
        summarize(c, g, gen);
        FAIL("expected SummarizeError");
    } catch (const SummarizeError& e) {
        CHECK(e.community_id() == 12);
    }
}

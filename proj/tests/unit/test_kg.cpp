#include <doctest.h>

#include <algorithm>
#include <queue>
#include <random>

#include "test_support.hpp"
#include "zfdt/errors.hpp"
#include "zfdt/kg.hpp"

using namespace zfdt;

namespace {

Extraction make_extraction(std::int64_t chunk_id, std::vector<ExtractedEntity> ents, std::vector<ExtractedRelation> rels) {
    Extraction e;
    e.chunk_id = chunk_id;
    e.entities = std::move(ents);
    e.relations = std::move(rels);
    return e;
}

std::set<EntityId> bfs_ball(std::size_t n, const std::vector<testing::Edge>& edges, const std::set<EntityId>& start,
                            int hops) {
    std::vector<std::vector<std::size_t>> adj(n);
    for (const auto& [u, v, w] : edges) {
        adj[u].push_back(v);
        adj[v].push_back(u);
    }
    std::vector<int> dist(n, -1);
    std::queue<std::size_t> q;
    for (auto s : start) {
        dist[static_cast<std::size_t>(s)] = 0;
        q.push(static_cast<std::size_t>(s));
    }
    while (!q.empty()) {
        const auto v = q.front();
        q.pop();
        for (auto w : adj[v]) {
            if (dist[w] < 0) {
                dist[w] = dist[v] + 1;
                q.push(w);
            }
        }
    }
    std::set<EntityId> out;
    for (std::size_t i = 0; i < n; ++i) {
        if (dist[i] >= 0 && dist[i] <= hops) out.insert(static_cast<EntityId>(i));
    }
    return out;
}

}  // namespace

TEST_CASE("stub extraction of a verb sentence") {
    StubGenerator gen;
    Chunk c;
    c.chunk_id = 5;
    c.text = "Halloysite treats intestinal wind bleeding";
    const Extraction e = extract(c, gen);
    REQUIRE(e.entities.size() == 2);
    CHECK(e.entities[0].name == "halloysite");
    CHECK(e.entities[0].category == Category::herbal_ingredient);
    CHECK(e.entities[1].name == "intestinal wind bleeding");
    CHECK(e.entities[1].category == Category::disease);
    REQUIRE(e.relations.size() == 1);
    CHECK(e.relations[0].label == "treats");
    CHECK(e.chunk_id == 5);
}

TEST_CASE("chunk without a pattern extracts nothing") {
    StubGenerator gen;
    Chunk c;
    c.text = "the weather was mild";
    const Extraction e = extract(c, gen);
    CHECK(e.entities.empty());
    CHECK(e.relations.empty());
}

TEST_CASE("missing relation endpoints are added as unknown") {
    const auto e = parse_extraction("ENTITY\tLicorice\therbal_ingredient\nRELATION\tLicorice\tharmonizes\tPoria\n", 1);
    REQUIRE(e.has_value());
    REQUIRE(e->entities.size() == 2);
    CHECK(e->entities[1].name == "poria");
    CHECK(e->entities[1].category == Category::unknown);
    CHECK_FALSE(parse_extraction("garbage line", 1).has_value());
    const auto none = parse_extraction("NONE\n", 1);
    REQUIRE(none.has_value());
    CHECK(none->entities.empty());
}

TEST_CASE("generator that never parses raises ExtractionError") {
    struct Broken : Generator {
        std::string name() const override { return "broken"; }
        std::string generate_impl(std::string_view, const GenerationParams&) const override { return "???"; }
    } gen;
    Chunk c;
    c.chunk_id = 9;
    c.text = "anything";
    try {
        extract(c, gen);
        FAIL("expected ExtractionError");
    } catch (const ExtractionError& e) {
        CHECK(e.chunk_id() == 9);
    }
}

TEST_CASE("build_graph merges entities and relation multiplicity") {
    const ExtractedEntity herb{"Licorice", Category::herbal_ingredient};
    const ExtractedEntity disease{"cough", Category::disease};
    const ExtractedEntity herb2{"poria", Category::herbal_ingredient};
    std::vector<Extraction> ex = {
        make_extraction(0, {herb, disease}, {{"licorice", "treats", "cough"}}),
        make_extraction(1, {herb, disease}, {{"Licorice", "treats", "Cough"}}),
        make_extraction(2, {herb, disease, herb2}, {{"licorice", "treats", "cough"}, {"licorice", "pairs with", "poria"}}),
    };
    const KnowledgeGraph g = build_graph(ex);
    REQUIRE(g.size() == 3);
    const auto lic = g.find("LICORICE");
    REQUIRE(lic.has_value());
    CHECK(g.entity(*lic).source_chunks == std::set<std::int64_t>{0, 1, 2});
    REQUIRE(g.relations().size() == 2);
    double treats = 0, pairs = 0;
    for (const auto& r : g.relations()) {
        if (r.label == "treats") {
            treats = r.weight;
            CHECK(r.relation_type == RelationType::inter_category);
        } else {
            pairs = r.weight;
            CHECK(r.relation_type == RelationType::intra_category);
        }
    }
    CHECK(treats == 3.0);
    CHECK(pairs == 1.0);
    CHECK(g.total_edge_weight() == doctest::Approx(8.0));
    CHECK_THROWS_AS(build_graph({make_extraction(0, {}, {})}), EmptyGraph);
}

TEST_CASE("build_graph is order independent") {
    StubGenerator gen;
    const Corpus c = ingest(testing::fixture_path("formulas.jsonl"));
    std::vector<Extraction> ex;
    for (const auto& ch : chunk(c, 64)) ex.push_back(extract(ch, gen));
    const KnowledgeGraph a = build_graph(ex);
    std::mt19937_64 rng(3);
    std::shuffle(ex.begin(), ex.end(), rng);
    const KnowledgeGraph b = build_graph(ex);
    REQUIRE(a.size() == b.size());
    REQUIRE(a.relations().size() == b.relations().size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a.entities()[i].name == b.entities()[i].name);
        CHECK(a.entities()[i].category == b.entities()[i].category);
        CHECK(a.entities()[i].source_chunks == b.entities()[i].source_chunks);
    }
    for (std::size_t i = 0; i < a.relations().size(); ++i) {
        CHECK(a.relations()[i].src == b.relations()[i].src);
        CHECK(a.relations()[i].dst == b.relations()[i].dst);
        CHECK(a.relations()[i].label == b.relations()[i].label);
        CHECK(a.relations()[i].weight == b.relations()[i].weight);
    }
    double sum = 0;
    for (const auto& r : a.relations()) sum += r.weight;
    CHECK(a.total_edge_weight() == doctest::Approx(2 * sum));
}

TEST_CASE("graph constructor validation") {
    std::vector<Entity> ents(2);
    ents[0].entity_id = 0;
    ents[0].name = "a";
    ents[1].entity_id = 1;
    ents[1].name = "b";
    CHECK_THROWS_AS(KnowledgeGraph(ents, {Relation{0, 0, RelationType::inter_category, "x", 1.0}}), InvalidInput);
    CHECK_THROWS_AS(KnowledgeGraph(ents, {Relation{0, 5, RelationType::inter_category, "x", 1.0}}), InvalidInput);
    CHECK_THROWS_AS(KnowledgeGraph(ents, {Relation{0, 1, RelationType::inter_category, "x", 0.0}}), InvalidInput);
    CHECK_THROWS_AS(KnowledgeGraph(ents, {Relation{0, 1, RelationType::inter_category, "x", 1.0},
                                          Relation{0, 1, RelationType::inter_category, "x", 2.0}}),
                    InvalidInput);
}

TEST_CASE("subgraph closure base cases") {
    const KnowledgeGraph path = testing::graph_from_edges(3, {{0, 1, 1.0}, {1, 2, 1.0}});
    const Subgraph s0 = subgraph_for_query(path, {0, 2}, 0);
    CHECK(s0.entity_ids == std::vector<EntityId>{0, 2});
    CHECK(s0.relation_indices.empty());
    const Subgraph s1 = subgraph_for_query(path, {0}, 1);
    CHECK(s1.entity_ids == std::vector<EntityId>{0, 1});
    REQUIRE(s1.relation_indices.size() == 1);
    CHECK(path.relations()[s1.relation_indices[0]].dst == 1);
    CHECK_THROWS_AS(subgraph_for_query(path, {7}, 1), UnknownEntity);
}

TEST_CASE("subgraph equals the brute-force hop ball on random graphs") {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = std::uniform_int_distribution<std::size_t>(1, 12)(rng);
        std::vector<testing::Edge> edges;
        for (std::size_t a = 0; a < n; ++a) {
            for (std::size_t b = a + 1; b < n; ++b) {
                if (rng() % 4 == 0) edges.emplace_back(a, b, 1.0);
            }
        }
        const KnowledgeGraph g = testing::graph_from_edges(n, edges);
        std::set<EntityId> q;
        for (std::size_t i = 0; i < n; ++i) {
            if (rng() % 3 == 0) q.insert(static_cast<EntityId>(i));
        }
        const int hops = static_cast<int>(rng() % 4);
        const Subgraph s = subgraph_for_query(g, q, hops);
        const auto ball = bfs_ball(n, edges, q, hops);
        CHECK(std::set<EntityId>(s.entity_ids.begin(), s.entity_ids.end()) == ball);
        std::vector<std::size_t> induced;
        for (std::size_t i = 0; i < g.relations().size(); ++i) {
            if (ball.count(g.relations()[i].src) && ball.count(g.relations()[i].dst)) induced.push_back(i);
        }
        CHECK(s.relation_indices == induced);
    }
}

TEST_CASE("graph export and import") {
    testing::TempDir dir;
    const KnowledgeGraph two = testing::graph_from_edges(2, {{0, 1, 2.5}});
    export_graph(two, dir.str());
    const auto nodes = parse_csv(testing::slurp(dir.str("nodes.csv")));
    const auto edges = parse_csv(testing::slurp(dir.str("edges.csv")));
    CHECK(nodes.size() == 3);
    CHECK(edges.size() == 2);
    CHECK(nodes[0] == std::vector<std::string>{"id", "name", "category"});
    CHECK(edges[0] == std::vector<std::string>{"src", "dst", "type", "label", "weight"});

    StubGenerator gen;
    const Corpus c = ingest(testing::fixture_path("formulas.jsonl"));
    std::vector<Extraction> ex;
    for (const auto& ch : chunk(c)) ex.push_back(extract(ch, gen));
    const KnowledgeGraph g = build_graph(ex);
    std::vector<std::int64_t> comm(g.size());
    for (std::size_t i = 0; i < comm.size(); ++i) comm[i] = static_cast<std::int64_t>(i % 5);
    testing::TempDir dir2;
    export_graph(g, dir2.str(), &comm);
    std::vector<std::int64_t> back;
    const KnowledgeGraph h = import_graph(dir2.str(), &back);
    CHECK(back == comm);
    REQUIRE(h.size() == g.size());
    REQUIRE(h.relations().size() == g.relations().size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        CHECK(h.entities()[i].name == g.entities()[i].name);
        CHECK(h.entities()[i].category == g.entities()[i].category);
    }
    for (std::size_t i = 0; i < g.relations().size(); ++i) {
        CHECK(h.relations()[i].label == g.relations()[i].label);
        CHECK(h.relations()[i].weight == g.relations()[i].weight);
        CHECK(h.relations()[i].relation_type == g.relations()[i].relation_type);
    }
    CHECK_THROWS_AS(export_graph(two, "/proc/zfdt-cannot-write"), IoError);
}

TEST_CASE("csv quoting round-trips") {
    const std::vector<std::string> fields = {"plain", "with,comma", "with \"quote\"", "multi\nline", ""};
    std::string line;
    for (std::size_t i = 0; i < fields.size(); ++i) line += (i ? "," : "") + csv_escape(fields[i]);
    const auto rows = parse_csv(line + "\r\n");
    REQUIRE(rows.size() == 1);
    CHECK(rows[0] == fields);
}

#pragma once

#include "test_support.hpp"
#include "zfdt/clients.hpp"
#include "zfdt/community.hpp"
#include "zfdt/corpus.hpp"
#include "zfdt/index.hpp"
#include "zfdt/kg.hpp"
#include "zfdt/retrieval.hpp"

namespace zfdt::testing {

/// Fixture corpus run through the in-memory pipeline with stub clients.
struct Pipeline {
    StubEncoder encoder;
    StubGenerator generator;
    Corpus corpus;
    KnowledgeGraph graph;
    CommunityHierarchy hierarchy;
    CommunityIndex index;

    Pipeline() : Pipeline(ingest(fixture_path("formulas.jsonl"))) {}

    explicit Pipeline(Corpus c) : corpus(std::move(c)) {
        std::vector<Extraction> ex;
        for (const auto& ch : chunk(corpus)) ex.push_back(extract(ch, generator));
        graph = build_graph(ex);
        hierarchy = hierarchical_leiden(graph, LeidenConfig{});
        assign_categories(hierarchy, graph);
        summarize_all(hierarchy, graph, generator);
        index = build_index(hierarchy, encoder);
    }

    EngineView view() const { return {graph, hierarchy, index, encoder, generator}; }
};

/// Shared instance; building it takes a noticeable fraction of a second.
inline const Pipeline& shared_pipeline() {
    static const Pipeline p;
    return p;
}

}  // namespace zfdt::testing

#include "zfdt/retrieval.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>
#include <thread>

#include "zfdt/text.hpp"

namespace zfdt {

void BeamConfig::validate() const {
    if (k < 1) throw ConfigError("top-k must be at least 1");
    if (beam_width < k) {
        throw ConfigError("beam width " + std::to_string(beam_width) + " is smaller than top-k " + std::to_string(k));
    }
}

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

void record(Trace* trace, std::string stage, std::optional<std::int64_t> community, std::optional<std::int64_t> call,
            Clock::time_point start, std::string detail = {}) {
    if (!trace) return;
    trace->events.push_back({std::move(stage), community, call, elapsed_ms(start), std::move(detail)});
}

constexpr std::string_view kExpandInstructions =
    "Rewrite the symptom description as a fuller clinical query: restate the symptoms, likely syndrome and "
    "relevant pulse and tongue findings. Reply with the rewritten query only.";

constexpr std::string_view kMapInstructions =
    "Using only the community description, answer the query for this information category. Quote the relevant "
    "entities.";

constexpr std::string_view kReduceInstructions =
    "Merge the local answers into one global answer. Keep each community's findings under its own header.";

constexpr double kLogFloor = 1e-300;

}  // namespace

std::set<EntityId> find_mentions(const KnowledgeGraph& graph, std::string_view text_in) {
    const std::string haystack = text::normalize_for_mentions(text_in);
    std::set<EntityId> out;
    for (const auto& e : graph.entities()) {
        if (text::mentions(haystack, text::normalize_for_mentions(e.name))) out.insert(e.entity_id);
    }
    return out;
}

Query expand_query(std::string_view x, const Generator& generator, const GenerationParams& params, Trace* trace,
                   std::int64_t call_id) {
    Query q;
    q.original = text::trim(x);
    if (q.original.empty()) throw InvalidInput("symptom description is empty");
    const auto start = Clock::now();
    try {
        q.expanded = text::trim(generator.generate(PromptBuilder(PromptRole::expand)
                                                       .section("instructions", kExpandInstructions)
                                                       .section("query", q.original)
                                                       .str(),
                                                   params));
        if (q.expanded.empty()) throw ClientError("empty expansion", 1);
        record(trace, "expand", std::nullopt, call_id, start);
    } catch (const std::exception& e) {
        q.expanded = q.original;
        q.expansion_failed = true;
        record(trace, "expand", std::nullopt, call_id, start, std::string("fallback: ") + e.what());
    }
    return q;
}

LocalGroup map_local(const Query& query, const std::vector<double>& query_vector, const Community& category_community,
                     const EngineView& view, std::size_t max_candidates, const GenerationParams& params, Trace* trace,
                     std::int64_t first_call_id) {
    LocalGroup group;
    group.category_community_id = category_community.community_id;
    group.category = category_community.category;

    // Candidate communities: the category's leaves by similarity, or the category itself.
    std::vector<std::pair<double, std::int64_t>> ranked;
    for (std::int64_t leaf_id : category_community.children) {
        ranked.emplace_back(dot(query_vector, view.index.entry(leaf_id).vector), leaf_id);
    }
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    if (max_candidates == 0) max_candidates = 1;
    if (ranked.size() > max_candidates) ranked.resize(max_candidates);
    if (ranked.empty()) ranked.emplace_back(0.0, category_community.community_id);

    std::vector<LocalAnswer> answers;
    std::vector<std::vector<double>> vectors;
    for (std::size_t j = 0; j < ranked.size(); ++j) {
        const std::int64_t cid = ranked[j].second;
        const auto& entry = view.index.entry(cid);
        const std::int64_t map_call = first_call_id + 2 * static_cast<std::int64_t>(j);
        auto start = Clock::now();
        std::string text;
        try {
            text = text::trim(view.generator.generate(PromptBuilder(PromptRole::map)
                                                          .section("instructions", kMapInstructions)
                                                          .section("query", query.original)
                                                          .section("expanded", query.expanded)
                                                          .section("category", category_id(group.category))
                                                          .section("community", std::to_string(cid), "")
                                                          .section("summary", entry.summary_text)
                                                          .str(),
                                                      params));
            if (text.empty()) throw ClientError("empty local answer", 1);
            record(trace, "map", cid, map_call, start);
        } catch (const std::exception& e) {
            record(trace, "map", cid, map_call, start, std::string("skipped: ") + e.what());
            continue;
        }
        start = Clock::now();
        try {
            vectors.push_back(view.encoder.encode(text));
            record(trace, "encode_answer", cid, map_call + 1, start);
        } catch (const std::exception& e) {
            record(trace, "encode_answer", cid, map_call + 1, start, std::string("skipped: ") + e.what());
            continue;
        }
        answers.push_back({cid, group.category, std::move(text), 0.0});
    }
    if (answers.empty()) {
        group.failed = true;
        group.error = "no candidate produced a local answer";
        return group;
    }
    const auto scores = score_candidates(query_vector, vectors);
    for (std::size_t i = 0; i < answers.size(); ++i) answers[i].score = scores[i];
    std::stable_sort(answers.begin(), answers.end(), [](const LocalAnswer& a, const LocalAnswer& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.community_id < b.community_id;
    });
    group.candidates = std::move(answers);
    return group;
}

GlobalAnswer reduce_global(const Query& query, std::vector<LocalAnswer> locals, const EngineView& view,
                           const GenerationParams& params, Trace* trace, std::int64_t call_id) {
    if (locals.empty()) throw NoLocalAnswers("nothing to reduce");
    std::sort(locals.begin(), locals.end(), [](const LocalAnswer& a, const LocalAnswer& b) {
        if (a.category != b.category) return category_rank(a.category) < category_rank(b.category);
        if (a.community_id != b.community_id) return a.community_id < b.community_id;
        return a.text < b.text;
    });
    PromptBuilder prompt(PromptRole::reduce);
    prompt.section("instructions", kReduceInstructions);
    prompt.section("query", query.original);
    prompt.section("expanded", query.expanded);
    for (const auto& l : locals) {
        prompt.section("answer", std::to_string(l.community_id) + " " + std::string(category_id(l.category)), l.text);
    }
    const auto start = Clock::now();
    GlobalAnswer g;
    g.text = text::trim(view.generator.generate(prompt.str(), params));
    if (g.text.empty()) throw ClientError("empty global answer", 1);
    record(trace, "reduce", std::nullopt, call_id, start);

    std::vector<Subgraph> parts;
    for (const auto& l : locals) {
        const auto& members = view.hierarchy.get(l.community_id).entity_ids;
        if (members.empty()) continue;
        parts.push_back(subgraph_for_query(view.graph, std::set<EntityId>(members.begin(), members.end()), 1));
    }
    g.subgraph_ref = merge_subgraphs(view.graph, parts);
    g.contributing = std::move(locals);
    return g;
}

std::vector<GlobalAnswer> beam_retrieve(const Query& query, const std::vector<LocalGroup>& groups,
                                        const BeamConfig& config, const EngineView& view,
                                        const GenerationParams& params, Trace* trace, std::int64_t first_call_id) {
    config.validate();
    struct State {
        std::vector<std::size_t> picks;  // candidate index per usable group
        double score = 0.0;
    };
    std::vector<const LocalGroup*> usable;
    for (const auto& g : groups) {
        if (!g.failed && !g.candidates.empty()) usable.push_back(&g);
    }
    if (usable.empty()) throw NoLocalAnswers("every map group failed");

    std::vector<State> beam{State{}};
    for (const auto* g : usable) {
        const std::size_t width = std::min(config.beam_width, g->candidates.size());
        std::vector<State> next;
        for (const auto& s : beam) {
            for (std::size_t j = 0; j < width; ++j) {
                State t = s;
                t.picks.push_back(j);
                t.score += std::log(std::max(g->candidates[j].score, kLogFloor));
                next.push_back(std::move(t));
            }
        }
        std::sort(next.begin(), next.end(), [](const State& a, const State& b) {
            if (a.score != b.score) return a.score > b.score;
            return a.picks < b.picks;
        });
        if (next.size() > config.beam_width) next.resize(config.beam_width);
        beam = std::move(next);
    }
    if (beam.size() > config.k) beam.resize(config.k);

    std::vector<GlobalAnswer> out;
    for (std::size_t i = 0; i < beam.size(); ++i) {
        std::vector<LocalAnswer> locals;
        for (std::size_t gi = 0; gi < usable.size(); ++gi) locals.push_back(usable[gi]->candidates[beam[i].picks[gi]]);
        auto g = reduce_global(query, std::move(locals), view, params, trace,
                               first_call_id + static_cast<std::int64_t>(i));
        g.joint_score = beam[i].score;
        out.push_back(std::move(g));
    }
    return out;
}

std::string answer_prompt(const Query& query, std::string_view retrieved) {
    return PromptBuilder(PromptRole::answer)
        .section("instruction", kSftInstruction)
        .section("symptoms", query.original)
        .section("expanded", query.expanded)
        .section("retrieved", retrieved)
        .str();
}

std::string append_disclaimer(std::string_view text_in) {
    std::string out = text::trim(text_in);
    out += "\n\n";
    out += kSafetyDisclaimer;
    return out;
}

AnswerResult answer(std::string_view x, const EngineView& view, const RetrievalConfig& config) {
    AnswerResult result;
    Trace& trace = result.trace;
    std::string stage = "expand";
    try {
        config.beam.validate();
        if (text::trim(x).empty()) throw InvalidInput("symptom description is empty");

        // Client call ids are fixed up front so traces do not depend on scheduling.
        const std::size_t groups = view.hierarchy.category_communities.size();
        const std::int64_t per_group = 2 * static_cast<std::int64_t>(config.beam.beam_width);
        const std::int64_t expand_call = 0;
        const std::int64_t encode_call = 1;
        const std::int64_t map_base = 2;
        const std::int64_t reduce_base = map_base + per_group * static_cast<std::int64_t>(groups);
        const std::int64_t answer_call = reduce_base + static_cast<std::int64_t>(config.beam.k);

        if (config.expand) {
            result.query = expand_query(x, view.generator, config.params, &trace, expand_call);
        } else {
            result.query.original = text::trim(x);
            result.query.expanded = result.query.original;
        }
        result.query.entity_mentions = find_mentions(view.graph, query_text(result.query.original, result.query.expanded));

        stage = "encode";
        auto start = Clock::now();
        const auto qvec = view.encoder.encode(query_text(result.query.original, result.query.expanded));
        record(&trace, "encode_query", std::nullopt, encode_call, start);

        stage = "map";
        result.groups.resize(groups);
        std::vector<Trace> group_traces(groups);
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            for (std::size_t g = next++; g < groups; g = next++) {
                result.groups[g] = map_local(result.query, qvec, view.hierarchy.category_communities[g], view,
                                             config.beam.beam_width, config.params, &group_traces[g],
                                             map_base + per_group * static_cast<std::int64_t>(g));
            }
        };
        const std::size_t threads = std::max<std::size_t>(1, std::min(config.max_parallel, groups));
        if (threads == 1) {
            worker();
        } else {
            std::vector<std::thread> pool;
            for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
            for (auto& t : pool) t.join();
        }
        for (std::size_t g = 0; g < groups; ++g) {
            trace.events.push_back({"map_group", result.groups[g].category_community_id, std::nullopt, 0.0,
                                    result.groups[g].failed ? "failed: " + result.groups[g].error
                                                            : std::to_string(result.groups[g].candidates.size()) +
                                                                  " candidates"});
            for (auto& e : group_traces[g].events) trace.events.push_back(std::move(e));
        }

        stage = "reduce";
        result.globals = beam_retrieve(result.query, result.groups, config.beam, view, config.params, &trace,
                                       reduce_base);
        for (std::size_t i = 0; i < result.globals.size(); ++i) {
            if (i) result.retrieved += "\n\n";
            result.retrieved += result.globals[i].text;
        }

        stage = "answer";
        start = Clock::now();
        const std::string generated =
            view.generator.generate(answer_prompt(result.query, result.retrieved), config.params);
        record(&trace, "answer", std::nullopt, answer_call, start);
        result.answer = append_disclaimer(generated);
    } catch (const RetrievalError&) {
        throw;
    } catch (const InvalidInput&) {
        throw;
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw RetrievalError(stage, e.what(), trace);
    }
    return result;
}

}  // namespace zfdt

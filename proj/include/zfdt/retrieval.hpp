#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "zfdt/clients.hpp"
#include "zfdt/community.hpp"
#include "zfdt/errors.hpp"
#include "zfdt/index.hpp"
#include "zfdt/kg.hpp"

namespace zfdt {

/// Fixed instruction line shared by the final answer prompt and SFT records.
inline constexpr std::string_view kSftInstruction =
    "Recommend a TCM formula and provide detailed explanations based on the symptoms";

/// Appended to every generated answer.
inline constexpr std::string_view kSafetyDisclaimer =
    "Important Note: The prescription recommendations provided are intended for reference purposes only and "
    "should not be used without professional supervision. Proper Traditional Chinese Medicine practice requires "
    "individualized syndrome differentiation and treatment. For optimal safety and efficacy, please consult a "
    "qualified TCM practitioner when using this software.";

struct Query {
    std::string original;
    std::string expanded;
    std::set<EntityId> entity_mentions;
    bool expansion_failed = false;
};

struct LocalAnswer {
    std::int64_t community_id = 0;
    Category category = Category::unknown;
    std::string text;
    double score = 0.0;
};

/// Candidate local answers for one category-level community, best first.
struct LocalGroup {
    std::int64_t category_community_id = 0;
    Category category = Category::unknown;
    std::vector<LocalAnswer> candidates;
    bool failed = false;
    std::string error;
};

struct GlobalAnswer {
    std::string text;
    std::vector<LocalAnswer> contributing;
    Subgraph subgraph_ref;
    double joint_score = 0.0;
};

struct BeamConfig {
    std::size_t k = 2;
    std::size_t beam_width = 4;

    /// Throws ConfigError unless 1 <= k <= beam_width.
    void validate() const;
};

struct TraceEvent {
    std::string stage;
    std::optional<std::int64_t> community_id;
    std::optional<std::int64_t> client_call_id;
    double duration_ms = 0.0;
    std::string detail;
};

struct Trace {
    std::vector<TraceEvent> events;
};

/// A pipeline stage failed; carries the trace collected so far.
class RetrievalError : public PipelineError {
public:
    RetrievalError(std::string stage, const std::string& message, Trace trace)
        : PipelineError(std::move(stage), message), trace_(std::move(trace)) {}

    const Trace& trace() const noexcept { return trace_; }

private:
    Trace trace_;
};

struct EngineView {
    const KnowledgeGraph& graph;
    const CommunityHierarchy& hierarchy;
    const CommunityIndex& index;
    const Encoder& encoder;
    const Generator& generator;
};

struct RetrievalConfig {
    BeamConfig beam;
    std::size_t max_parallel = 4;
    bool expand = true;
    GenerationParams params;
};

/// Entities whose names occur in `text`.
std::set<EntityId> find_mentions(const KnowledgeGraph& graph, std::string_view text);

/// Falls back to expanded = x (with `expansion_failed`) when the generator fails.
Query expand_query(std::string_view x, const Generator& generator, const GenerationParams& params = {},
                   Trace* trace = nullptr, std::int64_t call_id = 0);

/// Candidate local answers for one category-level community: its leaf
/// communities ranked by index similarity (at most `max_candidates`), or the
/// category summary itself when the category has no leaves. Each answer is
/// encoded and scored with a softmax over the group. A failed candidate is
/// skipped; a group with no surviving candidate is marked failed.
LocalGroup map_local(const Query& query, const std::vector<double>& query_vector, const Community& category_community,
                     const EngineView& view, std::size_t max_candidates, const GenerationParams& params = {},
                     Trace* trace = nullptr, std::int64_t first_call_id = 0);

/// Contributing answers are ordered by (category, community id). Throws NoLocalAnswers.
GlobalAnswer reduce_global(const Query& query, std::vector<LocalAnswer> locals, const EngineView& view,
                           const GenerationParams& params = {}, Trace* trace = nullptr, std::int64_t call_id = 0);

/// Top-k selections of one candidate per non-failed group by the sum of log
/// scores, each reduced to a global answer; descending joint score.
std::vector<GlobalAnswer> beam_retrieve(const Query& query, const std::vector<LocalGroup>& groups,
                                        const BeamConfig& config, const EngineView& view,
                                        const GenerationParams& params = {}, Trace* trace = nullptr,
                                        std::int64_t first_call_id = 0);

struct AnswerResult {
    std::string answer;
    Query query;
    std::vector<LocalGroup> groups;
    std::vector<GlobalAnswer> globals;
    std::string retrieved;  // c: the global answers passed to the final prompt
    Trace trace;
};

std::string answer_prompt(const Query& query, std::string_view retrieved);

/// expand -> map over the seven category communities -> beam -> final answer
/// with the safety disclaimer appended. Throws RetrievalError.
AnswerResult answer(std::string_view x, const EngineView& view, const RetrievalConfig& config);

std::string append_disclaimer(std::string_view text);

}  // namespace zfdt

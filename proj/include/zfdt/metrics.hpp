#pragma once

#include <array>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "zfdt/clients.hpp"
#include "zfdt/kg.hpp"
#include "zfdt/text.hpp"

namespace zfdt {

// ---------------------------------------------------------------------------
// Rule table

struct RuleTable {
    std::set<std::pair<std::string, std::string>> incompatible_pairs;
    std::set<std::pair<std::string, std::string>> antagonistic_pairs;

    /// Stores the pair normalized and sorted; self-pairs throw InvalidInput.
    void add_incompatible(std::string_view a, std::string_view b);
    void add_antagonistic(std::string_view a, std::string_view b);
    bool forbidden(std::string_view a, std::string_view b) const;
    std::size_t size() const { return incompatible_pairs.size() + antagonistic_pairs.size(); }

    /// Lines "herbA<TAB>herbB[<TAB>incompatible|antagonistic]"; '#' starts a comment.
    static RuleTable parse(std::string_view content);
    static RuleTable load(const std::string& path);
    /// The classical incompatible and antagonistic pairings.
    static RuleTable classical();
};

/// Normalized, sorted pair.
std::pair<std::string, std::string> herb_pair(std::string_view a, std::string_view b);

// ---------------------------------------------------------------------------
// Inputs

struct RoleAssignment {
    std::array<std::set<std::string>, 4> roles;  // sovereign, minister, assistant, courier

    std::set<std::string>& operator[](HerbRole r) { return roles.at(static_cast<std::size_t>(r)); }
    const std::set<std::string>& operator[](HerbRole r) const { return roles.at(static_cast<std::size_t>(r)); }
    bool empty() const;
    /// Throws InvalidInput if a herb appears under two roles.
    void validate() const;

    /// Roles annotated in the text's "[Herbal Ingredients]" sections.
    static RoleAssignment from_text(std::string_view text);
};

struct MetricWeights {
    double w_s = 0.25;
    double w_mi = 0.25;
    double w_a = 0.25;
    double w_me = 0.25;

    /// Throws InvalidWeights unless each weight is in [0,1] and they sum to 1 (1e-12).
    void validate() const;
};

using HallucinationJudge = std::function<bool(const std::string& response)>;
using FactOracle = std::function<bool(const text::RuleTriple& triple)>;
using ProfessionalismJudge = std::function<bool(const std::string& sentence)>;
using CoherenceJudge = std::function<bool(const std::string& first, const std::string& second)>;

/// Flags a response naming a formula or herb that is not a graph entity.
HallucinationJudge kg_hallucination_judge(const KnowledgeGraph& graph);
/// Supported when the graph holds a relation with the same endpoints and label
/// (role annotations in labels are ignored).
FactOracle kg_fact_oracle(const KnowledgeGraph& graph);
/// Professional when the sentence contains at least one glossary term.
ProfessionalismJudge glossary_judge();
const std::vector<std::string>& professional_glossary();
/// Coherent when both sentences mention a common graph entity.
CoherenceJudge kg_coherence_judge(const KnowledgeGraph& graph);

/// Judges backed by a generator answering YES/NO to a JUDGE prompt.
HallucinationJudge llm_hallucination_judge(const Generator& generator);
ProfessionalismJudge llm_professionalism_judge(const Generator& generator);
CoherenceJudge llm_coherence_judge(const Generator& generator);

// ---------------------------------------------------------------------------
// Metrics

/// 1 - violations / C(n,2) over distinct normalized herbs. Throws InvalidInput
/// when no herb remains.
double ccr(const std::vector<std::string>& herbs, const RuleTable& rules);

/// Weighted per-role recall; a role with an empty reference set scores
/// `empty_reference_score`. Throws PreconditionError when every reference role is empty.
double cscr(const RoleAssignment& predicted, const RoleAssignment& reference, const MetricWeights& weights = {},
            double empty_reference_score = 1.0);

/// 1 - flagged / total. Throws InvalidInput for an empty list.
double cchr(const std::vector<std::string>& responses, const HallucinationJudge& judge);

/// Supported / asserted triples; nullopt when the response asserts nothing.
std::optional<double> fact_score(std::string_view response, const FactOracle& oracle);

/// Section headers counted for the completeness half of SCR.
inline constexpr std::array<Category, 6> kScrComponents = {
    Category::formula,      Category::herbal_ingredient, Category::symptoms_population,
    Category::pulse_tongue, Category::contraindication,  Category::preparation,
};

double scr(std::string_view response, const ProfessionalismJudge& judge);

/// Coherent adjacent sentence pairs / adjacent pairs; nullopt below two sentences.
std::optional<double> lr(std::string_view response, const CoherenceJudge& judge);

/// BLEU-4, uniform weights, closest-reference brevity penalty. Unigram
/// precision is unsmoothed; a higher order with no matches uses 1/(t_n + 1).
double bleu(std::string_view candidate, const std::vector<std::string>& references);

double rouge_n_f1(const std::vector<std::string>& candidate, const std::vector<std::string>& reference, std::size_t n);
double rouge_l_f1(const std::vector<std::string>& candidate, const std::vector<std::string>& reference);
/// Mean of ROUGE-1, ROUGE-2 and ROUGE-L F1.
double rouge_s(std::string_view candidate, std::string_view reference);

// ---------------------------------------------------------------------------
// Suite

inline constexpr std::array<std::string_view, 8> kMetricKeys = {"bleu", "rouge_s", "ccr", "cscr", "cchr", "fs", "scr", "lr"};
inline constexpr std::array<std::string_view, 8> kMetricTitles = {"BLEU", "ROUGE-S", "CCR", "CSCR", "CCHR", "FS", "SCR", "LR"};

struct MetricReport {
    std::array<std::optional<double>, 8> scores;  // order of kMetricKeys; nullopt when every item was skipped
    std::array<std::size_t, 8> counted{};        // items contributing to each score
    double avg = 0.0;
    bool tcm_only_avg = false;

    std::optional<double> get(std::string_view key) const;
    std::string to_json() const;
    /// Header row in the fixed column order followed by one value row.
    std::string to_tsv() const;
};

struct SuiteOptions {
    bool tcm_only_avg = false;  // average the six TCM metrics only
    double empty_reference_score = 1.0;
    HallucinationJudge hallucination;  // defaults to the graph judge
    FactOracle facts;
    ProfessionalismJudge professionalism;
    CoherenceJudge coherence;
};

/// Throws InvalidInput when the lists are empty or differ in length.
MetricReport evaluate_suite(const std::vector<std::string>& outputs, const std::vector<std::string>& references,
                            const KnowledgeGraph& graph, const RuleTable& rules, const MetricWeights& weights = {},
                            const SuiteOptions& options = {});

/// Sum of values in ascending order, so the result does not depend on input order.
double ordered_mean(std::vector<double> values);

}  // namespace zfdt

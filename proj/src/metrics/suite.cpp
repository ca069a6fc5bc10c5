#include <algorithm>
#include <cstdio>
#include <json.hpp>

#include "zfdt/errors.hpp"
#include "zfdt/metrics.hpp"

namespace zfdt {

namespace {

enum MetricSlot : std::size_t { kBleu, kRouge, kCcr, kCscr, kCchr, kFs, kScr, kLr };

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

}  // namespace

double ordered_mean(std::vector<double> values) {
    if (values.empty()) throw InvalidInput("mean of no values");
    std::sort(values.begin(), values.end());
    double sum = 0.0;
    for (double v : values) sum += v;
    return sum / static_cast<double>(values.size());
}

std::optional<double> MetricReport::get(std::string_view key) const {
    for (std::size_t i = 0; i < kMetricKeys.size(); ++i) {
        if (kMetricKeys[i] == key) return scores[i];
    }
    if (key == "avg") return avg;
    throw InvalidInput("unknown metric: " + std::string(key));
}

std::string MetricReport::to_json() const {
    nlohmann::ordered_json j;
    nlohmann::ordered_json counts;
    for (std::size_t i = 0; i < kMetricKeys.size(); ++i) {
        const std::string key(kMetricKeys[i]);
        j[key] = scores[i] ? nlohmann::ordered_json(*scores[i]) : nlohmann::ordered_json(nullptr);
        counts[key] = counted[i];
    }
    j["avg"] = avg;
    j["avg_scope"] = tcm_only_avg ? "tcm" : "all";
    j["counted"] = counts;
    return j.dump(2);
}

std::string MetricReport::to_tsv() const {
    std::string header, row;
    for (std::size_t i = 0; i < kMetricTitles.size(); ++i) {
        header += std::string(kMetricTitles[i]) + '\t';
        row += (scores[i] ? fmt(*scores[i]) : std::string("NA")) + '\t';
    }
    header += "Avg\n";
    row += fmt(avg) + '\n';
    return header + row;
}

MetricReport evaluate_suite(const std::vector<std::string>& outputs, const std::vector<std::string>& references,
                            const KnowledgeGraph& graph, const RuleTable& rules, const MetricWeights& weights,
                            const SuiteOptions& options) {
    if (outputs.empty()) throw InvalidInput("no outputs to evaluate");
    if (outputs.size() != references.size()) throw InvalidInput("outputs and references differ in length");
    weights.validate();

    const HallucinationJudge hallucination = options.hallucination ? options.hallucination : kg_hallucination_judge(graph);
    const FactOracle facts = options.facts ? options.facts : kg_fact_oracle(graph);
    const ProfessionalismJudge professionalism = options.professionalism ? options.professionalism : glossary_judge();
    const CoherenceJudge coherence = options.coherence ? options.coherence : kg_coherence_judge(graph);

    std::array<std::vector<double>, 8> per_item;
    for (std::size_t i = 0; i < outputs.size(); ++i) {
        const std::string& out = outputs[i];
        const std::string& ref = references[i];
        per_item[kBleu].push_back(bleu(out, {ref}));
        per_item[kRouge].push_back(rouge_s(out, ref));

        std::vector<std::string> herbs;
        for (const auto& h : text::herbal_section_items(out)) herbs.push_back(h.name);
        if (!herbs.empty()) per_item[kCcr].push_back(ccr(herbs, rules));

        const RoleAssignment reference_roles = RoleAssignment::from_text(ref);
        if (!reference_roles.empty()) {
            per_item[kCscr].push_back(
                cscr(RoleAssignment::from_text(out), reference_roles, weights, options.empty_reference_score));
        }

        per_item[kCchr].push_back(hallucination(out) ? 0.0 : 1.0);
        if (auto fs = fact_score(out, facts)) per_item[kFs].push_back(*fs);
        per_item[kScr].push_back(scr(out, professionalism));
        if (auto l = lr(out, coherence)) per_item[kLr].push_back(*l);
    }

    MetricReport report;
    report.tcm_only_avg = options.tcm_only_avg;
    std::vector<double> for_avg;
    for (std::size_t m = 0; m < 8; ++m) {
        report.counted[m] = per_item[m].size();
        if (per_item[m].empty()) continue;
        report.scores[m] = std::clamp(ordered_mean(per_item[m]), 0.0, 1.0);
        if (options.tcm_only_avg && (m == kBleu || m == kRouge)) continue;
        for_avg.push_back(*report.scores[m]);
    }
    report.avg = for_avg.empty() ? 0.0 : ordered_mean(for_avg);
    return report;
}

}  // namespace zfdt

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <sstream>
#include <tuple>
#include <unordered_set>

#include "zfdt/errors.hpp"
#include "zfdt/metrics.hpp"

namespace zfdt {

// ---------------------------------------------------------------------------
// Rule table

std::pair<std::string, std::string> herb_pair(std::string_view a, std::string_view b) {
    std::string x = text::normalize_name(a);
    std::string y = text::normalize_name(b);
    if (x.empty() || y.empty()) throw InvalidInput("empty herb name in rule pair");
    if (x == y) throw InvalidInput("self-pair in rule table: " + x);
    if (y < x) std::swap(x, y);
    return {std::move(x), std::move(y)};
}

void RuleTable::add_incompatible(std::string_view a, std::string_view b) { incompatible_pairs.insert(herb_pair(a, b)); }

void RuleTable::add_antagonistic(std::string_view a, std::string_view b) { antagonistic_pairs.insert(herb_pair(a, b)); }

bool RuleTable::forbidden(std::string_view a, std::string_view b) const {
    std::string x = text::normalize_name(a);
    std::string y = text::normalize_name(b);
    if (x == y) return false;
    if (y < x) std::swap(x, y);
    const auto key = std::make_pair(x, y);
    return incompatible_pairs.count(key) > 0 || antagonistic_pairs.count(key) > 0;
}

RuleTable RuleTable::parse(std::string_view content) {
    RuleTable table;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= content.size()) {
        const auto nl = content.find('\n', pos);
        std::string_view line = content.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? content.size() + 1 : nl + 1;
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string_view::npos) line = line.substr(0, hash);
        if (text::trim(line).empty()) continue;
        std::vector<std::string> fields;
        std::size_t start = 0;
        while (true) {
            const auto tab = line.find('\t', start);
            fields.push_back(text::trim(line.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start)));
            if (tab == std::string_view::npos) break;
            start = tab + 1;
        }
        if (fields.size() < 2 || fields.size() > 3) throw ParseError("expected herbA<TAB>herbB", line_no);
        const std::string kind = fields.size() == 3 ? text::to_lower_ascii(fields[2]) : "incompatible";
        try {
            if (kind == "incompatible") {
                table.add_incompatible(fields[0], fields[1]);
            } else if (kind == "antagonistic") {
                table.add_antagonistic(fields[0], fields[1]);
            } else {
                throw ParseError("unknown rule kind: " + fields[2], line_no);
            }
        } catch (const InvalidInput& e) {
            throw ParseError(e.what(), line_no);
        }
    }
    return table;
}

RuleTable RuleTable::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read rule table " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

RuleTable RuleTable::classical() {
    RuleTable t;
    for (const char* h : {"kansui", "euphorbia", "sargassum", "genkwa"}) t.add_incompatible("licorice", h);
    for (const char* h : {"pinellia", "trichosanthes", "fritillaria", "ampelopsis", "bletilla"}) t.add_incompatible("aconite", h);
    for (const char* h : {"ginseng", "adenophora", "glehnia", "salvia", "scrophularia", "sophora", "asarum", "white peony",
                          "red peony"}) {
        t.add_incompatible("veratrum", h);
    }
    t.add_antagonistic("sulfur", "mirabilite");
    t.add_antagonistic("mercury", "arsenic");
    t.add_antagonistic("wolfsbane", "litharge");
    t.add_antagonistic("croton", "morning glory seed");
    t.add_antagonistic("clove", "curcuma");
    t.add_antagonistic("crude mirabilite", "sparganium");
    t.add_antagonistic("aconite", "rhinoceros horn");
    t.add_antagonistic("ginseng", "trogopterus dung");
    t.add_antagonistic("cinnamon bark", "red halloysite");
    return t;
}

// ---------------------------------------------------------------------------
// Inputs

bool RoleAssignment::empty() const {
    return std::all_of(roles.begin(), roles.end(), [](const auto& s) { return s.empty(); });
}

void RoleAssignment::validate() const {
    std::set<std::string> seen;
    for (const auto& s : roles) {
        for (const auto& h : s) {
            if (!seen.insert(h).second) throw InvalidInput("herb assigned to two roles: " + h);
        }
    }
}

RoleAssignment RoleAssignment::from_text(std::string_view response) {
    RoleAssignment out;
    std::set<std::string> seen;
    for (const auto& item : text::herbal_section_items(response)) {
        if (item.role == HerbRole::unassigned) continue;
        const std::string name = text::normalize_name(item.name);
        if (!seen.insert(name).second) continue;
        out[item.role].insert(name);
    }
    return out;
}

void MetricWeights::validate() const {
    const double w[] = {w_s, w_mi, w_a, w_me};
    double sum = 0.0;
    for (double x : w) {
        if (!std::isfinite(x) || x < 0.0 || x > 1.0) throw InvalidWeights("each weight must lie in [0,1]");
        sum += x;
    }
    if (std::abs(sum - 1.0) > 1e-12) throw InvalidWeights("weights must sum to 1");
}

// ---------------------------------------------------------------------------
// Judges

namespace {

std::vector<std::string> named_formulas_and_herbs(std::string_view response) {
    std::vector<std::string> names;
    for (const auto& f : text::section_items(response, Category::formula)) names.push_back(f);
    for (const auto& h : text::herbal_section_items(response)) names.push_back(h.name);
    for (const auto& e : text::extract_by_rules(response).entities) {
        if (e.category == Category::formula || e.category == Category::herbal_ingredient) names.push_back(e.name);
    }
    return names;
}

std::string base_label(std::string_view label) {
    std::string l = text::normalize_name(label);
    const auto paren = l.find(" (");
    if (paren != std::string::npos) l.resize(paren);
    return l;
}

std::vector<std::string> mention_names(const KnowledgeGraph& graph) {
    std::vector<std::string> names;
    for (const auto& e : graph.entities()) {
        std::string n = text::normalize_for_mentions(e.name);
        if (!n.empty()) names.push_back(std::move(n));
    }
    return names;
}

std::set<std::size_t> mentioned(const std::vector<std::string>& names, std::string_view sentence) {
    const std::string norm = text::normalize_for_mentions(sentence);
    std::set<std::size_t> out;
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (text::mentions(norm, names[i])) out.insert(i);
    }
    return out;
}

bool says_yes(const std::string& reply) {
    const std::string r = text::to_lower_ascii(text::trim(reply));
    return r.rfind("yes", 0) == 0;
}

std::vector<std::string> nonblank_sentences(std::string_view response) {
    std::vector<std::string> out;
    for (auto& s : text::split_sentences(response)) {
        std::string t = text::trim(s);
        if (!t.empty()) out.push_back(std::move(t));
    }
    return out;
}

}  // namespace

HallucinationJudge kg_hallucination_judge(const KnowledgeGraph& graph) {
    auto known = std::make_shared<std::unordered_set<std::string>>();
    for (const auto& e : graph.entities()) known->insert(text::normalize_name(e.name));
    return [known](const std::string& response) {
        for (const auto& n : named_formulas_and_herbs(response)) {
            if (known->count(text::normalize_name(n)) == 0) return true;
        }
        return false;
    };
}

FactOracle kg_fact_oracle(const KnowledgeGraph& graph) {
    auto facts = std::make_shared<std::set<std::tuple<std::string, std::string, std::string>>>();
    for (const auto& r : graph.relations()) {
        facts->emplace(text::normalize_name(graph.entity(r.src).name), base_label(r.label),
                       text::normalize_name(graph.entity(r.dst).name));
    }
    return [facts](const text::RuleTriple& t) {
        return facts->count({text::normalize_name(t.src), base_label(t.label), text::normalize_name(t.dst)}) > 0;
    };
}

const std::vector<std::string>& professional_glossary() {
    static const std::vector<std::string> terms = {
        "assistant", "blood", "clear", "cold", "contraindicated", "contraindication", "contraindications",
        "courier", "damp", "dampness", "decoct", "decoction", "deficiency", "diagnosis", "disease", "dispel",
        "dose", "dryness", "excess", "exterior", "fire", "formula", "grams", "heart", "heat", "herb", "herbal",
        "herbs", "interior", "kidney", "liver", "lung", "meridian", "minister", "monarch", "phlegm", "pill",
        "population", "powder", "pregnancy", "preparation", "prescription", "prescriptions", "pulse", "qi",
        "rapid", "slippery", "sovereign", "spleen", "stasis", "stomach", "symptom", "symptoms", "syndrome",
        "thready", "tongue", "tonify", "warm", "wind", "wiry", "yang", "yin",
    };
    return terms;
}

ProfessionalismJudge glossary_judge() {
    return [](const std::string& sentence) {
        const std::string norm = text::normalize_for_mentions(sentence);
        for (const auto& term : professional_glossary()) {
            if (text::mentions(norm, term)) return true;
        }
        return false;
    };
}

CoherenceJudge kg_coherence_judge(const KnowledgeGraph& graph) {
    auto names = std::make_shared<std::vector<std::string>>(mention_names(graph));
    return [names](const std::string& a, const std::string& b) {
        const auto ma = mentioned(*names, a);
        if (ma.empty()) return false;
        for (std::size_t i : mentioned(*names, b)) {
            if (ma.count(i) > 0) return true;
        }
        return false;
    };
}

HallucinationJudge llm_hallucination_judge(const Generator& generator) {
    return [&generator](const std::string& response) {
        const std::string prompt =
            PromptBuilder(PromptRole::judge)
                .section("instructions",
                         "Answer YES if every formula and herb named in the response exists, otherwise answer NO.")
                .section("response", response)
                .str();
        return !says_yes(generator.generate(prompt));
    };
}

ProfessionalismJudge llm_professionalism_judge(const Generator& generator) {
    return [&generator](const std::string& sentence) {
        const std::string prompt = PromptBuilder(PromptRole::judge)
                                       .section("instructions",
                                                "Answer YES if the sentence uses accurate professional TCM "
                                                "terminology, otherwise answer NO.")
                                       .section("sentence", sentence)
                                       .str();
        return says_yes(generator.generate(prompt));
    };
}

CoherenceJudge llm_coherence_judge(const Generator& generator) {
    return [&generator](const std::string& a, const std::string& b) {
        const std::string prompt =
            PromptBuilder(PromptRole::judge)
                .section("instructions", "Answer YES if the second sentence follows coherently from the first, otherwise answer NO.")
                .section("first", a)
                .section("second", b)
                .str();
        return says_yes(generator.generate(prompt));
    };
}

// ---------------------------------------------------------------------------
// Metrics

double ccr(const std::vector<std::string>& herbs, const RuleTable& rules) {
    std::set<std::string> distinct;
    for (const auto& h : herbs) {
        std::string n = text::normalize_name(h);
        if (!n.empty()) distinct.insert(std::move(n));
    }
    if (distinct.empty()) throw InvalidInput("CCR needs at least one herb");
    const std::vector<std::string> list(distinct.begin(), distinct.end());
    const std::size_t n = list.size();
    if (n == 1) return 1.0;
    std::size_t violations = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (rules.forbidden(list[i], list[j])) ++violations;
        }
    }
    const double pairs = static_cast<double>(n) * static_cast<double>(n - 1) / 2.0;
    return 1.0 - static_cast<double>(violations) / pairs;
}

double cscr(const RoleAssignment& predicted, const RoleAssignment& reference, const MetricWeights& weights,
            double empty_reference_score) {
    weights.validate();
    if (reference.empty()) throw PreconditionError("CSCR reference has no role assignments");
    if (!(empty_reference_score >= 0.0 && empty_reference_score <= 1.0)) {
        throw InvalidInput("empty-reference score must lie in [0,1]");
    }
    const double w[] = {weights.w_s, weights.w_mi, weights.w_a, weights.w_me};
    double total = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
        const auto& ref = reference.roles[i];
        double r = empty_reference_score;
        if (!ref.empty()) {
            std::size_t hit = 0;
            for (const auto& h : predicted.roles[i]) hit += ref.count(h);
            r = static_cast<double>(hit) / static_cast<double>(ref.size());
        }
        total += w[i] * r;
    }
    return std::clamp(total, 0.0, 1.0);
}

double cchr(const std::vector<std::string>& responses, const HallucinationJudge& judge) {
    if (responses.empty()) throw InvalidInput("CCHR needs at least one response");
    std::size_t flagged = 0;
    for (const auto& r : responses) flagged += judge(r) ? 1 : 0;
    return 1.0 - static_cast<double>(flagged) / static_cast<double>(responses.size());
}

std::optional<double> fact_score(std::string_view response, const FactOracle& oracle) {
    const auto triples = text::extract_by_rules(response).relations;
    if (triples.empty()) return std::nullopt;
    std::size_t supported = 0;
    for (const auto& t : triples) supported += oracle(t) ? 1 : 0;
    return static_cast<double>(supported) / static_cast<double>(triples.size());
}

double scr(std::string_view response, const ProfessionalismJudge& judge) {
    if (text::trim(response).empty()) throw InvalidInput("SCR response is empty");
    const auto present = text::section_categories(response);
    std::size_t a = 0;
    for (Category c : kScrComponents) {
        if (std::find(present.begin(), present.end(), c) != present.end()) ++a;
    }
    const auto sentences = nonblank_sentences(response);
    double cpr = 0.0;
    if (!sentences.empty()) {
        std::size_t good = 0;
        for (const auto& s : sentences) good += judge(s) ? 1 : 0;
        cpr = static_cast<double>(good) / static_cast<double>(sentences.size());
    }
    return 0.5 * (static_cast<double>(a) / 6.0) + 0.5 * cpr;
}

std::optional<double> lr(std::string_view response, const CoherenceJudge& judge) {
    const auto sentences = nonblank_sentences(response);
    if (sentences.size() < 2) return std::nullopt;
    std::size_t coherent = 0;
    for (std::size_t i = 0; i + 1 < sentences.size(); ++i) coherent += judge(sentences[i], sentences[i + 1]) ? 1 : 0;
    return static_cast<double>(coherent) / static_cast<double>(sentences.size() - 1);
}

}  // namespace zfdt

#include <doctest.h>

#include <algorithm>
#include <random>

#include "pipeline_fixture.hpp"
#include "zfdt/errors.hpp"
#include "zfdt/metrics.hpp"

using namespace zfdt;

namespace {

RoleAssignment roles(std::initializer_list<std::pair<HerbRole, std::vector<std::string>>> items) {
    RoleAssignment r;
    for (const auto& [role, herbs] : items) {
        for (const auto& h : herbs) r[role].insert(h);
    }
    return r;
}

const std::string kHalloysiteAnswer =
    "[Recommended Formula] Halloysite Decoction\n"
    "[Herbal Ingredients] halloysite (sovereign); dried ginger (minister); rice\n"
    "[Applicable Symptoms and Population] Chronic diarrhea with blood in the stool\n"
    "[Pulse and Tongue Diagnosis] Pulse slow and weak\n"
    "[Contraindications] Avoid in damp-heat dysentery\n"
    "[Preparation Methods] Decoct in water\n";

}  // namespace

TEST_CASE("CCR arithmetic and the licorice-kansui pair") {
    const RuleTable rules = RuleTable::classical();
    CHECK(ccr({"a", "b", "c", "d", "e"}, rules) == 1.0);
    CHECK(ccr({"licorice", "kansui", "c", "d", "e"}, rules) == doctest::Approx(0.9).epsilon(1e-12));
    CHECK(ccr({"Licorice", " KANSUI "}, rules) == 0.0);
    CHECK(ccr({"ginseng"}, rules) == 1.0);
    CHECK(ccr({"ginseng", "Ginseng"}, rules) == 1.0);
    CHECK_THROWS_AS(ccr({" ", ""}, rules), InvalidInput);
}

TEST_CASE("CCR does not increase as rules are added") {
    std::mt19937_64 rng(13);
    const std::vector<std::string> herbs = {"h0", "h1", "h2", "h3", "h4", "h5"};
    RuleTable rules;
    double previous = ccr(herbs, rules);
    for (int i = 0; i < 30; ++i) {
        const auto a = rng() % 8;
        auto b = rng() % 8;
        if (a == b) b = (b + 1) % 8;
        rules.add_antagonistic("h" + std::to_string(a), "h" + std::to_string(b));
        const double now = ccr(herbs, rules);
        CHECK(now <= previous);
        CHECK(now >= 0.0);
        previous = now;
    }
}

TEST_CASE("rule table parsing") {
    const RuleTable t = RuleTable::parse("# comment\nLicorice\tKansui\naconite\tpinellia\tincompatible\n"
                                         "clove\tcurcuma\tantagonistic  # trailing\n\n");
    CHECK(t.incompatible_pairs.size() == 2);
    CHECK(t.antagonistic_pairs.size() == 1);
    CHECK(t.forbidden("kansui", "licorice"));
    CHECK_FALSE(t.forbidden("licorice", "licorice"));
    CHECK_THROWS_AS(RuleTable::parse("a\tb\tmaybe\n"), ParseError);
    CHECK_THROWS_AS(RuleTable::parse("a\ta\n"), ParseError);
    CHECK_THROWS_AS(RuleTable::parse("just one\n"), ParseError);
    CHECK(RuleTable::classical().forbidden("licorice", "kansui"));
}

TEST_CASE("CSCR examples") {
    const auto ref = roles({{HerbRole::sovereign, {"a"}}, {HerbRole::minister, {"b"}}, {HerbRole::assistant, {"c"}},
                            {HerbRole::courier, {"d"}}});
    CHECK(cscr(ref, ref) == 1.0);
    const auto only_sov = roles({{HerbRole::sovereign, {"a"}}, {HerbRole::minister, {"x"}}});
    CHECK(cscr(only_sov, ref) == doctest::Approx(0.25).epsilon(1e-12));
    const auto ref2 = roles({{HerbRole::sovereign, {"a", "b"}}});
    const auto pred2 = roles({{HerbRole::sovereign, {"a"}}});
    CHECK(cscr(pred2, ref2) == doctest::Approx(0.875).epsilon(1e-12));
    CHECK(cscr(pred2, ref2, {}, 0.0) == doctest::Approx(0.125).epsilon(1e-12));
    CHECK_THROWS_AS(cscr(pred2, RoleAssignment{}), PreconditionError);
    CHECK_THROWS_AS(cscr(pred2, ref2, MetricWeights{0.5, 0.5, 0.5, 0.0}), InvalidWeights);
    CHECK_THROWS_AS(cscr(pred2, ref2, MetricWeights{1.5, -0.5, 0.0, 0.0}), InvalidWeights);
}

TEST_CASE("CSCR is invariant under a simultaneous role permutation") {
    std::mt19937_64 rng(21);
    for (int t = 0; t < 100; ++t) {
        RoleAssignment pred, ref;
        for (std::size_t r = 0; r < 4; ++r) {
            for (int h = 0; h < 4; ++h) {
                if (rng() % 2) ref.roles[r].insert("h" + std::to_string(h));
                if (rng() % 2) pred.roles[r].insert("h" + std::to_string(h));
            }
        }
        if (ref.empty()) continue;
        std::array<std::size_t, 4> perm = {0, 1, 2, 3};
        std::shuffle(perm.begin(), perm.end(), rng);
        RoleAssignment pp, pr;
        for (std::size_t r = 0; r < 4; ++r) {
            pp.roles[perm[r]] = pred.roles[r];
            pr.roles[perm[r]] = ref.roles[r];
        }
        const double v = cscr(pred, ref);
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
        CHECK(cscr(pp, pr) == doctest::Approx(v).epsilon(1e-12));
    }
}

TEST_CASE("role assignment from annotated text") {
    const RoleAssignment r = RoleAssignment::from_text(kHalloysiteAnswer);
    CHECK(r[HerbRole::sovereign] == std::set<std::string>{"halloysite"});
    CHECK(r[HerbRole::minister] == std::set<std::string>{"dried ginger"});
    CHECK(r[HerbRole::assistant].empty());
    RoleAssignment dup = roles({{HerbRole::sovereign, {"a"}}, {HerbRole::minister, {"a"}}});
    CHECK_THROWS_AS(dup.validate(), InvalidInput);
}

TEST_CASE("CCHR with custom and graph judges") {
    const std::vector<std::string> four = {"ok", "ok", "bad", "ok"};
    CHECK(cchr(four, [](const std::string& s) { return s == "bad"; }) == 0.75);
    CHECK(cchr(four, [](const std::string&) { return true; }) == 0.0);
    CHECK_THROWS_AS(cchr({}, [](const std::string&) { return false; }), InvalidInput);

    const auto& p = testing::shared_pipeline();
    const auto judge = kg_hallucination_judge(p.graph);
    CHECK_FALSE(judge("[Recommended Formula] Halloysite Decoction\n[Herbal Ingredients] halloysite; dried ginger"));
    CHECK(judge("[Recommended Formula] Moonbeam Decoction"));
}

TEST_CASE("FactScore counts supported triples") {
    const auto oracle = [](const text::RuleTriple& t) { return t.dst != "wrong"; };
    CHECK(fact_score("Alpha Decoction treats cough. Alpha Decoction treats fever. Alpha Decoction treats chills. "
                     "Alpha Decoction treats wrong.",
                     oracle) == doctest::Approx(0.75).epsilon(1e-12));
    CHECK_FALSE(fact_score("No assertions here", oracle).has_value());

    const auto& p = testing::shared_pipeline();
    const auto kg = kg_fact_oracle(p.graph);
    CHECK(fact_score("Halloysite Decoction contains halloysite.", kg) == 1.0);
    CHECK(fact_score("Halloysite Decoction contains moonstone.", kg) == 0.0);
}

TEST_CASE("SCR arithmetic") {
    const auto always = [](const std::string&) { return true; };
    const auto never = [](const std::string&) { return false; };
    CHECK(scr(kHalloysiteAnswer, always) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(scr(kHalloysiteAnswer, never) == doctest::Approx(0.5).epsilon(1e-12));
    const std::string half = "[Recommended Formula] X Decoction\n[Herbal Ingredients] y\n[Preparation Methods] z\n"
                             "one. two. three.";
    const auto headers = [](const std::string& s) { return s.rfind('[', 0) == 0; };
    CHECK(scr(half, headers) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK_THROWS_AS(scr("  ", always), InvalidInput);
    CHECK(glossary_judge()("The pulse is wiry."));
    CHECK_FALSE(glossary_judge()("The weather is nice."));
}

TEST_CASE("LR arithmetic") {
    const auto judge = [](const std::string& a, const std::string&) { return a == "A"; };
    CHECK(lr("A. B. C. D. E.", judge) == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(lr("A. B.", [](const std::string&, const std::string&) { return true; }) == 1.0);
    CHECK_FALSE(lr("Only one sentence.", judge).has_value());

    const auto& p = testing::shared_pipeline();
    const auto kg = kg_coherence_judge(p.graph);
    CHECK(kg("Halloysite Decoction stops bleeding", "Use halloysite decoction with care"));
    CHECK_FALSE(kg("Halloysite Decoction stops bleeding", "The weather is nice"));
}

TEST_CASE("BLEU hand-enumerated cases") {
    CHECK(bleu("the cat sat on the mat", {"the cat sat on the mat"}) == doctest::Approx(1.0).epsilon(1e-12));
    // p1 = 5/6, p2 = 3/5, p3 = 1/4, p4 = 0 smoothed to 1/(3+1), BP = 1
    CHECK(bleu("the cat sat on the mat", {"the cat is on the mat"}) == doctest::Approx(0.42044820762685725).epsilon(1e-9));
    // p1 = 1, p2 = 3/4, p3 = 1/3, p4 = 0 smoothed to 1/3, BP = exp(1 - 6/5)
    CHECK(bleu("the cat on the mat", {"the cat is on the mat"}) == doctest::Approx(0.43989172475842203).epsilon(1e-9));
    // closest reference length wins the brevity penalty
    CHECK(bleu("the cat on the mat", {"the cat is on the mat", "the cat on a mat"}) > 0.43989172475842203);
    CHECK(bleu("alpha beta gamma", {"delta epsilon zeta"}) < 0.05);
    CHECK_THROWS_AS(bleu(" ", {"x"}), InvalidInput);
}

TEST_CASE("ROUGE-S hand-enumerated cases") {
    CHECK(rouge_s("the cat sat on the mat", "the cat sat on the mat") == doctest::Approx(1.0).epsilon(1e-12));
    // R1 = 5/6, R2 = 3/5, RL = LCS 5 of 6 -> 5/6
    CHECK(rouge_s("the cat sat on the mat", "the cat is on the mat") == doctest::Approx(34.0 / 45.0).epsilon(1e-12));
    CHECK(rouge_s("alpha beta", "gamma delta") == 0.0);
    CHECK_THROWS_AS(rouge_s("", "x"), InvalidInput);
}

TEST_CASE("suite identity, averages and order independence") {
    const auto& p = testing::shared_pipeline();
    std::vector<std::string> outs;
    for (std::size_t i = 0; i < 6; ++i) outs.push_back(render(p.corpus.records[i]));
    const RuleTable rules = RuleTable::classical();
    const MetricReport r = evaluate_suite(outs, outs, p.graph, rules);
    CHECK(r.get("bleu") == 1.0);
    CHECK(r.get("rouge_s") == 1.0);
    CHECK(r.get("cscr") == 1.0);
    std::vector<double> present;
    for (const auto& s : r.scores) {
        if (s) {
            CHECK(*s >= 0.0);
            CHECK(*s <= 1.0);
            present.push_back(*s);
        }
    }
    CHECK(r.avg == doctest::Approx(ordered_mean(present)).epsilon(1e-12));

    auto shuffled = outs;
    std::reverse(shuffled.begin(), shuffled.end());
    const MetricReport s = evaluate_suite(shuffled, shuffled, p.graph, rules);
    CHECK(s.to_json() == r.to_json());

    SuiteOptions tcm;
    tcm.tcm_only_avg = true;
    const MetricReport t = evaluate_suite(outs, outs, p.graph, rules, {}, tcm);
    std::vector<double> six;
    for (std::size_t i = 2; i < 8; ++i) {
        if (t.scores[i]) six.push_back(*t.scores[i]);
    }
    CHECK(t.avg == doctest::Approx(ordered_mean(six)).epsilon(1e-12));

    CHECK_THROWS_AS(evaluate_suite(outs, {"x"}, p.graph, rules), InvalidInput);
    CHECK_THROWS_AS(evaluate_suite({}, {}, p.graph, rules), InvalidInput);
}

TEST_CASE("report formats") {
    MetricReport r;
    r.scores = {0.5, 0.25, 1.0, std::nullopt, 1.0, 0.75, 0.5, 0.0};
    r.avg = 0.5;
    const std::string tsv = r.to_tsv();
    CHECK(tsv.substr(0, tsv.find('\n')) == "BLEU\tROUGE-S\tCCR\tCSCR\tCCHR\tFS\tSCR\tLR\tAvg");
    CHECK(tsv.find("0.500000\t0.250000\t1.000000\tNA\t") != std::string::npos);
    CHECK(r.to_json().find("\"cscr\": null") != std::string::npos);
    CHECK(r.get("avg") == 0.5);
    CHECK_THROWS_AS(r.get("nope"), InvalidInput);
}

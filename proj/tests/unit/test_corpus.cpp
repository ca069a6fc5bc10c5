#include <doctest.h>

#include <random>

#include "test_support.hpp"
#include "zfdt/corpus.hpp"
#include "zfdt/errors.hpp"

using namespace zfdt;

namespace {

const char* kHalloysite =
    R"({"disease":"Chronic intestinal wind with bleeding","formula":"Halloysite Decoction",)"
    R"("ingredients":[{"name":"halloysite","role":"sovereign","dose":"30g"},{"name":"dried ginger","role":"minister"},{"name":"rice"}],)"
    R"("symptoms":"Chronic diarrhea with blood in the stool","pulse_tongue":"Pulse slow and weak","contraindications":"Avoid in damp-heat dysentery",)"
    R"("preparation":"Honey-frying, peel-removing and wine-frying"})";

const char* kSecond =
    R"({"disease":"Dry cough","formula":"Lily Bulb Decoction","ingredients":[{"name":"lily bulb"}],)"
    R"("symptoms":"cough","pulse_tongue":"thin pulse","contraindications":"none","preparation":"decoct"})";

std::string numbered_doc(std::size_t n) {
    std::string s;
    for (std::size_t i = 0; i < n; ++i) s += "w" + std::to_string(i) + (i % 7 == 6 ? "\n" : " ");
    return s;
}

}  // namespace

TEST_CASE("two-record corpus gets dense ids") {
    const Corpus c = ingest_string(std::string(kHalloysite) + "\n" + kSecond + "\n");
    REQUIRE(c.records.size() == 2);
    CHECK(c.records[0].recommended_formula == "Halloysite Decoction");
    CHECK(c.records[1].disease == "Dry cough");
    CHECK(c.records[0].herbal_ingredients[0].role == HerbRole::sovereign);
    CHECK(c.records[0].herbal_ingredients[0].dose == "30g");
    CHECK_FALSE(c.records[0].herbal_ingredients[2].dose.has_value());
}

TEST_CASE("missing disease reports field and line") {
    std::string bad = kSecond;
    bad.replace(bad.find(R"("disease":"Dry cough",)"), std::string(R"("disease":"Dry cough",)").size(), "");
    try {
        ingest_string(std::string(kHalloysite) + "\n\n" + bad + "\n");
        FAIL("expected SchemaError");
    } catch (const SchemaError& e) {
        CHECK(e.field() == "disease");
        CHECK(e.line() == 3);
    }
}

TEST_CASE("malformed json reports the line") {
    try {
        ingest_string(std::string(kHalloysite) + "\n{not json\n");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 2);
    }
}

TEST_CASE("roles without a sovereign are rejected") {
    const std::string r =
        R"({"disease":"d","formula":"f","ingredients":[{"name":"a","role":"minister"}],"symptoms":"s","pulse_tongue":"p","contraindications":"c","preparation":"x"})";
    CHECK_THROWS_AS(ingest_string(r), SchemaError);
}

TEST_CASE("unknown conflict tag is a schema error") {
    std::string r = kSecond;
    r.insert(r.size() - 1, R"(,"conflict_tag":"weather")");
    CHECK_THROWS_AS(ingest_string(r), SchemaError);
}

TEST_CASE("halloysite record round-trips through render and json") {
    const FormulaRecord r = ingest_string(kHalloysite).records.at(0);
    const std::string rendered = render(r);
    CHECK(rendered.find("[Recommended Formula] Halloysite Decoction") != std::string::npos);
    CHECK(parse_rendered(rendered) == r);
    CHECK(parse_record_line(to_json_line(r), 1) == r);

    FormulaRecord tagged = r;
    tagged.conflict_tag = ConflictType::source_conflict;
    CHECK(render(tagged).find("source_conflict") != std::string::npos);
    CHECK(parse_rendered(render(tagged)) == tagged);
    CHECK(parse_record_line(to_json_line(tagged), 1) == tagged);
}

TEST_CASE("fixture corpus ingests and round-trips") {
    const Corpus c = ingest(testing::fixture_path("formulas.jsonl"));
    CHECK(c.records.size() == 50);
    REQUIRE(c.provenance.size() == 1);
    CHECK(c.provenance[0].sha256.size() == 64);
    std::size_t tagged = 0;
    for (const auto& r : c.records) {
        CHECK(parse_rendered(render(r)) == r);
        tagged += r.conflict_tag.has_value();
    }
    CHECK(tagged == 3);
    CHECK(c.records[0].recommended_formula == "Halloysite Decoction");
}

TEST_CASE("chunking by exact division and remainder") {
    const auto& tok = text::default_tokenizer();
    const std::string d1024 = numbered_doc(1024);
    const auto c2 = chunk_text(d1024, 512, tok);
    REQUIRE(c2.size() == 2);
    CHECK(c2[0].token_count == 512);
    CHECK(c2[1].token_count == 512);

    const std::string d513 = numbered_doc(513);
    const auto c3 = chunk_text(d513, 512, tok, 4, 10);
    REQUIRE(c3.size() == 2);
    CHECK(c3[0].token_count == 512);
    CHECK(c3[1].token_count == 1);
    CHECK(c3[0].chunk_id == 10);
    CHECK(c3[1].chunk_id == 11);
    CHECK(c3[1].source_record_id == 4);
    CHECK(c3[0].token_end == c3[1].token_start);
    CHECK(c3[0].text + c3[1].text == d513);
}

TEST_CASE("chunk errors") {
    CHECK_THROWS_AS(chunk(Corpus{}, 512), EmptyCorpus);
    const Corpus c = ingest_string(kSecond);
    CHECK_THROWS(chunk(c, 15));
}

TEST_CASE("chunk coverage and contiguity on random documents") {
    std::mt19937_64 rng(11);
    const auto& tok = text::default_tokenizer();
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = std::uniform_int_distribution<std::size_t>(1, 400)(rng);
        std::string doc;
        for (std::size_t i = 0; i < n; ++i) {
            doc += (rng() % 5 == 0) ? "中" : "tok";
            doc += (rng() % 3 == 0) ? "  " : " ";
        }
        const std::size_t size = std::uniform_int_distribution<std::size_t>(16, 64)(rng);
        const auto chunks = chunk_text(doc, size, tok);
        std::string joined;
        std::size_t total = 0;
        for (std::size_t i = 0; i < chunks.size(); ++i) {
            joined += chunks[i].text;
            total += chunks[i].token_count;
            CHECK(chunks[i].token_count <= size);
            if (i + 1 < chunks.size()) CHECK(chunks[i].token_count == size);
        }
        CHECK(joined == doc);
        CHECK(total == text::tokens(doc).size());
    }
}

TEST_CASE("chunking the fixture is deterministic and covers every record") {
    const Corpus c = ingest(testing::fixture_path("formulas.jsonl"));
    const auto a = chunk(c, 32);
    const auto b = chunk(c, 32);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].text == b[i].text);
        CHECK(a[i].chunk_id == static_cast<std::int64_t>(i));
    }
    for (std::size_t r = 0; r < c.records.size(); ++r) {
        std::string joined;
        for (const auto& ch : a) {
            if (ch.source_record_id == static_cast<std::int64_t>(r)) joined += ch.text;
        }
        CHECK(joined == render(c.records[r]));
    }
}

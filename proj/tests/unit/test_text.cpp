#include <doctest.h>

#include "zfdt/errors.hpp"
#include "zfdt/text.hpp"

using namespace zfdt;
using namespace zfdt::text;

TEST_CASE("normalize_name trims, folds case and collapses whitespace") {
    CHECK(normalize_name("  Halloysite \t  Decoction ") == "halloysite decoction");
    CHECK(normalize_name("ABC") == "abc");
    CHECK(normalize_name("   ") == "");
    CHECK(normalize_name("甘草  Root") == "甘草 root");
}

TEST_CASE("sentence split on ascii and full-width terminators and newlines") {
    const auto s = split_sentences("One. Two!Three？四。\nFive");
    REQUIRE(s.size() == 5);
    CHECK(trim(s[0]) == "One");
    CHECK(trim(s[3]) == "四");
    CHECK(trim(s[4]) == "Five");
}

TEST_CASE("split_items ignores separators nested in parentheses") {
    const auto items = split_items("ginseng (9g, dried); licorice、poria，alisma");
    REQUIRE(items.size() == 4);
    CHECK(trim(items[0]) == "ginseng (9g, dried)");
    CHECK(trim(items[1]) == "licorice");
    CHECK(trim(items[2]) == "poria");
    CHECK(trim(items[3]) == "alisma");
}

TEST_CASE("tokenizer splits whitespace and every CJK code point") {
    const auto t = tokens("ab 中文\tc");
    REQUIRE(t.size() == 4);
    CHECK(t[0] == "ab");
    CHECK(t[1] == "中");
    CHECK(t[2] == "文");
    CHECK(t[3] == "c");
    CHECK(tokens("").empty());
    CHECK_THROWS_AS(tokenizer_by_id("nope"), InvalidInput);
    CHECK(tokenizer_by_id("ws-cjk").id() == "ws-cjk");
}

TEST_CASE("invalid utf-8 decodes to replacement characters") {
    const std::string bad = "a\xff" "b";
    const auto cps = decode_utf8(bad);
    REQUIRE(cps.size() == 3);
    CHECK(cps[1].value == 0xFFFD);
    CHECK(cps[1].begin == 1);
    CHECK(cps[1].end == 2);
}

TEST_CASE("mentions matches whole words for latin names and substrings for CJK") {
    CHECK(mentions("take licorice root daily", "licorice"));
    CHECK_FALSE(mentions("take licoriceroot daily", "licorice"));
    CHECK(mentions("服用甘草汤", "甘草"));
    CHECK(mentions(normalize_for_mentions("Use Licorice, then rest."), "licorice"));
}

TEST_CASE("sha256 matches the standard test vectors") {
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK_THROWS_AS(sha256_file("/nonexistent/file"), IoError);
}

TEST_CASE("rule extraction reads header sections and verb sentences") {
    const auto r = extract_by_rules("[Recommended Formula] Halloysite Decoction\n[Herbal Ingredients] halloysite (sovereign); dried ginger\n");
    bool formula = false, herb = false;
    for (const auto& e : r.entities) {
        formula |= e.name == "Halloysite Decoction" && e.category == Category::formula;
        herb |= normalize_name(e.name) == "dried ginger" && e.category == Category::herbal_ingredient;
    }
    CHECK(formula);
    CHECK(herb);
    CHECK_FALSE(r.relations.empty());

    const auto items = herbal_section_items("[Herbal Ingredients] halloysite (sovereign); rice (assistant); rice");
    REQUIRE(items.size() == 2);
    CHECK(items[0].role == HerbRole::sovereign);
    CHECK(items[1].role == HerbRole::assistant);
}

TEST_CASE("taxonomy ids round-trip") {
    for (const auto c : kCategories) {
        CHECK(parse_category_id(category_id(c)) == c);
        CHECK(category_from_title(category_title(c)) == c);
    }
    CHECK(category_from_title("herbal components") == Category::herbal_ingredient);
    CHECK(parse_herb_role("monarch") == HerbRole::sovereign);
    CHECK(parse_herb_role("messenger") == HerbRole::courier);
    CHECK_FALSE(parse_herb_role("ruler-of-all").has_value());
}

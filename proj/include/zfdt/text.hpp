#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "zfdt/taxonomy.hpp"

namespace zfdt::text {

/// Decoded code point together with its byte range in the source string.
struct CodePoint {
    char32_t value;
    std::size_t begin;
    std::size_t end;
};

/// Lenient UTF-8 decoder: invalid bytes decode to U+FFFD one byte at a time.
std::vector<CodePoint> decode_utf8(std::string_view s);

bool is_space(char32_t cp);
bool is_cjk(char32_t cp);

std::string trim(std::string_view s);

/// Entity-name normalization: trim, ASCII case-fold, collapse internal
/// whitespace runs to a single space. No stemming.
std::string normalize_name(std::string_view s);

std::string to_lower_ascii(std::string_view s);

/// Sentence segmentation shared by the metrics: split on 。！？.!? and newline.
std::vector<std::string> split_sentences(std::string_view s);

/// Splits on top-level separators (; , and their full-width forms, plus 、),
/// ignoring separators nested inside parentheses.
std::vector<std::string> split_items(std::string_view s);

/// True when `normalized_name` occurs in `normalized_text` as a whole word
/// (Latin names) or as a substring (names containing CJK characters).
/// Both arguments must already be normalized with `normalize_name`.
bool mentions(std::string_view normalized_text, std::string_view normalized_name);

/// Collapses punctuation to spaces and normalizes, for mention scanning.
std::string normalize_for_mentions(std::string_view s);

struct TokenSpan {
    std::size_t begin;  // byte offset
    std::size_t end;
};

class Tokenizer {
public:
    virtual ~Tokenizer() = default;
    virtual std::string_view id() const = 0;
    virtual std::vector<TokenSpan> tokenize(std::string_view s) const = 0;
};

/// Splits on Unicode whitespace and emits every CJK code point as its own token.
class WhitespaceCjkTokenizer final : public Tokenizer {
public:
    std::string_view id() const override { return "ws-cjk"; }
    std::vector<TokenSpan> tokenize(std::string_view s) const override;
};

const Tokenizer& default_tokenizer();

/// Looks up a tokenizer by id; throws InvalidInput for unknown ids.
const Tokenizer& tokenizer_by_id(std::string_view id);

std::vector<std::string> tokens(std::string_view s, const Tokenizer& tok = default_tokenizer());

std::string sha256_hex(std::string_view data);

/// Hex-encoded SHA-256 of a file's bytes; throws IoError if unreadable.
std::string sha256_file(const std::string& path);

// Rule-based extraction grammar. It is the offline extractor behind the stub
// generator and the atomic-fact decomposition used by FactScore.

struct RuleEntity {
    std::string name;
    Category category;
};

struct RuleTriple {
    std::string src;
    std::string label;
    std::string dst;
};

struct RuleExtraction {
    std::vector<RuleEntity> entities;
    std::vector<RuleTriple> relations;
};

/// Header lines of the form "[Title] item; item; ..." contribute entities of
/// the title's category and anchor relations (from the first formula, or else
/// the first disease, to every other header entity). Other sentences are
/// matched against a small verb lexicon ("A treats B", "A contains B", ...).
RuleExtraction extract_by_rules(std::string_view text);

/// Herb items of every "[Herbal Ingredients]" section with their annotated
/// roles, de-duplicated by normalized name (first occurrence wins).
struct HerbItem {
    std::string name;
    HerbRole role = HerbRole::unassigned;
};

std::vector<HerbItem> herbal_section_items(std::string_view text);

/// Items of every section of the given category, parentheticals removed,
/// de-duplicated by normalized name.
std::vector<std::string> section_items(std::string_view text, Category category);

/// Categories whose section header appears at least once in `text`.
std::vector<Category> section_categories(std::string_view text);

}  // namespace zfdt::text

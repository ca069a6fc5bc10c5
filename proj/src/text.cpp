#include "zfdt/text.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include "zfdt/errors.hpp"

namespace zfdt {

namespace {

struct CategoryInfo {
    Category category;
    std::string_view id;
    std::string_view title;
};

constexpr std::array<CategoryInfo, 8> kCategoryInfo = {{
    {Category::disease, "disease", "Disease"},
    {Category::formula, "formula", "Recommended Formula"},
    {Category::herbal_ingredient, "herbal_ingredient", "Herbal Ingredients"},
    {Category::symptoms_population, "symptoms_population", "Applicable Symptoms and Population"},
    {Category::pulse_tongue, "pulse_tongue", "Pulse and Tongue Diagnosis"},
    {Category::contraindication, "contraindication", "Contraindications"},
    {Category::preparation, "preparation", "Preparation Methods"},
    {Category::unknown, "unknown", "Unknown"},
}};

struct TitleAlias {
    std::string_view alias;
    Category category;
};

// Lower-case aliases accepted in section headers.
constexpr std::array<TitleAlias, 22> kTitleAliases = {{
    {"disease", Category::disease},
    {"diseases", Category::disease},
    {"recommended formula", Category::formula},
    {"recommended formulas", Category::formula},
    {"recommended prescription", Category::formula},
    {"recommended prescriptions", Category::formula},
    {"formula", Category::formula},
    {"herbal ingredients", Category::herbal_ingredient},
    {"herbal components", Category::herbal_ingredient},
    {"ingredients", Category::herbal_ingredient},
    {"tcm ingredients", Category::herbal_ingredient},
    {"applicable symptoms and population", Category::symptoms_population},
    {"applicable symptoms", Category::symptoms_population},
    {"applicable population symptoms", Category::symptoms_population},
    {"pulse and tongue diagnosis", Category::pulse_tongue},
    {"pulse-tongue signs", Category::pulse_tongue},
    {"contraindications", Category::contraindication},
    {"prescription contraindications", Category::contraindication},
    {"preparation methods", Category::preparation},
    {"preparation method", Category::preparation},
    {"processing methods", Category::preparation},
    {"processing method", Category::preparation},
}};

}  // namespace

std::string_view category_id(Category c) { return kCategoryInfo[static_cast<std::size_t>(c)].id; }

std::string_view category_title(Category c) {
    return kCategoryInfo[static_cast<std::size_t>(c)].title;
}

std::optional<Category> parse_category_id(std::string_view id) {
    for (const auto& info : kCategoryInfo) {
        if (info.id == id) return info.category;
    }
    return std::nullopt;
}

std::optional<Category> category_from_title(std::string_view title) {
    const std::string key = text::normalize_name(text::to_lower_ascii(title));
    for (const auto& a : kTitleAliases) {
        if (a.alias == key) return a.category;
    }
    return std::nullopt;
}

std::string_view herb_role_id(HerbRole r) {
    switch (r) {
        case HerbRole::sovereign: return "sovereign";
        case HerbRole::minister: return "minister";
        case HerbRole::assistant: return "assistant";
        case HerbRole::courier: return "courier";
        case HerbRole::unassigned: return "unassigned";
    }
    return "unassigned";
}

std::optional<HerbRole> parse_herb_role(std::string_view word) {
    const std::string w = text::normalize_name(text::to_lower_ascii(word));
    if (w == "sovereign" || w == "monarch" || w == "king" || w == "emperor") return HerbRole::sovereign;
    if (w == "minister" || w == "deputy") return HerbRole::minister;
    if (w == "assistant" || w == "adjuvant") return HerbRole::assistant;
    if (w == "courier" || w == "messenger" || w == "envoy" || w == "guide") return HerbRole::courier;
    if (w == "unassigned") return HerbRole::unassigned;
    return std::nullopt;
}

}  // namespace zfdt

namespace zfdt::text {

std::vector<CodePoint> decode_utf8(std::string_view s) {
    std::vector<CodePoint> out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        const auto b0 = static_cast<unsigned char>(s[i]);
        std::size_t len = 1;
        char32_t cp = 0xFFFD;
        if (b0 < 0x80) {
            cp = b0;
        } else if ((b0 & 0xE0) == 0xC0) {
            len = 2;
            cp = b0 & 0x1F;
        } else if ((b0 & 0xF0) == 0xE0) {
            len = 3;
            cp = b0 & 0x0F;
        } else if ((b0 & 0xF8) == 0xF0) {
            len = 4;
            cp = b0 & 0x07;
        } else {
            len = 0;
        }
        bool ok = len > 0 && i + len <= s.size();
        for (std::size_t k = 1; ok && k < len; ++k) {
            const auto b = static_cast<unsigned char>(s[i + k]);
            if ((b & 0xC0) != 0x80) {
                ok = false;
            } else {
                cp = (cp << 6) | (b & 0x3F);
            }
        }
        if (!ok) {
            out.push_back({0xFFFD, i, i + 1});
            ++i;
            continue;
        }
        out.push_back({cp, i, i + len});
        i += len;
    }
    return out;
}

bool is_space(char32_t cp) {
    switch (cp) {
        case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D: case 0x20:
        case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
        case 0x202F: case 0x205F: case 0x3000:
            return true;
        default:
            return cp >= 0x2000 && cp <= 0x200A;
    }
}

bool is_cjk(char32_t cp) {
    return (cp >= 0x4E00 && cp <= 0x9FFF) || (cp >= 0x3400 && cp <= 0x4DBF) ||
           (cp >= 0x20000 && cp <= 0x2A6DF) || (cp >= 0xF900 && cp <= 0xFAFF) ||
           (cp >= 0x3001 && cp <= 0x303F) || (cp >= 0x3040 && cp <= 0x30FF) ||
           (cp >= 0xFF00 && cp <= 0xFFEF);
}

std::string trim(std::string_view s) {
    const auto cps = decode_utf8(s);
    std::size_t first = 0;
    while (first < cps.size() && is_space(cps[first].value)) ++first;
    if (first == cps.size()) return {};
    std::size_t last = cps.size();
    while (last > first && is_space(cps[last - 1].value)) --last;
    return std::string(s.substr(cps[first].begin, cps[last - 1].end - cps[first].begin));
}

std::string to_lower_ascii(std::string_view s) {
    std::string out(s);
    for (auto& ch : out) {
        if (ch >= 'A' && ch <= 'Z') ch = static_cast<char>(ch - 'A' + 'a');
    }
    return out;
}

std::string normalize_name(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool pending_space = false;
    for (const auto& cp : decode_utf8(s)) {
        if (is_space(cp.value)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        if (cp.value < 0x80) {
            char ch = static_cast<char>(cp.value);
            if (ch >= 'A' && ch <= 'Z') ch = static_cast<char>(ch - 'A' + 'a');
            out.push_back(ch);
        } else {
            out.append(s.substr(cp.begin, cp.end - cp.begin));
        }
    }
    return out;
}

namespace {

bool is_sentence_break(char32_t cp) {
    return cp == U'。' || cp == U'！' || cp == U'？' || cp == U'.' || cp == U'!' || cp == U'?' ||
           cp == U'\n';
}

bool is_mention_punct(char32_t cp) {
    if (cp < 0x80) {
        const char ch = static_cast<char>(cp);
        return std::ispunct(static_cast<unsigned char>(ch)) && ch != '-' && ch != '\'';
    }
    switch (cp) {
        case U'、': case U'，': case U'。': case U'；': case U'：': case U'！': case U'？':
        case U'（': case U'）': case U'【': case U'】': case U'“': case U'”':
            return true;
        default:
            return false;
    }
}

bool contains_cjk(std::string_view s) {
    for (const auto& cp : decode_utf8(s)) {
        if (is_cjk(cp.value)) return true;
    }
    return false;
}

}  // namespace

std::vector<std::string> split_sentences(std::string_view s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (const auto& cp : decode_utf8(s)) {
        if (is_sentence_break(cp.value)) {
            auto piece = trim(s.substr(start, cp.begin - start));
            if (!piece.empty()) out.push_back(std::move(piece));
            start = cp.end;
        }
    }
    auto tail = trim(s.substr(start));
    if (!tail.empty()) out.push_back(std::move(tail));
    return out;
}

std::vector<std::string> split_items(std::string_view s) {
    std::vector<std::string> out;
    int depth = 0;
    std::size_t start = 0;
    for (const auto& cp : decode_utf8(s)) {
        if (cp.value == U'(' || cp.value == U'（') {
            ++depth;
        } else if ((cp.value == U')' || cp.value == U'）') && depth > 0) {
            --depth;
        } else if (depth == 0 && (cp.value == U';' || cp.value == U',' || cp.value == U'；' ||
                                  cp.value == U'，' || cp.value == U'、')) {
            auto piece = trim(s.substr(start, cp.begin - start));
            if (!piece.empty()) out.push_back(std::move(piece));
            start = cp.end;
        }
    }
    auto tail = trim(s.substr(start));
    if (!tail.empty()) out.push_back(std::move(tail));
    return out;
}

std::string normalize_for_mentions(std::string_view s) {
    std::string cleaned;
    cleaned.reserve(s.size());
    for (const auto& cp : decode_utf8(s)) {
        if (is_mention_punct(cp.value)) {
            cleaned.push_back(' ');
        } else {
            cleaned.append(s.substr(cp.begin, cp.end - cp.begin));
        }
    }
    return normalize_name(cleaned);
}

bool mentions(std::string_view normalized_text, std::string_view normalized_name) {
    if (normalized_name.empty()) return false;
    if (contains_cjk(normalized_name)) {
        return normalized_text.find(normalized_name) != std::string_view::npos;
    }
    std::size_t pos = normalized_text.find(normalized_name);
    while (pos != std::string_view::npos) {
        const bool left_ok = pos == 0 || normalized_text[pos - 1] == ' ';
        const std::size_t end = pos + normalized_name.size();
        const bool right_ok = end == normalized_text.size() || normalized_text[end] == ' ';
        if (left_ok && right_ok) return true;
        pos = normalized_text.find(normalized_name, pos + 1);
    }
    return false;
}

std::vector<TokenSpan> WhitespaceCjkTokenizer::tokenize(std::string_view s) const {
    std::vector<TokenSpan> out;
    bool in_token = false;
    std::size_t token_begin = 0;
    for (const auto& cp : decode_utf8(s)) {
        if (is_space(cp.value)) {
            if (in_token) out.push_back({token_begin, cp.begin});
            in_token = false;
        } else if (is_cjk(cp.value)) {
            if (in_token) out.push_back({token_begin, cp.begin});
            in_token = false;
            out.push_back({cp.begin, cp.end});
        } else if (!in_token) {
            in_token = true;
            token_begin = cp.begin;
        }
    }
    if (in_token) out.push_back({token_begin, s.size()});
    return out;
}

const Tokenizer& default_tokenizer() {
    static const WhitespaceCjkTokenizer tokenizer;
    return tokenizer;
}

const Tokenizer& tokenizer_by_id(std::string_view id) {
    if (id == default_tokenizer().id()) return default_tokenizer();
    throw InvalidInput("unknown tokenizer id '" + std::string(id) + "'");
}

std::vector<std::string> tokens(std::string_view s, const Tokenizer& tok) {
    std::vector<std::string> out;
    for (const auto& span : tok.tokenize(s)) out.emplace_back(s.substr(span.begin, span.end - span.begin));
    return out;
}

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw Error("DigestError", "SHA-256 computation failed");
    }
    std::string hex;
    hex.reserve(len * 2);
    char buf[3];
    for (unsigned int i = 0; i < len; ++i) {
        std::snprintf(buf, sizeof buf, "%02x", digest[i]);
        hex.append(buf, 2);
    }
    return hex;
}

std::string sha256_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return sha256_hex(bytes);
}

// ---------------------------------------------------------------------------
// Rule grammar

namespace {

constexpr std::size_t kMaxItemTokens = 8;

struct Header {
    Category category;
    std::string body;
};

std::optional<Header> parse_header_line(std::string_view line) {
    const std::string t = trim(line);
    if (t.size() < 3 || t.front() != '[') return std::nullopt;
    const auto close = t.find(']');
    if (close == std::string::npos) return std::nullopt;
    const auto category = category_from_title(std::string_view(t).substr(1, close - 1));
    if (!category) return std::nullopt;
    return Header{*category, trim(std::string_view(t).substr(close + 1))};
}

std::string strip_edges(std::string_view s) {
    std::string t = trim(s);
    auto is_edge = [](char ch) {
        return ch == '.' || ch == ':' || ch == ';' || ch == ',' || ch == '"' || ch == '\'';
    };
    while (!t.empty() && is_edge(t.back())) t.pop_back();
    std::size_t first = 0;
    while (first < t.size() && is_edge(t[first])) ++first;
    return trim(std::string_view(t).substr(first));
}

// Removes "(...)" groups and returns the text of the first one.
std::string remove_parentheticals(std::string_view s, std::string* first_group) {
    std::string out;
    int depth = 0;
    std::string group;
    bool captured = false;
    for (const auto& cp : decode_utf8(s)) {
        if (cp.value == U'(' || cp.value == U'（') {
            ++depth;
            continue;
        }
        if ((cp.value == U')' || cp.value == U'）') && depth > 0) {
            --depth;
            if (depth == 0) captured = true;
            continue;
        }
        const auto piece = s.substr(cp.begin, cp.end - cp.begin);
        if (depth == 0) {
            out.append(piece);
        } else if (!captured) {
            group.append(piece);
        }
    }
    if (first_group) *first_group = trim(group);
    return trim(out);
}

bool is_placeholder(std::string_view item) {
    const std::string n = normalize_name(item);
    return n.empty() || n == "-" || n == "none" || n == "n/a" || n == "not retrieved";
}

bool acceptable_name(std::string_view name) {
    if (is_placeholder(name)) return false;
    const auto count = default_tokenizer().tokenize(name).size();
    return count > 0 && count <= kMaxItemTokens;
}

struct HeaderItem {
    std::string name;
    std::string annotation;
};

std::vector<HeaderItem> header_items(std::string_view body) {
    std::vector<HeaderItem> out;
    for (const auto& raw : split_items(body)) {
        std::string annotation;
        std::string name = strip_edges(remove_parentheticals(raw, &annotation));
        if (!acceptable_name(name)) continue;
        out.push_back({std::move(name), std::move(annotation)});
    }
    return out;
}

HerbRole role_from_annotation(std::string_view annotation) {
    if (annotation.empty()) return HerbRole::unassigned;
    const auto parts = split_items(annotation);
    if (parts.empty()) return HerbRole::unassigned;
    return parse_herb_role(parts.front()).value_or(HerbRole::unassigned);
}

std::string anchored_label(Category anchor, Category target) {
    if (anchor == Category::formula) {
        switch (target) {
            case Category::disease: return "treats";
            case Category::herbal_ingredient: return "contains";
            case Category::symptoms_population: return "relieves";
            case Category::pulse_tongue: return "matches";
            case Category::contraindication: return "contraindicated in";
            case Category::preparation: return "prepared by";
            default: return "related to";
        }
    }
    switch (target) {
        case Category::formula: return "treated by";
        case Category::herbal_ingredient: return "treated with";
        case Category::symptoms_population: return "presents with";
        case Category::pulse_tongue: return "shows";
        case Category::contraindication: return "contraindicated in";
        case Category::preparation: return "prepared by";
        default: return "related to";
    }
}

constexpr std::array<std::string_view, 17> kFormulaSuffixes = {
    "decoction", "pill", "pills", "powder", "wan", "tang", "san", "granule", "granules",
    "paste", "formula", "tea", "drink", "yin", "dan", "gao", "elixir",
};

bool looks_like_formula(std::string_view name) {
    const auto words = tokens(to_lower_ascii(name));
    if (words.empty()) return false;
    return std::find(kFormulaSuffixes.begin(), kFormulaSuffixes.end(), words.back()) !=
           kFormulaSuffixes.end();
}

enum class SubjectKind { formula_or_herb, formula, disease };

struct VerbRule {
    std::string_view phrase;  // matched with surrounding spaces, lower case
    std::string_view label;
    SubjectKind subject;
    Category object;
};

constexpr std::array<VerbRule, 9> kVerbRules = {{
    {"is contraindicated in", "contraindicated in", SubjectKind::formula_or_herb, Category::contraindication},
    {"is contraindicated for", "contraindicated in", SubjectKind::formula_or_herb, Category::contraindication},
    {"is prepared by", "prepared by", SubjectKind::formula, Category::preparation},
    {"presents with", "presents with", SubjectKind::disease, Category::symptoms_population},
    {"treats", "treats", SubjectKind::formula_or_herb, Category::disease},
    {"contains", "contains", SubjectKind::formula, Category::herbal_ingredient},
    {"relieves", "relieves", SubjectKind::formula_or_herb, Category::symptoms_population},
    {"shows", "shows", SubjectKind::disease, Category::pulse_tongue},
    {"matches", "matches", SubjectKind::formula, Category::pulse_tongue},
}};

Category subject_category(SubjectKind kind, std::string_view name) {
    switch (kind) {
        case SubjectKind::formula: return Category::formula;
        case SubjectKind::disease: return Category::disease;
        case SubjectKind::formula_or_herb:
            return looks_like_formula(name) ? Category::formula : Category::herbal_ingredient;
    }
    return Category::unknown;
}

void extract_sentence(std::string_view sentence, RuleExtraction& out) {
    const std::string lower = to_lower_ascii(sentence);
    for (const auto& rule : kVerbRules) {
        const std::string needle = " " + std::string(rule.phrase) + " ";
        const auto pos = lower.find(needle);
        if (pos == std::string::npos) continue;
        std::string subject = strip_edges(sentence.substr(0, pos));
        std::string object = strip_edges(sentence.substr(pos + needle.size()));
        if (!acceptable_name(subject) || !acceptable_name(object)) return;
        out.entities.push_back({subject, subject_category(rule.subject, subject)});
        out.entities.push_back({object, rule.object});
        out.relations.push_back({subject, std::string(rule.label), object});
        return;
    }
}

}  // namespace

RuleExtraction extract_by_rules(std::string_view text_in) {
    RuleExtraction out;
    struct Placed {
        std::string name;
        Category category;
        std::string label_suffix;
    };
    std::vector<Placed> header_entities;

    std::istringstream lines{std::string(text_in)};
    std::string line;
    while (std::getline(lines, line)) {
        if (auto header = parse_header_line(line)) {
            for (auto& item : header_items(header->body)) {
                std::string suffix;
                if (header->category == Category::herbal_ingredient) {
                    const auto role = role_from_annotation(item.annotation);
                    if (role != HerbRole::unassigned) suffix = " (" + std::string(herb_role_id(role)) + ")";
                }
                header_entities.push_back({item.name, header->category, std::move(suffix)});
            }
            continue;
        }
        for (const auto& sentence : split_sentences(line)) extract_sentence(sentence, out);
    }

    const Placed* anchor = nullptr;
    for (const auto& e : header_entities) {
        if (e.category == Category::formula) {
            anchor = &e;
            break;
        }
    }
    if (!anchor) {
        for (const auto& e : header_entities) {
            if (e.category == Category::disease) {
                anchor = &e;
                break;
            }
        }
    }
    for (const auto& e : header_entities) out.entities.push_back({e.name, e.category});
    if (anchor) {
        for (const auto& e : header_entities) {
            if (&e == anchor || e.category == anchor->category) continue;
            std::string label = anchored_label(anchor->category, e.category);
            if (e.category == Category::herbal_ingredient) label += e.label_suffix;
            out.relations.push_back({anchor->name, std::move(label), e.name});
        }
    }
    return out;
}

std::vector<HerbItem> herbal_section_items(std::string_view text_in) {
    std::vector<HerbItem> out;
    std::set<std::string> seen;
    std::istringstream lines{std::string(text_in)};
    std::string line;
    while (std::getline(lines, line)) {
        auto header = parse_header_line(line);
        if (!header || header->category != Category::herbal_ingredient) continue;
        for (auto& item : header_items(header->body)) {
            if (!seen.insert(normalize_name(item.name)).second) continue;
            out.push_back({item.name, role_from_annotation(item.annotation)});
        }
    }
    return out;
}

std::vector<std::string> section_items(std::string_view text_in, Category category) {
    std::vector<std::string> out;
    std::set<std::string> seen;
    std::istringstream lines{std::string(text_in)};
    std::string line;
    while (std::getline(lines, line)) {
        auto header = parse_header_line(line);
        if (!header || header->category != category) continue;
        for (auto& item : header_items(header->body)) {
            if (!seen.insert(normalize_name(item.name)).second) continue;
            out.push_back(std::move(item.name));
        }
    }
    return out;
}

std::vector<Category> section_categories(std::string_view text_in) {
    std::vector<Category> out;
    std::istringstream lines{std::string(text_in)};
    std::string line;
    while (std::getline(lines, line)) {
        auto header = parse_header_line(line);
        if (header && std::find(out.begin(), out.end(), header->category) == out.end()) {
            out.push_back(header->category);
        }
    }
    return out;
}

}  // namespace zfdt::text

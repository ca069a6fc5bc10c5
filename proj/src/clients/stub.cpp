#include <array>
#include <cmath>
#include <map>
#include <sstream>

#include "zfdt/clients.hpp"
#include "zfdt/errors.hpp"
#include "zfdt/taxonomy.hpp"
#include "zfdt/text.hpp"

namespace zfdt {

std::vector<double> Encoder::encode(std::string_view text) const {
    if (text::trim(text).empty()) throw InvalidInput("cannot encode blank text");
    auto v = encode_impl(text);
    if (v.size() != dimension()) {
        throw DimensionError("encoder " + name() + " returned " + std::to_string(v.size()) +
                             " components, expected " + std::to_string(dimension()));
    }
    return v;
}

std::string Generator::generate(std::string_view prompt, const GenerationParams& params) const {
    if (prompt.empty()) throw InvalidInput("empty prompt");
    auto out = generate_impl(prompt, params);
    if (out.empty()) throw ClientError("generator " + name() + " returned empty text", 1);
    return out;
}

// ---------------------------------------------------------------------------

namespace {

struct RoleTag {
    PromptRole role;
    std::string_view tag;
};

constexpr RoleTag kRoleTags[] = {
    {PromptRole::extract, "[[EXTRACT]]"},   {PromptRole::summarize, "[[SUMMARIZE]]"},
    {PromptRole::map, "[[MAP]]"},           {PromptRole::reduce, "[[REDUCE]]"},
    {PromptRole::expand, "[[EXPAND]]"},     {PromptRole::answer, "[[ANSWER]]"},
    {PromptRole::pair, "[[PAIR]]"},         {PromptRole::judge, "[[JUDGE]]"},
};

}  // namespace

std::string_view prompt_role_tag(PromptRole role) {
    for (const auto& r : kRoleTags) {
        if (r.role == role) return r.tag;
    }
    return "";
}

PromptBuilder::PromptBuilder(PromptRole role) : out_(std::string(prompt_role_tag(role)) + "\n") {}

PromptBuilder& PromptBuilder::section(std::string_view name, std::string_view body) {
    return section(name, "", body);
}

PromptBuilder& PromptBuilder::section(std::string_view name, std::string_view args, std::string_view body) {
    out_ += "<<";
    out_ += name;
    if (!args.empty()) {
        out_ += ' ';
        out_ += args;
    }
    out_ += ">>\n";
    out_ += body;
    out_ += '\n';
    return *this;
}

std::string ParsedPrompt::get(std::string_view name) const {
    for (const auto& s : sections) {
        if (s.name == name) return s.body;
    }
    return {};
}

std::vector<const PromptSection*> ParsedPrompt::all(std::string_view name) const {
    std::vector<const PromptSection*> out;
    for (const auto& s : sections) {
        if (s.name == name) out.push_back(&s);
    }
    return out;
}

ParsedPrompt parse_prompt(std::string_view prompt) {
    ParsedPrompt parsed;
    std::istringstream in{std::string(prompt)};
    std::string line;
    bool first = true;
    PromptSection* current = nullptr;
    bool current_empty = true;
    while (std::getline(in, line)) {
        if (first) {
            first = false;
            const std::string tag = text::trim(line);
            for (const auto& r : kRoleTags) {
                if (r.tag == tag) parsed.role = r.role;
            }
            if (parsed.role) continue;
        }
        if (line.size() >= 4 && line.rfind("<<", 0) == 0 && line.compare(line.size() - 2, 2, ">>") == 0) {
            const std::string inner = line.substr(2, line.size() - 4);
            const auto space = inner.find(' ');
            PromptSection s;
            s.name = inner.substr(0, space);
            if (space != std::string::npos) s.args = text::trim(inner.substr(space + 1));
            parsed.sections.push_back(std::move(s));
            current = &parsed.sections.back();
            current_empty = true;
            continue;
        }
        if (!current) continue;
        if (!current_empty) current->body += '\n';
        current->body += line;
        current_empty = false;
    }
    return parsed;
}

// ---------------------------------------------------------------------------
// StubEncoder

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t seeded_hash(std::string_view bytes, std::uint64_t seed) {
    std::uint64_t h = 0xcbf29ce484222325ULL ^ splitmix64(seed);
    for (unsigned char ch : bytes) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    return splitmix64(h);
}

}  // namespace

StubEncoder::StubEncoder(std::size_t dimension, std::uint64_t seed) : dimension_(dimension), seed_(seed) {
    if (dimension == 0) throw ConfigError("encoder dimension must be positive");
}

std::string StubEncoder::name() const {
    return "stub-ngram3-d" + std::to_string(dimension_) + "-s" + std::to_string(seed_);
}

std::vector<double> StubEncoder::encode_impl(std::string_view raw) const {
    const std::string lowered = text::to_lower_ascii(raw);
    const std::string_view s = lowered;
    const auto cps = text::decode_utf8(s);
    std::vector<double> acc(dimension_, 0.0);
    auto add = [&](std::string_view gram) {
        const std::uint64_t h = seeded_hash(gram, seed_);
        acc[h % dimension_] += (h >> 63) ? -1.0 : 1.0;
    };
    if (cps.size() < 3) {
        add(s);
    } else {
        for (std::size_t i = 0; i + 2 < cps.size(); ++i) {
            add(s.substr(cps[i].begin, cps[i + 2].end - cps[i].begin));
        }
    }
    double norm2 = 0.0;
    for (double a : acc) norm2 += a * a;
    if (norm2 == 0.0) {
        acc[splitmix64(seed_ ^ 0x5a5aULL) % dimension_] = 1.0;
        return acc;
    }
    const double norm = std::sqrt(norm2);
    for (double& a : acc) a /= norm;
    return acc;
}

// ---------------------------------------------------------------------------
// StubGenerator

namespace {

std::vector<std::string> lines_of(std::string_view s) {
    std::vector<std::string> out;
    std::istringstream in{std::string(s)};
    std::string line;
    while (std::getline(in, line)) {
        if (!text::trim(line).empty()) out.push_back(line);
    }
    return out;
}

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto tab = line.find('\t', start);
        out.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
        if (tab == std::string::npos) break;
        start = tab + 1;
    }
    return out;
}

std::string join(const std::vector<std::string>& items, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += sep;
        out += items[i];
    }
    return out;
}

std::string stub_extract(const ParsedPrompt& p) {
    const auto extraction = text::extract_by_rules(p.get("text"));
    std::string out;
    for (const auto& e : extraction.entities) {
        out += "ENTITY\t" + e.name + "\t" + std::string(category_id(e.category)) + "\n";
    }
    for (const auto& r : extraction.relations) {
        out += "RELATION\t" + r.src + "\t" + r.label + "\t" + r.dst + "\n";
    }
    return out.empty() ? "NONE" : out;
}

// Role parsed from a "contains (role)" label.
std::optional<HerbRole> role_in_label(std::string_view label) {
    const auto open = label.find('(');
    const auto close = label.rfind(')');
    if (open == std::string_view::npos || close == std::string_view::npos || close < open) return std::nullopt;
    return parse_herb_role(label.substr(open + 1, close - open - 1));
}

std::string stub_summarize(const ParsedPrompt& p) {
    const auto category = parse_category_id(text::trim(p.get("category"))).value_or(Category::unknown);
    std::map<std::string, std::array<int, 4>> role_votes;
    for (const auto& line : lines_of(p.get("relations"))) {
        const auto f = split_tabs(line);
        if (f.size() < 3) continue;
        if (auto role = role_in_label(f[1]); role && *role != HerbRole::unassigned) {
            ++role_votes[text::normalize_name(f[2])][static_cast<std::size_t>(*role)];
        }
    }
    auto role_of = [&](const std::string& name) -> HerbRole {
        const auto it = role_votes.find(text::normalize_name(name));
        if (it == role_votes.end()) return HerbRole::unassigned;
        std::size_t best = 0;
        for (std::size_t r = 1; r < 4; ++r) {
            if (it->second[r] > it->second[best]) best = r;
        }
        return static_cast<HerbRole>(best);
    };

    // One header line per member category, the community's own category first.
    std::vector<std::pair<std::string, Category>> typed;
    for (const auto& line : lines_of(p.get("members"))) {
        const auto f = split_tabs(line);
        typed.emplace_back(f[0], f.size() > 1 ? parse_category_id(text::trim(f[1])).value_or(category) : category);
    }
    std::vector<Category> order;
    if (category != Category::unknown) order.push_back(category);
    for (auto c : kCategories) {
        if (c != category) order.push_back(c);
    }
    std::vector<std::string> out_lines;
    for (auto c : order) {
        std::vector<std::string> items;
        for (const auto& [m, mc] : typed) {
            if (mc != c && !(mc == Category::unknown && c == order.front())) continue;
            const auto role = c == Category::herbal_ingredient ? role_of(m) : HerbRole::unassigned;
            items.push_back(role == HerbRole::unassigned ? m : m + " (" + std::string(herb_role_id(role)) + ")");
        }
        if (items.empty() && c != order.front()) continue;
        out_lines.push_back("[" + std::string(category_title(c)) + "] " + (items.empty() ? "-" : join(items, "; ")));
    }
    std::array<std::vector<std::string>, 4> by_role;
    bool any_herb = false;
    for (const auto& [m, mc] : typed) {
        if (mc != Category::herbal_ingredient) continue;
        any_herb = true;
        const auto role = role_of(m);
        if (role != HerbRole::unassigned) by_role[static_cast<std::size_t>(role)].push_back(m);
    }
    if (any_herb) {
        constexpr std::array<std::string_view, 4> kRoleWords = {"monarch", "minister", "assistant", "courier"};
        std::string line = "Herb roles: ";
        for (std::size_t r = 0; r < 4; ++r) {
            if (r) line += "; ";
            line += std::string(kRoleWords[r]) + ": " + (by_role[r].empty() ? "-" : join(by_role[r], ", "));
        }
        out_lines.push_back(std::move(line));
    }
    return join(out_lines, "\n");
}

std::string stub_map(const ParsedPrompt& p) {
    std::string community = "?";
    for (const auto* s : p.all("community")) community = s->args.empty() ? text::trim(s->body) : s->args;
    return text::trim(p.get("summary")) + "\n(Source: community " + community + ")";
}

std::string stub_reduce(const ParsedPrompt& p) {
    std::string out;
    for (const auto* s : p.all("answer")) {
        std::istringstream args(s->args);
        std::string id, cat;
        args >> id >> cat;
        const auto category = parse_category_id(cat);
        if (!out.empty()) out += "\n\n";
        out += "### Community " + id;
        if (category) out += " (" + std::string(category_title(*category)) + ")";
        out += "\n" + text::trim(s->body);
    }
    return out.empty() ? "No local answers." : out;
}

std::string section_line(Category category, std::string_view retrieved, std::size_t cap) {
    std::vector<std::string> items;
    if (category == Category::herbal_ingredient) {
        for (const auto& h : text::herbal_section_items(retrieved)) {
            if (items.size() == cap) break;
            items.push_back(h.role == HerbRole::unassigned ? h.name
                                                           : h.name + " (" + std::string(herb_role_id(h.role)) + ")");
        }
    } else {
        for (auto& item : text::section_items(retrieved, category)) {
            if (items.size() == cap) break;
            items.push_back(std::move(item));
        }
    }
    return "[" + std::string(category_title(category)) + "] " + (items.empty() ? "-" : join(items, "; "));
}

std::string answer_template(std::string_view retrieved, std::size_t sections, std::size_t cap) {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < sections && i < kCategoryCount; ++i) {
        out.push_back(section_line(kCategories[i], retrieved, cap));
    }
    return join(out, "\n");
}

constexpr std::size_t kPartialSections = 3;

std::string stub_pair(const ParsedPrompt& p, const StubOptions& options) {
    const std::string retrieved = p.get("retrieved");
    const std::string full = answer_template(retrieved, kCategoryCount, options.max_section_items);
    const std::string partial = options.identical_pairs
                                    ? full
                                    : answer_template(retrieved, kPartialSections, options.max_section_items);
    const auto score = [](const std::string& s) { return text::section_categories(s).size(); };
    std::ostringstream out;
    out << kCandidateMarker << " 1 SCORE=" << score(full) << "\n" << full << "\n";
    out << kCandidateMarker << " 2 SCORE=" << score(partial) << "\n" << partial << "\n";
    return out.str();
}

}  // namespace

StubGenerator::StubGenerator(StubOptions options) : options_(options) {}

std::string StubGenerator::generate_impl(std::string_view prompt, const GenerationParams&) const {
    const auto p = parse_prompt(prompt);
    if (!p.role) return "UNSUPPORTED PROMPT";
    switch (*p.role) {
        case PromptRole::extract: return stub_extract(p);
        case PromptRole::summarize: return stub_summarize(p);
        case PromptRole::map: return stub_map(p);
        case PromptRole::reduce: return stub_reduce(p);
        case PromptRole::expand: {
            auto q = text::trim(p.get("query"));
            return q.empty() ? "-" : q;
        }
        case PromptRole::answer:
            return answer_template(p.get("retrieved"), kCategoryCount, options_.max_section_items);
        case PromptRole::pair: return stub_pair(p, options_);
        case PromptRole::judge: return "YES";
    }
    return "UNSUPPORTED PROMPT";
}

}  // namespace zfdt

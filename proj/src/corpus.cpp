#include "zfdt/corpus.hpp"

#include <fstream>
#include <iterator>
#include <json.hpp>
#include <sstream>

#include "zfdt/errors.hpp"

namespace zfdt {

using json = nlohmann::json;

std::string_view conflict_type_id(ConflictType t) {
    switch (t) {
        case ConflictType::theory_difference: return "theory_difference";
        case ConflictType::source_conflict: return "source_conflict";
        case ConflictType::practical_problem: return "practical_problem";
    }
    return "";
}

std::optional<ConflictType> parse_conflict_type(std::string_view id) {
    if (id == "theory_difference") return ConflictType::theory_difference;
    if (id == "source_conflict") return ConflictType::source_conflict;
    if (id == "practical_problem") return ConflictType::practical_problem;
    return std::nullopt;
}

namespace {

bool has_newline(std::string_view s) { return s.find_first_of("\r\n") != std::string_view::npos; }

bool single_line_ok(std::string_view s) { return !has_newline(s) && text::trim(s) == s; }

bool has_bracket(std::string_view s) { return s.find_first_of("()（）;；") != std::string_view::npos; }

}  // namespace

void validate_record(const FormulaRecord& r, std::size_t line) {
    if (text::trim(r.disease).empty() || !single_line_ok(r.disease)) throw SchemaError("disease", line);
    if (text::trim(r.recommended_formula).empty() || !single_line_ok(r.recommended_formula)) {
        throw SchemaError("formula", line);
    }
    if (r.herbal_ingredients.empty()) throw SchemaError("ingredients", line);
    bool any_role = false;
    bool any_sovereign = false;
    for (const auto& h : r.herbal_ingredients) {
        if (text::trim(h.name).empty() || !single_line_ok(h.name) || has_bracket(h.name)) {
            throw SchemaError("ingredients", line);
        }
        if (h.dose && (text::trim(*h.dose).empty() || !single_line_ok(*h.dose) || has_bracket(*h.dose))) {
            throw SchemaError("ingredients", line);
        }
        any_role |= h.role != HerbRole::unassigned;
        any_sovereign |= h.role == HerbRole::sovereign;
    }
    if (any_role && !any_sovereign) throw SchemaError("ingredients", line);
    if (!single_line_ok(r.symptoms_population)) throw SchemaError("symptoms", line);
    if (!single_line_ok(r.pulse_tongue)) throw SchemaError("pulse_tongue", line);
    if (!single_line_ok(r.contraindications)) throw SchemaError("contraindications", line);
    if (!single_line_ok(r.preparation)) throw SchemaError("preparation", line);
}

namespace {

constexpr std::string_view kConflictTitle = "Conflict Type";

std::string header_line(std::string_view title, std::string_view body) {
    std::string out = "[" + std::string(title) + "]";
    if (!body.empty()) {
        out += ' ';
        out += body;
    }
    return out;
}

std::string render_ingredient(const HerbalIngredient& h) {
    std::string annotation;
    if (h.role != HerbRole::unassigned) annotation = herb_role_id(h.role);
    if (h.dose) {
        if (!annotation.empty()) annotation += ", ";
        annotation += "dose " + *h.dose;
    }
    return annotation.empty() ? h.name : h.name + " (" + annotation + ")";
}

HerbalIngredient parse_ingredient(std::string_view item) {
    HerbalIngredient h;
    const auto open = item.find('(');
    if (open == std::string_view::npos) {
        h.name = text::trim(item);
        return h;
    }
    const auto close = item.rfind(')');
    if (close == std::string_view::npos || close < open) throw ParseError("unbalanced parenthesis in ingredient", 0);
    h.name = text::trim(item.substr(0, open));
    std::string annotation = text::trim(item.substr(open + 1, close - open - 1));
    const auto comma = annotation.find(',');
    const std::string head = text::trim(annotation.substr(0, comma));
    if (auto role = parse_herb_role(head)) {
        h.role = *role;
        annotation = comma == std::string::npos ? std::string() : text::trim(annotation.substr(comma + 1));
    }
    if (!annotation.empty()) {
        if (annotation.rfind("dose ", 0) != 0) throw ParseError("unrecognized ingredient annotation", 0);
        h.dose = text::trim(annotation.substr(5));
    }
    return h;
}

}  // namespace

std::string render(const FormulaRecord& r) {
    std::string ingredients;
    for (std::size_t i = 0; i < r.herbal_ingredients.size(); ++i) {
        if (i) ingredients += "; ";
        ingredients += render_ingredient(r.herbal_ingredients[i]);
    }
    std::string out;
    out += header_line(category_title(Category::disease), r.disease) + "\n";
    out += header_line(category_title(Category::formula), r.recommended_formula) + "\n";
    out += header_line(category_title(Category::herbal_ingredient), ingredients) + "\n";
    out += header_line(category_title(Category::symptoms_population), r.symptoms_population) + "\n";
    out += header_line(category_title(Category::pulse_tongue), r.pulse_tongue) + "\n";
    out += header_line(category_title(Category::contraindication), r.contraindications) + "\n";
    out += header_line(category_title(Category::preparation), r.preparation) + "\n";
    if (r.conflict_tag) out += header_line(kConflictTitle, conflict_type_id(*r.conflict_tag)) + "\n";
    return out;
}

FormulaRecord parse_rendered(std::string_view rendered) {
    FormulaRecord r;
    std::istringstream in{std::string(rendered)};
    std::string line;
    std::size_t line_no = 0;
    std::size_t seen = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (line.front() != '[') throw ParseError("expected a section header", line_no);
        const auto close = line.find(']');
        if (close == std::string::npos) throw ParseError("unterminated section header", line_no);
        const std::string title = line.substr(1, close - 1);
        const std::string body = text::trim(std::string_view(line).substr(close + 1));
        if (title == kConflictTitle) {
            r.conflict_tag = parse_conflict_type(body);
            if (!r.conflict_tag) throw ParseError("unknown conflict type '" + body + "'", line_no);
            continue;
        }
        const auto category = category_from_title(title);
        if (!category) throw ParseError("unknown section '" + title + "'", line_no);
        ++seen;
        switch (*category) {
            case Category::disease: r.disease = body; break;
            case Category::formula: r.recommended_formula = body; break;
            case Category::herbal_ingredient:
                try {
                    for (const auto& item : text::split_items(body)) {
                        r.herbal_ingredients.push_back(parse_ingredient(item));
                    }
                } catch (const ParseError& e) {
                    throw ParseError("bad ingredient list", line_no);
                }
                break;
            case Category::symptoms_population: r.symptoms_population = body; break;
            case Category::pulse_tongue: r.pulse_tongue = body; break;
            case Category::contraindication: r.contraindications = body; break;
            case Category::preparation: r.preparation = body; break;
            case Category::unknown: break;
        }
    }
    if (seen != kCategoryCount) throw ParseError("expected seven sections", line_no);
    return r;
}

std::string to_json_line(const FormulaRecord& r) {
    json ingredients = json::array();
    for (const auto& h : r.herbal_ingredients) {
        json item = {{"name", h.name}};
        if (h.role != HerbRole::unassigned) item["role"] = herb_role_id(h.role);
        if (h.dose) item["dose"] = *h.dose;
        ingredients.push_back(std::move(item));
    }
    json j = {
        {"disease", r.disease},
        {"formula", r.recommended_formula},
        {"ingredients", std::move(ingredients)},
        {"symptoms", r.symptoms_population},
        {"pulse_tongue", r.pulse_tongue},
        {"contraindications", r.contraindications},
        {"preparation", r.preparation},
    };
    if (r.conflict_tag) j["conflict_tag"] = conflict_type_id(*r.conflict_tag);
    return j.dump();
}

namespace {

std::string required_string(const json& j, const char* key, std::size_t line) {
    const auto it = j.find(key);
    if (it == j.end() || !it->is_string()) throw SchemaError(key, line);
    return it->get<std::string>();
}

}  // namespace

FormulaRecord parse_record_line(std::string_view json_line, std::size_t line) {
    json j;
    try {
        j = json::parse(json_line);
    } catch (const json::parse_error& e) {
        throw ParseError(e.what(), line);
    }
    if (!j.is_object()) throw ParseError("record is not a JSON object", line);

    FormulaRecord r;
    r.disease = required_string(j, "disease", line);
    r.recommended_formula = required_string(j, "formula", line);
    const auto ing = j.find("ingredients");
    if (ing == j.end() || !ing->is_array()) throw SchemaError("ingredients", line);
    for (const auto& item : *ing) {
        HerbalIngredient h;
        if (item.is_string()) {
            h.name = item.get<std::string>();
        } else if (item.is_object()) {
            const auto name = item.find("name");
            if (name == item.end() || !name->is_string()) throw SchemaError("ingredients", line);
            h.name = name->get<std::string>();
            if (const auto role = item.find("role"); role != item.end() && !role->is_null()) {
                if (!role->is_string()) throw SchemaError("ingredients", line);
                const auto parsed = parse_herb_role(role->get<std::string>());
                if (!parsed) throw SchemaError("ingredients", line);
                h.role = *parsed;
            }
            if (const auto dose = item.find("dose"); dose != item.end() && !dose->is_null()) {
                if (!dose->is_string()) throw SchemaError("ingredients", line);
                h.dose = dose->get<std::string>();
            }
        } else {
            throw SchemaError("ingredients", line);
        }
        r.herbal_ingredients.push_back(std::move(h));
    }
    r.symptoms_population = required_string(j, "symptoms", line);
    r.pulse_tongue = required_string(j, "pulse_tongue", line);
    r.contraindications = required_string(j, "contraindications", line);
    r.preparation = required_string(j, "preparation", line);
    if (const auto tag = j.find("conflict_tag"); tag != j.end() && !tag->is_null()) {
        if (!tag->is_string()) throw SchemaError("conflict_tag", line);
        r.conflict_tag = parse_conflict_type(tag->get<std::string>());
        if (!r.conflict_tag) throw SchemaError("conflict_tag", line);
    }
    validate_record(r, line);
    return r;
}

Corpus ingest_string(std::string_view jsonl, std::string source_name) {
    Corpus corpus;
    std::istringstream in{std::string(jsonl)};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (text::trim(line).empty()) continue;
        corpus.records.push_back(parse_record_line(line, line_no));
    }
    corpus.provenance.push_back({std::move(source_name), text::sha256_hex(jsonl)});
    return corpus;
}

Corpus ingest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read corpus file " + path);
    const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return ingest_string(bytes, path);
}

std::vector<Chunk> chunk_text(std::string_view doc, std::size_t chunk_size, const text::Tokenizer& tokenizer,
                              std::int64_t record_id, std::int64_t first_chunk_id) {
    if (chunk_size < kMinChunkSize) {
        throw InvalidInput("chunk size must be at least " + std::to_string(kMinChunkSize));
    }
    const auto spans = tokenizer.tokenize(doc);
    std::vector<Chunk> out;
    for (std::size_t start = 0; start < spans.size(); start += chunk_size) {
        const std::size_t end = std::min(start + chunk_size, spans.size());
        const std::size_t byte_begin = start == 0 ? 0 : spans[start].begin;
        const std::size_t byte_end = end == spans.size() ? doc.size() : spans[end].begin;
        Chunk c;
        c.chunk_id = first_chunk_id + static_cast<std::int64_t>(out.size());
        c.source_record_id = record_id;
        c.token_start = start;
        c.token_end = end;
        c.token_count = end - start;
        c.text = std::string(doc.substr(byte_begin, byte_end - byte_begin));
        out.push_back(std::move(c));
    }
    return out;
}

std::vector<Chunk> chunk(const Corpus& corpus, std::size_t chunk_size, const text::Tokenizer& tokenizer) {
    if (chunk_size < kMinChunkSize) {
        throw InvalidInput("chunk size must be at least " + std::to_string(kMinChunkSize));
    }
    if (corpus.records.empty()) throw EmptyCorpus("corpus has no records");
    std::vector<Chunk> out;
    for (std::size_t i = 0; i < corpus.records.size(); ++i) {
        auto part = chunk_text(render(corpus.records[i]), chunk_size, tokenizer, static_cast<std::int64_t>(i),
                               static_cast<std::int64_t>(out.size()));
        for (auto& c : part) out.push_back(std::move(c));
    }
    return out;
}

}  // namespace zfdt

#include "zfdt/dataset.hpp"

#include <fstream>
#include <json.hpp>
#include <set>

#include "zfdt/errors.hpp"
#include "zfdt/text.hpp"

namespace zfdt {

using json = nlohmann::ordered_json;

namespace {

constexpr std::string_view kSymptomsHeader = "[SYMPTOMS]\n";
constexpr std::string_view kRetrievedDelimiter = "\n[RETRIEVED]\n";
constexpr std::string_view kRetrievedTag = "[RETRIEVED]";

void require_text(std::string_view value, const char* what) {
    if (text::trim(value).empty()) throw InvalidInput(std::string(what) + " is empty");
}

constexpr std::string_view kPairInstructions =
    "Write two candidate answers to the request and score each by how completely it covers the recommended "
    "formula, herbal ingredients, applicable symptoms, pulse and tongue diagnosis, contraindications and "
    "preparation. Format each as a header line \"=== CANDIDATE <n> SCORE=<score>\" followed by the answer.";

}  // namespace

std::string make_input(std::string_view x, std::string_view c) {
    require_text(x, "symptom description");
    require_text(c, "retrieved answer");
    if (x.find(kRetrievedTag) != std::string_view::npos) {
        throw InvalidInput("symptom description contains the retrieved delimiter");
    }
    std::string out(kSymptomsHeader);
    out += x;
    out += kRetrievedDelimiter;
    out += c;
    return out;
}

std::pair<std::string, std::string> split_input(std::string_view input) {
    if (input.substr(0, kSymptomsHeader.size()) != kSymptomsHeader) throw InvalidInput("input lacks [SYMPTOMS] header");
    const auto pos = input.find(kRetrievedDelimiter, kSymptomsHeader.size());
    if (pos == std::string_view::npos) throw InvalidInput("input lacks [RETRIEVED] delimiter");
    return {std::string(input.substr(kSymptomsHeader.size(), pos - kSymptomsHeader.size())),
            std::string(input.substr(pos + kRetrievedDelimiter.size()))};
}

SftRecord build_sft_record(std::string_view x, std::string_view c, std::string_view y) {
    require_text(y, "output");
    return {std::string(kSftInstruction), make_input(x, c), std::string(y)};
}

std::string pair_prompt(std::string_view x, std::string_view c) {
    return PromptBuilder(PromptRole::pair)
        .section("instructions", kPairInstructions)
        .section("instruction", kSftInstruction)
        .section("symptoms", x)
        .section("retrieved", c)
        .str();
}

DpoRecord build_dpo_record(std::string_view x, std::string_view c, const Generator& generator,
                           const GenerationParams& params) {
    const std::string input = make_input(x, c);
    const ScoredPair pair = generate_scored_pair(generator, pair_prompt(x, c), params);
    DpoRecord r;
    r.instruction = std::string(kSftInstruction);
    r.input = input;
    r.chosen = pair.text_w;
    r.rejected = pair.text_l;
    r.score_w = pair.score_w;
    r.score_l = pair.score_l;
    return r;
}

std::string_view conflict_warning(ConflictType type) {
    switch (type) {
        case ConflictType::theory_difference:
            return "Conflict note: schools of medical theory disagree on this recommendation. Weigh the differing "
                   "views with a practitioner before use.";
        case ConflictType::source_conflict:
            return "Conflict note: the retrieved sources give inconsistent information for this case. Verify the "
                   "formula against an authoritative reference.";
        case ConflictType::practical_problem:
            return "Conflict note: practical constraints such as herb availability or the patient's condition may "
                   "prevent using this formula as written. Adapt it only under supervision.";
    }
    return "";
}

ConflictRecord build_conflict_record(std::string_view x, std::string_view c, std::string_view y, ConflictType type) {
    ConflictRecord r;
    r.conflict_type = type;
    r.warning_text = std::string(conflict_warning(type));
    r.base = build_sft_record(x, c, std::string(text::trim(y)) + "\n\n" + r.warning_text);
    return r;
}

std::string record_query(const FormulaRecord& record) {
    std::string x = text::trim(record.symptoms_population);
    const std::string pulse = text::trim(record.pulse_tongue);
    if (!pulse.empty()) {
        if (!x.empty()) x += ' ';
        x += pulse;
    }
    return x.empty() ? record.disease : x;
}

namespace {

void write_lines(const std::vector<json>& lines, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    for (const auto& j : lines) out << j.dump() << '\n';
    out.flush();
    if (!out) throw IoError("failed writing " + path);
}

std::vector<json> read_lines(const std::string& path, const std::set<std::string>& keys) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path);
    std::vector<json> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError(e.what(), line_no);
        }
        if (!j.is_object() || j.size() != keys.size()) throw ParseError("unexpected keys", line_no);
        for (const auto& k : keys) {
            if (!j.contains(k) || !j[k].is_string()) throw SchemaError(k, line_no);
        }
        out.push_back(std::move(j));
    }
    return out;
}

}  // namespace

void export_sft(const std::vector<SftRecord>& records, const std::string& path) {
    if (records.empty()) throw InvalidInput("no records to export");
    std::vector<json> lines;
    for (const auto& r : records) {
        lines.push_back({{"instruction", r.instruction}, {"input", r.input}, {"output", r.output}});
    }
    write_lines(lines, path);
}

void export_dpo(const std::vector<DpoRecord>& records, const std::string& path) {
    if (records.empty()) throw InvalidInput("no records to export");
    std::vector<json> lines;
    for (const auto& r : records) {
        lines.push_back({{"instruction", r.instruction}, {"input", r.input}, {"chosen", r.chosen}, {"rejected", r.rejected}});
    }
    write_lines(lines, path);
}

std::vector<SftRecord> import_sft(const std::string& path) {
    std::vector<SftRecord> out;
    for (const auto& j : read_lines(path, {"instruction", "input", "output"})) {
        out.push_back({j["instruction"].get<std::string>(), j["input"].get<std::string>(), j["output"].get<std::string>()});
    }
    return out;
}

std::vector<DpoRecord> import_dpo(const std::string& path) {
    std::vector<DpoRecord> out;
    for (const auto& j : read_lines(path, {"instruction", "input", "chosen", "rejected"})) {
        DpoRecord r;
        r.instruction = j["instruction"].get<std::string>();
        r.input = j["input"].get<std::string>();
        r.chosen = j["chosen"].get<std::string>();
        r.rejected = j["rejected"].get<std::string>();
        out.push_back(std::move(r));
    }
    return out;
}

}  // namespace zfdt

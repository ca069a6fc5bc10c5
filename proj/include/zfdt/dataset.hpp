#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "zfdt/clients.hpp"
#include "zfdt/corpus.hpp"
#include "zfdt/retrieval.hpp"

namespace zfdt {

struct SftRecord {
    std::string instruction;
    std::string input;
    std::string output;

    bool operator==(const SftRecord&) const = default;
};

struct DpoRecord {
    std::string instruction;
    std::string input;
    std::string chosen;
    std::string rejected;
    double score_w = 0.0;
    double score_l = 0.0;
};

struct ConflictRecord {
    SftRecord base;
    ConflictType conflict_type = ConflictType::theory_difference;
    std::string warning_text;
};

/// "[SYMPTOMS]\n<x>\n[RETRIEVED]\n<c>". Throws InvalidInput when x or c is
/// blank or x contains the retrieved delimiter line.
std::string make_input(std::string_view x, std::string_view c);

/// Inverse of `make_input`.
std::pair<std::string, std::string> split_input(std::string_view input);

SftRecord build_sft_record(std::string_view x, std::string_view c, std::string_view y);

std::string pair_prompt(std::string_view x, std::string_view c);

/// Throws DegeneratePair (propagated from generate_scored_pair).
DpoRecord build_dpo_record(std::string_view x, std::string_view c, const Generator& generator,
                           const GenerationParams& params = {});

std::string_view conflict_warning(ConflictType type);

/// Appends the warning for `type` to the output of an SFT record.
ConflictRecord build_conflict_record(std::string_view x, std::string_view c, std::string_view y, ConflictType type);

/// Symptom text used as the query x for a corpus record.
std::string record_query(const FormulaRecord& record);

enum class DatasetKind { sft, dpo };

/// Writes JSONL. DPO lines carry exactly instruction/input/chosen/rejected.
/// Throws InvalidInput for an empty record list and IoError on write failure.
void export_sft(const std::vector<SftRecord>& records, const std::string& path);
void export_dpo(const std::vector<DpoRecord>& records, const std::string& path);

std::vector<SftRecord> import_sft(const std::string& path);
/// Scores are not part of the file format; imported records have score 0.
std::vector<DpoRecord> import_dpo(const std::string& path);

}  // namespace zfdt

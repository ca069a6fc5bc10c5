#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "zfdt/taxonomy.hpp"
#include "zfdt/text.hpp"

namespace zfdt {

enum class ConflictType { theory_difference, source_conflict, practical_problem };

std::string_view conflict_type_id(ConflictType t);
std::optional<ConflictType> parse_conflict_type(std::string_view id);

struct HerbalIngredient {
    std::string name;
    HerbRole role = HerbRole::unassigned;
    std::optional<std::string> dose;

    bool operator==(const HerbalIngredient&) const = default;
};

struct FormulaRecord {
    std::string disease;
    std::string recommended_formula;
    std::vector<HerbalIngredient> herbal_ingredients;
    std::string symptoms_population;
    std::string pulse_tongue;
    std::string contraindications;
    std::string preparation;
    std::optional<ConflictType> conflict_tag;

    bool operator==(const FormulaRecord&) const = default;
};

/// Throws SchemaError(field, line) when a record breaks the schema invariants.
void validate_record(const FormulaRecord& record, std::size_t line);

/// Seven labeled lines in taxonomy order, plus a "[Conflict Type]" line when tagged.
std::string render(const FormulaRecord& record);

/// Inverse of `render`. Throws ParseError on text that `render` cannot produce.
FormulaRecord parse_rendered(std::string_view rendered);

std::string to_json_line(const FormulaRecord& record);

/// Parses one JSONL line; `line` is 1-based and only used for error reporting.
FormulaRecord parse_record_line(std::string_view json_line, std::size_t line);

struct SourceDigest {
    std::string path;
    std::string sha256;
};

struct Corpus {
    std::vector<FormulaRecord> records;  // record id = position
    std::vector<SourceDigest> provenance;
};

/// Reads a JSONL corpus file. Blank lines are skipped but still counted.
Corpus ingest(const std::string& path);
Corpus ingest_string(std::string_view jsonl, std::string source_name = "<memory>");

struct Chunk {
    std::int64_t chunk_id = 0;
    std::int64_t source_record_id = 0;
    std::size_t token_start = 0;
    std::size_t token_end = 0;
    std::string text;
    std::size_t token_count = 0;
};

inline constexpr std::size_t kDefaultChunkSize = 512;
inline constexpr std::size_t kMinChunkSize = 16;

/// Splits a rendered document into consecutive chunks of `chunk_size` tokens.
/// Chunk byte ranges are contiguous, so concatenating the chunk texts
/// reproduces `doc` exactly.
std::vector<Chunk> chunk_text(std::string_view doc, std::size_t chunk_size, const text::Tokenizer& tokenizer,
                              std::int64_t record_id = 0, std::int64_t first_chunk_id = 0);

std::vector<Chunk> chunk(const Corpus& corpus, std::size_t chunk_size = kDefaultChunkSize,
                         const text::Tokenizer& tokenizer = text::default_tokenizer());

}  // namespace zfdt

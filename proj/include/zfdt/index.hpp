#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "zfdt/clients.hpp"
#include "zfdt/community.hpp"
#include "zfdt/taxonomy.hpp"

namespace zfdt {

struct IndexEntry {
    std::int64_t community_id = 0;
    Category category = Category::unknown;
    std::string summary_text;
    std::vector<float> vector;
};

struct CommunityIndex {
    std::vector<IndexEntry> entries;
    std::string encoder_id;
    std::size_t dimension = 0;

    const IndexEntry& entry(std::int64_t community_id) const;
};

/// One entry per leaf community and per category-level community. Vectors are
/// stored as 32-bit floats. Throws DimensionError when the encoder's
/// dimension differs from `expected_dimension` (0 = accept any).
CommunityIndex build_index(const CommunityHierarchy& hierarchy, const Encoder& encoder,
                           std::size_t expected_dimension = 0);

double dot(const std::vector<double>& a, const std::vector<float>& b);
double dot(const std::vector<double>& a, const std::vector<double>& b);

/// Softmax over raw dot products, computed with max subtraction.
std::vector<double> softmax(const std::vector<double>& logits);

std::vector<double> score_candidates(const std::vector<double>& query_vector,
                                     const std::vector<std::vector<double>>& candidates);

/// Text whose encoding stands for E(x || x'): the two strings joined by "\n".
std::string query_text(std::string_view original, std::string_view expanded);

/// Highest-scoring entries by softmax over all entries, descending; ties by
/// ascending community id. Throws EmptyIndex.
std::vector<std::pair<std::int64_t, double>> top_k(const CommunityIndex& index, const std::vector<double>& query_vector,
                                                   std::size_t k);

void save_index(const CommunityIndex& index, const std::string& path);
CommunityIndex load_index(const std::string& path);

}  // namespace zfdt

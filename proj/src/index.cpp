#include "zfdt/index.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>

#include "zfdt/errors.hpp"

namespace zfdt {

const IndexEntry& CommunityIndex::entry(std::int64_t community_id) const {
    for (const auto& e : entries) {
        if (e.community_id == community_id) return e;
    }
    throw InvalidInput("community " + std::to_string(community_id) + " is not indexed");
}

namespace {

IndexEntry make_entry(const Community& c, const Encoder& encoder) {
    if (text::trim(c.description).empty()) {
        throw PreconditionError("community " + std::to_string(c.community_id) + " has no summary");
    }
    IndexEntry e;
    e.community_id = c.community_id;
    e.category = c.category;
    e.summary_text = c.description;
    const auto v = encoder.encode(c.description);
    e.vector.assign(v.begin(), v.end());
    return e;
}

}  // namespace

CommunityIndex build_index(const CommunityHierarchy& hierarchy, const Encoder& encoder,
                           std::size_t expected_dimension) {
    if (expected_dimension != 0 && encoder.dimension() != expected_dimension) {
        throw DimensionError("encoder dimension " + std::to_string(encoder.dimension()) + " does not match configured " +
                             std::to_string(expected_dimension));
    }
    CommunityIndex index;
    index.encoder_id = encoder.name();
    index.dimension = encoder.dimension();
    for (const auto& cc : hierarchy.category_communities) index.entries.push_back(make_entry(cc, encoder));
    for (const auto* leaf : hierarchy.leaves()) index.entries.push_back(make_entry(*leaf, encoder));
    return index;
}

double dot(const std::vector<double>& a, const std::vector<float>& b) {
    if (a.size() != b.size()) throw DimensionError("vector dimensions differ");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * static_cast<double>(b[i]);
    return s;
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw DimensionError("vector dimensions differ");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

std::vector<double> softmax(const std::vector<double>& logits) {
    if (logits.empty()) throw InvalidInput("softmax of an empty vector");
    const double top = *std::max_element(logits.begin(), logits.end());
    std::vector<double> out(logits.size());
    double total = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - top);
        total += out[i];
    }
    for (auto& p : out) p /= total;
    return out;
}

std::vector<double> score_candidates(const std::vector<double>& query_vector,
                                     const std::vector<std::vector<double>>& candidates) {
    if (candidates.empty()) throw InvalidInput("no candidates to score");
    std::vector<double> logits;
    logits.reserve(candidates.size());
    for (const auto& c : candidates) logits.push_back(dot(query_vector, c));
    return softmax(logits);
}

std::string query_text(std::string_view original, std::string_view expanded) {
    std::string out(original);
    out += '\n';
    out += expanded;
    return out;
}

std::vector<std::pair<std::int64_t, double>> top_k(const CommunityIndex& index, const std::vector<double>& query_vector,
                                                   std::size_t k) {
    if (k == 0) throw InvalidInput("k must be at least 1");
    if (index.entries.empty()) throw EmptyIndex("index has no entries");
    if (query_vector.size() != index.dimension) throw DimensionError("query vector dimension mismatch");
    std::vector<double> logits;
    logits.reserve(index.entries.size());
    for (const auto& e : index.entries) logits.push_back(dot(query_vector, e.vector));
    const auto scores = softmax(logits);
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return index.entries[a].community_id < index.entries[b].community_id;
    });
    order.resize(std::min(k, order.size()));
    std::vector<std::pair<std::int64_t, double>> out;
    for (auto i : order) out.emplace_back(index.entries[i].community_id, scores[i]);
    return out;
}

// ---------------------------------------------------------------------------
// Snapshot: "ZFDTIDX" + version, then little-endian fields.

namespace {

constexpr char kMagic[7] = {'Z', 'F', 'D', 'T', 'I', 'D', 'X'};
constexpr std::uint8_t kVersion = 1;

template <typename T>
void put_le(std::string& out, T value) {
    using U = std::make_unsigned_t<T>;
    auto u = static_cast<U>(value);
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        out.push_back(static_cast<char>(u & 0xFF));
        u = static_cast<U>(u >> 8);
    }
}

class Reader {
public:
    explicit Reader(std::string bytes) : bytes_(std::move(bytes)) {}

    template <typename T>
    T get() {
        need(sizeof(T));
        using U = std::make_unsigned_t<T>;
        U u = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            u = static_cast<U>(u | static_cast<U>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i));
        }
        pos_ += sizeof(T);
        return static_cast<T>(u);
    }

    std::string take(std::size_t n) {
        need(n);
        std::string out = bytes_.substr(pos_, n);
        pos_ += n;
        return out;
    }

    bool done() const { return pos_ == bytes_.size(); }

private:
    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n) throw IoError("index snapshot is truncated");
    }

    std::string bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

void save_index(const CommunityIndex& index, const std::string& path) {
    std::string out(kMagic, sizeof kMagic);
    out.push_back(static_cast<char>(kVersion));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(index.encoder_id.size()));
    out += index.encoder_id;
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(index.dimension));
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(index.entries.size()));
    for (const auto& e : index.entries) {
        put_le<std::int64_t>(out, e.community_id);
        put_le<std::uint8_t>(out, static_cast<std::uint8_t>(e.category));
    }
    for (const auto& e : index.entries) {
        if (e.vector.size() != index.dimension) throw DimensionError("index entry dimension mismatch");
        for (float f : e.vector) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(f));
    }
    for (const auto& e : index.entries) {
        put_le<std::uint32_t>(out, static_cast<std::uint32_t>(e.summary_text.size()));
        out += e.summary_text;
    }
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    if (!file) throw IoError("cannot write " + path);
    file << out;
    file.flush();
    if (!file) throw IoError("failed writing " + path);
}

CommunityIndex load_index(const std::string& path) {
    std::ifstream file(path, std::ios::binary);
    if (!file) throw IoError("cannot read " + path);
    Reader r(std::string((std::istreambuf_iterator<char>(file)), std::istreambuf_iterator<char>()));
    if (r.take(sizeof kMagic) != std::string(kMagic, sizeof kMagic)) throw IoError("not an index snapshot: " + path);
    if (r.get<std::uint8_t>() != kVersion) throw IoError("unsupported index snapshot version");
    CommunityIndex index;
    index.encoder_id = r.take(r.get<std::uint32_t>());
    index.dimension = r.get<std::uint32_t>();
    const std::uint32_t count = r.get<std::uint32_t>();
    index.entries.resize(count);
    for (auto& e : index.entries) {
        e.community_id = r.get<std::int64_t>();
        const auto c = r.get<std::uint8_t>();
        if (c > static_cast<std::uint8_t>(Category::unknown)) throw IoError("bad category in index snapshot");
        e.category = static_cast<Category>(c);
    }
    for (auto& e : index.entries) {
        e.vector.resize(index.dimension);
        for (auto& f : e.vector) f = std::bit_cast<float>(r.get<std::uint32_t>());
    }
    for (auto& e : index.entries) e.summary_text = r.take(r.get<std::uint32_t>());
    if (!r.done()) throw IoError("trailing bytes in index snapshot");
    return index;
}

}  // namespace zfdt

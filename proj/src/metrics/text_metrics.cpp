#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>

#include "zfdt/errors.hpp"
#include "zfdt/metrics.hpp"

namespace zfdt {

namespace {

using Tokens = std::vector<std::string>;
using NgramCounts = std::map<std::vector<std::string>, std::size_t>;

NgramCounts ngram_counts(const Tokens& toks, std::size_t n) {
    NgramCounts counts;
    if (toks.size() < n) return counts;
    for (std::size_t i = 0; i + n <= toks.size(); ++i) {
        ++counts[std::vector<std::string>(toks.begin() + static_cast<std::ptrdiff_t>(i),
                                          toks.begin() + static_cast<std::ptrdiff_t>(i + n))];
    }
    return counts;
}

double f1(double overlap, double cand_total, double ref_total) {
    if (overlap <= 0.0 || cand_total <= 0.0 || ref_total <= 0.0) return 0.0;
    const double p = overlap / cand_total;
    const double r = overlap / ref_total;
    return 2.0 * p * r / (p + r);
}

}  // namespace

double bleu(std::string_view candidate, const std::vector<std::string>& references) {
    const Tokens cand = text::tokens(candidate);
    if (cand.empty()) throw InvalidInput("BLEU candidate is empty");
    if (references.empty()) throw InvalidInput("BLEU needs at least one reference");
    std::vector<Tokens> refs;
    for (const auto& r : references) refs.push_back(text::tokens(r));

    const auto c = static_cast<double>(cand.size());
    // Closest reference length; ties go to the shorter reference.
    std::size_t best = refs.front().size();
    for (const auto& r : refs) {
        const auto diff = [&](std::size_t len) { return std::llabs(static_cast<long long>(len) - static_cast<long long>(cand.size())); };
        if (diff(r.size()) < diff(best) || (diff(r.size()) == diff(best) && r.size() < best)) best = r.size();
    }
    const auto r = static_cast<double>(best);
    const double bp = c > r ? 1.0 : std::exp(1.0 - r / c);

    double log_sum = 0.0;
    for (std::size_t n = 1; n <= 4; ++n) {
        const NgramCounts cc = ngram_counts(cand, n);
        std::vector<NgramCounts> rc;
        for (const auto& ref : refs) rc.push_back(ngram_counts(ref, n));
        std::size_t matched = 0;
        for (const auto& [gram, count] : cc) {
            std::size_t max_ref = 0;
            for (const auto& counts : rc) {
                const auto it = counts.find(gram);
                if (it != counts.end()) max_ref = std::max(max_ref, it->second);
            }
            matched += std::min(count, max_ref);
        }
        const std::size_t total = cand.size() >= n ? cand.size() - n + 1 : 0;
        double p;
        if (n == 1) {
            if (matched == 0) return 0.0;
            p = static_cast<double>(matched) / static_cast<double>(total);
        } else if (matched == 0) {
            p = 1.0 / static_cast<double>(total + 1);
        } else {
            p = static_cast<double>(matched) / static_cast<double>(total);
        }
        log_sum += 0.25 * std::log(p);
    }
    return std::clamp(bp * std::exp(log_sum), 0.0, 1.0);
}

double rouge_n_f1(const Tokens& candidate, const Tokens& reference, std::size_t n) {
    if (candidate.size() < n || reference.size() < n) return candidate == reference ? 1.0 : 0.0;
    const NgramCounts cc = ngram_counts(candidate, n);
    const NgramCounts rc = ngram_counts(reference, n);
    std::size_t overlap = 0;
    for (const auto& [gram, count] : cc) {
        const auto it = rc.find(gram);
        if (it != rc.end()) overlap += std::min(count, it->second);
    }
    return f1(static_cast<double>(overlap), static_cast<double>(candidate.size() - n + 1),
              static_cast<double>(reference.size() - n + 1));
}

double rouge_l_f1(const Tokens& candidate, const Tokens& reference) {
    if (candidate.empty() || reference.empty()) return candidate == reference ? 1.0 : 0.0;
    std::vector<std::size_t> prev(reference.size() + 1, 0), cur(reference.size() + 1, 0);
    for (std::size_t i = 1; i <= candidate.size(); ++i) {
        for (std::size_t j = 1; j <= reference.size(); ++j) {
            cur[j] = candidate[i - 1] == reference[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return f1(static_cast<double>(prev[reference.size()]), static_cast<double>(candidate.size()),
              static_cast<double>(reference.size()));
}

double rouge_s(std::string_view candidate, std::string_view reference) {
    const Tokens cand = text::tokens(candidate);
    const Tokens ref = text::tokens(reference);
    if (cand.empty() || ref.empty()) throw InvalidInput("ROUGE inputs must be non-empty");
    const double r1 = rouge_n_f1(cand, ref, 1);
    const double r2 = rouge_n_f1(cand, ref, 2);
    const double rl = rouge_l_f1(cand, ref);
    return (r1 + r2 + rl) / 3.0;
}

}  // namespace zfdt

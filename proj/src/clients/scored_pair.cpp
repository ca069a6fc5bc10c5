#include <cstdlib>
#include <sstream>

#include "zfdt/clients.hpp"
#include "zfdt/errors.hpp"
#include "zfdt/text.hpp"

namespace zfdt {

std::vector<std::pair<double, std::string>> parse_candidates(std::string_view response) {
    std::vector<std::pair<double, std::string>> out;
    std::istringstream in{std::string(response)};
    std::string line;
    bool open = false;
    while (std::getline(in, line)) {
        if (line.rfind(kCandidateMarker, 0) == 0) {
            const auto pos = line.find("SCORE=");
            if (pos == std::string::npos) throw ClientError("candidate header without SCORE: " + line, 1);
            char* end = nullptr;
            const std::string num = line.substr(pos + 6);
            const double score = std::strtod(num.c_str(), &end);
            if (end == num.c_str()) throw ClientError("unparseable candidate score: " + line, 1);
            out.emplace_back(score, std::string());
            open = true;
            continue;
        }
        if (!open) continue;
        auto& body = out.back().second;
        if (!body.empty()) body += '\n';
        body += line;
    }
    for (auto& c : out) c.second = text::trim(c.second);
    return out;
}

ScoredPair generate_scored_pair(const Generator& generator, std::string_view prompt,
                                const GenerationParams& params) {
    const auto candidates = parse_candidates(generator.generate(prompt, params));
    if (candidates.size() < 2) {
        throw ClientError("expected two scored candidates, got " + std::to_string(candidates.size()), 1);
    }
    const auto& a = candidates[0];
    const auto& b = candidates[1];
    if (a.second == b.second) throw DegeneratePair("generator returned identical candidates");
    if (a.second.empty() || b.second.empty()) throw ClientError("empty candidate text", 1);
    ScoredPair pair;
    const bool a_wins = a.first >= b.first;
    const auto& w = a_wins ? a : b;
    const auto& l = a_wins ? b : a;
    pair.text_w = w.second;
    pair.score_w = w.first;
    pair.text_l = l.second;
    pair.score_l = l.first;
    return pair;
}

}  // namespace zfdt

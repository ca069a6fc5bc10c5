#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <random>
#include <spdlog/spdlog.h>

#include "zfdt/engine.hpp"
#include "zfdt/errors.hpp"
#include "zfdt/text.hpp"

namespace zfdt {

using json = nlohmann::json;

RetrievalConfig retrieval_config(const EngineConfig& config, const QueryOverrides& overrides) {
    RetrievalConfig r;
    r.beam.k = overrides.top_k.value_or(config.top_k);
    r.beam.beam_width = overrides.beam_width.value_or(config.beam_width);
    if (overrides.top_k && !overrides.beam_width) r.beam.beam_width = std::max(r.beam.beam_width, r.beam.k);
    r.beam.validate();
    r.max_parallel = config.max_parallel;
    r.expand = config.expand;
    r.params.seed = static_cast<std::int64_t>(config.seed);
    return r;
}

std::string format_trace(const Trace& trace, bool with_timing) {
    std::string out;
    for (const auto& e : trace.events) {
        out += e.stage;
        out += "\tcommunity=" + (e.community_id ? std::to_string(*e.community_id) : std::string("-"));
        out += "\tcall=" + (e.client_call_id ? std::to_string(*e.client_call_id) : std::string("-"));
        if (with_timing) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.3f", e.duration_ms);
            out += std::string("\tms=") + buf;
        }
        out += '\t' + e.detail + '\n';
    }
    return out;
}

AnswerResult run_query(const EngineState& state, const Clients& clients, std::string_view symptoms,
                       const RetrievalConfig& config) {
    if (text::trim(symptoms).empty()) throw InvalidInput("symptom description is empty");
    if (clients.encoder->name() != state.index.encoder_id) {
        throw WorkspaceError("index was built with encoder " + state.index.encoder_id + ", current encoder is " +
                             clients.encoder->name());
    }
    const EngineView view{state.graph, state.hierarchy, state.index, *clients.encoder, *clients.generator};
    return answer(symptoms, view, config);
}

std::vector<std::string> read_texts(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path);
    std::vector<std::string> out;
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
        if (j.is_string()) {
            out.push_back(j.get<std::string>());
        } else if (j.is_object() && j.contains("text") && j["text"].is_string()) {
            out.push_back(j["text"].get<std::string>());
        } else if (j.is_object() && j.contains("output") && j["output"].is_string()) {
            out.push_back(j["output"].get<std::string>());
        } else {
            throw SchemaError("text", line_no);
        }
    }
    return out;
}

MetricReport run_eval(const EngineState& state, const Clients& clients, const std::vector<std::string>& outputs,
                      const std::vector<std::string>& references, const EvalOptions& options) {
    if (options.judge != "kg" && options.judge != "llm") throw InvalidInput("judge must be kg or llm");
    const RuleTable rules = options.rules_path.empty() ? RuleTable::classical() : RuleTable::load(options.rules_path);
    SuiteOptions suite;
    suite.tcm_only_avg = options.tcm_only_avg;
    if (options.judge == "llm") {
        suite.hallucination = llm_hallucination_judge(*clients.generator);
        suite.professionalism = llm_professionalism_judge(*clients.generator);
        suite.coherence = llm_coherence_judge(*clients.generator);
    }
    return evaluate_suite(outputs, references, state.graph, rules, MetricWeights{}, suite);
}

std::string record_target(const FormulaRecord& record) {
    FormulaRecord untagged = record;
    untagged.conflict_tag.reset();
    return append_disclaimer(render(untagged));
}

DatasetSummary run_dataset(const EngineState& state, const Clients& clients, DatasetKind kind,
                           const std::string& out_path, std::size_t limit, const RetrievalConfig& config) {
    const auto& records = state.corpus.records;
    const std::size_t n = limit == 0 ? records.size() : std::min(limit, records.size());
    if (n == 0) throw EmptyCorpus("workspace corpus has no records");
    DatasetSummary summary;
    std::vector<SftRecord> sft;
    std::vector<DpoRecord> dpo;
    for (std::size_t i = 0; i < n; ++i) {
        const FormulaRecord& r = records[i];
        const std::string x = record_query(r);
        const AnswerResult res = run_query(state, clients, x, config);
        if (kind == DatasetKind::sft) {
            if (r.conflict_tag) {
                sft.push_back(build_conflict_record(x, res.retrieved, record_target(r), *r.conflict_tag).base);
                ++summary.conflict_records;
            } else {
                sft.push_back(build_sft_record(x, res.retrieved, record_target(r)));
            }
        } else {
            dpo.push_back(build_dpo_record(x, res.retrieved, *clients.generator, config.params));
        }
        spdlog::debug("dataset record {}/{}", i + 1, n);
    }
    if (kind == DatasetKind::sft) {
        export_sft(sft, out_path);
        summary.written = sft.size();
    } else {
        export_dpo(dpo, out_path);
        summary.written = dpo.size();
    }
    return summary;
}

std::vector<bounds::BoundReport> run_bounds(int proposition, const bounds::BoundsConfig& config) {
    using namespace bounds;
    config.validate();
    std::vector<BoundReport> out;
    switch (proposition) {
        case 1: {
            std::mt19937_64 rng(config.rng_seed);
            const double lo = std::max(config.gamma_threshold, 0.1);
            for (int attempt = 0; attempt < 10000; ++attempt) {
                const ToyWorld w = random_world(3, 3, 4, rng);
                const double mi = mutual_information(w);
                if (mi < lo || mi > 1.0) continue;
                out.push_back(verify_prop1(w, config));
                return out;
            }
            throw InsufficientData("no sampled world reached the information threshold");
        }
        case 2: {
            const ToyWorld w = uniform_preference_world();
            const ToyModel ref =
                train_sft(ToyModel::for_world(w, Conditioning::x_and_c), w, config, StepRule::backtracking).model;
            out.push_back(verify_prop2(w, PreferenceSet::build(ref, uniform_preference_pairs(w)), config));
            return out;
        }
        case 3: {
            for (const auto& [eps, delta] : std::vector<std::pair<double, double>>{{0.0, 0.0}, {0.1, 0.05}, {0.2, 0.1}}) {
                out.push_back(verify_prop3(hallucination_world(eps, delta), config, 10000));
            }
            return out;
        }
        case 4:
            out.push_back(verify_prop4(suppression_sweep({0.5, 1.0, 2.0}), config));
            return out;
        default:
            throw InvalidInput("proposition must be 1, 2, 3 or 4");
    }
}

}  // namespace zfdt
